"""World description and demand: vertiports, obstacle prisms, risk zones, OD requests.

Scenario documents are JSON trees with the top-level keys ``bounds``,
``flyable_band``, ``vertiports``, ``obstacles``, ``risk_zones`` and
``od_requests``. Coordinates are metres in a local east/north/up frame unless
the document declares a ``geodetic_origin``, in which case vertiport positions
and footprint points are ``[lat, lon(, alt)]`` and get projected
(equirectangular) about that origin on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

from shapely.geometry import Polygon
from shapely.geometry.polygon import orient

EARTH_RADIUS_M = 6_371_008.8

Point2 = tuple[float, float]
Point3 = tuple[float, float, float]


class ScenarioError(ValueError):
    """Malformed or invalid scenario / demand input.

    ``where`` is a field path such as ``obstacles[3].lowest_alt``.
    """

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class VertiportKind(str, Enum):
    ORIGIN = "origin"
    DESTINATION = "destination"
    BOTH = "both"

    @property
    def can_depart(self) -> bool:
        return self in (VertiportKind.ORIGIN, VertiportKind.BOTH)

    @property
    def can_arrive(self) -> bool:
        return self in (VertiportKind.DESTINATION, VertiportKind.BOTH)


class Urgency(str, Enum):
    """Urgency classes in planning order (most urgent first)."""

    URGENT = "Urgent"
    IMPORTANT = "Important"
    NORMAL = "Normal"
    LOW = "Low"

    @property
    def rank(self) -> int:
        return _URGENCY_ORDER.index(self)


_URGENCY_ORDER = [Urgency.URGENT, Urgency.IMPORTANT, Urgency.NORMAL, Urgency.LOW]


@dataclass(frozen=True)
class Box3:
    lo: Point3
    hi: Point3

    def contains(self, p: Sequence[float]) -> bool:
        return all(self.lo[i] <= p[i] <= self.hi[i] for i in range(3))

    @property
    def extent(self) -> Point3:
        return tuple(self.hi[i] - self.lo[i] for i in range(3))


@dataclass(frozen=True)
class Vertiport:
    id: str
    position: Point3
    radius: float = 0.0
    kind: VertiportKind = VertiportKind.BOTH


@dataclass(frozen=True)
class ObstaclePrism:
    id: str
    footprint: tuple[Point2, ...]
    lowest_alt: float
    highest_alt: float

    def polygon(self) -> Polygon:
        return Polygon(self.footprint)


@dataclass(frozen=True)
class RiskZone:
    id: str
    footprint: tuple[Point2, ...]
    theta_risk: float

    def polygon(self) -> Polygon:
        return Polygon(self.footprint)


@dataclass(frozen=True)
class ODRequest:
    id: str
    origin_vertiport: str
    dest_vertiport: str
    urgency: Urgency = Urgency.NORMAL
    profit: float = 0.0


@dataclass(frozen=True)
class Scenario:
    bounding_box: Box3
    flyable_band: tuple[float, float]
    vertiports: tuple[Vertiport, ...] = ()
    obstacles: tuple[ObstaclePrism, ...] = ()
    risk_zones: tuple[RiskZone, ...] = ()
    od_requests: tuple[ODRequest, ...] = ()
    name: str = ""

    def __post_init__(self):
        _validate_scenario(self)

    def vertiport(self, vid: str) -> Vertiport:
        for v in self.vertiports:
            if v.id == vid:
                return v
        raise KeyError(vid)

    @property
    def vertiport_ids(self) -> list[str]:
        return [v.id for v in self.vertiports]


# --------------------------------------------------------------------------
# validation


def _normalize_ring(points: Iterable[Sequence[float]], where: str) -> tuple[Point2, ...]:
    try:
        pts = [(float(p[0]), float(p[1])) for p in points]
    except (TypeError, ValueError, IndexError) as exc:
        raise ScenarioError(f"footprint points must be [x, y] pairs ({exc})", where) from None
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(pts) < 3:
        raise ScenarioError("footprint needs at least 3 vertices", where)
    poly = Polygon(pts)
    if not poly.is_valid or poly.area <= 0:
        raise ScenarioError("footprint is not a simple polygon", where)
    ring = orient(poly, sign=1.0).exterior.coords[:-1]
    return tuple((float(x), float(y)) for x, y in ring)


def _validate_scenario(s: Scenario) -> None:
    lo, hi = s.bounding_box.lo, s.bounding_box.hi
    for i, axis in enumerate("xyz"):
        if not hi[i] > lo[i]:
            raise ScenarioError(f"empty extent along {axis}", "bounds")
    z0, z1 = s.flyable_band
    if not z0 < z1:
        raise ScenarioError("flyable_band needs z_min < z_max", "flyable_band")
    if z0 < lo[2] or z1 > hi[2]:
        raise ScenarioError("flyable_band must lie inside the bounding box z-range", "flyable_band")

    seen: set[str] = set()
    for i, v in enumerate(s.vertiports):
        where = f"vertiports[{i}]"
        if v.id in seen:
            raise ScenarioError(f"duplicate vertiport id {v.id!r}", where)
        seen.add(v.id)
        if v.radius < 0:
            raise ScenarioError(f"vertiport {v.id!r} has negative radius", where)
        if not s.bounding_box.contains(v.position):
            raise ScenarioError(f"vertiport {v.id!r} lies outside the bounding box", where)

    for kind, items in (("obstacles", s.obstacles), ("risk_zones", s.risk_zones)):
        ids: set[str] = set()
        for i, item in enumerate(items):
            if item.id in ids:
                raise ScenarioError(f"duplicate id {item.id!r}", f"{kind}[{i}]")
            ids.add(item.id)

    for i, ob in enumerate(s.obstacles):
        if not ob.lowest_alt < ob.highest_alt:
            raise ScenarioError(
                f"obstacle {ob.id!r} needs lowest_alt < highest_alt "
                f"(got {ob.lowest_alt} and {ob.highest_alt})",
                f"obstacles[{i}]",
            )
    for i, rz in enumerate(s.risk_zones):
        if not rz.theta_risk > 0:
            raise ScenarioError(f"risk zone {rz.id!r} needs theta_risk > 0", f"risk_zones[{i}]")
        if rz.theta_risk == 1:
            raise ScenarioError(
                f"risk zone {rz.id!r} has theta_risk == 1, which is the ambient level",
                f"risk_zones[{i}]",
            )
    validate_demand(s, s.od_requests)


def validate_demand(scenario: Scenario, requests: Iterable[ODRequest]) -> list[ODRequest]:
    """Check that every request resolves to two distinct, capable vertiports.

    Returns the requests unchanged and in order.
    """
    requests = list(requests)
    ports = {v.id: v for v in scenario.vertiports}
    ids: set[str] = set()
    for i, r in enumerate(requests):
        where = f"od_requests[{i}]"
        if r.id in ids:
            raise ScenarioError(f"duplicate request id {r.id!r}", where)
        ids.add(r.id)
        for attr in ("origin_vertiport", "dest_vertiport"):
            vid = getattr(r, attr)
            if vid not in ports:
                raise ScenarioError(f"request {r.id!r} references unknown vertiport {vid!r}", where)
        if r.origin_vertiport == r.dest_vertiport:
            raise ScenarioError(f"request {r.id!r} has origin equal to destination", where)
        if not ports[r.origin_vertiport].kind.can_depart:
            raise ScenarioError(f"request {r.id!r}: {r.origin_vertiport!r} is destination-only", where)
        if not ports[r.dest_vertiport].kind.can_arrive:
            raise ScenarioError(f"request {r.id!r}: {r.dest_vertiport!r} is origin-only", where)
    return requests


# --------------------------------------------------------------------------
# parsing


def _project(lat: float, lon: float, origin: tuple[float, float]) -> Point2:
    lat0, lon0 = origin
    x = math.radians(lon - lon0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    y = math.radians(lat - lat0) * EARTH_RADIUS_M
    return x, y


def _num(obj: dict, key: str, where: str, default: Any = None) -> float:
    if key not in obj:
        if default is not None:
            return default
        raise ScenarioError(f"missing field {key!r}", where)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(f"field {key!r} must be a number", f"{where}.{key}")
    if not math.isfinite(val):
        raise ScenarioError(f"field {key!r} must be finite", f"{where}.{key}")
    return float(val)


def _str(obj: dict, key: str, where: str) -> str:
    if key not in obj:
        raise ScenarioError(f"missing field {key!r}", where)
    val = obj[key]
    if not isinstance(val, (str, int)) or isinstance(val, bool):
        raise ScenarioError(f"field {key!r} must be a string", f"{where}.{key}")
    return str(val)


def _list(doc: dict, key: str) -> list:
    val = doc.get(key, [])
    if val is None:
        return []
    if not isinstance(val, list):
        raise ScenarioError(f"{key!r} must be a list", key)
    return val


def _vec(val: Any, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(val, (list, tuple)) or len(val) != n:
        raise ScenarioError(f"expected a list of {n} numbers", where)
    out = []
    for x in val:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ScenarioError(f"expected a list of {n} numbers", where)
        out.append(float(x))
    return tuple(out)


def parse_requests(items: list, where_prefix: str = "od_requests") -> list[ODRequest]:
    out = []
    for i, item in enumerate(items):
        where = f"{where_prefix}[{i}]"
        if not isinstance(item, dict):
            raise ScenarioError("request must be an object", where)
        urg = item.get("urgency", Urgency.NORMAL.value)
        try:
            urgency = Urgency(str(urg).capitalize())
        except ValueError:
            raise ScenarioError(f"unknown urgency {urg!r}", f"{where}.urgency") from None
        out.append(
            ODRequest(
                id=_str(item, "id", where),
                origin_vertiport=_str(item, "origin_vertiport", where),
                dest_vertiport=_str(item, "dest_vertiport", where),
                urgency=urgency,
                profit=_num(item, "profit", where, default=0.0),
            )
        )
    return out


def scenario_from_dict(doc: dict, demand: list[ODRequest] | None = None) -> Scenario:
    """Build a validated Scenario from a parsed document tree."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be an object")
    origin = None
    if doc.get("geodetic_origin") is not None:
        origin = _vec(doc["geodetic_origin"], 2, "geodetic_origin")

    def xy(p: Sequence[float], where: str) -> Point2:
        if origin is None:
            return p[0], p[1]
        return _project(p[0], p[1], origin)

    b = doc.get("bounds")
    if not isinstance(b, dict):
        raise ScenarioError("missing object 'bounds' with 'min' and 'max'", "bounds")
    bbox = Box3(_vec(b.get("min"), 3, "bounds.min"), _vec(b.get("max"), 3, "bounds.max"))
    band = _vec(doc.get("flyable_band"), 2, "flyable_band")

    vertiports = []
    for i, item in enumerate(_list(doc, "vertiports")):
        where = f"vertiports[{i}]"
        if not isinstance(item, dict):
            raise ScenarioError("vertiport must be an object", where)
        pos = _vec(item.get("position"), 3, f"{where}.position")
        x, y = xy(pos, where)
        kind = item.get("kind", VertiportKind.BOTH.value)
        try:
            kind = VertiportKind(kind)
        except ValueError:
            raise ScenarioError(f"unknown vertiport kind {kind!r}", f"{where}.kind") from None
        vertiports.append(
            Vertiport(
                id=_str(item, "id", where),
                position=(x, y, pos[2]),
                radius=_num(item, "radius", where, default=0.0),
                kind=kind,
            )
        )

    def footprint(item: dict, where: str) -> tuple[Point2, ...]:
        pts = item.get("footprint")
        if not isinstance(pts, list):
            raise ScenarioError("missing footprint point list", f"{where}.footprint")
        projected = []
        for j, p in enumerate(pts):
            p = _vec(p, 2, f"{where}.footprint[{j}]")
            projected.append(xy(p, where))
        return _normalize_ring(projected, f"{where}.footprint")

    obstacles = []
    for i, item in enumerate(_list(doc, "obstacles")):
        where = f"obstacles[{i}]"
        if not isinstance(item, dict):
            raise ScenarioError("obstacle must be an object", where)
        obstacles.append(
            ObstaclePrism(
                id=_str(item, "id", where),
                footprint=footprint(item, where),
                lowest_alt=_num(item, "lowest_alt", where),
                highest_alt=_num(item, "highest_alt", where),
            )
        )

    zones = []
    for i, item in enumerate(_list(doc, "risk_zones")):
        where = f"risk_zones[{i}]"
        if not isinstance(item, dict):
            raise ScenarioError("risk zone must be an object", where)
        zones.append(
            RiskZone(
                id=_str(item, "id", where),
                footprint=footprint(item, where),
                theta_risk=_num(item, "theta_risk", where),
            )
        )

    requests = parse_requests(_list(doc, "od_requests"))
    if demand is not None:
        requests = list(demand)

    return Scenario(
        bounding_box=bbox,
        flyable_band=(band[0], band[1]),
        vertiports=tuple(vertiports),
        obstacles=tuple(obstacles),
        risk_zones=tuple(zones),
        od_requests=tuple(requests),
        name=str(doc.get("name", "")),
    )


def _decode(data: bytes | str, what: str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{what} is not valid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None


def load_scenario(data: bytes | str, demand: list[ODRequest] | None = None) -> Scenario:
    """Parse and validate a scenario document.

    ``demand``, when given, replaces any ``od_requests`` embedded in the document.
    """
    return scenario_from_dict(_decode(data, "scenario document"), demand=demand)


def load_demand(data: bytes | str) -> list[ODRequest]:
    """Parse a stand-alone demand document: a list of requests or ``{"od_requests": [...]}``."""
    doc = _decode(data, "demand document")
    if isinstance(doc, dict):
        doc = doc.get("od_requests")
    if not isinstance(doc, list):
        raise ScenarioError("demand document must be a list of requests", "od_requests")
    return parse_requests(doc)


def read_scenario(path: str | Path, demand_path: str | Path | None = None) -> Scenario:
    demand = load_demand(Path(demand_path).read_bytes()) if demand_path else None
    return load_scenario(Path(path).read_bytes(), demand=demand)


def scenario_to_dict(s: Scenario) -> dict:
    doc: dict[str, Any] = {}
    if s.name:
        doc["name"] = s.name
    doc["bounds"] = {"min": list(s.bounding_box.lo), "max": list(s.bounding_box.hi)}
    doc["flyable_band"] = list(s.flyable_band)
    doc["vertiports"] = [
        {"id": v.id, "position": list(v.position), "radius": v.radius, "kind": v.kind.value}
        for v in s.vertiports
    ]
    doc["obstacles"] = [
        {
            "id": o.id,
            "footprint": [list(p) for p in o.footprint],
            "lowest_alt": o.lowest_alt,
            "highest_alt": o.highest_alt,
        }
        for o in s.obstacles
    ]
    doc["risk_zones"] = [
        {"id": z.id, "footprint": [list(p) for p in z.footprint], "theta_risk": z.theta_risk}
        for z in s.risk_zones
    ]
    doc["od_requests"] = [request_to_dict(r) for r in s.od_requests]
    return doc


def request_to_dict(r: ODRequest) -> dict:
    return {
        "id": r.id,
        "origin_vertiport": r.origin_vertiport,
        "dest_vertiport": r.dest_vertiport,
        "urgency": r.urgency.value,
        "profit": r.profit,
    }


def dump_scenario(s: Scenario, indent: int | None = 2) -> str:
    return json.dumps(scenario_to_dict(s), indent=indent)


# --------------------------------------------------------------------------
# MovingAI octile maps

PASSABLE_CHARS = frozenset(".G")
BLOCKED_CHARS = frozenset("@T")


@dataclass
class BenchmarkMap:
    width: int
    height: int
    rows: list[str] = field(repr=False)

    def blocked(self, col: int, row: int) -> bool:
        return self.rows[row][col] in BLOCKED_CHARS


def parse_benchmark_map(text: str) -> BenchmarkMap:
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        if line == "map":
            break
        key, _, val = line.partition(" ")
        header[key] = val.strip()
    else:
        raise ScenarioError("benchmark map has no 'map' line")
    try:
        height, width = int(header["height"]), int(header["width"])
    except (KeyError, ValueError):
        raise ScenarioError("benchmark map header needs integer 'height' and 'width'") from None
    if height <= 0 or width <= 0:
        raise ScenarioError("benchmark map dimensions must be positive")
    body = [ln.rstrip("\r\n") for ln in lines[i:]]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != height:
        raise ScenarioError(f"header says {height} rows, body has {len(body)}")
    for r, row in enumerate(body):
        if len(row) != width:
            raise ScenarioError(f"row {r} has {len(row)} cells, header says {width}")
        bad = set(row) - PASSABLE_CHARS - BLOCKED_CHARS
        if bad:
            raise ScenarioError(f"row {r} has unknown cell characters {sorted(bad)!r}")
    return BenchmarkMap(width=width, height=height, rows=body)


def load_benchmark_map(text: str, cell_size: float = 1.0) -> Scenario:
    """Turn a MovingAI ``.map`` into a one-layer Scenario.

    Map column ``c`` and row ``r`` become the cell at x = c, y = height-1-r, so
    the first text row is the northern edge. Every blocked character becomes a
    unit obstacle prism spanning the whole flyable band.
    """
    bm = parse_benchmark_map(text)
    h = cell_size
    obstacles = []
    for r, row in enumerate(bm.rows):
        y0 = (bm.height - 1 - r) * h
        for c, ch in enumerate(row):
            if ch in BLOCKED_CHARS:
                x0 = c * h
                obstacles.append(
                    ObstaclePrism(
                        id=f"cell_{c}_{r}",
                        footprint=((x0, y0), (x0 + h, y0), (x0 + h, y0 + h), (x0, y0 + h)),
                        lowest_alt=0.0,
                        highest_alt=h,
                    )
                )
    return Scenario(
        bounding_box=Box3((0.0, 0.0, 0.0), (bm.width * h, bm.height * h, h)),
        flyable_band=(0.0, h),
        obstacles=tuple(obstacles),
    )


def map_cell_to_point(col: int, row: int, height: int, cell_size: float = 1.0) -> Point3:
    """Centre of a benchmark-map cell in scenario metres."""
    return ((col + 0.5) * cell_size, (height - 1 - row + 0.5) * cell_size, 0.5 * cell_size)
