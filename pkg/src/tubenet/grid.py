"""Voxel world: discretization, segment tracing, buffers and occupancy overlays.

Cells are addressed by a flat C-order index over ``(nx, ny, nz)``. Geometry
queries take metric points; search-facing helpers take flat indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

import numpy as np
import shapely
from scipy.ndimage import maximum_filter
from shapely.geometry import Polygon

from . import _kernels as K
from .scenario import Scenario, ScenarioError

Point3 = tuple[float, float, float]
Triple = tuple[int, int, int]

_EPS = 1e-9


class GridError(ValueError):
    pass


class OverlayConflictError(GridError):
    """A route was applied on top of cells another route already holds."""


def _triple(v, name: str) -> Triple:
    if np.isscalar(v):
        v = (v, v, v)
    t = tuple(int(x) for x in v)
    if len(t) != 3 or min(t) < 0:
        raise GridError(f"{name} must be three non-negative integers, got {v!r}")
    return t


def thickness_offsets(thickness: Sequence[int]) -> np.ndarray:
    """Cell offsets that dilate a centre-line cell into a path cross-section."""
    rng = [range(-((t - 1) // 2), t // 2 + 1) for t in thickness]
    return np.array(list(product(*rng)), dtype=np.int64).reshape(-1, 3)


@dataclass(eq=False)
class GridGraph:
    """Immutable voxelization of a scenario.

    ``reachable`` and ``theta`` are flat arrays of length nx*ny*nz. Vertiports
    map to a single cell each, and own a terminal zone of whole columns which
    other routes may not enter.
    """

    dims: Triple
    cell_size: Point3
    origin: Point3
    reachable: np.ndarray
    theta: np.ndarray
    vertiport_cell: dict[str, int] = field(default_factory=dict)
    vertiport_zone: dict[str, np.ndarray] = field(default_factory=dict)
    buffer_radius: Triple = (1, 1, 1)
    path_thickness: Triple = (1, 1, 1)
    scenario: Scenario | None = field(default=None, repr=False)

    def __post_init__(self):
        n = self.size
        if self.reachable.shape != (n,) or self.theta.shape != (n,):
            raise GridError("attribute arrays must be flat with nx*ny*nz entries")
        self.reachable.setflags(write=False)
        self.theta.setflags(write=False)
        self.buffer_radius = _triple(self.buffer_radius, "buffer_radius")
        self.path_thickness = _triple(self.path_thickness, "path_thickness")
        if min(self.path_thickness) < 1:
            raise GridError("path_thickness must be at least 1 on every axis")
        self.dilation = thickness_offsets(self.path_thickness)
        self.brad = np.array(self.buffer_radius, dtype=np.int64)
        self.csize = np.array(self.cell_size, dtype=np.float64)
        owner = np.full(n, -1, dtype=np.int64)
        self.vertiport_ids = list(self.vertiport_cell)
        for k, vid in enumerate(self.vertiport_ids):
            zone = self.vertiport_zone.get(vid)
            if zone is None:
                zone = self.vertiport_zone[vid] = np.array([self.vertiport_cell[vid]], dtype=np.int64)
            if np.any(owner[zone] >= 0):
                other = self.vertiport_ids[int(owner[zone][owner[zone] >= 0][0])]
                raise GridError(f"terminal zones of vertiports {other!r} and {vid!r} overlap")
            owner[zone] = k
        self.zone_owner = owner
        self.zone_owner.setflags(write=False)
        # zone plus a buffer-wide ring; foreign paths stay out so their
        # buffers never reach into a terminal zone
        guard = np.zeros(n, dtype=np.int64)
        self.vertiport_guard: dict[str, np.ndarray] = {}
        for vid in self.vertiport_ids:
            zone = self.vertiport_zone[vid]
            ring = np.fromiter(buffer_cells(zone.tolist(), self), dtype=np.int64)
            cells = np.union1d(zone, ring)
            self.vertiport_guard[vid] = cells
            guard[cells] += 1
        self.guard_count = guard
        self.guard_count.setflags(write=False)

    # -- addressing --------------------------------------------------------

    @property
    def size(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def is_2d(self) -> bool:
        return self.dims[2] == 1

    def index(self, x: int, y: int, z: int = 0) -> int:
        nx, ny, nz = self.dims
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            raise GridError(f"cell ({x}, {y}, {z}) outside grid {self.dims}")
        return (x * ny + y) * nz + z

    def coords(self, idx: int) -> Triple:
        _, ny, nz = self.dims
        return (idx // (ny * nz), (idx // nz) % ny, idx % nz)

    def center(self, idx: int) -> Point3:
        c = self.coords(idx)
        return tuple(self.origin[i] + (c[i] + 0.5) * self.cell_size[i] for i in range(3))

    def cell_of(self, p: Sequence[float]) -> int:
        """Cell containing point ``p``; points on the far boundary map inward."""
        c = []
        for i in range(3):
            u = (p[i] - self.origin[i]) / self.cell_size[i]
            if u < -_EPS or u > self.dims[i] + _EPS:
                raise GridError(f"point {tuple(p)} outside grid bounds")
            c.append(min(max(int(math.floor(u)), 0), self.dims[i] - 1))
        return self.index(*c)

    def in_bounds(self, p: Sequence[float]) -> bool:
        return all(
            -_EPS <= (p[i] - self.origin[i]) / self.cell_size[i] <= self.dims[i] + _EPS for i in range(3)
        )

    def neighbor_offsets(self) -> np.ndarray:
        zr = (0,) if self.is_2d else (-1, 0, 1)
        offs = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in zr if (dx, dy, dz) != (0, 0, 0)]
        return np.array(offs, dtype=np.int64)

    def cells_to_xyz(self, cells: Iterable[int]) -> np.ndarray:
        arr = np.fromiter(cells, dtype=np.int64)
        return np.stack(np.unravel_index(arr, self.dims), axis=1)

    def dilate(self, cells: Iterable[int]) -> set[int]:
        """Expand centre-line cells by the path cross-section, clipped to bounds."""
        out: set[int] = set()
        nx, ny, nz = self.dims
        for c in cells:
            x, y, z = self.coords(c)
            for ox, oy, oz in self.dilation:
                px, py, pz = x + ox, y + oy, z + oz
                if 0 <= px < nx and 0 <= py < ny and 0 <= pz < nz:
                    out.add(int((px * ny + py) * nz + pz))
        return out


# --------------------------------------------------------------------------
# discretization


def _dims(extent: float, cell: float) -> int:
    return max(int(math.ceil(extent / cell - _EPS)), 0)


def _axis_range(lo: float, hi: float, origin: float, cell: float, n: int) -> tuple[int, int]:
    """Cells [i0, i1) whose open interval overlaps (lo, hi) with positive length."""
    i0 = int(math.floor((lo - origin) / cell + _EPS))
    i1 = int(math.ceil((hi - origin) / cell - _EPS))
    return max(i0, 0), min(i1, n)


def _footprint_mask(poly: Polygon, origin, cell, nx: int, ny: int) -> np.ndarray:
    """2D mask of cells whose box shares positive area with ``poly``."""
    mask = np.zeros((nx, ny), dtype=bool)
    minx, miny, maxx, maxy = poly.bounds
    i0, i1 = _axis_range(minx, maxx, origin[0], cell[0], nx)
    j0, j1 = _axis_range(miny, maxy, origin[1], cell[1], ny)
    if i0 >= i1 or j0 >= j1:
        return mask
    if len(poly.exterior.coords) == 5 and math.isclose(poly.area, (maxx - minx) * (maxy - miny), rel_tol=1e-12):
        mask[i0:i1, j0:j1] = True
        return mask
    ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
    x0 = origin[0] + ii * cell[0]
    y0 = origin[1] + jj * cell[1]
    boxes = shapely.box(x0, y0, x0 + cell[0], y0 + cell[1])
    shapely.prepare(poly)
    hit = shapely.intersects(poly, boxes) & ~shapely.touches(poly, boxes)
    mask[i0:i1, j0:j1] = hit
    return mask


def _zone_columns(v, origin, cell, nx: int, ny: int, floor: tuple[int, int]) -> np.ndarray:
    """(x, y) columns of a vertiport's terminal zone."""
    cols = {floor}
    r = float(v.radius)
    if r > 0:
        px, py = v.position[0], v.position[1]
        i0, i1 = _axis_range(px - r, px + r, origin[0], cell[0], nx)
        j0, j1 = _axis_range(py - r, py + r, origin[1], cell[1], ny)
        for i in range(i0, i1):
            bx0 = origin[0] + i * cell[0]
            dx = max(bx0 - px, 0.0, px - (bx0 + cell[0]))
            for j in range(j0, j1):
                by0 = origin[1] + j * cell[1]
                dy = max(by0 - py, 0.0, py - (by0 + cell[1]))
                if math.hypot(dx, dy) < r:
                    cols.add((i, j))
    return np.array(sorted(cols), dtype=np.int64)


def discretize(
    scenario: Scenario,
    cell_size: float | Sequence[float] = 10.0,
    *,
    buffer_radius: int | Sequence[int] = 1,
    path_thickness: int | Sequence[int] = 1,
    obstacle_margin: int | Sequence[int] | None = None,
) -> GridGraph:
    """Voxelize ``scenario`` over its xy bounds and flyable band.

    A cell is unreachable when it shares positive volume with an obstacle
    prism, when it lies within ``obstacle_margin`` cells (Chebyshev, per axis;
    defaults to ``buffer_radius``) of such a cell, or when it pokes out of the
    flyable band. ``theta`` is the largest risk level among zones covering the
    cell centre, else 1.
    """
    cs = tuple(float(c) for c in (cell_size if not np.isscalar(cell_size) else (cell_size,) * 3))
    if len(cs) != 3 or min(cs) <= 0:
        raise GridError(f"cell_size must be positive, got {cell_size!r}")
    brad = _triple(buffer_radius, "buffer_radius")
    margin = brad if obstacle_margin is None else _triple(obstacle_margin, "obstacle_margin")
    bb = scenario.bounding_box
    zlo, zhi = scenario.flyable_band
    origin = (bb.lo[0], bb.lo[1], zlo)
    nx = _dims(bb.hi[0] - bb.lo[0], cs[0])
    ny = _dims(bb.hi[1] - bb.lo[1], cs[1])
    nz = _dims(zhi - zlo, cs[2])
    if nx == 0 or ny == 0 or nz == 0:
        raise GridError("flyable region is empty after discretization")

    zbot = zlo + np.arange(nz) * cs[2]
    ztop = zbot + cs[2]
    in_band = ztop <= zhi + _EPS
    if not in_band.any():
        raise GridError("no cell layer fits inside the flyable band")

    blocked = np.zeros((nx, ny, nz), dtype=bool)
    for ob in scenario.obstacles:
        layers = (np.minimum(ztop, ob.highest_alt) - np.maximum(zbot, ob.lowest_alt)) > _EPS
        if not layers.any():
            continue
        fm = _footprint_mask(ob.polygon(), origin, cs, nx, ny)
        if fm.any():
            blocked |= fm[:, :, None] & layers[None, None, :]
    if any(margin) and blocked.any():
        size = tuple(2 * m + 1 for m in margin)
        padded = np.pad(blocked, [(m, m) for m in margin])
        grown = maximum_filter(padded.view(np.uint8), size=size, mode="constant")
        blocked = grown[margin[0]: margin[0] + nx, margin[1]: margin[1] + ny, margin[2]: margin[2] + nz].astype(bool)
    reachable = ~blocked & in_band[None, None, :]

    theta2 = np.ones((nx, ny), dtype=np.float64)
    if scenario.risk_zones:
        xs = origin[0] + (np.arange(nx) + 0.5) * cs[0]
        ys = origin[1] + (np.arange(ny) + 0.5) * cs[1]
        best = np.full((nx, ny), -np.inf)
        for rz in scenario.risk_zones:
            poly = rz.polygon()
            minx, miny, maxx, maxy = poly.bounds
            ii = np.nonzero((xs >= minx - _EPS) & (xs <= maxx + _EPS))[0]
            jj = np.nonzero((ys >= miny - _EPS) & (ys <= maxy + _EPS))[0]
            if not len(ii) or not len(jj):
                continue
            gx, gy = np.meshgrid(xs[ii], ys[jj], indexing="ij")
            shapely.prepare(poly)
            inside = shapely.covers(poly, shapely.points(gx, gy))
            sub = best[np.ix_(ii, jj)]
            best[np.ix_(ii, jj)] = np.where(inside, np.maximum(sub, rz.theta_risk), sub)
        theta2 = np.where(np.isfinite(best), best, 1.0)
    theta = np.broadcast_to(theta2[:, :, None], (nx, ny, nz)).copy()

    vcell: dict[str, int] = {}
    vzone: dict[str, np.ndarray] = {}
    for v in scenario.vertiports:
        fx = min(max(int(math.floor((v.position[0] - origin[0]) / cs[0])), 0), nx - 1)
        fy = min(max(int(math.floor((v.position[1] - origin[1]) / cs[1])), 0), ny - 1)
        usable = np.nonzero(in_band)[0]
        zc = (v.position[2] - origin[2]) / cs[2] - 0.5
        fz = int(usable[np.argmin(np.abs(usable - zc))])
        vcell[v.id] = (fx * ny + fy) * nz + fz
        cols = _zone_columns(v, origin, cs, nx, ny, (fx, fy))
        zone = ((cols[:, 0:1] * ny + cols[:, 1:2]) * nz + np.arange(nz)[None, :]).ravel()
        vzone[v.id] = np.sort(zone)
    try:
        return GridGraph(
            dims=(nx, ny, nz),
            cell_size=cs,
            origin=origin,
            reachable=reachable.ravel(),
            theta=theta.ravel(),
            vertiport_cell=vcell,
            vertiport_zone=vzone,
            buffer_radius=brad,
            path_thickness=_triple(path_thickness, "path_thickness"),
            scenario=scenario,
        )
    except GridError as exc:
        raise ScenarioError(str(exc)) from None


# --------------------------------------------------------------------------
# tracing


def _trace_exact(a: Sequence[Fraction], b: Sequence[Fraction], dims: Triple) -> list[Triple]:
    """Supercover in cell units with exact arithmetic (a precedes b)."""
    d = [b[i] - a[i] for i in range(3)]
    ts = {Fraction(0), Fraction(1)}
    for i in range(3):
        if d[i] == 0:
            continue
        lo, hi = sorted((a[i], b[i]))
        for k in range(math.ceil(lo), math.floor(hi) + 1):
            ts.add((k - a[i]) / d[i])
    ts = sorted(ts)
    samples = []
    for t0, t1 in zip(ts, ts[1:]):
        samples.append(t0)
        samples.append((t0 + t1) / 2)
    samples.append(ts[-1])
    sign = [1 if di >= 0 else -1 for di in d]
    seen: set[Triple] = set()
    out: list[Triple] = []
    for t in samples:
        p = [a[i] + d[i] * t for i in range(3)]
        choices = []
        for i in range(3):
            if p[i].denominator == 1:
                k = int(p[i])
                opts = [c for c in (k - 1, k) if 0 <= c < dims[i]]
            else:
                opts = [min(max(math.floor(p[i]), 0), dims[i] - 1)]
            choices.append(opts)
        cells = list(product(*choices))
        cells.sort(key=lambda c: (sum(sign[i] * c[i] for i in range(3)), (c[0] * dims[1] + c[1]) * dims[2] + c[2]))
        for c in cells:
            if c not in seen:
                seen.add(c)
                out.append(c)
    return out


def _trace_centres(ga: Triple, gb: Triple, dims: Triple) -> list[int]:
    buf = np.empty(8 * (sum(abs(gb[i] - ga[i]) for i in range(3)) + 1), dtype=np.int64)
    n = K.trace_cells_into(ga[0], ga[1], ga[2], gb[0], gb[1], gb[2], dims[1], dims[2], buf)
    return buf[:n].tolist()


def trace_cell_indices(grid: GridGraph, a: int, b: int) -> list[int]:
    """Supercover of the segment between the centres of cells a and b."""
    ga, gb = grid.coords(a), grid.coords(b)
    if gb < ga:
        return _trace_centres(gb, ga, grid.dims)[::-1]
    return _trace_centres(ga, gb, grid.dims)


def trace_cells(a: Sequence[float], b: Sequence[float], grid: GridGraph) -> list[int]:
    """Every cell whose closed box meets segment [a, b], ordered from a to b."""
    for p in (a, b):
        if not grid.in_bounds(p):
            raise GridError(f"point {tuple(p)} outside grid bounds")
    ua = [Fraction(a[i] - grid.origin[i]) / Fraction(grid.cell_size[i]) for i in range(3)]
    ub = [Fraction(b[i] - grid.origin[i]) / Fraction(grid.cell_size[i]) for i in range(3)]
    half = Fraction(1, 2)
    if all((u - half).denominator == 1 for u in ua + ub):
        ga = tuple(int(u - half) for u in ua)
        gb = tuple(int(u - half) for u in ub)
        if all(0 <= ga[i] < grid.dims[i] and 0 <= gb[i] < grid.dims[i] for i in range(3)):
            return trace_cell_indices(grid, grid.index(*ga), grid.index(*gb))
    nx, ny, nz = grid.dims
    if ub < ua:
        cells = _trace_exact(ub, ua, grid.dims)[::-1]
    else:
        cells = _trace_exact(ua, ub, grid.dims)
    return [(x * ny + y) * nz + z for x, y, z in cells]


def buffer_cells(path_cells: Iterable[int], grid: GridGraph, radius: int | Sequence[int] | None = None) -> set[int]:
    """Cells within Chebyshev distance ``radius`` (per axis) of the path, minus the path."""
    r = grid.buffer_radius if radius is None else _triple(radius, "radius")
    cells = np.fromiter(path_cells, dtype=np.int64)
    if cells.size == 0:
        raise GridError("buffer_cells needs at least one path cell")
    nx, ny, nz = grid.dims
    xyz = np.stack(np.unravel_index(cells, grid.dims), axis=1)
    lo = np.maximum(xyz.min(axis=0) - r, 0)
    hi = np.minimum(xyz.max(axis=0) + r + 1, grid.dims)
    shape = tuple(hi - lo)
    m = np.zeros(shape, dtype=np.uint8)
    local = xyz - lo
    m[local[:, 0], local[:, 1], local[:, 2]] = 1
    padded = np.pad(m, [(k, k) for k in r])
    grown = maximum_filter(padded, size=tuple(2 * k + 1 for k in r), mode="constant")
    grown = grown[r[0]: r[0] + shape[0], r[1]: r[1] + shape[1], r[2]: r[2] + shape[2]]
    grown[local[:, 0], local[:, 1], local[:, 2]] = 0
    gx, gy, gz = np.nonzero(grown)
    return set((((gx + lo[0]) * ny + gy + lo[1]) * nz + gz + lo[2]).tolist())


# --------------------------------------------------------------------------
# overlay


@dataclass(frozen=True)
class CostBreakdown:
    """Route cost split. ``risk`` and ``space`` already include their lambdas."""

    operational: float = 0.0
    risk: float = 0.0
    space: float = 0.0
    total: float = 0.0
    raw_risk: float = 0.0
    raw_space: int = 0

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            self.operational + other.operational,
            self.risk + other.risk,
            self.space + other.space,
            self.total + other.total,
            self.raw_risk + other.raw_risk,
            self.raw_space + other.raw_space,
        )


@dataclass(frozen=True)
class Route:
    od_id: str
    waypoints: tuple[Point3, ...]
    waypoint_cells: tuple[int, ...]
    path_cells: frozenset[int]
    buffer_cells: frozenset[int]
    cost: CostBreakdown = CostBreakdown()
    exempt_cells: frozenset[int] = frozenset()

    @property
    def cost_breakdown(self) -> CostBreakdown:
        return self.cost

    @property
    def length(self) -> float:
        w = self.waypoints
        return sum(math.dist(w[i], w[i + 1]) for i in range(len(w) - 1))


def build_route(grid: GridGraph, od_id: str, chain: Sequence[int], cost: CostBreakdown = CostBreakdown(),
                exempt: Iterable[int] = ()) -> Route:
    """Assemble a Route from a waypoint cell chain."""
    centre: list[int] = []
    for i in range(len(chain) - 1):
        seg = trace_cell_indices(grid, chain[i], chain[i + 1])
        centre.extend(seg if i == 0 else seg[1:])
    if len(chain) == 1:
        centre = [chain[0]]
    path = frozenset(grid.dilate(centre))
    return Route(
        od_id=od_id,
        waypoints=tuple(grid.center(c) for c in chain),
        waypoint_cells=tuple(int(c) for c in chain),
        path_cells=path,
        buffer_cells=frozenset(buffer_cells(path, grid)),
        cost=cost,
        exempt_cells=frozenset(int(c) for c in exempt),
    )


class OccupancyOverlay:
    """Per-sequence reservation state on top of a GridGraph.

    Flags only ever get set. Cells listed in a route's ``exempt_cells`` (its
    own terminal zones) may be shared with routes using the same vertiport.
    """

    def __init__(self, grid: GridGraph):
        self.grid = grid
        self.path_occupied = np.zeros(grid.size, dtype=bool)
        self.buffer_reserved = np.zeros(grid.size, dtype=bool)
        self._applied: dict[str, frozenset[int]] = {}
        self.routes: list[Route] = []

    def copy(self) -> "OccupancyOverlay":
        o = OccupancyOverlay(self.grid)
        o.path_occupied = self.path_occupied.copy()
        o.buffer_reserved = self.buffer_reserved.copy()
        o._applied = dict(self._applied)
        o.routes = list(self.routes)
        return o

    @property
    def free(self) -> np.ndarray:
        return self.grid.reachable & ~self.path_occupied & ~self.buffer_reserved

    @property
    def taken(self) -> np.ndarray:
        return self.path_occupied | self.buffer_reserved

    @property
    def occupied_count(self) -> int:
        return int(self.path_occupied.sum())

    @property
    def reserved_count(self) -> int:
        return int((self.buffer_reserved & ~self.path_occupied).sum())

    @property
    def total_occupied(self) -> int:
        return int((self.path_occupied | self.buffer_reserved).sum())

    def apply_route(self, route: Route) -> "OccupancyOverlay":
        if self._applied.get(route.od_id) == route.path_cells:
            return self
        if route.od_id in self._applied:
            raise OverlayConflictError(f"a different route for {route.od_id!r} is already applied")
        cells = np.fromiter(route.path_cells - route.exempt_cells, dtype=np.int64)
        if cells.size:
            bad = cells[~self.grid.reachable[cells] | self.path_occupied[cells] | self.buffer_reserved[cells]]
            if bad.size:
                raise OverlayConflictError(
                    f"route {route.od_id!r} claims {bad.size} cells that are blocked or held, e.g. {self.grid.coords(int(bad[0]))}"
                )
        self.path_occupied[np.fromiter(route.path_cells, dtype=np.int64)] = True
        if route.buffer_cells:
            self.buffer_reserved[np.fromiter(route.buffer_cells, dtype=np.int64)] = True
        self._applied[route.od_id] = route.path_cells
        self.routes.append(route)
        return self

    def dump_ascii(self, routes: Sequence[Route] | None = None) -> str:
        """Layered text view: '#' blocked, digits/letters path owner, '+' buffer, '.' free."""
        g = self.grid
        nx, ny, nz = g.dims
        routes = self.routes if routes is None else routes
        glyphs = "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        owner = {}
        for k, r in enumerate(routes):
            for c in r.path_cells:
                owner[c] = glyphs[k % len(glyphs)]
        lines = []
        for z in range(nz):
            lines.append(f"layer {z}")
            for y in range(ny - 1, -1, -1):
                row = []
                for x in range(nx):
                    c = (x * ny + y) * nz + z
                    if c in owner:
                        row.append(owner[c])
                    elif self.path_occupied[c]:
                        row.append("*")
                    elif self.buffer_reserved[c]:
                        row.append("+")
                    elif not g.reachable[c]:
                        row.append("#")
                    else:
                        row.append(".")
                lines.append("".join(row))
        return "\n".join(lines) + "\n"


def apply_route(overlay: OccupancyOverlay, route: Route) -> OccupancyOverlay:
    return overlay.apply_route(route)


def line_of_sight(overlay: OccupancyOverlay, a: int, b: int, free: np.ndarray | None = None) -> bool:
    """True iff the path cross-section swept from centre a to centre b stays on free cells."""
    g = overlay.grid
    f = overlay.free if free is None else free
    nx, ny, nz = g.dims
    tbuf = np.empty(8 * (sum(abs(p - q) for p, q in zip(g.coords(a), g.coords(b))) + 1), dtype=np.int64)
    return bool(K.line_of_sight(a, b, nx, ny, nz, f, g.dilation, tbuf))
