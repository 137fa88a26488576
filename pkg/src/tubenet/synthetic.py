"""Built-in and generated test worlds.

``toy_scenario`` is the two-obstacle layout shipped as package data.
``synthetic_city`` builds a seeded city-scale scenario on a 500 x 300 x 6 cell
grid. ``random_instance`` makes small single-layer maps for the oracles.
"""

from __future__ import annotations

import math
import random
from dataclasses import replace
from importlib import resources
from typing import Sequence

import numpy as np

from .scenario import (
    Box3,
    ODRequest,
    ObstaclePrism,
    RiskZone,
    Scenario,
    Urgency,
    Vertiport,
    load_scenario,
)

TOY_FILE = "toy_two_obstacles.json"


def toy_scenario(n_ods: int = 5) -> Scenario:
    """Two symmetric obstacles, five vertiports on each edge, OD pairs 3-8, 2-7, 4-9, 1-6, 5-10."""
    text = resources.files("tubenet").joinpath("data", TOY_FILE).read_text()
    sc = load_scenario(text)
    return Scenario(sc.bounding_box, sc.flyable_band, sc.vertiports, sc.obstacles, sc.risk_zones,
                    sc.od_requests[:n_ods], sc.name)


def _rect(x0: float, y0: float, x1: float, y1: float):
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def synthetic_city(seed: int = 0, n_ods: int = 40, *, extent=(5000.0, 3000.0), band=(60.0, 120.0),
                   n_buildings: int = 160, n_risk: int = 8, od_range=(600.0, 1800.0),
                   n_hubs: int = 0, hub_radius: float = 450.0) -> Scenario:
    """Seeded city: box buildings of mixed height, risk patches, distinct vertiports per OD.

    With ``n_hubs > 0`` each OD joins two districts (hub centres), its
    vertiports scattered within ``hub_radius``; parallel demand between the
    same districts is what gives bundling room to pay off. Otherwise
    destinations lie ``od_range`` metres from a random origin.
    """
    rng = random.Random(seed)
    W, H = extent
    buildings = []
    for k in range(n_buildings):
        w, h = rng.uniform(30, 180), rng.uniform(30, 180)
        x, y = rng.uniform(0, W - w), rng.uniform(0, H - h)
        top = rng.choice([rng.uniform(30, 60), rng.uniform(70, 110), rng.uniform(130, 220)])
        buildings.append(ObstaclePrism(f"b{k}", _rect(x, y, x + w, y + h), 0.0, top))
    zones = []
    for k in range(n_risk):
        cx, cy = rng.uniform(300, W - 300), rng.uniform(300, H - 300)
        r = rng.uniform(150, 400)
        pts = []
        m = rng.randint(5, 8)
        for i in range(m):
            a = 2 * math.pi * i / m
            rr = r * rng.uniform(0.7, 1.0)
            pts.append((cx + rr * math.cos(a), cy + rr * math.sin(a)))
        zones.append(RiskZone(f"risk{k}", tuple(pts), rng.choice([0.5, 1.5, 2.0, 3.0])))

    # keep vertiports clear of buildings that reach into the band
    tall = [b for b in buildings if b.highest_alt > band[0]]

    def clear(x: float, y: float) -> bool:
        for b in tall:
            (x0, y0), (x1, y1) = b.footprint[0], b.footprint[2]
            if x0 - 40 <= x <= x1 + 40 and y0 - 40 <= y <= y1 + 40:
                return False
        return True

    ports: list[Vertiport] = []
    requests: list[ODRequest] = []
    urgencies = list(Urgency)

    def spaced(x: float, y: float) -> bool:
        return all(math.hypot(x - p.position[0], y - p.position[1]) >= 80 for p in ports)

    def site(centre=None):
        for _ in range(100000):
            if centre is None:
                x, y = rng.uniform(50, W - 50), rng.uniform(50, H - 50)
            else:
                a, rr = rng.uniform(0, 2 * math.pi), hub_radius * math.sqrt(rng.random())
                x = min(max(centre[0] + rr * math.cos(a), 50), W - 50)
                y = min(max(centre[1] + rr * math.sin(a), 50), H - 50)
            x = math.floor(x / 10) * 10 + 5
            y = math.floor(y / 10) * 10 + 5
            if clear(x, y) and spaced(x, y):
                return x, y
        raise ValueError("could not place a vertiport; lower n_ods or widen hub_radius")

    hubs = [(rng.uniform(400, W - 400), rng.uniform(400, H - 400)) for _ in range(n_hubs)]
    for k in range(n_ods):
        if hubs:
            h0, h1 = rng.sample(range(len(hubs)), 2)
            ox, oy = site(hubs[h0])
            dx, dy = site(hubs[h1])
            ports.append(Vertiport(f"v{2 * k}", (ox, oy, band[0] + 5.0)))
            ports.append(Vertiport(f"v{2 * k + 1}", (dx, dy, band[0] + 5.0)))
            requests.append(ODRequest(f"od{k:02d}", f"v{2 * k}", f"v{2 * k + 1}", rng.choice(urgencies),
                                      round(rng.uniform(0, 10000), 1)))
            continue
        ox, oy = site()
        while True:
            d = rng.uniform(*od_range)
            a = rng.uniform(0, 2 * math.pi)
            dx = math.floor((ox + d * math.cos(a)) / 10) * 10 + 5
            dy = math.floor((oy + d * math.sin(a)) / 10) * 10 + 5
            if 50 <= dx <= W - 50 and 50 <= dy <= H - 50 and clear(dx, dy) and spaced(dx, dy) \
                    and math.hypot(dx - ox, dy - oy) >= 80:
                break
        z = band[0] + 5.0
        ports.append(Vertiport(f"v{2 * k}", (ox, oy, z)))
        ports.append(Vertiport(f"v{2 * k + 1}", (dx, dy, z)))
        requests.append(ODRequest(f"od{k:02d}", f"v{2 * k}", f"v{2 * k + 1}", rng.choice(urgencies),
                                  round(rng.uniform(0, 10000), 1)))
    return Scenario(
        bounding_box=Box3((0.0, 0.0, 0.0), (W, H, 250.0)),
        flyable_band=band,
        vertiports=tuple(ports),
        obstacles=tuple(buildings),
        risk_zones=tuple(zones),
        od_requests=tuple(requests),
        name=f"synthetic-city-{seed}",
    )


def _place_pairs(cells: Sequence[tuple[int, int]], n_routes: int, rng: np.random.Generator,
                 min_gap: int, min_len: int, max_len: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    ends: list[tuple[int, int]] = []
    pairs = []
    for _ in range(n_routes):
        for _attempt in range(2000):
            a = cells[rng.integers(len(cells))]
            b = cells[rng.integers(len(cells))]
            if not min_len <= max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= max_len:
                continue
            if all(max(abs(p[0] - q[0]), abs(p[1] - q[1])) >= min_gap for p in (a, b) for q in ends):
                ends.extend([a, b])
                pairs.append((a, b))
                break
        else:
            raise ValueError(f"could not place {n_routes} OD pairs")
    return pairs


def add_random_demand(scenario: Scenario, free_cells: Sequence[tuple[int, int]], n_routes: int, seed: int = 0, *,
                      cell: float = 1.0, min_gap: int = 3, min_len: int = 6, max_len: int = 10**9) -> Scenario:
    """Copy of a one-layer ``scenario`` with ``n_routes`` seeded OD pairs on ``free_cells``.

    Endpoints sit at least ``min_gap`` cells apart (Chebyshev) so terminal
    guards never swallow one another, and each pair spans ``min_len`` to
    ``max_len`` cells (Chebyshev).
    Vertiports are named o{k}/d{k}, requests r{k}.
    """
    rng = np.random.default_rng(seed)
    pairs = _place_pairs(list(free_cells), n_routes, rng, min_gap, min_len, max_len)
    x0, y0, _ = scenario.bounding_box.lo
    zc = 0.5 * (scenario.flyable_band[0] + scenario.flyable_band[1])
    ports = []
    reqs = []
    for k, (a, b) in enumerate(pairs):
        ports.append(Vertiport(f"o{k}", (x0 + (a[0] + 0.5) * cell, y0 + (a[1] + 0.5) * cell, zc)))
        ports.append(Vertiport(f"d{k}", (x0 + (b[0] + 0.5) * cell, y0 + (b[1] + 0.5) * cell, zc)))
        reqs.append(ODRequest(f"r{k}", f"o{k}", f"d{k}"))
    return replace(scenario, vertiports=tuple(ports), od_requests=tuple(reqs))


def random_instance(seed: int, n_routes: int, size: int = 16, density: float = 0.15, cell: float = 10.0,
                    min_gap: int = 3, min_len: int = 6, max_len: int = 10**9) -> Scenario:
    """Single-layer ``size`` x ``size`` map with unit obstacles and ``n_routes`` ODs."""
    rng = np.random.default_rng(seed)
    blocked = rng.random((size, size)) < density
    free = [(x, y) for x in range(size) for y in range(size) if not blocked[x, y]]
    obstacles = tuple(
        ObstaclePrism(f"c{x}_{y}", _rect(x * cell, y * cell, (x + 1) * cell, (y + 1) * cell), 0.0, cell)
        for x in range(size) for y in range(size) if blocked[x, y]
    )
    base = Scenario(
        bounding_box=Box3((0.0, 0.0, 0.0), (size * cell, size * cell, cell)),
        flyable_band=(0.0, cell),
        obstacles=obstacles,
        name=f"random-{size}-{seed}",
    )
    return add_random_demand(base, free, n_routes, seed, cell=cell, min_gap=min_gap, min_len=min_len,
                             max_len=max_len)
