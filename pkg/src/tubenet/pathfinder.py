"""Single-route search: Theta* over an occupancy overlay with risk and space costs.

The compiled search in ``_kernels`` does the heavy lifting. The set-based
``operational_cost`` / ``risk_cost`` / ``space_cost`` / ``chain_costs`` here
are slow reference implementations used for replay checks and tests.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .grid import (
    CostBreakdown,
    GridGraph,
    OccupancyOverlay,
    Route,
    build_route,
    trace_cell_indices,
)
from .scenario import ODRequest


class NoPathError(RuntimeError):
    """The open set ran dry before reaching the goal."""


class InvalidEndpointError(ValueError):
    pass


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CostWeights:
    omega_r: float = 1.0
    omega_p: float = 1.0
    lambda_turning: float = 0.0
    lambda_climbing: float = 0.0
    lambda_descending: float = 0.0
    lambda_r: float | None = None
    lambda_p: float | None = None

    def __post_init__(self):
        for name in ("omega_r", "omega_p", "lambda_turning", "lambda_climbing", "lambda_descending"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        for name in ("lambda_r", "lambda_p"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be > 0 when given, got {v!r}")

    @property
    def calibrated(self) -> bool:
        return self.lambda_r is not None and self.lambda_p is not None

    def with_lambdas(self, lambda_r: float, lambda_p: float) -> "CostWeights":
        return replace(self, lambda_r=lambda_r, lambda_p=lambda_p)


@dataclass(frozen=True)
class SearchOptions:
    """Search knobs.

    ``heuristic`` is ``"euclidean"`` (straight-line distance) or
    ``"cost_aware"``, which also charges every cell still to be crossed
    (Manhattan count) the cheapest risk level plus one occupied cell. The
    latter is not a strict lower bound once bundling makes cells free, so it
    is a speed option, as is ``heuristic_weight`` > 1.
    ``any_angle=False`` turns the search into plain grid A* with the same costs.
    """

    heuristic: str = "euclidean"
    heuristic_weight: float = 1.0
    any_angle: bool = True
    max_expansions: int = 0

    def __post_init__(self):
        if self.heuristic not in ("euclidean", "cost_aware"):
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if not self.heuristic_weight >= 1.0:
            raise ValueError("heuristic_weight must be >= 1")


# --------------------------------------------------------------------------
# reference cost terms


def operational_cost(polyline: Sequence[Sequence[float]], weights: CostWeights) -> float:
    """Traversal plus turning, climbing and descending penalties along a polyline."""
    pts = [np.asarray(p, dtype=float) for p in polyline]
    if len(pts) < 2:
        raise ValueError("operational_cost needs at least two waypoints")
    segs = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
    lens = [float(np.linalg.norm(s)) for s in segs]
    if min(lens) == 0.0:
        raise ValueError("zero-length segment has no direction")
    total = sum(lens)
    if weights.lambda_turning:
        turn = 0.0
        for i in range(len(segs) - 1):
            c = float(np.dot(segs[i], segs[i + 1]) / (lens[i] * lens[i + 1]))
            turn += abs(math.acos(min(1.0, max(-1.0, c))))
        total += weights.lambda_turning * turn
    for s, ln in zip(segs, lens):
        elev = math.asin(min(1.0, max(-1.0, s[2] / ln)))
        if elev > 0:
            total += weights.lambda_climbing * elev * ln
        elif elev < 0:
            total += weights.lambda_descending * (-elev) * ln
    return total


def _segment_path_cells(grid: GridGraph, a: int, b: int) -> list[int]:
    cells = []
    seen = set()
    for c in grid.dilate(trace_cell_indices(grid, a, b)):
        if c not in seen:
            seen.add(c)
            cells.append(c)
    return cells


def _lam(value: float | None) -> float:
    return 1.0 if value is None else value


def risk_cost(a: int, b: int, overlay: OccupancyOverlay, weights: CostWeights,
              counted: set[int] | None = None) -> float:
    """lambda_r times the risk levels of the cells swept by a->b.

    Cells in ``counted`` (the partial path so far) are skipped so each path
    cell contributes once.
    """
    g = overlay.grid
    counted = counted or set()
    return _lam(weights.lambda_r) * sum(
        float(g.theta[c]) for c in _segment_path_cells(g, a, b) if c not in counted
    )


def space_count(a: int, b: int, overlay: OccupancyOverlay, counted: set[int] | None = None,
                taken: np.ndarray | None = None) -> int:
    """Newly occupied cells (path plus buffer) contributed by segment a->b.

    ``counted`` holds the path and buffer cells already occupied by the partial
    path. Buffer cells already held in the overlay do not count again.
    """
    from .grid import buffer_cells

    g = overlay.grid
    counted = counted or set()
    taken = overlay.taken if taken is None else taken
    path = set(_segment_path_cells(g, a, b))
    new_path = path - counted
    buf = buffer_cells(path, g) - path
    new_buf = {c for c in buf if not taken[c] and c not in counted}
    return len(new_path) + len(new_buf)


def space_cost(a: int, b: int, overlay: OccupancyOverlay, weights: CostWeights,
               counted: set[int] | None = None) -> float:
    return _lam(weights.lambda_p) * space_count(a, b, overlay, counted)


def chain_costs(grid: GridGraph, chain: Sequence[int], overlay: OccupancyOverlay, weights: CostWeights,
                taken: np.ndarray | None = None) -> CostBreakdown:
    """Post-hoc cost of a waypoint chain, computed with plain sets."""
    from .grid import buffer_cells

    if len(chain) < 2:
        return CostBreakdown()
    taken = overlay.taken if taken is None else taken
    pts = [grid.center(c) for c in chain]
    op = operational_cost(pts, weights)
    path: set[int] = set()
    for i in range(len(chain) - 1):
        path.update(_segment_path_cells(grid, chain[i], chain[i + 1]))
    raw_risk = sum(float(grid.theta[c]) for c in path)
    buf = buffer_cells(path, grid)
    raw_space = len(path) + sum(1 for c in buf if not taken[c])
    risk = _lam(weights.lambda_r) * raw_risk
    space = _lam(weights.lambda_p) * raw_space
    return CostBreakdown(op, risk, space, op + weights.omega_r * risk + weights.omega_p * space, raw_risk, raw_space)


def heuristic(grid: GridGraph, cell: int, goal: int) -> float:
    """Straight-line distance between cell centres."""
    return math.dist(grid.center(cell), grid.center(goal))


# --------------------------------------------------------------------------
# compiled search plumbing


class Workspace:
    """Reusable per-thread work arrays for one grid size."""

    def __init__(self, grid: GridGraph):
        n = grid.size
        self.n = n
        self.g = np.full(n, np.inf)
        self.parent = np.full(n, -1, dtype=np.int64)
        self.seen = np.zeros(n, dtype=np.int64)
        self.closed = np.zeros(n, dtype=np.int64)
        self.pmark = np.zeros(n, dtype=np.int64)
        self.bmark = np.zeros(n, dtype=np.int64)
        self.scratch = np.zeros(n, dtype=np.int64)
        self.counters = np.zeros(3, dtype=np.int64)
        span = sum(grid.dims) + 1
        self.tbuf = np.empty(8 * span, dtype=np.int64)
        self.cbuf = np.empty(8 * span * len(grid.dilation), dtype=np.int64)


_local = threading.local()


def workspace_for(grid: GridGraph) -> Workspace:
    cache = getattr(_local, "cache", None)
    if cache is None:
        cache = _local.cache = {}
    key = id(grid)
    ws = cache.get(key)
    if ws is None or ws.n != grid.size:
        cache.clear()
        ws = cache[key] = Workspace(grid)
    return ws


def _params(grid: GridGraph, weights: CostWeights, options: SearchOptions, free: np.ndarray) -> np.ndarray:
    lr, lp = _lam(weights.lambda_r), _lam(weights.lambda_p)
    hcoef = 0.0
    if options.heuristic == "cost_aware":
        cells = grid.theta[free]
        theta_min = float(cells.min()) if cells.size else 0.0
        hcoef = weights.omega_r * lr * theta_min + weights.omega_p * lp
    return np.array(
        [weights.omega_r, weights.omega_p, weights.lambda_turning, weights.lambda_climbing,
         weights.lambda_descending, lr, lp, options.heuristic_weight, hcoef],
        dtype=np.float64,
    )


def route_masks(overlay: OccupancyOverlay, origin: str | None = None, dest: str | None = None
                ) -> tuple[np.ndarray, np.ndarray, frozenset[int]]:
    """Free/taken masks as seen by one OD, plus its exempt terminal cells.

    Inside its own terminal zones a route ignores overlay reservations; the
    zones of every other vertiport, and a buffer-wide ring around them, are off
    limits.
    """
    g = overlay.grid
    free = overlay.free.copy()
    taken = overlay.taken
    own = list(dict.fromkeys(v for v in (origin, dest) if v is not None))
    if g.vertiport_ids:
        guard = g.guard_count.copy()
        for vid in own:
            guard[g.vertiport_guard[vid]] -= 1
        free &= guard == 0
    exempt: set[int] = set()
    if own:
        taken = taken.copy()
        for vid in own:
            z = g.vertiport_zone[vid]
            free[z] = g.reachable[z]
            taken[z] = False
            exempt.update(z.tolist())
    return free, taken, frozenset(exempt)


def resolve_od(grid: GridGraph, od: ODRequest | tuple[int, int]) -> tuple[str, int, int, str | None, str | None]:
    if isinstance(od, ODRequest):
        try:
            return od.id, grid.vertiport_cell[od.origin_vertiport], grid.vertiport_cell[od.dest_vertiport], \
                od.origin_vertiport, od.dest_vertiport
        except KeyError as exc:
            raise InvalidEndpointError(f"request {od.id!r} names unknown vertiport {exc.args[0]!r}") from None
    s, t = od
    return f"{s}->{t}", int(s), int(t), None, None


def _search(grid: GridGraph, start: int, goal: int, free: np.ndarray, taken: np.ndarray, weights: CostWeights,
            options: SearchOptions, ws: Workspace) -> list[int]:
    nx, ny, nz = grid.dims
    params = _params(grid, weights, options, free)
    found, _ = K.theta_star(
        nx, ny, nz, free, taken, grid.theta, grid.dilation, grid.brad, grid.neighbor_offsets(), start, goal,
        grid.csize, params, options.any_angle, options.max_expansions, ws.g, ws.parent, ws.seen, ws.closed,
        ws.pmark, ws.bmark, ws.scratch, ws.tbuf, ws.cbuf, ws.counters,
    )
    if not found:
        raise NoPathError(f"no path from {grid.coords(start)} to {grid.coords(goal)}")
    chain = [goal]
    while chain[-1] != start:
        chain.append(int(ws.parent[chain[-1]]))
    chain.reverse()
    return chain


def replay(grid: GridGraph, chain: Sequence[int], taken: np.ndarray, weights: CostWeights,
           ws: Workspace | None = None) -> CostBreakdown:
    """Recompute a chain's cost with the same incremental rule the search uses."""
    if len(chain) < 2:
        return CostBreakdown()
    ws = ws or workspace_for(grid)
    nx, ny, nz = grid.dims
    params = _params(grid, weights, SearchOptions(), taken)
    total, op, risk, space = K.replay_costs(
        np.asarray(chain, dtype=np.int64), nx, ny, nz, grid.dilation, grid.brad, taken, grid.theta, grid.csize,
        params, ws.pmark, ws.bmark, ws.tbuf, ws.cbuf, ws.scratch, ws.counters,
    )
    lr, lp = _lam(weights.lambda_r), _lam(weights.lambda_p)
    return CostBreakdown(op, lr * risk, lp * space, total, risk, int(space))


def find_path(overlay: OccupancyOverlay, od: ODRequest | tuple[int, int], weights: CostWeights = CostWeights(),
              options: SearchOptions = SearchOptions(), *, lambdas: tuple[float, float] | None = None) -> Route:
    """Cheapest route for ``od`` under the current overlay.

    ``od`` is an ODRequest (resolved through the grid's vertiports) or a
    ``(start_cell, goal_cell)`` pair. Missing lambdas are calibrated for this
    OD unless ``lambdas`` supplies them.
    """
    grid = overlay.grid
    od_id, start, goal, ov, dv = resolve_od(grid, od)
    free, taken, exempt = route_masks(overlay, ov, dv)
    ws = workspace_for(grid)
    nx, ny, nz = grid.dims
    for end in (start, goal):
        if not (0 <= end < grid.size):
            raise InvalidEndpointError(f"cell {end} outside grid")
        if not K.line_of_sight(end, end, nx, ny, nz, free, grid.dilation, ws.tbuf):
            raise InvalidEndpointError(f"endpoint {grid.coords(end)} of {od_id!r} is blocked or held")
    if start == goal:
        return build_route(grid, od_id, [start], CostBreakdown(), exempt)
    if lambdas is not None:
        weights = weights.with_lambdas(*lambdas)
    elif not weights.calibrated:
        try:
            weights = weights.with_lambdas(*calibrate_lambdas(grid, od, weights, options))
        except CalibrationError as exc:
            # the baseline search is a relaxation, so no path exists either
            raise NoPathError(str(exc)) from None
    chain = _search(grid, start, goal, free, taken, weights, options, ws)
    return build_route(grid, od_id, chain, replay(grid, chain, taken, weights, ws), exempt)


def calibrate_lambdas(grid: GridGraph, od: ODRequest | tuple[int, int], weights: CostWeights = CostWeights(),
                      options: SearchOptions = SearchOptions()) -> tuple[float, float]:
    """Scale factors that make risk and space commensurate with distance for this OD.

    Runs a pure-operational search on an empty overlay and returns
    ``(o0 / r0, o0 / p0)`` from its operational cost, raw risk sum and raw
    occupied-cell count.
    """
    _, start, goal, ov, dv = resolve_od(grid, od)
    if start == goal:
        raise CalibrationError("origin and destination share a cell; nothing to normalize")
    base = replace(weights, omega_r=0.0, omega_p=0.0, lambda_r=1.0, lambda_p=1.0)
    empty = OccupancyOverlay(grid)
    free, taken, _ = route_masks(empty, ov, dv)
    ws = workspace_for(grid)
    nx, ny, nz = grid.dims
    for end in (start, goal):
        if not K.line_of_sight(end, end, nx, ny, nz, free, grid.dilation, ws.tbuf):
            raise CalibrationError(f"endpoint {grid.coords(end)} is not reachable")
    try:
        chain = _search(grid, start, goal, free, taken, base, replace(options, heuristic="euclidean"), ws)
    except NoPathError as exc:
        raise CalibrationError(str(exc)) from None
    cb = replay(grid, chain, taken, base, ws)
    if cb.raw_risk <= 0 or cb.raw_space <= 0:
        raise CalibrationError("baseline path has zero risk or space; cannot normalize")
    return cb.operational / cb.raw_risk, cb.operational / cb.raw_space


def straight_chain_cells(grid: GridGraph, chain: Iterable[int]) -> list[int]:
    """Centre-line cells of a waypoint chain, in order, without repeats."""
    out: list[int] = []
    chain = list(chain)
    for i in range(len(chain) - 1):
        seg = trace_cell_indices(grid, chain[i], chain[i + 1])
        out.extend(seg if i == 0 else seg[1:])
    return out
