"""Exact small-instance solvers and the post-hoc separation checker.

Oracle routes live on the 8-connected cell graph of a single-layer grid.
A diagonal move also occupies its two corner cells (as the planner's line
trace does), so it may not clip a blocked or forbidden corner and two routes
cannot cross between each other's cells. A move costs its centre-to-centre
length plus ``omega_r * lambda_r * theta`` over the cells it newly occupies
(the start cell's risk is charged up front). Space cost is not additive per
move, so oracles refuse ``omega_p > 0``.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .grid import CostBreakdown, GridGraph, OccupancyOverlay, Route, buffer_cells
from .pathfinder import CostWeights, route_masks
from .planner import RouteNetwork, assemble_network
from .scenario import ODRequest


class ConflictKind(str, Enum):
    PATH_PATH = "path-path"
    PATH_BUFFER = "path-buffer"


@dataclass(frozen=True)
class SpatialConflict:
    """``cell`` lies on route ``i``'s path and on ``j``'s path (or in ``j``'s buffer)."""

    i: str
    j: str
    cell: int
    kind: ConflictKind


def find_conflicts(routes: Sequence[Route], *, buffers: bool = True) -> list[SpatialConflict]:
    """All separation violations between pairs of routes.

    A route's own terminal-zone cells (``exempt_cells``) are skipped: routes
    sharing a vertiport necessarily meet there.
    """
    out: list[SpatialConflict] = []
    for a, b in itertools.combinations(routes, 2):
        for c in sorted(a.path_cells & b.path_cells):
            if c in a.exempt_cells and c in b.exempt_cells:
                continue
            out.append(SpatialConflict(a.od_id, b.od_id, c, ConflictKind.PATH_PATH))
        if not buffers:
            continue
        for p, q in ((a, b), (b, a)):
            for c in sorted(p.path_cells & q.buffer_cells):
                if c in p.exempt_cells:
                    continue
                out.append(SpatialConflict(p.od_id, q.od_id, c, ConflictKind.PATH_BUFFER))
    return out


def shared_buffer_cells(routes: Sequence[Route]) -> set[int]:
    """Cells inside the buffers of two or more routes."""
    seen: set[int] = set()
    shared: set[int] = set()
    for r in routes:
        shared |= seen & r.buffer_cells
        seen |= r.buffer_cells
    return shared


# --------------------------------------------------------------------------
# shared oracle model


class BoundExceeded(RuntimeError):
    """Enumeration hit its cap; ``stats`` says how far it got."""

    def __init__(self, message: str, stats: dict):
        super().__init__(message)
        self.stats = stats


@dataclass
class OracleResult:
    network: RouteNetwork | None
    optimal: bool
    status: str  # "optimal" | "infeasible" | "timeout"
    stats: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return math.inf if self.network is None else self.network.totals.total


class _Model:
    """8-connected single-layer cell graph shared by both oracles."""

    def __init__(self, grid: GridGraph, requests: Sequence[ODRequest], weights: CostWeights):
        if grid.dims[2] != 1:
            raise ValueError("oracles work on single-layer grids")
        if weights.omega_p != 0 or weights.lambda_turning != 0:
            raise ValueError("oracle cost model supports omega_p = 0 and lambda_turning = 0 only")
        self.grid = grid
        self.nx, self.ny = grid.dims[0], grid.dims[1]
        self.requests = list(requests)
        self.risk_w = weights.omega_r * (1.0 if weights.lambda_r is None else weights.lambda_r)
        self.lambda_r = 1.0 if weights.lambda_r is None else weights.lambda_r
        self.weights = weights
        cx, cy = grid.cell_size[0], grid.cell_size[1]
        self.step = {}
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx or dy:
                    self.step[(dx, dy)] = math.hypot(dx * cx, dy * cy)
        self.cx, self.cy = cx, cy
        self.h_min_risk = self.risk_w * float(grid.theta.min()) if self.risk_w else 0.0
        empty = OccupancyOverlay(grid)
        self.free = []
        self.ends = []
        for r in self.requests:
            free, _, _ = route_masks(empty, r.origin_vertiport, r.dest_vertiport)
            self.free.append(free)
            self.ends.append((grid.vertiport_cell[r.origin_vertiport], grid.vertiport_cell[r.dest_vertiport]))
        rx, ry, _ = grid.buffer_radius
        self.rx, self.ry = rx, ry
        self._nbhd: dict[int, tuple[int, ...]] = {}

    def neighbors(self, k: int, c: int, forbidden: frozenset[int] | set[int] = frozenset()):
        free = self.free[k]
        ny = self.ny
        x, y = divmod(c, ny)
        for (dx, dy), ln in self.step.items():
            px, py = x + dx, y + dy
            if not (0 <= px < self.nx and 0 <= py < ny):
                continue
            q = px * ny + py
            if not free[q] or q in forbidden:
                continue
            w = ln + self.risk_w * float(self.grid.theta[q])
            if dx and dy:
                c1, c2 = x * ny + py, px * ny + y
                if not (free[c1] and free[c2]) or c1 in forbidden or c2 in forbidden:
                    continue
                if self.risk_w:
                    w += self.risk_w * float(self.grid.theta[c1] + self.grid.theta[c2])
            yield q, w

    def h(self, c: int, t: int) -> float:
        x, y = divmod(c, self.ny)
        tx, ty = divmod(t, self.ny)
        dx, dy = abs(x - tx), abs(y - ty)
        lo, hi = min(dx, dy), max(dx, dy)
        if self.cx == self.cy:
            dist = (hi - lo) * self.cx + lo * math.hypot(self.cx, self.cy)
        else:
            dist = math.hypot(dx * self.cx, dy * self.cy)
        return dist + self.h_min_risk * hi

    def start_cost(self, k: int) -> float:
        return self.risk_w * float(self.grid.theta[self.ends[k][0]])

    def cells(self, path: Sequence[int]) -> list[int]:
        """Visited cells plus the corner cells of diagonal moves, in order, no repeats."""
        ny = self.ny
        out = [path[0]]
        seen = {path[0]}
        for a, b in zip(path, path[1:]):
            ax, ay = divmod(a, ny)
            bx, by = divmod(b, ny)
            step = [b] if (ax == bx or ay == by) else sorted((ax * ny + by, bx * ny + ay)) + [b]
            for c in step:
                if c not in seen:
                    seen.add(c)
                    out.append(c)
        return out

    def nbhd(self, c: int) -> tuple[int, ...]:
        """``c`` and every cell within the buffer radius of it."""
        got = self._nbhd.get(c)
        if got is None:
            x, y = divmod(c, self.ny)
            got = tuple(
                px * self.ny + py
                for px in range(max(x - self.rx, 0), min(x + self.rx + 1, self.nx))
                for py in range(max(y - self.ry, 0), min(y + self.ry + 1, self.ny))
            )
            self._nbhd[c] = got
        return got

    def route(self, k: int, cells: Sequence[int], cost: float) -> Route:
        g = self.grid
        occupied = self.cells(cells)
        path = frozenset(occupied)
        dist = sum(self.step[(cells[i + 1] // self.ny - cells[i] // self.ny, cells[i + 1] % self.ny - cells[i] % self.ny)]
                   for i in range(len(cells) - 1))
        raw_risk = float(sum(g.theta[c] for c in occupied))
        buf = frozenset(buffer_cells(path, g))
        cb = CostBreakdown(dist, self.lambda_r * raw_risk, 0.0, cost, raw_risk, len(path) + len(buf))
        return Route(
            od_id=self.requests[k].id,
            waypoints=tuple(g.center(c) for c in cells),
            waypoint_cells=tuple(cells),
            path_cells=path,
            buffer_cells=buf,
            cost=cb,
            exempt_cells=frozenset(self.ends[k]),
        )

    def network(self, chosen: Sequence[tuple[float, Sequence[int]]]) -> RouteNetwork:
        routes = [self.route(k, cells, cost) for k, (cost, cells) in enumerate(chosen)]
        return assemble_network(routes, order=[r.id for r in self.requests])


# --------------------------------------------------------------------------
# exhaustive search


def _shortest(model: _Model, k: int, forbidden=frozenset()) -> tuple[float, list[int]] | None:
    s, t = model.ends[k]
    if s in forbidden or t in forbidden or not model.free[k][s] or not model.free[k][t]:
        return None
    g0 = model.start_cost(k)
    tie = itertools.count()
    heap = [(g0 + model.h(s, t), -g0, s, next(tie))]
    g = {s: g0}
    parent = {s: s}
    closed = set()
    while heap:
        f, ng, c, _ = heapq.heappop(heap)
        if c in closed:
            continue
        if c == t:
            path = [t]
            while path[-1] != s:
                path.append(parent[path[-1]])
            return g[t], path[::-1]
        closed.add(c)
        for q, w in model.neighbors(k, c, forbidden):
            cand = g[c] + w
            if cand < g.get(q, math.inf) - 1e-12:
                g[q] = cand
                parent[q] = c
                heapq.heappush(heap, (cand + model.h(q, t), -cand, q, next(tie)))
    return None


def _cost_to_go(model: _Model, k: int) -> dict[int, float]:
    """Exact cheapest cost from every cell to route ``k``'s goal (Dijkstra backwards from the goal)."""
    t = model.ends[k][1]
    theta = model.grid.theta
    dist = {t: 0.0}
    heap = [(0.0, t)]
    done = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        # moves are symmetric; only the entered-cell risk differs between directions
        for u, w in model.neighbors(k, v):
            cand = d + w + model.risk_w * float(theta[v] - theta[u])
            if cand < dist.get(u, math.inf) - 1e-12:
                dist[u] = cand
                heapq.heappush(heap, (cand, u))
    return dist


def _enumerate(model: _Model, k: int, bound: float, cap: int, counter: list[int],
               togo: dict[int, float]) -> tuple[list, float]:
    """All simple paths of route ``k`` with cost <= bound, plus the smallest pruned f-value (inf if none)."""
    s, t = model.ends[k]
    out = []
    cut = math.inf
    path = [s]
    on = {s}

    def dfs(c: int, cost: float):
        nonlocal cut
        if c == t:
            out.append((cost, list(path)))
            counter[0] += 1
            if counter[0] > cap:
                raise BoundExceeded("path enumeration cap reached", {"paths": counter[0]})
            return
        for q, w in model.neighbors(k, c):
            if q in on:
                continue
            nc = cost + w
            f = nc + togo.get(q, math.inf)
            if f > bound + 1e-9:
                cut = min(cut, f)
                continue
            on.add(q)
            path.append(q)
            dfs(q, nc)
            path.pop()
            on.discard(q)

    dfs(s, model.start_cost(k))
    out.sort(key=lambda e: (e[0], e[1]))
    return out, cut


def brute_force_optimal(grid: GridGraph, requests: Sequence[ODRequest], weights: CostWeights = CostWeights(0, 0),
                        *, buffers: bool = False, max_paths: int = 500_000,
                        max_cost: float = math.inf) -> OracleResult:
    """Cheapest conflict-free combination of simple paths, by exhaustive enumeration.

    Paths are enumerated per route within ``slack`` of that route's
    unconstrained optimum. Without a combination the slack grows to the
    smallest pruned cost, like iterative deepening; with one it jumps to that
    combination's excess, which makes the next round provably optimal.
    """
    model = _Model(grid, requests, weights)
    n = len(model.requests)
    if n == 0:
        return OracleResult(assemble_network([]), True, "optimal", {"paths": 0})
    base = []
    for k in range(n):
        sp = _shortest(model, k)
        if sp is None:
            return OracleResult(None, True, "infeasible", {"unreachable": model.requests[k].id})
        base.append(sp[0])
    lower = sum(base)
    slack = 0.0
    counter = [0]
    togo = [_cost_to_go(model, k) for k in range(n)]
    while True:
        per_route = []
        complete = True
        next_slack = math.inf
        for k in range(n):
            bound = min(base[k] + slack, max_cost)
            try:
                paths, cut = _enumerate(model, k, bound, max_paths, counter, togo[k])
            except BoundExceeded as exc:
                exc.stats.update({"slack": slack, "routes_done": k})
                raise
            complete &= cut == math.inf
            next_slack = min(next_slack, cut - base[k])
            per_route.append(paths)
        best = _best_combo(per_route, model, buffers)
        stats = {"paths": counter[0], "slack": slack}
        if best is not None and best[0] <= lower + slack + 1e-9:
            return OracleResult(model.network([(per_route[k][i][0], per_route[k][i][1]) for k, i in enumerate(best[1])]),
                                True, "optimal", stats)
        if complete:
            if best is None:
                return OracleResult(None, True, "infeasible", stats)
            return OracleResult(model.network([(per_route[k][i][0], per_route[k][i][1]) for k, i in enumerate(best[1])]),
                                True, "optimal", stats)
        if slack >= max_cost:
            raise BoundExceeded("cost bound reached without a provable optimum", stats)
        slack = (best[0] - lower) if best is not None else max(next_slack, slack + 1e-6)


def _best_combo(per_route, model: _Model, buffers: bool):
    """Cheapest pairwise-compatible pick of one path per route, as (cost, indices) or None.

    Compatibility between every pair of candidate lists is one matrix
    product; the first routes are chosen by pruned recursion and the last two
    by a masked minimum over their cost matrix.
    """
    n = len(per_route)
    if any(not pr for pr in per_route):
        return None
    size = model.grid.size
    costs, occ, zones = [], [], []
    for pr in per_route:
        costs.append(np.array([c for c, _ in pr]))
        m_occ = np.zeros((len(pr), size), dtype=np.float32)
        m_zone = np.zeros((len(pr), size), dtype=np.float32)
        for i, (_, p) in enumerate(pr):
            cells = model.cells(p)
            m_occ[i, cells] = 1
            if buffers:
                m_zone[i, [q for c in cells for q in model.nbhd(c)]] = 1
        occ.append(m_occ)
        zones.append(m_zone)
    compat = {}
    for i in range(n):
        for j in range(i + 1, n):
            if buffers:
                compat[i, j] = ((occ[i] @ zones[j].T) == 0) & ((zones[i] @ occ[j].T) == 0)
            else:
                compat[i, j] = (occ[i] @ occ[j].T) == 0
    if n == 1:
        return float(costs[0][0]), [0]
    mins = [float(c[0]) for c in costs]
    rest = [sum(mins[k + 1:]) for k in range(n)]
    best: list = [math.inf, None]
    chosen: list[int] = []

    def rec(k: int, acc: float, allowed: list[np.ndarray]):
        if k == n - 2:
            p, q = n - 2, n - 1
            ok = compat[p, q] & allowed[p][:, None] & allowed[q][None, :]
            if not ok.any():
                return
            tot = np.where(ok, costs[p][:, None] + costs[q][None, :], np.inf)
            flat = int(np.argmin(tot))
            val = acc + float(tot.flat[flat])
            if val < best[0] - 1e-12:
                i, j = divmod(flat, tot.shape[1])
                best[0], best[1] = val, chosen + [i, j]
            return
        for i in np.flatnonzero(allowed[k]):
            c = float(costs[k][i])
            if acc + c + rest[k] >= best[0] - 1e-12:
                break
            nxt = list(allowed)
            for j in range(k + 1, n):
                nxt[j] = allowed[j] & compat[k, j][i]
            chosen.append(int(i))
            rec(k + 1, acc + c, nxt)
            chosen.pop()

    rec(0, 0.0, [np.ones(len(c), dtype=bool) for c in costs])
    return None if best[1] is None else (best[0], best[1])


# --------------------------------------------------------------------------
# conflict-based search


def _first_conflict(model: _Model, paths: Sequence[list[int]], buffers: bool):
    """(route to constrain at the cell, cell, route to constrain around it) or None."""
    n = len(paths)
    occ = [model.cells(p) for p in paths]
    sets = [set(o) for o in occ]
    for i in range(n):
        for j in range(i + 1, n):
            common = sets[i] & sets[j]
            if common:
                return ("path", i, j, min(common))
            if buffers:
                for a, b in ((i, j), (j, i)):
                    hits = [c for c in occ[b] if any(q in sets[a] for q in model.nbhd(c))]
                    if hits:
                        return ("buffer", b, a, min(hits))
    return None


def cbs_spatial(grid: GridGraph, requests: Sequence[ODRequest], weights: CostWeights = CostWeights(0, 0),
                timeout: float = 60.0, *, buffers: bool = False, max_nodes: int = 1_000_000) -> OracleResult:
    """Best-first search over a constraint tree of forbidden cells.

    A path-path conflict on cell c branches into "route i avoids c" and
    "route j avoids c". A buffer conflict (c on route b's path, next to route
    a's path) branches into "b avoids c" and "a avoids every cell within the
    buffer radius of c".
    """
    model = _Model(grid, requests, weights)
    n = len(model.requests)
    t0 = time.perf_counter()
    if n == 0:
        return OracleResult(assemble_network([]), True, "optimal", {"nodes": 0})
    cons = tuple(frozenset() for _ in range(n))
    sols = []
    for k in range(n):
        sp = _shortest(model, k)
        if sp is None:
            return OracleResult(None, True, "infeasible", {"nodes": 0})
        sols.append(sp)
    tie = itertools.count()
    open_: list = [(sum(c for c, _ in sols), 0, next(tie), cons, tuple(sols))]
    nodes = 0
    while open_:
        if time.perf_counter() - t0 > timeout or nodes >= max_nodes:
            return OracleResult(None, False, "timeout", {"nodes": nodes, "seconds": time.perf_counter() - t0})
        cost, ncons, _, cons, sols = heapq.heappop(open_)
        nodes += 1
        conflict = _first_conflict(model, [p for _, p in sols], buffers)
        if conflict is None:
            return OracleResult(model.network(list(sols)), True, "optimal",
                                {"nodes": nodes, "seconds": time.perf_counter() - t0})
        kind, a, b, c = conflict
        branches = [(a, {c})]
        branches.append((b, {c} if kind == "path" else set(model.nbhd(c))))
        for k, cells in branches:
            new = cons[k] | cells
            if new == cons[k]:
                continue
            sp = _shortest(model, k, new)
            if sp is None:
                continue
            child_cons = cons[:k] + (new,) + cons[k + 1:]
            child_sols = sols[:k] + (sp,) + sols[k + 1:]
            heapq.heappush(open_, (sum(x for x, _ in child_sols), sum(len(x) for x in child_cons), next(tie),
                                   child_cons, child_sols))
    return OracleResult(None, True, "infeasible", {"nodes": nodes, "seconds": time.perf_counter() - t0})
