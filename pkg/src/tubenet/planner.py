"""Sequential network planning over K prioritized sequences."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_grid, check_requests
from .grid import CostBreakdown, GridGraph, OccupancyOverlay, Route
from .pathfinder import (
    CalibrationError,
    CostWeights,
    InvalidEndpointError,
    NoPathError,
    SearchOptions,
    calibrate_lambdas,
    find_path,
)
from .prioritizer import ODSequence, PrioritySpec, generate_sequences
from .scenario import ODRequest

DEFAULT_THETA_MAX = 1.5


class InfeasibleNetworkError(RuntimeError):
    """No sequence produced a usable network."""

    def __init__(self, message: str, failures: dict[int, list[str]] | None = None):
        super().__init__(message)
        self.failures = failures or {}


@dataclass
class RouteNetwork:
    sequence_id: int
    order: tuple[str, ...]
    routes: list[Route]
    totals: CostBreakdown
    path_cells: frozenset[int]
    buffer_cells: frozenset[int]
    failures: list[str] = field(default_factory=list)
    elapsed: float = 0.0
    risk_pass: dict[str, bool] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return not self.failures

    @property
    def total_occupied(self) -> int:
        return len(self.path_cells) + len(self.buffer_cells)

    @property
    def risk_ok(self) -> bool:
        return all(self.risk_pass.values())

    def route(self, od_id: str) -> Route:
        for r in self.routes:
            if r.od_id == od_id:
                return r
        raise KeyError(od_id)

    def summary(self) -> dict:
        return {
            "sequence_id": self.sequence_id,
            "order": list(self.order),
            "feasible": self.feasible,
            "risk_ok": self.risk_ok,
            "failures": list(self.failures),
            "total": self.totals.total,
            "operational": self.totals.operational,
            "risk": self.totals.risk,
            "space": self.totals.space,
            "raw_risk": self.totals.raw_risk,
            "path_cells": len(self.path_cells),
            "buffer_cells": len(self.buffer_cells),
            "total_occupied": self.total_occupied,
            "elapsed_s": self.elapsed,
        }


def assemble_network(routes: Sequence[Route], *, sequence_id: int = 0, order: Iterable[str] = (),
                     failures: Iterable[str] = (), elapsed: float = 0.0,
                     grid: GridGraph | None = None, theta_max: float = DEFAULT_THETA_MAX) -> RouteNetwork:
    totals = CostBreakdown()
    paths: set[int] = set()
    bufs: set[int] = set()
    for r in routes:
        totals = totals + r.cost
        paths |= r.path_cells
        bufs |= r.buffer_cells
    net = RouteNetwork(
        sequence_id=sequence_id,
        order=tuple(order) or tuple(r.od_id for r in routes),
        routes=list(routes),
        totals=totals,
        path_cells=frozenset(paths),
        buffer_cells=frozenset(bufs - paths),
        failures=list(failures),
        elapsed=elapsed,
    )
    if grid is not None:
        net.risk_pass = risk_check(net, grid, theta_max)
    return net


def risk_check(network: RouteNetwork, grid: GridGraph, theta_max: float = DEFAULT_THETA_MAX) -> dict[str, bool]:
    """Per-route verdict: the mean risk level over its path cells must not exceed ``theta_max``."""
    out = {}
    for r in network.routes:
        cells = np.fromiter(r.path_cells, dtype=np.int64)
        out[r.od_id] = bool(cells.size == 0 or grid.theta[cells].mean() <= theta_max)
    return out


class LambdaCache:
    """Per-OD calibrated lambdas, shared across sequences."""

    def __init__(self, grid: GridGraph, weights: CostWeights, options: SearchOptions):
        self.grid = grid
        self.weights = weights
        self.options = options
        self.values: dict[str, tuple[float, float] | CalibrationError] = {}

    def get(self, od: ODRequest) -> tuple[float, float]:
        if self.weights.calibrated:
            return self.weights.lambda_r, self.weights.lambda_p
        v = self.values.get(od.id)
        if v is None:
            try:
                v = calibrate_lambdas(self.grid, od, self.weights, self.options)
            except (CalibrationError, InvalidEndpointError) as exc:
                v = CalibrationError(str(exc))
            self.values[od.id] = v
        if isinstance(v, Exception):
            raise v
        return v


def plan_sequence(grid: GridGraph, sequence: Sequence[ODRequest], weights: CostWeights = CostWeights(),
                  options: SearchOptions = SearchOptions(), *, sequence_id: int = 0,
                  lambdas: LambdaCache | None = None, theta_max: float = DEFAULT_THETA_MAX) -> RouteNetwork:
    """Plan ODs one after another on a fresh overlay; failures are recorded, not raised."""
    t0 = time.perf_counter()
    cache = lambdas or LambdaCache(grid, weights, options)
    overlay = OccupancyOverlay(grid)
    routes: list[Route] = []
    failures: list[str] = []
    for od in sequence:
        try:
            route = find_path(overlay, od, weights, options, lambdas=cache.get(od))
        except (NoPathError, InvalidEndpointError, CalibrationError):
            failures.append(od.id)
            continue
        overlay.apply_route(route)
        routes.append(route)
    return assemble_network(routes, sequence_id=sequence_id, order=[od.id for od in sequence], failures=failures,
                            elapsed=time.perf_counter() - t0, grid=grid, theta_max=theta_max)


def evaluate_sequences(grid: GridGraph, requests: Sequence[ODRequest], sequences: Sequence[ODSequence],
                       weights: CostWeights = CostWeights(), options: SearchOptions = SearchOptions(), *,
                       n_jobs: int = 1, theta_max: float = DEFAULT_THETA_MAX,
                       lambdas: LambdaCache | None = None) -> list[RouteNetwork]:
    """Plan every sequence; each gets its own overlay so they can run in parallel."""
    by_id = {r.id: r for r in requests}
    cache = lambdas or LambdaCache(grid, weights, options)
    for r in requests:
        try:
            cache.get(r)
        except CalibrationError:
            pass

    def run(k: int) -> RouteNetwork:
        seq = [by_id[i] for i in sequences[k].ids]
        return plan_sequence(grid, seq, weights, options, sequence_id=k, lambdas=cache, theta_max=theta_max)

    if n_jobs == 1 or len(sequences) <= 1:
        return [run(k) for k in range(len(sequences))]
    with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
        return list(pool.map(run, range(len(sequences))))


def select_network(networks: Sequence[RouteNetwork]) -> RouteNetwork:
    """Cheapest feasible network passing the risk check; ties go to the lower sequence id."""
    feasible = [n for n in networks if n.feasible]
    if not feasible:
        raise InfeasibleNetworkError(
            "fail to generate a feasible route network",
            {n.sequence_id: list(n.failures) for n in networks},
        )
    passing = [n for n in feasible if n.risk_ok]
    if not passing:
        raise InfeasibleNetworkError(
            "every feasible network has a route over the risk threshold",
            {n.sequence_id: [k for k, ok in n.risk_pass.items() if not ok] for n in feasible},
        )
    return min(passing, key=lambda n: (n.totals.total, n.sequence_id))


def plan_network(grid: GridGraph, requests: Sequence[ODRequest], priority: PrioritySpec = PrioritySpec(),
                 weights: CostWeights = CostWeights(), options: SearchOptions = SearchOptions(), *,
                 n_jobs: int = 1, theta_max: float = DEFAULT_THETA_MAX) -> RouteNetwork:
    sequences = generate_sequences(requests, priority)
    networks = evaluate_sequences(grid, requests, sequences, weights, options, n_jobs=n_jobs, theta_max=theta_max)
    return select_network(networks)


class RouteNetworkPlanner(BaseEstimator):
    """Estimator-style wrapper around :func:`plan_network`.

    ``fit(grid, requests)`` plans and stores ``network_`` (the selected
    network), ``networks_`` (all K), ``sequences_`` and ``lambdas_``.
    """

    def __init__(self, omega_r=1.0, omega_p=1.0, lambda_turning=0.0, lambda_climbing=0.0,
                 lambda_descending=0.0, lambda_r=None, lambda_p=None, epsilon_v=1000.0, K=1,
                 random_state=0, use_urgency=True, theta_max=DEFAULT_THETA_MAX, heuristic="euclidean",
                 heuristic_weight=1.0, any_angle=True, n_jobs=1):
        self.omega_r = omega_r
        self.omega_p = omega_p
        self.lambda_turning = lambda_turning
        self.lambda_climbing = lambda_climbing
        self.lambda_descending = lambda_descending
        self.lambda_r = lambda_r
        self.lambda_p = lambda_p
        self.epsilon_v = epsilon_v
        self.K = K
        self.random_state = random_state
        self.use_urgency = use_urgency
        self.theta_max = theta_max
        self.heuristic = heuristic
        self.heuristic_weight = heuristic_weight
        self.any_angle = any_angle
        self.n_jobs = n_jobs

    def _weights(self) -> CostWeights:
        return CostWeights(self.omega_r, self.omega_p, self.lambda_turning, self.lambda_climbing,
                           self.lambda_descending, self.lambda_r, self.lambda_p)

    def _options(self) -> SearchOptions:
        return SearchOptions(self.heuristic, self.heuristic_weight, self.any_angle)

    def fit(self, grid: GridGraph, requests: Sequence[ODRequest] | None = None):
        grid = check_grid(grid)
        requests = check_requests(grid, requests)
        weights, options = self._weights(), self._options()
        spec = PrioritySpec(self.epsilon_v, self.K, self.random_state, self.use_urgency)
        self.sequences_ = generate_sequences(requests, spec)
        cache = LambdaCache(grid, weights, options)
        self.networks_ = evaluate_sequences(grid, requests, self.sequences_, weights, options,
                                            n_jobs=self.n_jobs, theta_max=self.theta_max, lambdas=cache)
        self.lambdas_ = {k: v for k, v in cache.values.items() if not isinstance(v, Exception)}
        self.network_ = select_network(self.networks_)
        self.grid_ = grid
        return self

    def predict(self, requests: Sequence[ODRequest] | None = None) -> list[Route | None]:
        """Planned route per request id (None for ODs not in the network)."""
        if not hasattr(self, "network_"):
            raise AttributeError("call fit() first")
        ids = [r.id for r in (requests or [])] or list(self.network_.order)
        by_id = {r.od_id: r for r in self.network_.routes}
        return [by_id.get(i) for i in ids]

    def score(self, grid=None, requests=None) -> float:
        """Negative total cost of the selected network (higher is better)."""
        if not hasattr(self, "network_"):
            raise AttributeError("call fit() first")
        return -self.network_.totals.total
