"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

from typing import Sequence

from .grid import GridGraph
from .scenario import ODRequest, ScenarioError


def check_grid(grid) -> GridGraph:
    if not isinstance(grid, GridGraph):
        raise TypeError(f"expected a GridGraph, got {type(grid).__name__}")
    return grid


def check_requests(grid: GridGraph, requests: Sequence[ODRequest] | None) -> list[ODRequest]:
    """Default to the scenario's embedded demand; every endpoint must be a known vertiport."""
    if requests is None:
        if grid.scenario is None:
            raise ValueError("no requests given and the grid carries no scenario")
        requests = grid.scenario.od_requests
    out = list(requests)
    seen = set()
    for r in out:
        if not isinstance(r, ODRequest):
            raise TypeError(f"expected ODRequest, got {type(r).__name__}")
        if r.id in seen:
            raise ScenarioError(f"duplicate request id {r.id!r}", where=f"od_requests[{r.id}]")
        seen.add(r.id)
        for vid in (r.origin_vertiport, r.dest_vertiport):
            if vid not in grid.vertiport_cell:
                raise ScenarioError(f"request {r.id!r} names unknown vertiport {vid!r}", where=f"od_requests[{r.id}]")
        if r.origin_vertiport == r.dest_vertiport:
            raise ScenarioError(f"request {r.id!r} starts and ends at {r.origin_vertiport!r}",
                                where=f"od_requests[{r.id}]")
    return out
