import pytest

from tubenet.grid import discretize
from tubenet.scenario import Box3, ODRequest, Scenario, Vertiport
from tubenet.synthetic import toy_scenario


def open_layer(n: int = 10, cell: float = 10.0, ports=(), requests=()) -> Scenario:
    """Empty single-layer n x n world."""
    return Scenario(
        bounding_box=Box3((0.0, 0.0, 0.0), (n * cell, n * cell, cell)),
        flyable_band=(0.0, cell),
        vertiports=tuple(ports),
        od_requests=tuple(requests),
    )


def port(vid: str, x: int, y: int, cell: float = 10.0) -> Vertiport:
    return Vertiport(vid, ((x + 0.5) * cell, (y + 0.5) * cell, 0.5 * cell))


def od(rid: str, a: str, b: str, **kw) -> ODRequest:
    return ODRequest(rid, a, b, **kw)


@pytest.fixture(scope="session")
def toy():
    return toy_scenario()


@pytest.fixture(scope="session")
def toy_grid(toy):
    return discretize(toy, 10)
