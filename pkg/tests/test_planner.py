import numpy as np
import pytest
from sklearn.base import clone

from tubenet.grid import build_route, discretize
from tubenet.pathfinder import CostWeights
from tubenet.planner import (
    InfeasibleNetworkError,
    RouteNetworkPlanner,
    assemble_network,
    evaluate_sequences,
    plan_network,
    plan_sequence,
    risk_check,
    select_network,
)
from tubenet.prioritizer import PrioritySpec, generate_sequences
from tubenet.scenario import Box3, ODRequest, ObstaclePrism, RiskZone, Scenario
from tubenet.synthetic import random_instance

from conftest import od, open_layer, port

UNIT = CostWeights(0, 0, lambda_r=1, lambda_p=1)


@pytest.fixture(scope="module")
def ordered_pair():
    # reversing the two requests makes the second one unroutable
    sc = random_instance(31, 2, size=10, density=0.3, min_len=4)
    return sc, discretize(sc, 10, obstacle_margin=0)


def test_single_sequence_equals_plan_sequence(toy_grid, toy):
    reqs = list(toy.od_requests[:3])
    net = plan_network(toy_grid, reqs, PrioritySpec(K=1), CostWeights(1, 1))
    (seq,) = generate_sequences(reqs, PrioritySpec(K=1))
    by_id = {r.id: r for r in reqs}
    ref = plan_sequence(toy_grid, [by_id[i] for i in seq.ids], CostWeights(1, 1))
    assert net.order == ref.order
    assert [r.waypoint_cells for r in net.routes] == [r.waypoint_cells for r in ref.routes]
    assert net.totals == ref.totals


def test_a_feasible_ordering_wins(ordered_pair):
    sc, g = ordered_pair
    reqs = list(sc.od_requests)
    nets = evaluate_sequences(g, reqs, generate_sequences(reqs, PrioritySpec(K=2)), UNIT)
    assert sorted(n.feasible for n in nets) == [False, True]
    net = plan_network(g, reqs, PrioritySpec(K=2), UNIT)
    assert net.feasible and net.order == ("r0", "r1")
    with pytest.raises(InfeasibleNetworkError) as info:
        plan_network(g, list(reversed(reqs)), PrioritySpec(epsilon_v=1e-9, K=1, use_urgency=False), UNIT)
    assert info.value.failures


def test_walled_in_demand_is_infeasible():
    wall = ObstaclePrism("w", ((40.0, 0.0), (60.0, 0.0), (60.0, 100.0), (40.0, 100.0)), 0.0, 10.0)
    sc = Scenario(Box3((0.0, 0.0, 0.0), (100.0, 100.0, 10.0)), (0.0, 10.0),
                  vertiports=(port("a", 1, 5), port("b", 8, 5)), obstacles=(wall,),
                  od_requests=(od("x", "a", "b"), od("y", "b", "a")))
    g = discretize(sc, 10, obstacle_margin=0)
    with pytest.raises(InfeasibleNetworkError, match="fail to generate") as info:
        plan_network(g, sc.od_requests, PrioritySpec(K=2))
    assert all(set(f) == {"x", "y"} for f in info.value.failures.values())


def test_risk_check_examples():
    hot = RiskZone("hot", ((0.0, 0.0), (100.0, 0.0), (100.0, 50.0), (0.0, 50.0)), 2.0)
    sc = open_layer(10)
    g = discretize(Scenario(sc.bounding_box, sc.flyable_band, risk_zones=(hot,)), 10)
    calm = build_route(g, "calm", [g.index(0, 8), g.index(9, 8)])
    burn = build_route(g, "burn", [g.index(0, 2), g.index(9, 2)])
    net = assemble_network([calm, burn])
    assert risk_check(net, g, 1.5) == {"calm": True, "burn": False}
    assert risk_check(net, g, 2.0) == {"calm": True, "burn": True}
    assert risk_check(assemble_network([]), g) == {}
    risky = assemble_network([calm, burn], grid=g)
    assert not risky.risk_ok
    with pytest.raises(InfeasibleNetworkError, match="risk threshold"):
        select_network([risky])


def test_selection_prefers_lowest_cost_then_lowest_id(toy_grid):
    a = build_route(toy_grid, "a", [toy_grid.index(2, 2), toy_grid.index(10, 2)])
    b = build_route(toy_grid, "a", [toy_grid.index(2, 2), toy_grid.index(20, 2)])
    nets = [assemble_network([b], sequence_id=0), assemble_network([a], sequence_id=1),
            assemble_network([a], sequence_id=2)]
    for n, total in zip(nets, (5.0, 3.0, 3.0)):
        n.totals = n.totals.__class__(total=total)
    assert select_network(nets).sequence_id == 1


def test_threads_do_not_change_the_answer(toy_grid, toy):
    reqs = list(toy.od_requests)
    spec = PrioritySpec(epsilon_v=1000, K=4, rng_seed=1)
    one = plan_network(toy_grid, reqs, spec, CostWeights(1, 1))
    two = plan_network(toy_grid, reqs, spec, CostWeights(1, 1), n_jobs=2)
    assert one.order == two.order and one.totals == two.totals


def test_estimator_api(toy_grid, toy):
    est = RouteNetworkPlanner(omega_p=1.0, K=2, random_state=5)
    assert est.get_params()["K"] == 2
    twin = clone(est)
    assert twin.get_params() == est.get_params() and not hasattr(twin, "network_")
    with pytest.raises(AttributeError):
        est.predict()
    est.fit(toy_grid, toy.od_requests[:3])
    assert len(est.networks_) == 2 and len(est.sequences_) == 2
    assert set(est.lambdas_) == {"3-8", "2-7", "4-9"}
    routes = est.predict()
    assert [r.od_id for r in routes] == list(est.network_.order)
    assert est.predict([ODRequest("nope", "1", "6")]) == [None]
    assert est.score() == pytest.approx(-est.network_.totals.total)
    again = clone(est).fit(toy_grid, toy.od_requests[:3])
    assert again.network_.totals == est.network_.totals


def test_estimator_input_checks(toy_grid):
    with pytest.raises(TypeError):
        RouteNetworkPlanner().fit("not a grid")
    with pytest.raises(ValueError):
        RouteNetworkPlanner().fit(toy_grid, [ODRequest("x", "1", "nowhere")])


def test_network_metrics(toy_grid, toy):
    net = plan_sequence(toy_grid, toy.od_requests[:3], CostWeights(0, 1))
    assert net.total_occupied == len(net.path_cells) + len(net.buffer_cells)
    assert not (net.path_cells & net.buffer_cells)
    s = net.summary()
    assert s["total_occupied"] == net.total_occupied and s["feasible"]
    assert np.isclose(s["total"], sum(r.cost.total for r in net.routes))
    assert net.route("2-7").od_id == "2-7"
    with pytest.raises(KeyError):
        net.route("zzz")
