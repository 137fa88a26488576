import json
import random

import pytest

from tubenet.scenario import (
    ODRequest,
    ScenarioError,
    Urgency,
    VertiportKind,
    dump_scenario,
    load_benchmark_map,
    load_demand,
    load_scenario,
    map_cell_to_point,
    parse_benchmark_map,
    validate_demand,
)


def _square(x, y, s=5.0):
    return [[x, y], [x + s, y], [x + s, y + s], [x, y + s]]


def _doc(n_ports=7, n_obs=55, n_risk=22, requests=()):
    return {
        "name": "unit",
        "bounds": {"min": [0, 0, 0], "max": [1000, 1000, 200]},
        "flyable_band": [60, 120],
        "vertiports": [
            {"id": f"v{i}", "position": [50 + 100 * i, 20, 90], "radius": 10, "kind": "both"}
            for i in range(n_ports)
        ],
        "obstacles": [
            {"id": f"b{i}", "footprint": _square(10 * (i % 50), 100 + 20 * (i // 50)), "lowest_alt": 0,
             "highest_alt": 80}
            for i in range(n_obs)
        ],
        "risk_zones": [
            {"id": f"z{i}", "footprint": _square(20 * i, 500, 15), "theta_risk": 2.0 if i % 2 else 0.5}
            for i in range(n_risk)
        ],
        "od_requests": list(requests),
    }


def test_counts_survive_loading():
    sc = load_scenario(json.dumps(_doc()))
    assert (len(sc.vertiports), len(sc.obstacles), len(sc.risk_zones)) == (7, 55, 22)


def test_open_airspace_is_valid():
    sc = load_scenario(json.dumps(_doc(n_obs=0, n_risk=0)))
    assert sc.obstacles == () and sc.risk_zones == ()


def test_flat_prism_is_rejected_by_name():
    doc = _doc(n_obs=3)
    doc["obstacles"][1]["highest_alt"] = doc["obstacles"][1]["lowest_alt"]
    with pytest.raises(ScenarioError, match="b1"):
        load_scenario(json.dumps(doc))


@pytest.mark.parametrize("patch, where", [
    (lambda d: d["risk_zones"][0].update(theta_risk=1.0), "risk_zones[0]"),
    (lambda d: d["risk_zones"][0].update(theta_risk=-2.0), "risk_zones[0]"),
    (lambda d: d["vertiports"][1].update(id="v0"), "vertiports[1]"),
    (lambda d: d["vertiports"][0].update(position=[5000, 0, 90]), "vertiports[0]"),
    (lambda d: d.update(flyable_band=[120, 60]), "flyable_band"),
    (lambda d: d["obstacles"][0].update(footprint=[[0, 0], [10, 10], [10, 0], [0, 10]]), "obstacles[0]"),
])
def test_invalid_documents(patch, where):
    doc = _doc(n_obs=2, n_risk=2)
    patch(doc)
    with pytest.raises(ScenarioError) as info:
        load_scenario(json.dumps(doc))
    assert where in str(info.value)


def test_malformed_json_reports_position():
    with pytest.raises(ScenarioError, match="line 1"):
        load_scenario("{ not json")


def test_round_trip():
    reqs = [{"id": "r0", "origin_vertiport": "v0", "dest_vertiport": "v3", "urgency": "Urgent", "profit": -105}]
    sc = load_scenario(json.dumps(_doc(n_obs=4, n_risk=3, requests=reqs)))
    again = load_scenario(dump_scenario(sc))
    assert again == sc
    assert again.od_requests[0].urgency is Urgency.URGENT
    assert again.od_requests[0].profit == -105


def test_geodetic_origin_projects_to_metres():
    doc = _doc(n_obs=0, n_risk=0, n_ports=0)
    doc["geodetic_origin"] = [30.0, 120.0]
    doc["obstacles"] = [{"id": "b", "footprint": [[30.0, 120.0], [30.0, 120.001], [30.001, 120.001]],
                         "lowest_alt": 0, "highest_alt": 50}]
    sc = load_scenario(json.dumps(doc))
    xs = sorted(p[0] for p in sc.obstacles[0].footprint)
    ys = sorted(p[1] for p in sc.obstacles[0].footprint)
    assert xs[-1] == pytest.approx(96.3, abs=0.5)
    assert ys[-1] == pytest.approx(111.2, abs=0.5)


def test_demand_passthrough_and_errors():
    sc = load_scenario(json.dumps(_doc(n_obs=0, n_risk=0)))
    ids = [v.id for v in sc.vertiports]
    reqs = [ODRequest(f"r{i}", ids[i % 7], ids[(i + 1) % 7]) for i in range(12)]
    assert validate_demand(sc, reqs) == reqs
    assert validate_demand(sc, []) == []
    with pytest.raises(ScenarioError, match="r9"):
        validate_demand(sc, [ODRequest("r9", "v2", "v2")])
    with pytest.raises(ScenarioError, match="unknown vertiport"):
        validate_demand(sc, [ODRequest("r1", "v2", "nope")])


def test_vertiport_kind_is_checked():
    doc = _doc(n_obs=0, n_risk=0, n_ports=2)
    doc["vertiports"][0]["kind"] = "destination"
    sc = load_scenario(json.dumps(doc))
    assert sc.vertiports[0].kind is VertiportKind.DESTINATION
    with pytest.raises(ScenarioError, match="destination-only"):
        validate_demand(sc, [ODRequest("r", "v0", "v1")])


def test_load_demand_accepts_both_shapes():
    items = [{"id": "a", "origin_vertiport": "x", "dest_vertiport": "y", "urgency": "low"}]
    assert load_demand(json.dumps(items)) == load_demand(json.dumps({"od_requests": items}))
    assert load_demand(json.dumps(items))[0].urgency is Urgency.LOW
    with pytest.raises(ScenarioError, match="urgency"):
        load_demand(json.dumps([dict(items[0], urgency="asap")]))


def _map_text(rows):
    return "type octile\nheight %d\nwidth %d\nmap\n%s\n" % (len(rows), len(rows[0]), "\n".join(rows))


def test_benchmark_map_blocked_count():
    rng = random.Random(7)
    blocked = set(rng.sample(range(256 * 256), 6528))
    rows = ["".join("@" if r * 256 + c in blocked else "." for c in range(256)) for r in range(256)]
    sc = load_benchmark_map(_map_text(rows))
    assert len(sc.obstacles) == 6528


def test_benchmark_map_small_cases():
    assert load_benchmark_map(_map_text(["...", "...", "..."])).obstacles == ()
    with pytest.raises(ScenarioError, match="4 rows"):
        parse_benchmark_map("type octile\nheight 4\nwidth 4\nmap\n....\n....\n....\n")
    with pytest.raises(ScenarioError, match="unknown cell"):
        parse_benchmark_map(_map_text(["..", ".x"]))


def test_benchmark_map_orientation():
    # first text row is the northern edge
    sc = load_benchmark_map(_map_text(["@.", ".."]), cell_size=2.0)
    (ob,) = sc.obstacles
    assert min(p[1] for p in ob.footprint) == 2.0
    assert map_cell_to_point(0, 0, 2, 2.0) == (1.0, 3.0, 1.0)
