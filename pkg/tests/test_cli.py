import csv
import json

import numpy as np
import pytest

from tubenet.cli import main
from tubenet.scenario import dump_scenario
from tubenet.synthetic import toy_scenario

TOY = ["--builtin", "toy", "--omega-r", "0", "--eps-v", "50"]


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def bench_map(tmp_path_factory):
    rng = np.random.default_rng(11)
    blocked = rng.random((24, 24)) < 0.12
    rows = ["".join("@" if b else "." for b in row) for row in blocked]
    path = tmp_path_factory.mktemp("maps") / "random.map"
    path.write_text("type octile\nheight 24\nwidth 24\nmap\n" + "\n".join(rows) + "\n")
    return path


def test_plan_writes_outputs(tmp_path, capsys):
    assert main(["plan", *TOY, "--ods", "3", "--omega-p", "1", "--out", str(tmp_path), "--dump-overlay"]) == 0
    doc = json.loads((tmp_path / "network.json").read_text())
    assert [r["od_id"] for r in doc["routes"]] == ["3-8", "2-7", "4-9"]
    assert doc["totals"]["total_occupied"] == doc["totals"]["path_cells"] + doc["totals"]["buffer_cells"]
    assert (tmp_path / "network.svg").read_text().startswith("<svg")
    assert (tmp_path / "overlay.txt").read_text().startswith("layer 0")
    (row,) = _rows(tmp_path / "metrics.csv")
    assert row["selected"] == "true" and int(row["total_occupied"]) == doc["totals"]["total_occupied"]
    assert "occupied" in capsys.readouterr().out


def test_plan_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["plan", *TOY, "--ods", "3", "-K", "3", "--eps-v", "1000", "--seed", "2", "--out", str(out)]) == 0
    for name in ("network.json", "network.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_space_cost_reduces_toy_occupancy(tmp_path):
    occ = {}
    for wp in ("0", "1"):
        out = tmp_path / wp
        assert main(["plan", *TOY, "--ods", "3", "--omega-p", wp, "--out", str(out)]) == 0
        occ[wp] = json.loads((out / "network.json").read_text())["totals"]["total_occupied"]
    assert occ["1"] < occ["0"]


def test_infeasible_exit_code(tmp_path, capsys):
    assert main(["plan", *TOY, "--omega-p", "0", "--out", str(tmp_path)]) == 2
    assert "fail to generate" in capsys.readouterr().err
    assert not (tmp_path / "network.json").exists()
    assert _rows(tmp_path / "metrics.csv")[0]["failures"]


def test_input_errors(tmp_path, capsys):
    assert main(["plan", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert "cannot read" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    doc = json.loads(dump_scenario(toy_scenario()))
    doc["obstacles"][0]["highest_alt"] = doc["obstacles"][0]["lowest_alt"]
    bad.write_text(json.dumps(doc))
    assert main(["plan", "--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert doc["obstacles"][0]["id"] in capsys.readouterr().err
    assert main(["calibrate", "--builtin", "toy", "--od", "nope"]) == 1


def test_scenario_file_with_separate_demand(tmp_path):
    sc = tmp_path / "toy.json"
    sc.write_text(dump_scenario(toy_scenario()))
    demand = tmp_path / "demand.json"
    demand.write_text(json.dumps([{"id": "x", "origin_vertiport": "1", "dest_vertiport": "6"}]))
    out = tmp_path / "out"
    assert main(["plan", "--scenario", str(sc), "--demand", str(demand), "--out", str(out)]) == 0
    assert [r["od_id"] for r in json.loads((out / "network.json").read_text())["routes"]] == ["x"]


def test_calibrate_prints_lambdas(capsys):
    assert main(["calibrate", "--builtin", "toy", "--od", "3-8"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("lambda_r=") and "lambda_p=" in out


def test_benchmark_single_route_agreement(tmp_path, bench_map):
    assert main(["benchmark", "--map", str(bench_map), "--routes", "1", "--no-any-angle",
                 "--seed", "3", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "benchmark.csv")
    assert [r["solver"] for r in rows] == ["seq", "cbs", "brute"]
    dists = [float(r["distance"]) for r in rows]
    assert max(dists) <= min(dists) * 1.01


def test_benchmark_markers_and_empty_demand(tmp_path, bench_map):
    assert main(["benchmark", "--map", str(bench_map), "--routes", "4", "--solvers", "cbs,brute",
                 "--timeout", "0", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "benchmark.csv")
    assert len(rows) == 8
    assert all(r["distance"] == "-" for r in rows if r["solver"] == "cbs")
    # enumeration is not attempted past three routes
    assert rows[-1]["solver"] == "brute" and rows[-1]["distance"] == "-"
    empty = tmp_path / "empty"
    assert main(["benchmark", "--map", str(bench_map), "--routes", "0", "--out", str(empty)]) == 0
    assert (empty / "benchmark.csv").read_text() == "routes,solver,distance,occupied_cells,seconds\n"
    assert main(["benchmark", "--map", str(bench_map), "--solvers", "magic", "--out", str(empty)]) == 1


def test_sweep_rows(tmp_path):
    assert main(["sweep", *TOY, "--ods", "3", "--param", "omega_p", "--values", "1", "--out", str(tmp_path)]) == 0
    (row,) = _rows(tmp_path / "sweep.csv")
    assert row["param"] == "omega_p" and row["feasible"] == "true"
    out = tmp_path / "multi"
    assert main(["sweep", *TOY, "--param", "omega_p", "--values", "0,1", "--out", str(out)]) == 0
    rows = _rows(out / "sweep.csv")
    assert [r["feasible"] for r in rows] == ["false", "true"]
    assert rows[0]["total_occupied"] == "#"
    assert main(["sweep", *TOY, "--param", "K", "--values", "1.5", "--out", str(out)]) == 1
