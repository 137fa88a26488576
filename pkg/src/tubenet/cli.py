"""Command-line entry point: ``tubenet plan|benchmark|sweep|calibrate``.

Exit codes: 0 success (feasible network), 1 bad input, 2 no feasible network.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

from .grid import GridError, GridGraph, OccupancyOverlay, discretize
from .oracle import BoundExceeded, brute_force_optimal, cbs_spatial
from .pathfinder import CalibrationError, CostWeights, InvalidEndpointError, SearchOptions, calibrate_lambdas
from .planner import (
    DEFAULT_THETA_MAX,
    InfeasibleNetworkError,
    LambdaCache,
    RouteNetwork,
    evaluate_sequences,
    select_network,
)
from .prioritizer import PrioritySpec, build_segments, count_arrangements, generate_sequences
from .render import render_svg
from .scenario import Scenario, ScenarioError, load_benchmark_map, load_demand, read_scenario, validate_demand
from .synthetic import add_random_demand, synthetic_city, toy_scenario

log = logging.getLogger("tubenet")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2
TIMEOUT_MARK, INFEASIBLE_MARK = "-", "#"

METRIC_COLUMNS = ["sequence_id", "selected", "feasible", "risk_ok", "failures", "total", "operational", "risk",
                  "space", "raw_risk", "path_cells", "buffer_cells", "total_occupied", "seconds"]
BENCH_COLUMNS = ["routes", "solver", "distance", "occupied_cells", "seconds"]
SWEEP_COLUMNS = ["param", "value", "feasible", "failures", "total_occupied", "path_cells", "buffer_cells",
                 "raw_risk", "risk", "operational", "total", "seconds"]
SWEEP_PARAMS = ("omega_p", "omega_r", "K", "eps_v", "n_ods", "theta_max")


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# shared option groups


def _add_world(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=Path, help="scenario JSON document")
    src.add_argument("--builtin", choices=["toy", "city"], help="packaged toy layout or seeded synthetic city")
    p.add_argument("--demand", type=Path, help="demand JSON replacing the scenario's own requests")
    p.add_argument("--ods", type=int, help="keep only the first N requests")
    p.add_argument("--city-seed", type=int, default=0, help="seed for --builtin city")
    p.add_argument("--city-ods", type=int, default=40, help="request count for --builtin city")
    p.add_argument("--cell-size", type=float, default=10.0, help="cell edge in metres")
    p.add_argument("--buffer-radius", type=int, default=1, help="buffer ring width in cells")


def _add_weights(p: argparse.ArgumentParser) -> None:
    p.add_argument("--omega-r", type=float, default=1.0)
    p.add_argument("--omega-p", type=float, default=1.0)
    p.add_argument("--lambda-turning", type=float, default=0.0)
    p.add_argument("--lambda-climbing", type=float, default=0.0)
    p.add_argument("--lambda-descending", type=float, default=0.0)
    p.add_argument("--lambda-r", type=float, help="fixed risk scale (calibrated per OD when omitted)")
    p.add_argument("--lambda-p", type=float, help="fixed space scale (calibrated per OD when omitted)")
    p.add_argument("--heuristic", choices=["euclidean", "cost_aware"], default="euclidean")
    p.add_argument("--heuristic-weight", type=float, default=1.0)


def _add_priority(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps-v", type=float, default=1000.0, help="profit segmentation threshold")
    p.add_argument("-K", type=int, default=1, help="number of planning sequences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-urgency", action="store_true", help="ignore urgency classes when ordering")
    p.add_argument("--theta-max", type=float, default=DEFAULT_THETA_MAX)
    p.add_argument("--jobs", type=int, default=1, help="threads for sequence evaluation")


def _scenario(args) -> Scenario:
    if args.builtin == "toy":
        sc = toy_scenario()
    elif args.builtin == "city":
        sc = synthetic_city(args.city_seed, args.city_ods)
    else:
        try:
            sc = read_scenario(args.scenario, args.demand)
        except OSError as exc:
            raise InputError(f"cannot read input: {exc}") from None
    if args.builtin and args.demand:
        try:
            demand = load_demand(Path(args.demand).read_bytes())
        except OSError as exc:
            raise InputError(f"cannot read input: {exc}") from None
        sc = Scenario(sc.bounding_box, sc.flyable_band, sc.vertiports, sc.obstacles, sc.risk_zones,
                      tuple(validate_demand(sc, demand)), sc.name)
    if args.ods is not None:
        if args.ods < 0:
            raise InputError("--ods must be >= 0")
        sc = Scenario(sc.bounding_box, sc.flyable_band, sc.vertiports, sc.obstacles, sc.risk_zones,
                      sc.od_requests[: args.ods], sc.name)
    return sc


def _grid(args, sc: Scenario) -> GridGraph:
    return discretize(sc, args.cell_size, buffer_radius=args.buffer_radius)


def _weights(args) -> CostWeights:
    return CostWeights(args.omega_r, args.omega_p, args.lambda_turning, args.lambda_climbing,
                       args.lambda_descending, args.lambda_r, args.lambda_p)


def _options(args) -> SearchOptions:
    return SearchOptions(args.heuristic, args.heuristic_weight)


def _priority(args) -> PrioritySpec:
    return PrioritySpec(args.eps_v, args.K, args.seed, not args.no_urgency)


def _num(v: float) -> float | int:
    return round(v, 6) if isinstance(v, float) else v


def network_document(grid: GridGraph, net: RouteNetwork, networks: Sequence[RouteNetwork]) -> dict:
    """JSON-ready description of the selected network plus every sequence's summary (no timings)."""

    def summary(n: RouteNetwork) -> dict:
        s = n.summary()
        s.pop("elapsed_s")
        return {k: _num(v) for k, v in s.items()}

    routes = []
    for r in net.routes:
        cb = r.cost
        routes.append({
            "od_id": r.od_id,
            "waypoints": [[_num(float(c)) for c in p] for p in r.waypoints],
            "waypoint_cells": list(r.waypoint_cells),
            "path_cells": sorted(r.path_cells),
            "buffer_cells": sorted(r.buffer_cells),
            "length": _num(r.length),
            "cost": {"operational": _num(cb.operational), "risk": _num(cb.risk), "space": _num(cb.space),
                     "total": _num(cb.total), "raw_risk": _num(cb.raw_risk), "raw_space": cb.raw_space},
            "risk_ok": net.risk_pass.get(r.od_id, True),
        })
    return {
        "scenario": grid.scenario.name if grid.scenario else "",
        "grid": {"dims": list(grid.dims), "cell_size": list(grid.cell_size), "origin": list(grid.origin)},
        "selected_sequence": net.sequence_id,
        "order": list(net.order),
        "totals": summary(net),
        "routes": routes,
        "sequences": [summary(n) for n in networks],
    }


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6g}" if abs(v) < 1e15 else str(v)
    return str(v)


def _metric_row(n: RouteNetwork, selected: int | None) -> dict:
    s = n.summary()
    row = {k: _fmt(s[k]) for k in ("sequence_id", "feasible", "risk_ok", "total", "operational", "risk", "space",
                                   "raw_risk", "path_cells", "buffer_cells", "total_occupied")}
    row["selected"] = _fmt(n.sequence_id == selected)
    row["failures"] = ";".join(n.failures)
    row["seconds"] = f"{n.elapsed:.3f}"
    return row


# --------------------------------------------------------------------------
# commands


def cmd_plan(args) -> int:
    sc = _scenario(args)
    grid = _grid(args, sc)
    requests = list(sc.od_requests)
    weights, options = _weights(args), _options(args)
    sequences = generate_sequences(requests, _priority(args))
    cache = LambdaCache(grid, weights, options)
    networks = evaluate_sequences(grid, requests, sequences, weights, options, n_jobs=args.jobs,
                                  theta_max=args.theta_max, lambdas=cache)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        net = select_network(networks)
    except InfeasibleNetworkError as exc:
        _write_csv(out / "metrics.csv", METRIC_COLUMNS, [_metric_row(n, None) for n in networks])
        print(f"error: {exc}", file=sys.stderr)
        for sid, fails in sorted(exc.failures.items()):
            print(f"  sequence {sid}: {', '.join(fails)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    doc = network_document(grid, net, networks)
    (out / "network.json").write_text(json.dumps(doc, indent=1) + "\n")
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, [_metric_row(n, net.sequence_id) for n in networks])
    (out / "network.svg").write_text(render_svg(grid, net.routes, title=sc.name or None))
    if args.dump_overlay:
        ov = OccupancyOverlay(grid)
        for r in net.routes:
            ov.apply_route(r)
        (out / "overlay.txt").write_text(ov.dump_ascii())
    s = net.summary()
    print(f"sequence {net.sequence_id} of {len(networks)}: {len(net.routes)} routes, total {s['total']:.2f}, "
          f"occupied {s['total_occupied']} cells ({s['path_cells']} path, {s['buffer_cells']} buffer)")
    return EXIT_OK


def _bench_row(n: int, solver: str, status: str, net: RouteNetwork | None, seconds: float) -> dict:
    if status == "timeout":
        return {"routes": n, "solver": solver, "distance": TIMEOUT_MARK, "occupied_cells": TIMEOUT_MARK,
                "seconds": TIMEOUT_MARK}
    if status == "infeasible" or net is None:
        return {"routes": n, "solver": solver, "distance": INFEASIBLE_MARK, "occupied_cells": INFEASIBLE_MARK,
                "seconds": f"{seconds:.3f}"}
    return {"routes": n, "solver": solver, "distance": f"{net.totals.operational:.2f}",
            "occupied_cells": str(len(net.path_cells)), "seconds": f"{seconds:.3f}"}


def run_benchmark(grid: GridGraph, requests, max_routes: int, solvers: Sequence[str], timeout: float,
                  max_k: int = 24, any_angle: bool = True) -> list[dict]:
    """Rows per (route count, solver). Distances are centre-line lengths; occupancy counts path cells.

    ``seq`` tries every request order up to ``max_k`` sequences.
    """
    rows = []
    weights = CostWeights(0.0, 0.0, lambda_r=1.0, lambda_p=1.0)
    for n in range(1, max_routes + 1):
        reqs = list(requests[:n])
        for solver in solvers:
            t0 = time.perf_counter()
            if solver == "seq":
                S, _ = count_arrangements(build_segments(reqs, PrioritySpec()))
                seqs = generate_sequences(reqs, PrioritySpec(K=min(S, max_k)))
                nets = evaluate_sequences(grid, reqs, seqs, weights, SearchOptions(any_angle=any_angle))
                try:
                    net, status = select_network(nets), "optimal"
                except InfeasibleNetworkError:
                    net, status = None, "infeasible"
            elif solver == "cbs":
                res = cbs_spatial(grid, reqs, weights, timeout)
                net, status = res.network, res.status
            elif solver == "brute":
                if n > 3:
                    net, status = None, "timeout"
                else:
                    try:
                        res = brute_force_optimal(grid, reqs, weights)
                        net, status = res.network, res.status
                    except BoundExceeded:
                        net, status = None, "timeout"
            else:
                raise InputError(f"unknown solver {solver!r}")
            rows.append(_bench_row(n, solver, status, net, time.perf_counter() - t0))
    return rows


def cmd_benchmark(args) -> int:
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    for s in solvers:
        if s not in ("seq", "cbs", "brute"):
            raise InputError(f"unknown solver {s!r} (choose from seq, cbs, brute)")
    try:
        text = Path(args.map).read_text()
    except OSError as exc:
        raise InputError(f"cannot read input: {exc}") from None
    base = load_benchmark_map(text, args.cell_size)
    empty = discretize(base, args.cell_size, obstacle_margin=0, buffer_radius=args.buffer_radius)
    nx, ny, _ = empty.dims
    free = [(x, y) for x in range(nx) for y in range(ny) if empty.reachable[empty.index(x, y, 0)]]
    rows: list[dict] = []
    if args.routes > 0:
        sc = add_random_demand(base, free, args.routes, args.seed, cell=args.cell_size,
                               min_gap=2 * args.buffer_radius + 1, min_len=args.min_len)
        grid = discretize(sc, args.cell_size, obstacle_margin=0, buffer_radius=args.buffer_radius)
        rows = run_benchmark(grid, sc.od_requests, args.routes, solvers, args.timeout,
                             any_angle=not args.no_any_angle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "benchmark.csv", BENCH_COLUMNS, rows)
    for r in rows:
        print(",".join(str(r[c]) for c in BENCH_COLUMNS))
    return EXIT_OK


def _parse_values(param: str, text: str) -> list[float]:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise InputError(f"--values: {tok!r} is not a number") from None
        if param in ("K", "n_ods") and v != int(v):
            raise InputError(f"--values: {param} takes integers, got {tok!r}")
        vals.append(v)
    if not vals:
        raise InputError("--values is empty")
    return vals


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise InputError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    values = _parse_values(args.param, args.values)
    sc = _scenario(args)
    grid = _grid(args, sc)
    rows = []
    for v in values:
        a = argparse.Namespace(**vars(args))
        reqs = list(sc.od_requests)
        if args.param == "omega_p":
            a.omega_p = v
        elif args.param == "omega_r":
            a.omega_r = v
        elif args.param == "K":
            a.K = int(v)
        elif args.param == "eps_v":
            a.eps_v = v
        elif args.param == "n_ods":
            reqs = reqs[: int(v)]
        elif args.param == "theta_max":
            a.theta_max = v
        weights, options = _weights(a), _options(a)
        t0 = time.perf_counter()
        seqs = generate_sequences(reqs, _priority(a))
        nets = evaluate_sequences(grid, reqs, seqs, weights, options, n_jobs=a.jobs, theta_max=a.theta_max)
        seconds = time.perf_counter() - t0
        row = {"param": args.param, "value": _fmt(v), "seconds": f"{seconds:.3f}"}
        # rows still describe a path-feasible network that fails only the risk check
        try:
            net, verdict, failures = select_network(nets), "true", ""
        except InfeasibleNetworkError:
            routed = [n for n in nets if n.feasible]
            if routed:
                net = min(routed, key=lambda n: (n.totals.total, n.sequence_id))
                verdict = "risk"
                failures = ";".join(k for k, ok in net.risk_pass.items() if not ok)
            else:
                net, verdict = None, "false"
                failures = ";".join(sorted({f for n in nets for f in n.failures}))
        if net is None:
            row.update({c: INFEASIBLE_MARK for c in SWEEP_COLUMNS if c not in row})
        else:
            s = net.summary()
            row.update({c: _fmt(s[c]) for c in ("total_occupied", "path_cells", "buffer_cells", "raw_risk", "risk",
                                                "operational", "total")})
        row["feasible"] = verdict
        row["failures"] = failures
        rows.append(row)
        print(",".join(str(row[c]) for c in SWEEP_COLUMNS))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    sc = _scenario(args)
    grid = _grid(args, sc)
    by_id = {r.id: r for r in sc.od_requests}
    if args.od not in by_id:
        raise InputError(f"unknown OD id {args.od!r}")
    lr, lp = calibrate_lambdas(grid, by_id[args.od], _weights(args), _options(args))
    print(f"lambda_r={lr:.6g} lambda_p={lp:.6g}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tubenet", description="Plan spatially separated drone route networks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a route network and write network.json, metrics.csv, network.svg")
    _add_world(p)
    _add_weights(p)
    _add_priority(p)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--dump-overlay", action="store_true", help="also write a layered text view of the overlay")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("benchmark", help="sequential planner against CBS and brute force on a MovingAI map")
    p.add_argument("--map", required=True, type=Path)
    p.add_argument("--routes", type=int, default=3, help="route counts 1..N")
    p.add_argument("--solvers", default="seq,cbs,brute")
    p.add_argument("--timeout", type=float, default=60.0, help="CBS time limit per instance (s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cell-size", type=float, default=1.0)
    p.add_argument("--buffer-radius", type=int, default=0)
    p.add_argument("--min-len", type=int, default=6, help="minimum OD span in cells")
    p.add_argument("--no-any-angle", action="store_true", help="run seq as 8-connected grid A*")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="one planner run per parameter value")
    _add_world(p)
    _add_weights(p)
    _add_priority(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="print the calibrated lambda_r and lambda_p of one OD")
    _add_world(p)
    _add_weights(p)
    p.add_argument("--od", required=True)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (InputError, ScenarioError, GridError, CalibrationError, InvalidEndpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
