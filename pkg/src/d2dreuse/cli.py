"""Command-line front end: scenario generation, experiment runs, and
machine-readable summary/CDF outputs."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import oracle
from .model import Rates, Scenario
from .selection import SelectionOptions, SolveReport, run as run_selection
from .solver import InfeasibleError, SolverOptions

AREA_M = 200.0
BS_POWER_DBM = 30.0
DUE_POWER_DBM = 20.0

METHODS = ("algo", "brute", "orthogonal", "bs_only")


def metrics(rates: Rates) -> dict:
    """Geometric-mean throughput (Mbps) and the PF objective."""
    r = np.asarray(rates.r_eff, dtype=float)
    if np.any(r <= 0):
        raise ValueError("metrics require strictly positive effective rates")
    logs = np.log(r)
    return {"gm_mbps": float(np.exp(logs.mean()) / 1e6), "pf": float(logs.sum())}


def gen_scenario(num_due: int, seed: int, walls_random: int = 0, num_bs: int = 1) -> Scenario:
    """Deterministic random drop: BS at the square's center, DUEs uniform."""
    if num_due < 1:
        raise ValueError("need at least one DUE")
    rng = np.random.default_rng(seed)
    due_pos = rng.uniform(0.0, AREA_M, size=(num_due, 2))
    bs_pos = np.tile([AREA_M / 2.0, AREA_M / 2.0], (num_bs, 1))
    positions = np.vstack([bs_pos, due_pos])
    n = num_bs + num_due
    powers = np.concatenate([np.full(num_bs, BS_POWER_DBM), np.full(num_due, DUE_POWER_DBM)])
    walls = None
    if walls_random > 0:
        walls = rng.integers(0, walls_random + 1, size=(n, num_due))
    return Scenario(
        num_bs=num_bs,
        num_due=num_due,
        positions=positions,
        tx_power_dbm=powers,
        walls=walls,
        seed=seed,
    )


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def _load_scenario(config: dict) -> Scenario:
    src = config["scenario"]
    if isinstance(src, str):
        return Scenario.load(src)
    return gen_scenario(
        num_due=int(src["dues"]),
        seed=int(src["seed"]),
        walls_random=int(src.get("walls_random", 0)),
        num_bs=int(src.get("num_bs", 1)),
    )


def _options_from_config(config: dict) -> tuple[SolverOptions, SelectionOptions]:
    solver = SolverOptions(**config.get("solver", {}))
    sel = config.get("selection", {})
    selection = SelectionOptions(
        eps1=float(sel.get("eps1", 1e-4)),
        eps2=float(sel.get("eps2", 1e-4)),
        max_outer_iters=int(sel.get("max_outer_iters", 50)),
        solver=solver,
    )
    return solver, selection


def brute_report(scenario: Scenario, solver_options: SolverOptions) -> SolveReport:
    """SolveReport wrapper around the exhaustive relaxed solve."""
    t0 = time.perf_counter()
    from .model import build_gains
    from .patterns import PatternSet
    from .selection import _report, round_association

    alloc, table = oracle.brute_force(scenario, solver_options)
    z = round_association(alloc, table)
    gains = build_gains(scenario)
    pattern_set = PatternSet(table.patterns)
    flags = {"converged": alloc.converged}
    return _report("brute", scenario, gains, pattern_set, alloc, z, alloc, [alloc.objective], [len(pattern_set)], flags, t0)


def run_experiment(config: dict, out_dir: Path, trace: bool = False) -> tuple[dict, list[str]]:
    """Run the selected methods and write reports, summary and CDF files.

    Returns (per-method reports, names of methods that were infeasible).
    """
    scenario = _load_scenario(config)
    solver_opts, selection_opts = _options_from_config(config)
    methods = config.get("methods", ["algo"])
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {methods}")
    chash = config_hash(config)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports: dict[str, SolveReport] = {}
    infeasible: list[str] = []
    for method in methods:
        try:
            if method == "algo":
                reports[method] = run_selection(scenario, selection_opts)
            elif method == "brute":
                reports[method] = brute_report(scenario, solver_opts)
            elif method == "orthogonal":
                reports[method] = oracle.orthogonal_baseline(scenario, solver_opts)
            else:
                reports[method] = oracle.bs_only_baseline(scenario, solver_opts)
        except InfeasibleError as exc:
            infeasible.append(method)
            (out_dir / f"report_{method}.json").write_text(
                json.dumps({"method": method, "status": "INFEASIBLE", "detail": str(exc),
                            "config_hash": chash, "seed": scenario.seed}, indent=2) + "\n")
            continue

        doc = reports[method].to_dict()
        doc["config_hash"] = chash
        doc["seed"] = scenario.seed
        (out_dir / f"report_{method}.json").write_text(json.dumps(doc, indent=2) + "\n")

        rates = np.sort(reports[method].final_allocation.rates.r_eff) / 1e6
        with open(out_dir / f"cdf_{method}.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["rate_mbps", "quantile"])
            for k, r in enumerate(rates, start=1):
                wr.writerow([f"{r:.9g}", f"{k / len(rates):.6f}"])

        if trace and method == "algo":
            with open(out_dir / "trace_algo.csv", "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["t", "set_size", "objective"])
                for ti, (sz, obj) in enumerate(
                    zip(reports[method].pattern_set_sizes, reports[method].objective_trace), start=1
                ):
                    wr.writerow([ti, sz, f"{obj:.12g}"])

    gm_brute = reports["brute"].gm_throughput_mbps if "brute" in reports else None
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["method", "gm_mbps", "pf_objective", "active_patterns", "wall_time_s",
                     "gap_vs_brute", "config_hash", "seed"])
        for method, rep in reports.items():
            gap = ""
            if gm_brute and method == "algo":
                gap = f"{(gm_brute - rep.gm_throughput_mbps) / gm_brute:.6g}"
            active = int((rep.final_allocation.x > selection_opts.eps1).sum())
            wr.writerow([method, f"{rep.gm_throughput_mbps:.9g}", f"{rep.pf_objective:.9g}",
                         active, f"{rep.wall_time_s:.4f}", gap, chash, scenario.seed])
    return reports, infeasible


def _parse_seed_range(spec: str) -> list[int]:
    if ".." in spec:
        a, b = spec.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(spec)]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="d2dreuse", description="Time-reuse scheduling with D2D relays")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a random scenario file")
    p_gen.add_argument("--dues", type=int, required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--walls-random", type=int, default=0, metavar="K",
                       help="draw per-link wall counts uniformly from 0..K")
    p_gen.add_argument("--out", type=Path, default=Path("scenario.json"))

    p_run = sub.add_parser("run", help="run methods from a config file")
    p_run.add_argument("--config", type=Path, required=True)
    p_run.add_argument("--methods", type=str, default=None,
                       help="comma list overriding the config (algo,brute,orthogonal,bs-only)")
    p_run.add_argument("--trace", action="store_true")
    p_run.add_argument("--out-dir", type=Path, default=None)

    p_cmp = sub.add_parser("compare", help="batch algo-vs-brute comparison over seeds")
    p_cmp.add_argument("--seeds", type=str, required=True, help="range a..b or single seed")
    p_cmp.add_argument("--dues", type=int, required=True)
    p_cmp.add_argument("--walls-random", type=int, default=0)
    p_cmp.add_argument("--out", type=Path, default=Path("compare.csv"))

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    try:
        if args.command == "gen":
            scenario = gen_scenario(args.dues, args.seed, args.walls_random)
            scenario.save(args.out)
            print(f"wrote {args.out}")
            return 0

        if args.command == "run":
            config = json.loads(args.config.read_text())
            if args.methods:
                config["methods"] = [m.replace("-", "_") for m in args.methods.split(",")]
            out_dir = args.out_dir or Path(config.get("output_dir", "out"))
            _, infeasible = run_experiment(config, out_dir, trace=args.trace)
            for m in infeasible:
                print(f"method {m}: INFEASIBLE", file=sys.stderr)
            print(f"wrote results to {out_dir}")
            return 2 if infeasible else 0

        # compare
        rows = []
        for seed in _parse_seed_range(args.seeds):
            scenario = gen_scenario(args.dues, seed, args.walls_random)
            algo = run_selection(scenario)
            brute = brute_report(scenario, SolverOptions())
            rows.append([args.dues, seed, f"{brute.gm_throughput_mbps:.9g}", f"{algo.gm_throughput_mbps:.9g}",
                         f"{brute.wall_time_s:.4f}", f"{algo.wall_time_s:.4f}"])
            print(f"seed {seed}: gm_brute={rows[-1][2]} gm_algo={rows[-1][3]}")
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["dues", "seed", "gm_brute_mbps", "gm_algo_mbps", "t_brute_s", "t_algo_s"])
            wr.writerows(rows)
        print(f"wrote {args.out}")
        return 0
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
