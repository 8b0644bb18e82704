"""Command-line front end.

Exit codes: 0 success, 2 usage or invalid input, 3 file I/O, 4 numerical
failure.  Output files go to ``--output-dir`` (default: ``$SIGSDP_OUTPUT_DIR``
or the working directory) next to a ``manifest.json`` describing the run.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .assign import SlotAssignment, binary_search, complete_randomly
from .baselines import HeuristicKind, RandSolver, greedy_assign
from .errors import InvalidArgument, NumericalFailure
from .graph import build_state, slot_bounds
from .mmw import MmwConfig, MmwSolver, trace_csv
from .scenario import PhyConfig, Scenario, dbm_to_watt, generate_scenario, power_profile
from .simulator import (MobilityModel, OnlineConfig, evaluate, framework_planner, heuristic_planner,
                        run_online)

EXIT_USAGE, EXIT_IO, EXIT_NUMERICAL = 2, 3, 4
OUTPUT_ENV = "SIGSDP_OUTPUT_DIR"
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class Run:
    """Collects timings and outputs, and writes them into the manifest."""

    def __init__(self, args, out_dir: Path, argv=None):
        self.args = args
        self.argv = list(sys.argv[1:] if argv is None else argv)
        self.out_dir = out_dir
        self.timings = {}
        self.inputs = []
        self.outputs = []
        self.extra = {}

    def timed(self, phase, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[phase] = self.timings.get(phase, 0.0) + time.perf_counter() - t0

    def read(self, path) -> str:
        self.inputs.append(str(path))
        return Path(path).read_text()

    def write(self, name: str, text: str, kind: str = "json") -> Path:
        path = self.out_dir / name
        if kind == "csv":
            text = f"# manifest: {MANIFEST}\n" + text
        path.write_text(text)
        self.outputs.append(str(path))
        return path

    def write_json(self, name: str, obj: dict) -> Path:
        return self.write(name, json.dumps({"manifest": MANIFEST, **obj}, indent=2) + "\n")

    def finish(self):
        config = {k: v for k, v in vars(self.args).items() if k != "func"}
        manifest = {
            "command": self.args.command,
            "argv": self.argv,
            "config": config,
            "seed": config.get("seed"),
            "version": __version__,
            "kernel_backend": kernels.BACKEND,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings_s": self.timings,
            **self.extra,
        }
        (self.out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _phy(args) -> PhyConfig:
    return PhyConfig(
        bandwidth_hz=args.bandwidth_hz,
        noise_psd=dbm_to_watt(args.noise_dbm) / args.bandwidth_hz,
        slot_duration_s=args.slot_ms * 1e-3,
        packet_bits=args.packet_bits,
        max_error_rate=args.max_error,
        power_margin=args.alpha,
        sensitivity_ratio=args.gamma,
        carrier_mhz=args.carrier_mhz,
    )


def _load_scenario(run: Run, path) -> Scenario:
    return Scenario.from_json(run.read(path))


def _state_summary(scenario, state) -> dict:
    b = slot_bounds(state)
    return {
        "users": scenario.n_users,
        "base_stations": scenario.n_bs,
        "assoc_edges": state.n_assoc_edges,
        "intp_edges": state.n_intp_edges,
        "max_neighbors": state.max_neighbors,
        "slot_bounds": [b.lower, b.upper],
    }


def cmd_generate(args, run: Run) -> int:
    if args.side_m <= 0 or args.density <= 0:
        raise UsageError("--side-m and --density must be positive")
    scenario = run.timed("generate", generate_scenario, args.side_m, args.density, args.seed, _phy(args))
    out = Path(args.out) if args.out else run.out_dir / "scenario.json"
    out.write_text(scenario.to_json(include_gains=not args.no_gains))
    run.outputs.append(str(out))
    state = run.timed("graphs", build_state, scenario, power_profile(scenario))
    summary = _state_summary(scenario, state)
    run.extra["summary"] = summary
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return 0


def _mmw_config(args) -> MmwConfig:
    return MmwConfig(eta=args.eta, iters=args.iters, beta=args.beta, seed=args.seed,
                     trace_every=args.trace_every, trace_normalization=args.trace_normalization)


def cmd_solve(args, run: Run) -> int:
    scenario = _load_scenario(run, args.scenario)
    profile = power_profile(scenario)
    state = run.timed("graphs", build_state, scenario, profile)
    alpha = scenario.phy.power_margin
    run.timed("bounds", slot_bounds, state)

    if args.solver.startswith("greedy"):
        kind = HeuristicKind.MIN_INTERFERENCE_POWER if args.solver == "greedy-mintp" else HeuristicKind.MAX_ASSOCIATION
        assignment = run.timed("rounding", greedy_assign, state, kind, alpha)
        run.extra["solver_calls"] = 0
        run.extra["bounds"] = None
        z = assignment.z_slots
    else:
        solver = MmwSolver(_mmw_config(args), alpha) if args.solver == "mmw" else RandSolver(args.beta, args.seed)
        result = run.timed("search", binary_search, state, solver, alpha, args.seed, use_bounds=not args.no_bounds)
        assignment, z = result.assignment, result.z_slots
        run.extra.update(solver_calls=result.solver_calls, bounds=list(result.bounds),
                         history=[list(h) for h in result.history], fallback=result.fallback)
        if isinstance(solver, MmwSolver):
            run.extra["calls"] = [{k: v for k, v in c.items() if k != "trace"} for c in solver.calls]
            final = [c for c in solver.calls if c["z_slots"] == z]
            if final and final[-1]["trace"]:
                run.write("trace.csv", trace_csv(final[-1]["trace"]), kind="csv")

    run.write_json("assignment.json", {"solver": args.solver, **assignment.to_dict(state, alpha)})
    print(f"users={scenario.n_users} z_slots={z} solver_calls={run.extra['solver_calls']}")
    return 0


def cmd_evaluate(args, run: Run) -> int:
    scenario = _load_scenario(run, args.scenario)
    doc = json.loads(run.read(args.assignment))
    assignment = SlotAssignment.from_dict(doc)
    if assignment.n_users != scenario.n_users:
        raise UsageError("assignment and scenario have different user counts")
    if not assignment.complete:
        assignment = complete_randomly(assignment, np.random.default_rng(args.seed))
    profile = power_profile(scenario)
    report = run.timed("evaluate", evaluate, scenario, profile, assignment)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user", "slot", "sinr", "error_rate"])
    for k in range(scenario.n_users):
        w.writerow([k, int(assignment.slots[k]) + 1, repr(float(report.sinr[k])), repr(float(report.per_user_error[k]))])
    run.write("errors.csv", buf.getvalue(), kind="csv")
    run.write_json("evaluation.json", {"mean_error": report.mean_error,
                                       "violation_fraction": report.violation_fraction,
                                       "z_slots": assignment.z_slots})
    print(f"mean_error={report.mean_error:.6e} violation_fraction={report.violation_fraction:.4f}")
    return 0


def _latency(text):
    if text == "measured":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("latency must be 'measured' or seconds") from None
    if value < 0:
        raise argparse.ArgumentTypeError("latency must be nonnegative")
    return value


def cmd_online(args, run: Run) -> int:
    scenario = _load_scenario(run, args.scenario)
    alpha = scenario.phy.power_margin
    if args.scheme == "framework":
        planner = framework_planner(alpha, _mmw_config(args), args.seed)
    else:
        planner = heuristic_planner(alpha)
    mobility = MobilityModel.random(scenario.n_users, args.speed, args.seed)
    cfg = OnlineConfig(args.horizon_slots, args.latency, args.seed)
    result = run.timed("online", run_online, scenario, mobility, cfg, planner)
    run.write("timeseries.csv", result.to_csv(), kind="csv")
    run.extra["events"] = [list(e) for e in result.events]
    run.write_json("online.json", {"mean_error": result.mean_error, "periods": len(result.periods)})
    print(f"periods={len(result.periods)} mean_error={result.mean_error:.6e}")
    return 0


def cmd_bench(args, run: Run) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["side_m", "users", "rep", "bounds", "z_slots", "solver_calls",
                "median_iteration_s", "total_s"])
    for side in args.sides:
        for rep in range(args.reps):
            seed = args.seed + rep
            scenario = generate_scenario(side, args.density, seed)
            state = build_state(scenario, power_profile(scenario))
            for use_bounds in (True, False):
                solver = MmwSolver(MmwConfig(eta=args.eta, iters=args.iters, beta=args.beta, seed=seed),
                                   scenario.phy.power_margin)
                t0 = time.perf_counter()
                r = binary_search(state, solver, scenario.phy.power_margin, seed, use_bounds=use_bounds)
                total = time.perf_counter() - t0
                per_iter = float(np.median([c["median_iteration_seconds"] for c in solver.calls])) \
                    if solver.calls else math.nan
                w.writerow([side, scenario.n_users, rep, int(use_bounds), r.z_slots, r.solver_calls,
                            repr(per_iter), repr(total)])
                print(f"side={side} users={scenario.n_users} rep={rep} bounds={int(use_bounds)} "
                      f"z={r.z_slots} calls={r.solver_calls} iter_s={per_iter:.3e} total_s={total:.3f}")
    run.write("bench.csv", buf.getvalue(), kind="csv")
    return 0


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sigsdp", description="Sparse SDP slot assignment for wireless TSN uplinks.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--output-dir", default=None, help=f"output directory (default ${OUTPUT_ENV} or .)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a random deployment")
    g.add_argument("--side-m", type=float, default=100.0)
    g.add_argument("--density", type=float, default=0.0075)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)
    g.add_argument("--no-gains", action="store_true", help="omit the gain matrix from the file")
    g.add_argument("--bandwidth-hz", type=float, default=5e6)
    g.add_argument("--noise-dbm", type=float, default=-94.0)
    g.add_argument("--slot-ms", type=float, default=0.125)
    g.add_argument("--packet-bits", type=int, default=800)
    g.add_argument("--max-error", type=float, default=1e-5)
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--gamma", type=float, default=0.1)
    g.add_argument("--carrier-mhz", type=float, default=4000.0)
    g.set_defaults(func=cmd_generate)

    def solver_flags(q):
        q.add_argument("--eta", type=float, default=0.04)
        q.add_argument("--iters", type=_positive_int, default=150)
        q.add_argument("--beta", type=float, default=2.0)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--trace-every", type=int, default=1)
        q.add_argument("--trace-normalization", choices=["norms", "squared"], default="norms",
                       help="scale sketched iterates by sum of row norms or of squared row norms")

    s = sub.add_parser("solve", help="search the slot count and assign slots")
    s.add_argument("--scenario", required=True)
    s.add_argument("--solver", choices=["mmw", "rand", "greedy-mintp", "greedy-masso"], default="mmw")
    s.add_argument("--no-bounds", action="store_true", help="search [1, K] instead of the graph bounds")
    solver_flags(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="packet error rates of an assignment")
    e.add_argument("--scenario", required=True)
    e.add_argument("--assignment", required=True)
    e.add_argument("--seed", type=int, default=0, help="seed for slots of unassigned users")
    e.set_defaults(func=cmd_evaluate)

    o = sub.add_parser("online", help="run the online loop with moving users")
    o.add_argument("--scenario", required=True)
    o.add_argument("--scheme", choices=["framework", "mintp"], default="framework")
    o.add_argument("--speed", type=float, default=0.0)
    o.add_argument("--latency", type=_latency, default=None, help="'measured' (default) or seconds")
    o.add_argument("--horizon-slots", type=_positive_int, default=20000)
    solver_flags(o)
    o.set_defaults(func=cmd_online, trace_every=0)

    b = sub.add_parser("bench", help="timing sweep over network sizes")
    b.add_argument("--sides", type=float, nargs="+", default=[60.0, 80.0, 100.0, 120.0])
    b.add_argument("--density", type=float, default=0.0075)
    b.add_argument("--reps", type=_positive_int, default=5)
    b.add_argument("--eta", type=float, default=0.04)
    b.add_argument("--iters", type=_positive_int, default=150)
    b.add_argument("--beta", type=float, default=2.0)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO
    run = Run(args, out_dir, argv)
    try:
        code = args.func(args, run)
        run.finish()
        return code
    except (UsageError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read or write files: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
