"""Command-line front end: validate, run, and compare scenarios."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .engine import run
from .metrics import write_run_outputs
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_MISSING_FILE = 2
EXIT_SCHEMA = 3
EXIT_RUNTIME = 4


def _load(path: str):
    try:
        return load_scenario(path), EXIT_OK
    except FileNotFoundError:
        print(f"error: scenario file not found: {path}", file=sys.stderr)
        return None, EXIT_MISSING_FILE
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return None, EXIT_SCHEMA


def _first_converged_step(result) -> int | None:
    for w in result.weights:
        if w.converged:
            return w.step
    return None


def cmd_validate(args) -> int:
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    print(f"ok: {args.scenario} (agents={scenario.m}, "
          f"duration={scenario.duration}s, solver={scenario.solver})")
    return EXIT_OK


def cmd_run(args) -> int:
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    if args.solver:
        scenario = replace(scenario, solver=args.solver)
    if args.seed is not None:
        scenario = replace(scenario, rng_seed=args.seed)
    try:
        result = run(scenario)
        paths = write_run_outputs(result, args.out)
    except Exception as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    last = result.metrics[-1]
    print(f"completed {scenario.n_steps} steps in {result.elapsed_s:.2f}s "
          f"(solver={scenario.solver}, seed={scenario.rng_seed})")
    print(f"final epsilon_t={last.epsilon_t:.4f} m, "
          f"mean speed={last.speed_mean:.3f} m/s, alive={last.n_alive}")
    print(f"outputs: {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    if args.seed is not None:
        scenario = replace(scenario, rng_seed=args.seed)
    out = Path(args.out)
    results = {}
    try:
        for solver in ("pi", "vi"):
            sc = replace(scenario, solver=solver)
            result = run(sc)
            write_run_outputs(result, out / solver)
            results[solver] = result
    except Exception as exc:
        print(f"error: comparison run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    lines = ["step,time,epsilon_t_pi,epsilon_t_vi,separation_error_pi,"
             "separation_error_vi,speed_mean_pi,speed_mean_vi"]
    for mp, mv in zip(results["pi"].metrics, results["vi"].metrics):
        lines.append(",".join([
            str(mp.step), repr(mp.time),
            repr(mp.epsilon_t), repr(mv.epsilon_t),
            repr(mp.separation_error), repr(mv.separation_error),
            repr(mp.speed_mean), repr(mv.speed_mean),
        ]))
    out.mkdir(parents=True, exist_ok=True)
    side = out / "compare.csv"
    side.write_text("\n".join(lines) + "\n")

    for solver in ("pi", "vi"):
        idx = _first_converged_step(results[solver])
        shown = idx if idx is not None else "none"
        print(f"{solver}: first window-converged step = {shown}")
    print(f"side-by-side metrics: {side}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flockctl",
        description="Leader-follower flocking simulation with learned tracking")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and write CSV logs")
    p_run.add_argument("scenario")
    p_run.add_argument("--solver", choices=["pi", "vi"], default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="out")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="run both solvers on the same seed")
    p_cmp.add_argument("scenario")
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.add_argument("--out", default="out/compare")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="schema-check a scenario file")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
