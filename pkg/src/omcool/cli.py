"""Command-line entry point: ``omcool <subcommand> ...``.

Exit status is 0 on success, 1 when a solve is infeasible or a solution
fails verification, and 2 on usage errors (bad flags, unreadable input, or
an existing output file without ``--force``).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import integrate, mintime, model, reachability
from .nlp import SolverOptions

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

RWA_SAMPLES = 1001
TRAJECTORY_SAMPLES = 1001


class UsageError(Exception):
    """Invalid invocation detected after argument parsing."""


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be a positive finite number: {text!r}")
    return value


def _count(minimum: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}: {text!r}")
        return value

    return parse


def _add_output(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--out", type=Path, required=required, help="output file")
    p.add_argument("--force", action="store_true", help="overwrite an existing output file")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    defaults = SolverOptions()
    g = p.add_argument_group("solver")
    g.add_argument("--feas-tol", type=_positive_float, default=defaults.feas_tol, help="constraint norm tolerance")
    g.add_argument("--opt-tol", type=_positive_float, default=defaults.opt_tol, help="projected gradient tolerance")
    g.add_argument("--max-outer", type=_count(1), default=defaults.max_outer, help="outer iteration limit")
    g.add_argument("--multistart", type=_count(0), default=defaults.multistart, help="restarts after an infeasible solve")
    g.add_argument("--seed", type=_count(0), default=defaults.seed, help="seed for restart perturbations")


def _solver_options(args) -> SolverOptions:
    return SolverOptions(
        feas_tol=args.feas_tol,
        opt_tol=args.opt_tol,
        max_outer=args.max_outer,
        multistart=args.multistart,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omcool",
        description="Minimum-time coupling schedules for optomechanical cooling. "
        "Times are in units of 1/omega_m and couplings in units of omega_m.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr (repeat for more)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("solve", help="minimum-time solve for one coupling bound")
    p.add_argument("--g0", type=_positive_float, required=True, help="coupling bound G0")
    p.add_argument("--nodes", type=_count(3), default=mintime.SOLVE_NODES, help="collocation nodes")
    p.add_argument("--mode", choices=mintime.MODES, default="paper", help="time search strategy")
    p.add_argument("--t-min", type=_positive_float, help="lower bound on the final time")
    p.add_argument("--t-max", type=_positive_float, help="upper bound on the final time")
    p.add_argument("--trajectory", type=Path, help="also write the re-integrated trajectory CSV here")
    p.add_argument("--samples", type=_count(2), default=TRAJECTORY_SAMPLES, help="rows in the trajectory CSV")
    _add_output(p)
    _add_solver_flags(p)

    p = sub.add_parser("sweep", help="minimum times over a descending range of coupling bounds")
    p.add_argument("--g0-max", type=_positive_float, required=True)
    p.add_argument("--g0-min", type=_positive_float, required=True)
    p.add_argument("--step", type=_positive_float, required=True)
    p.add_argument("--nodes", type=_count(3), default=mintime.SWEEP_NODES, help="collocation nodes")
    p.add_argument("--mode", choices=mintime.MODES, default="paper", help="time search strategy")
    _add_output(p)
    _add_solver_flags(p)

    p = sub.add_parser("staircase", help="fastest constant-control transfer for G0")
    p.add_argument("--g0", type=_positive_float, nargs="+", required=True, help="one or more coupling bounds")
    p.add_argument("--csv", action="store_true", help="print a CSV table instead of one line per value")

    p = sub.add_parser("verify", help="re-integrate a stored solution")
    p.add_argument("solution", type=Path, help="solution JSON written by solve")
    p.add_argument("--steps", type=_count(1), help="RK4 steps (default scales with the final time)")

    p = sub.add_parser("rwa", help="rotating-wave (J1, J3) trajectory over one swap period")
    p.add_argument("--g", type=_positive_float, required=True, help="constant coupling")
    p.add_argument("--samples", type=_count(2), default=RWA_SAMPLES, help="rows in the CSV")
    _add_output(p)
    return parser


def _check_writable(path: Path, force: bool) -> None:
    if path.exists() and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    if not path.parent.is_dir():
        raise UsageError(f"directory {path.parent} does not exist")


def _write(path: Path, text: str, force: bool) -> None:
    with open(path, "w" if force else "x", encoding="utf-8") as fh:
        fh.write(text)


def _report_lines(report: mintime.Report) -> str:
    return "".join(f"{k}={v:.17g}\n" for k, v in report.to_dict().items())


def _decimate(traj: integrate.Trajectory, samples: int) -> integrate.Trajectory:
    idx = np.unique(np.linspace(0, traj.times.size - 1, samples).round().astype(int))
    return integrate.Trajectory(traj.times[idx], traj.states[idx], traj.control_samples[idx])


def _cmd_solve(args) -> int:
    _check_writable(args.out, args.force)
    if args.trajectory is not None:
        _check_writable(args.trajectory, args.force)
    sol = mintime.min_time(
        args.g0,
        args.nodes,
        args.mode,
        _solver_options(args),
        t_bounds=(args.t_min, args.t_max),
    )
    _write(args.out, sol.to_json(), args.force)
    if args.trajectory is not None:
        traj = integrate.propagate(sol.control_signal(), sol.t_star, mintime.verify_steps(sol.t_star))
        _write(args.trajectory, _decimate(traj, args.samples).to_csv(), args.force)
    diag = sol.diagnostics
    print(f"status={sol.status} t_star={sol.t_star:.17g} is_bang={str(sol.is_bang).lower()}")
    sys.stdout.write(_report_lines(diag))
    if sol.status == mintime.INFEASIBLE:
        print("no feasible transfer inside the requested time window", file=sys.stderr)
        return EXIT_FAIL
    if diag.reintegration_error > mintime.VERIFY_TOL:
        print(f"verification failed: reintegration error {diag.reintegration_error:.3g}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_sweep(args) -> int:
    if args.g0_min > args.g0_max:
        raise UsageError("--g0-min must not exceed --g0-max")
    _check_writable(args.out, args.force)
    table = mintime.sweep(args.g0_max, args.g0_min, args.step, args.nodes, args.mode, _solver_options(args))
    _write(args.out, table.to_csv(), args.force)
    bad = [r.g0 for r in table.rows if r.status in (mintime.FAILED, mintime.INFEASIBLE)]
    print(f"rows={len(table.rows)} failed={len(bad)}")
    return EXIT_FAIL if bad else EXIT_OK


def _cmd_staircase(args) -> int:
    entries = [(g0, reachability.staircase_time(g0)) for g0 in args.g0]
    if args.csv:
        print("# G and G0 in units of omega_m, T in units of 1/omega_m")
        print("g0,m,n,G,T")
        for g0, e in entries:
            print(f"{g0:.17g},{e.m},{e.n},{e.G:.17g},{e.T:.17g}")
    else:
        for _, e in entries:
            print(e.format())
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        sol = mintime.Solution.from_json(args.solution.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {args.solution}: {exc.strerror}") from None
    report = mintime.verify(sol, args.steps)
    sys.stdout.write(_report_lines(report))
    if not report.reintegration_error <= mintime.VERIFY_TOL:
        print(f"verification failed: reintegration error {report.reintegration_error:.3g}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def rwa_csv(g: float, samples: int = RWA_SAMPLES) -> str:
    """CSV of the rotating-wave (J1, J3) path from the start to the swap time."""
    t = np.linspace(0.0, model.rwa_swap_time(g), samples)
    j1, j3 = model.rwa_state(g, t)
    lines = [f"# t in units of 1/omega_m, g = {g:.17g} omega_m", "t,J1,J3"]
    lines += [f"{a:.17g},{b:.17g},{c:.17g}" for a, b, c in zip(t, j1, j3)]
    return "\n".join(lines) + "\n"


def _cmd_rwa(args) -> int:
    _check_writable(args.out, args.force)
    _write(args.out, rwa_csv(args.g, args.samples), args.force)
    return EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "staircase": _cmd_staircase,
    "verify": _cmd_verify,
    "rwa": _cmd_rwa,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags and 0 for --help
        return int(exc.code or 0)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ValueError, FileExistsError) as exc:
        print(f"omcool {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
