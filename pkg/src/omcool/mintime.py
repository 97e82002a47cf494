"""Minimum-time search, sweeps over the coupling bound, and verification.

The search solves the free-time program with T confined to a window
[T_lo, T_hi]. If that solve reaches feasibility its final time is the
answer. Otherwise the upper end of the window is raised on a 0.001 grid
until the window becomes feasible. Feasibility is monotone in T: start and
target are fixed points of the uncontrolled flow, so a transfer that works
in time T also works in any longer time. A window is therefore feasible
exactly when its upper end is, and that is checked by a fixed-T
feasibility solve at T_hi. The same monotonicity lets the search step back
down from a feasible grid time until the first failure.

``paper`` mode uses a loose first window solve and relies on the grid;
``direct`` mode runs the first window solve at full tolerance and falls
back on the grid only if it does not converge. If no feasible time is
found below the staircase time, the constant-control staircase transfer is
returned with a fallback status, or with an infeasible status when a
user-supplied window excludes the staircase time.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from . import integrate, model, reachability
from .collocation import FixedT, FreeT, TranscribedNLP, interpolation_matrix, lgl_grid, transcribe
from .controls import NodalControl
from .nlp import SolverOptions, solve_nlp

log = logging.getLogger(__name__)

MODES = ("paper", "direct")
SWEEP_NODES = 70
SOLVE_NODES = 130
TIME_STEP = 0.001
MARGIN = 0.05
BANG_TOL = 0.05
SYMMETRY_SAMPLES = 1001
# points per node interval where the control interpolant is also bounded
CHECKS_PER_INTERVAL = 1

CONVERGED = "converged"
FALLBACK = "staircase_fallback"
FAILED = "failed"
INFEASIBLE = "infeasible"

# largest reintegration error for which a solution counts as verified
VERIFY_TOL = 1e-3

# effort of the loose basin solve and of each grid probe
_BASIN_OPTS = dict(max_outer=3, mu0=100.0)
_PROBE_OUTER = 3
_PROBE_MU0 = 100.0
# smallest admissible final time when no lower bound is given
_T_FLOOR = 1e-3


@dataclass
class Report:
    defect_norm: float
    boundary_error: float
    reintegration_error: float
    symmetry_deviation: float
    invariant_drift: float

    def to_dict(self) -> dict:
        return {
            "defect_norm": self.defect_norm,
            "boundary_error": self.boundary_error,
            "reintegration_error": self.reintegration_error,
            "symmetry_deviation": self.symmetry_deviation,
            "invariant_drift": self.invariant_drift,
        }


@dataclass
class Solution:
    g0: float
    n_nodes: int
    mode: str
    t_star: float
    tau_nodes: np.ndarray
    control: np.ndarray
    states: np.ndarray
    status: str = CONVERGED
    diagnostics: Report | None = None
    solver: dict = field(default_factory=dict)

    @property
    def is_bang(self) -> bool:
        return is_bang(self.control, self.g0)

    @property
    def uses_negative_control(self) -> bool:
        return bool(np.min(self.control) < 0.0)

    def control_signal(self) -> NodalControl:
        return NodalControl(lgl_grid(self.n_nodes), self.control, self.t_star, self.g0)

    def to_dict(self) -> dict:
        out = {
            "g0": self.g0,
            "n_nodes": self.n_nodes,
            "mode": self.mode,
            "status": self.status,
            "units": {"time": "1/omega_m", "coupling": "omega_m"},
            "t_star": self.t_star,
            "tau_nodes": self.tau_nodes.tolist(),
            "control": self.control.tolist(),
            "states": self.states.tolist(),
            "diagnostics": None if self.diagnostics is None else self.diagnostics.to_dict(),
            "solver": self.solver,
        }
        return out

    def to_json(self) -> str:
        # repr of a Python float is the shortest string that round-trips,
        # which never needs more than 17 significant digits
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> Solution:
        try:
            diag = data.get("diagnostics")
            states = np.asarray(data["states"], dtype=float)
            sol = cls(
                g0=float(data["g0"]),
                n_nodes=int(data["n_nodes"]),
                mode=str(data["mode"]),
                t_star=float(data["t_star"]),
                tau_nodes=np.asarray(data["tau_nodes"], dtype=float),
                control=np.asarray(data["control"], dtype=float),
                states=states,
                status=str(data.get("status", CONVERGED)),
                diagnostics=None if diag is None else Report(**{k: float(v) for k, v in diag.items()}),
                solver=dict(data.get("solver", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed solution document: {exc}") from exc
        n = sol.n_nodes
        if sol.tau_nodes.shape != (n,) or sol.control.shape != (n,) or states.shape != (n, model.STATE_DIM):
            raise ValueError("solution arrays do not match n_nodes")
        return sol

    @classmethod
    def from_json(cls, text: str) -> Solution:
        return cls.from_dict(json.loads(text))


@dataclass
class SweepRow:
    g0: float
    t_star: float
    status: str
    is_bang: bool


@dataclass
class SweepTable:
    rows: list[SweepRow]

    def to_csv(self) -> str:
        lines = [
            "# g0 in units of omega_m, t_star in units of 1/omega_m",
            "g0,t_star,status,is_bang",
        ]
        for r in self.rows:
            lines.append(f"{r.g0:.17g},{r.t_star:.17g},{r.status},{str(r.is_bang).lower()}")
        return "\n".join(lines) + "\n"


def is_bang(control, G0: float, tol: float = BANG_TOL) -> bool:
    """True when the control is within ``tol * G0`` of a constant +G0 or -G0."""
    g = np.asarray(control, dtype=float)
    dev = min(np.max(np.abs(g - G0)), np.max(np.abs(g + G0)))
    return bool(dev <= tol * G0)


def symmetry_deviation(control, T: float, samples: int = SYMMETRY_SAMPLES) -> float:
    """max |g(t) - g(T - t)| over a uniform grid on [0, T]."""
    t = np.linspace(0.0, T, samples)
    g = np.asarray(control(t), dtype=float)
    return float(np.max(np.abs(g - g[::-1])))


def verify_steps(T: float) -> int:
    """Default RK4 step count for verification: 1e5 per 20 time units."""
    return integrate.DEFAULT_STEPS * max(1, math.ceil(T / 20.0))


def verify(sol: Solution, steps: int | None = None) -> Report:
    """Re-integrate the stored control and check it against the stored nodes."""
    grid = lgl_grid(sol.n_nodes)
    nlp = transcribe(sol.g0, grid, FixedT(sol.t_star))
    z = nlp.pack(sol.states, sol.control)
    control = sol.control_signal()
    traj = integrate.propagate(control, sol.t_star, steps or verify_steps(sol.t_star))
    return Report(
        defect_norm=float(np.linalg.norm(nlp.defects(z))),
        boundary_error=float(np.linalg.norm(nlp.boundary_residual(z))),
        reintegration_error=integrate.final_error(traj),
        symmetry_deviation=symmetry_deviation(control, sol.t_star),
        invariant_drift=integrate.invariant_drift(traj),
    )


def staircase_guess(G0: float, N: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact constant-control transfer at the staircase level, sampled at the nodes."""
    entry = reachability.staircase_time(G0)
    grid = lgl_grid(N)
    A = model.system_matrix(entry.G)
    x0 = model.initial_state()
    t = entry.T * (grid.nodes + 1.0) / 2.0
    X = np.array([expm(A * tk) @ x0 for tk in t])
    return X, np.full(N, entry.G), entry.T


def _resample(sol: Solution, N: int, G0: float) -> tuple[np.ndarray, np.ndarray, float]:
    if sol.n_nodes == N:
        X, g = sol.states, sol.control
    else:
        M = interpolation_matrix(lgl_grid(sol.n_nodes), lgl_grid(N).nodes)
        X, g = M @ sol.states, M @ sol.control
    return X.copy(), np.clip(g, -G0, G0), sol.t_star


def _staircase_solution(G0: float, N: int, mode: str, solver: dict) -> Solution:
    X, g, T = staircase_guess(G0, N)
    return Solution(G0, N, mode, T, lgl_grid(N).nodes, g, X, status=FALLBACK, solver=solver)


def _grid_ceil(T: float, step: float) -> float:
    return round(math.ceil(T / step - 1e-9) * step, 12)


class _Search:
    """Shared state of one minimum-time search."""

    def __init__(self, G0, N, opts: SolverOptions, t_lo, t_hi, step):
        self.G0, self.N, self.opts = G0, N, opts
        self.stair_T = reachability.staircase_time(G0).T
        self.grid = lgl_grid(N)
        self.t_lo, self.t_hi, self.step = t_lo, t_hi, step
        self.iterations = 0
        self.probes = []

    def window(self, X, g, T, opts) -> tuple:
        nlp = transcribe(self.G0, self.grid, FreeT(self.t_lo, self.t_hi), CHECKS_PER_INTERVAL)
        T = min(max(T, self.t_lo), self.t_hi)
        res = solve_nlp(nlp, nlp.pack(X, g, T), opts)
        self.iterations += res.iterations
        Xs, gs, Ts = nlp.split(res.z_star)
        log.info("window solve: T=%.9f |c|=%.2e %s (%d iterations)", Ts, res.constraint_norm, res.status, res.iterations)
        return Xs, gs, Ts, res

    def probe(self, T, X, g) -> tuple:
        nlp = transcribe(self.G0, self.grid, FixedT(T), CHECKS_PER_INTERVAL)
        opts = replace(
            self.opts,
            max_outer=min(self.opts.max_outer, _PROBE_OUTER),
            mu0=_PROBE_MU0,
            multistart=0,
        )
        res = solve_nlp(nlp, nlp.pack(X, g), opts)
        self.iterations += res.iterations
        self.probes.append((T, res.status, res.constraint_norm))
        Xs, gs, _ = nlp.split(res.z_star)
        log.info("probe T=%.3f: %s |c|=%.2e (%d iterations)", T, res.status, res.constraint_norm, res.iterations)
        return res.converged, Xs, gs

    def scan(self, T0, X, g, lower):
        """First feasible grid time: upward from T0, then downward to ``lower``.

        The upward scan stops below the staircase time, where the constant
        control is already a feasible point; None means nothing faster was
        found.
        """
        T = T0
        feasible = None
        while T <= self.t_hi + 1e-12 and T < self.stair_T:
            ok, Xp, gp = self.probe(T, X, g)
            if ok:
                feasible = (T, Xp, gp)
                break
            X, g = Xp, gp
            T = round(T + self.step, 12)
        if feasible is None:
            return None
        T, X, g = feasible
        # step down while feasible; the first probe above may have started high
        if T == T0:
            while T - self.step >= lower - 1e-12:
                Td = round(T - self.step, 12)
                ok, Xd, gd = self.probe(Td, X, g)
                if not ok:
                    break
                T, X, g = Td, Xd, gd
        return T, X, g


def min_time(
    G0: float,
    N: int = SOLVE_NODES,
    mode: str = "paper",
    opts: SolverOptions | None = None,
    t_bounds: tuple[float | None, float | None] = (None, None),
    warm: Solution | None = None,
    step: float = TIME_STEP,
) -> Solution:
    """Minimum transfer time under the bound |g| <= G0 on an N-node grid.

    ``t_bounds`` restricts the final time; by default it is
    ``(0.001, staircase T + 0.05)``. ``warm`` seeds the search with an
    earlier solution (any node count) instead of the staircase transfer.
    The returned Solution carries verification diagnostics.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not G0 > 0:
        raise ValueError(f"G0 must be positive, got {G0}")
    if int(N) != N or N < 3:
        raise ValueError(f"N must be an integer >= 3, got {N}")
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    N = int(N)
    opts = opts or SolverOptions()
    stair = reachability.staircase_time(G0)
    t_lo = _T_FLOOR if t_bounds[0] is None else float(t_bounds[0])
    t_hi = stair.T + MARGIN if t_bounds[1] is None else float(t_bounds[1])
    if not 0 < t_lo <= t_hi:
        raise ValueError(f"need 0 < t_min <= t_max, got ({t_lo}, {t_hi})")

    if warm is not None:
        X, g, T = _resample(warm, N, G0)
    else:
        X, g, T = staircase_guess(G0, N)
    search = _Search(G0, N, opts, t_lo, t_hi, step)
    solver = {"tolerances": {"feas_tol": opts.feas_tol, "opt_tol": opts.opt_tol}, "seed": opts.seed}

    if mode == "paper":
        window_opts = replace(opts, feas_tol=1e-3, opt_tol=1e-3, **_BASIN_OPTS)
    else:
        window_opts = opts
    X, g, T_window, res = search.window(X, g, T, window_opts)
    if res.constraint_norm <= opts.feas_tol:
        found = (T_window, X, g)
    else:
        lower = t_lo if mode == "paper" else math.inf
        found = search.scan(max(_grid_ceil(T_window, step), _grid_ceil(t_lo, step)), X, g, lower)

    solver["iterations"] = search.iterations
    solver["probes"] = len(search.probes)
    if found is None:
        log.info("nothing faster than the staircase transfer below %.6f", min(t_hi, search.stair_T))
        sol = _staircase_solution(G0, N, mode, solver)
        if sol.t_star > t_hi + 1e-12:
            # the window excludes the only transfer we know of
            sol.status = INFEASIBLE
    else:
        T, X, g = found
        sol = Solution(G0, N, mode, float(T), search.grid.nodes.copy(), g.copy(), X.copy(), solver=solver)
    sol.diagnostics = verify(sol)
    if sol.uses_negative_control:
        log.info("solution at G0=%g uses negative coupling (min %.4g)", G0, float(np.min(sol.control)))
    return sol


def _sweep_values(g0_max: float, g0_min: float, step: float) -> list[float]:
    if not (g0_max >= g0_min > 0 and step > 0):
        raise ValueError("need g0_max >= g0_min > 0 and step > 0")
    count = int(math.floor((g0_max - g0_min) / step + 1e-9)) + 1
    return [round(g0_max - k * step, 12) for k in range(count)]


def _row(sol: Solution | None, G0: float) -> SweepRow:
    if sol is None:
        return SweepRow(G0, math.nan, FAILED, False)
    return SweepRow(G0, sol.t_star, sol.status, sol.is_bang)


def _solve_row(args):
    G0, N, mode, opts = args
    try:
        return min_time(G0, N, mode, opts)
    except (ValueError, integrate.IntegrationError, np.linalg.LinAlgError) as exc:
        log.error("G0=%g failed: %s", G0, exc)
        return None


def worker_count() -> int:
    """Worker processes allowed by ``OMCOOL_THREADS`` (default 1)."""
    raw = os.environ.get("OMCOOL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"OMCOOL_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"OMCOOL_THREADS must be a positive integer, got {raw!r}")
    return n


def sweep(
    g0_max: float,
    g0_min: float,
    step: float,
    N: int = SWEEP_NODES,
    mode: str = "paper",
    opts: SolverOptions | None = None,
    values: list[float] | None = None,
) -> SweepTable:
    """Minimum times over a descending list of coupling bounds.

    In paper mode each row is warm-started from the previous solution and
    its time search starts no lower than the previous T_star, since the
    minimum time can only grow as the bound shrinks. Direct-mode rows are
    independent and run on up to ``OMCOOL_THREADS`` worker processes.
    A row that raises is recorded as failed and the sweep continues.
    """
    g0s = sorted(values, reverse=True) if values is not None else _sweep_values(g0_max, g0_min, step)
    opts = opts or SolverOptions()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    rows = []
    if mode == "direct":
        jobs = [(G0, N, mode, opts) for G0 in g0s]
        workers = min(worker_count(), len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                sols = list(pool.map(_solve_row, jobs))
        else:
            sols = [_solve_row(j) for j in jobs]
        return SweepTable([_row(s, G0) for s, G0 in zip(sols, g0s)])
    prev = None
    for G0 in g0s:
        try:
            lower = None if prev is None or prev.status != CONVERGED else prev.t_star
            if lower is not None:
                lower = min(lower, reachability.staircase_time(G0).T + MARGIN)
            sol = min_time(G0, N, mode, opts, t_bounds=(lower, None), warm=prev if lower else None)
        except (ValueError, integrate.IntegrationError, np.linalg.LinAlgError) as exc:
            log.error("G0=%g failed: %s", G0, exc)
            sol = None
        rows.append(_row(sol, G0))
        if sol is not None:
            prev = sol
    return SweepTable(rows)
