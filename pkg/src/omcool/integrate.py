"""Fixed-step RK4 propagation of the second-moment dynamics.

This is the verification oracle: it knows nothing about the collocation
transcription beyond the control signal it is handed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import model

#: Default step count for verification runs with T <= 20.
DEFAULT_STEPS = 100_000


class IntegrationError(RuntimeError):
    """Raised when the propagated state stops being finite."""


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    control_samples: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# t in units of 1/omega_m, g in units of omega_m\n")
        buf.write("t," + ",".join(model.STATE_NAMES) + ",g\n")
        for t, x, g in zip(self.times, self.states, self.control_samples):
            buf.write(",".join(f"{v:.17g}" for v in (t, *x, g)) + "\n")
        return buf.getvalue()


_CHUNK = 4096


def _rk4_propagators(h, gl, gm, gr):
    """One-step RK4 maps for x' = A(g(t)) x, batched over steps.

    Because the system is linear, the four stages collapse to a single
    matrix per step.
    """
    A0, A1 = model.FREE_MATRIX, model.COUPLING_MATRIX
    eye = np.eye(model.STATE_DIM)
    Al = A0 + gl[:, None, None] * A1
    Am = A0 + gm[:, None, None] * A1
    Ar = A0 + gr[:, None, None] * A1
    P1 = eye + 0.5 * h * Al
    AmP1 = Am @ P1
    P2 = eye + 0.5 * h * AmP1
    AmP2 = Am @ P2
    P3 = eye + h * AmP2
    return eye + (h / 6.0) * (Al + 2.0 * AmP1 + 2.0 * AmP2 + Ar @ P3)


def _rk4_steps(x, h, g_left, g_mid, g_right):
    n = g_left.size
    states = np.empty((n + 1, model.STATE_DIM))
    states[0] = x
    # overflow is reported by the caller's finiteness check
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(0, n, _CHUNK):
            e = min(n, s + _CHUNK)
            M = _rk4_propagators(h, g_left[s:e], g_mid[s:e], g_right[s:e])
            for i in range(e - s):
                x = M[i] @ x
                states[s + i + 1] = x
    return states


def _segment_counts(edges: np.ndarray, steps: int) -> np.ndarray:
    """Split ``steps`` over the segments in proportion to length, at least one each."""
    share = steps * np.diff(edges) / (edges[-1] - edges[0])
    counts = np.floor(share).astype(int)
    rest = steps - counts.sum()
    if rest > 0:
        counts[np.argsort(counts - share, kind="stable")[:rest]] += 1
    return np.maximum(counts, 1)


def _propagate_piecewise(control, T, steps, x0) -> Trajectory:
    """Fixed-step RK4 on each constant piece, so no step straddles a jump."""
    breaks = np.asarray(control.breaks, dtype=float)
    edges = np.concatenate([[0.0], breaks[(breaks > 0.0) & (breaks < T)], [T]])
    counts = _segment_counts(edges, steps)
    times, states, samples = [np.zeros(1)], [x0[None, :]], []
    x = x0
    for a, b, n in zip(edges[:-1], edges[1:], counts):
        g = np.full(n, float(control(0.5 * (a + b))))
        seg = _rk4_steps(x, (b - a) / n, g, g, g)
        x = seg[-1]
        t = np.linspace(a, b, n + 1)[1:]
        times.append(t)
        states.append(seg[1:])
        samples.append(g)
    samples.append([float(control(T))])
    return Trajectory(
        times=np.concatenate(times),
        states=np.concatenate(states),
        control_samples=np.concatenate(samples),
    )


def propagate(control, T: float, steps: int = DEFAULT_STEPS, start=None) -> Trajectory:
    """Integrate from ``start`` (default: the initial state) over [0, T].

    ``control`` is any callable g(t) accepting arrays of times. The returned
    trajectory holds all ``steps + 1`` grid points. A control with a
    ``breaks`` attribute is treated as piecewise constant: the horizon is cut
    at its interior breaks and the steps are shared among the pieces (at
    least one each), so every RK4 step sees a single constant coupling.
    """
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    steps = int(steps)
    x0 = model.initial_state() if start is None else np.array(start, dtype=float)
    if getattr(control, "breaks", None) is not None:
        traj = _propagate_piecewise(control, T, steps, x0)
        _check_finite(traj)
        return traj
    h = T / steps
    times = np.linspace(0.0, T, steps + 1)
    mids = times[:-1] + 0.5 * h
    g_nodes = np.asarray(control(times), dtype=float)
    g_mid = np.asarray(control(mids), dtype=float)
    states = _rk4_steps(x0, h, g_nodes[:-1], g_mid, g_nodes[1:])
    traj = Trajectory(times=times, states=states, control_samples=g_nodes)
    _check_finite(traj)
    return traj


def _check_finite(traj: Trajectory) -> None:
    ok = np.all(np.isfinite(traj.states), axis=1)
    if not np.all(ok):
        bad = int(np.argmax(~ok))
        raise IntegrationError(f"non-finite state at t={traj.times[bad]:.6g} (step {bad})")


def sample_at(control, times, max_step: float = 1e-3, start=None) -> np.ndarray:
    """States at arbitrary increasing ``times`` (first must be 0).

    Each interval between consecutive sample times is split into equal
    RK4 steps no longer than ``max_step``.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) < 0):
        raise ValueError("times must start at 0 and be non-decreasing")
    x = model.initial_state() if start is None else np.array(start, dtype=float)
    out = np.empty((times.size, model.STATE_DIM))
    out[0] = x
    for i in range(1, times.size):
        a, b = times[i - 1], times[i]
        if b == a:
            out[i] = x
            continue
        n = max(1, int(np.ceil((b - a) / max_step)))
        h = (b - a) / n
        grid = a + h * np.arange(n + 1)
        grid[-1] = b
        gl = np.asarray(control(grid), dtype=float)
        gm = np.asarray(control(grid[:-1] + 0.5 * h), dtype=float)
        x = _rk4_steps(x, h, gl[:-1], gm, gl[1:])[-1]
        out[i] = x
    return out


def final_error(traj: Trajectory, goal=None) -> float:
    """Euclidean distance of the final state from the target."""
    goal = model.target_state() if goal is None else np.asarray(goal, dtype=float)
    return float(np.linalg.norm(traj.states[-1] - goal))


def invariant_drift(traj: Trajectory) -> float:
    """Largest deviation of either Casimir from -1 along the trajectory."""
    S = np.atleast_2d(traj.states)
    ca = S[:, 2] ** 2 + S[:, 3] ** 2 - S[:, 0] ** 2 - S[:, 1] ** 2
    cb = (
        S[:, 6] ** 2 + S[:, 5] ** 2 + S[:, 8] ** 2 + S[:, 7] ** 2
        - S[:, 4] ** 2 - S[:, 9] ** 2
    )
    return float(max(np.max(np.abs(ca + 1.0)), np.max(np.abs(cb + 1.0))))
