"""Coupling-rate schedules g(t) accepted by the integrator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collocation import CollocationGrid, interpolation_matrix


@dataclass(frozen=True)
class ConstantControl:
    value: float

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value)) if np.ndim(t) else float(self.value)


@dataclass(frozen=True)
class NodalControl:
    """Nodal control values on an LGL grid over [0, T].

    Between nodes the barycentric interpolant is used, clipped to
    [-G0, G0] to remove polynomial overshoot.
    """

    grid: CollocationGrid
    values: np.ndarray
    T: float
    G0: float

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape)
        tau = 2.0 * t / self.T - 1.0
        # chunked so a 1e5-step verification stays within a few MB
        for s in range(0, t.size, 8192):
            M = interpolation_matrix(self.grid, tau[s : s + 8192])
            out[s : s + 8192] = M @ np.asarray(self.values, dtype=float)
        np.clip(out, -self.G0, self.G0, out=out)
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class PiecewiseConstantControl:
    """Value ``values[i]`` on ``[breaks[i], breaks[i+1])``; the last value holds beyond."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.size != v.size:
            raise ValueError("breaks and values must be 1-D and of equal length")
        if b.size == 0 or np.any(np.diff(b) <= 0):
            raise ValueError("breaks must be non-empty and strictly increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        idx = np.clip(idx, 0, self.values.size - 1)
        return self.values[idx] if np.ndim(t) else float(self.values[idx])
