"""Normalized second-moment dynamics of the red-detuned optomechanical system.

The state is a single 10-vector in the fixed order

    (J1, J3, K2, Q2 | J0, Q1, K1, Q3, K3, J2)

The first four components are normalized by n_b/2 and the last six by
(n_b+1)/2, so the boundary points do not depend on the thermal phonon
number n_b. Time is in units of 1/omega_m and the coupling g in units of
omega_m.
"""

from __future__ import annotations

import numpy as np

STATE_NAMES = ("J1", "J3", "K2", "Q2", "J0", "Q1", "K1", "Q3", "K3", "J2")
STATE_DIM = 10
DIM_A = 4
DIM_B = 6

# A(g) = A_FREE + g * A_COUPLING for both subsystems.
_A_FREE = np.array(
    [
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 2.0],
        [0.0, 0.0, -2.0, 0.0],
    ]
)
_A_COUPLING = np.array(
    [
        [0.0, 2.0, 0.0, 0.0],
        [-2.0, 0.0, 2.0, 0.0],
        [0.0, 2.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
)
_B_FREE = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -2.0, 0.0, 0.0, 0.0],
        [0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -2.0, 0.0],
        [0.0, 0.0, 0.0, 2.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ]
)
_B_COUPLING = np.array(
    [
        [0.0, -2.0, 0.0, 0.0, 0.0, 0.0],
        [-2.0, 0.0, 0.0, 2.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 2.0, 0.0],
        [0.0, -2.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -2.0, 0.0, 0.0, -2.0],
        [0.0, 0.0, 0.0, 0.0, -2.0, 0.0],
    ]
)


def _block(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((STATE_DIM, STATE_DIM))
    out[:DIM_A, :DIM_A] = a
    out[DIM_A:, DIM_A:] = b
    return out


#: Control-independent part of the full 10x10 generator.
FREE_MATRIX = _block(_A_FREE, _B_FREE)
#: Derivative of the full 10x10 generator with respect to g.
COUPLING_MATRIX = _block(_A_COUPLING, _B_COUPLING)

for _m in (FREE_MATRIX, COUPLING_MATRIX):
    _m.setflags(write=False)


def system_matrix_a(g: float) -> np.ndarray:
    """4x4 generator acting on (J1, J3, K2, Q2)."""
    return _A_FREE + g * _A_COUPLING


def system_matrix_b(g: float) -> np.ndarray:
    """6x6 generator acting on (J0, Q1, K1, Q3, K3, J2)."""
    return _B_FREE + g * _B_COUPLING


def system_matrix(g: float) -> np.ndarray:
    """Full block-diagonal 10x10 generator."""
    return FREE_MATRIX + g * COUPLING_MATRIX


def rhs(state, g: float) -> np.ndarray:
    """Time derivative of the 10-vector ``state`` under coupling ``g``."""
    x = np.asarray(state, dtype=float)
    return FREE_MATRIX @ x + g * (COUPLING_MATRIX @ x)


def initial_state() -> np.ndarray:
    """Thermal mechanical mode, empty cavity."""
    x = np.zeros(STATE_DIM)
    x[0] = -1.0
    x[4] = 1.0
    return x


def target_state() -> np.ndarray:
    """Populations swapped: J1 at its antipode, subsystem b unchanged."""
    x = np.zeros(STATE_DIM)
    x[0] = 1.0
    x[4] = 1.0
    return x


def casimirs(state) -> tuple[float, float]:
    """The two quadratic constants of motion (AdS3 and AdS5 forms).

    Both equal -1 along any trajectory started from :func:`initial_state`.
    """
    x = np.asarray(state, dtype=float)
    j1, j3, k2, q2, j0, q1, k1, q3, k3, j2 = x
    ca = k2 * k2 + q2 * q2 - j1 * j1 - j3 * j3
    cb = k1 * k1 + q1 * q1 + k3 * k3 + q3 * q3 - j0 * j0 - j2 * j2
    return float(ca), float(cb)


def phonon_number(state, n_b: float) -> float:
    """Mean phonon number <b+ b> of the mechanical mode."""
    if n_b < 0:
        raise ValueError(f"n_b must be non-negative, got {n_b}")
    x = np.asarray(state, dtype=float)
    return 0.5 * (n_b + 1.0) * x[4] - 0.5 * n_b * x[0] - 0.5


def photon_number(state, n_b: float) -> float:
    """Mean photon number <a+ a> of the cavity mode."""
    if n_b < 0:
        raise ValueError(f"n_b must be non-negative, got {n_b}")
    x = np.asarray(state, dtype=float)
    return 0.5 * (n_b + 1.0) * x[4] + 0.5 * n_b * x[0] - 0.5


def rwa_state(g: float, t):
    """(J1, J3) in the rotating-wave limit: rotation about the 2-axis at rate 2g.

    ``t`` may be a scalar or an array.
    """
    if not g > 0:
        raise ValueError(f"g must be positive, got {g}")
    phase = 2.0 * g * np.asarray(t, dtype=float)
    return -np.cos(phase), np.sin(phase)


def rwa_swap_time(g: float) -> float:
    """Time at which the RWA rotation reaches the antipodal point."""
    if not g > 0:
        raise ValueError(f"g must be positive, got {g}")
    return np.pi / (2.0 * g)
