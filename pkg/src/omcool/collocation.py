"""Legendre-Gauss-Lobatto grids and transcription of the minimum-time problem.

Time is mapped onto the reference interval by ``t = T (tau + 1) / 2``. The
decision vector is laid out node-major:

    z = (x_0[0..9], x_1[0..9], ..., x_{N-1}[0..9], g_0, ..., g_{N-1}[, T])

so the state block has length 10 N, the control block N, and the final
time (free-T mode only) is the last entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre
from scipy import sparse

from . import model

_NEWTON_TOL = 1e-15
_NEWTON_MAXITER = 100


@dataclass(frozen=True)
class CollocationGrid:
    """LGL nodes, quadrature weights and differentiation matrix on [-1, 1]."""

    N: int
    nodes: np.ndarray
    weights: np.ndarray
    D: np.ndarray
    bary: np.ndarray = field(repr=False)

    def to_csv(self) -> str:
        lines = ["k,tau,weight"]
        for k, (x, w) in enumerate(zip(self.nodes, self.weights)):
            lines.append(f"{k},{x:.17g},{w:.17g}")
        return "\n".join(lines) + "\n"


def _legendre_pair(p: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (P_p(x), P_{p-1}(x)) by the three-term recurrence."""
    prev = np.ones_like(x)
    cur = x.copy()
    for k in range(2, p + 1):
        prev, cur = cur, ((2 * k - 1) * x * cur - (k - 1) * prev) / k
    return cur, prev


def _lgl_nodes(N: int) -> np.ndarray:
    p = N - 1
    # Chebyshev-Gauss-Lobatto starting guess, ascending.
    x = -np.cos(np.pi * np.arange(N) / p)
    for _ in range(_NEWTON_MAXITER):
        Pp, Pm = _legendre_pair(p, x)
        # Newton on (1 - x^2) P_p'(x), written via the Legendre recurrence.
        dx = (x * Pp - Pm) / (N * Pp)
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    x[0], x[-1] = -1.0, 1.0
    # Enforce exact antisymmetry.
    x = 0.5 * (x - x[::-1])
    return x


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    logmag = np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    logmag -= logmag.min()
    return sign * np.exp(-logmag)


def lgl_grid(N: int) -> CollocationGrid:
    """Build the N-point LGL grid.

    Nodes are -1, +1 and the roots of P'_{N-1}; weights are
    ``2 / (N (N-1) P_{N-1}(x_k)^2)``.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"need an integer N >= 2, got {N}")
    N = int(N)
    nodes = _lgl_nodes(N)
    Pp, _ = _legendre_pair(N - 1, nodes)
    weights = 2.0 / (N * (N - 1) * Pp**2)
    D = _diff_matrix(nodes, Pp)
    bary = _barycentric_weights(nodes)
    for arr in (nodes, weights, D, bary):
        arr.setflags(write=False)
    return CollocationGrid(N=N, nodes=nodes, weights=weights, D=D, bary=bary)


def _diff_matrix(nodes: np.ndarray, Pp: np.ndarray) -> np.ndarray:
    N = nodes.size
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (Pp[:, None] / Pp[None, :]) / diff
    np.fill_diagonal(D, 0.0)
    # Negative-sum diagonal keeps D @ 1 = 0 to rounding.
    np.fill_diagonal(D, -D.sum(axis=1))
    corner = 0.25 * N * (N - 1)
    # Exact corners; the two corner rows are rescaled by 1 + O(1e-13) so
    # they still sum to zero.
    for i, value in ((0, -corner), (N - 1, corner)):
        off = np.delete(np.arange(N), i)
        D[i, off] *= -value / D[i, off].sum()
        D[i, i] = value
    return D


def diff_matrix(grid: CollocationGrid) -> np.ndarray:
    """Nodal differentiation matrix of the grid (exact for degree <= N-1)."""
    return grid.D


def interpolation_matrix(grid: CollocationGrid, taus) -> np.ndarray:
    """Rows map nodal values to barycentric interpolant values at ``taus``."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    diff = taus[:, None] - grid.nodes[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = grid.bary[None, :] / diff
    hit = exact.any(axis=1)
    terms[hit] = 0.0
    terms[exact] = 1.0
    rowsum = terms.sum(axis=1)
    return terms / rowsum[:, None]


def interpolate(grid: CollocationGrid, values, tau):
    """Evaluate the nodal interpolant of ``values`` at ``tau`` (scalar or array).

    At a node the stored value is returned unchanged.
    """
    values = np.asarray(values, dtype=float)
    scalar = np.ndim(tau) == 0
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.empty(taus.shape)
    idx = np.searchsorted(grid.nodes, taus)
    for n, (t, i) in enumerate(zip(taus, idx)):
        if i < grid.N and grid.nodes[i] == t:
            out[n] = values[i]
            continue
        w = grid.bary / (t - grid.nodes)
        out[n] = np.dot(w, values) / np.sum(w)
    return float(out[0]) if scalar else out


def legendre_residual(N: int, x) -> np.ndarray:
    """|(1 - x^2) P'_{N-1}(x)|, zero exactly at the LGL nodes."""
    c = np.zeros(N)
    c[-1] = 1.0
    dP = legendre.legval(x, legendre.legder(c))
    return np.abs((1.0 - np.asarray(x) ** 2) * dP)


# ---------------------------------------------------------------------------
# Transcription


@dataclass(frozen=True)
class FixedT:
    T: float


@dataclass(frozen=True)
class FreeT:
    T_lo: float
    T_hi: float


@dataclass(frozen=True)
class TranscribedNLP:
    """Discretized minimum-time (or fixed-time feasibility) problem.

    Constraints are the 10 N collocation defects followed by the 20
    boundary equalities (node 0 pinned to the initial state, node N-1 to
    the target state).

    With ``check_matrix`` M (shape (C, N)) the control interpolant is also
    kept inside the bound at C points between nodes: C slack variables
    s = M g, placed after the controls and boxed to [-G0, G0], add the
    C equalities s - M g = 0 after the boundary rows.
    """

    G0: float
    grid: CollocationGrid
    mode: FixedT | FreeT
    start: np.ndarray = field(default_factory=model.initial_state, repr=False)
    goal: np.ndarray = field(default_factory=model.target_state, repr=False)
    check_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def free_time(self) -> bool:
        return isinstance(self.mode, FreeT)

    @property
    def n_check(self) -> int:
        return 0 if self.check_matrix is None else self.check_matrix.shape[0]

    @property
    def n_vars(self) -> int:
        return 11 * self.N + self.n_check + (1 if self.free_time else 0)

    @property
    def n_cons(self) -> int:
        return 10 * self.N + 2 * model.STATE_DIM + self.n_check

    @property
    def state_slice(self) -> slice:
        return slice(0, 10 * self.N)

    @property
    def control_slice(self) -> slice:
        return slice(10 * self.N, 11 * self.N)

    @property
    def slack_slice(self) -> slice:
        return slice(11 * self.N, 11 * self.N + self.n_check)

    def lower_bounds(self) -> np.ndarray:
        lo = np.full(self.n_vars, -np.inf)
        lo[self.control_slice] = -self.G0
        lo[self.slack_slice] = -self.G0
        if self.free_time:
            lo[-1] = self.mode.T_lo
        return lo

    def upper_bounds(self) -> np.ndarray:
        hi = np.full(self.n_vars, np.inf)
        hi[self.control_slice] = self.G0
        hi[self.slack_slice] = self.G0
        if self.free_time:
            hi[-1] = self.mode.T_hi
        return hi

    def split(self, z) -> tuple[np.ndarray, np.ndarray, float]:
        """Return (states (N, 10), controls (N,), T)."""
        z = np.asarray(z, dtype=float)
        X = z[self.state_slice].reshape(self.N, model.STATE_DIM)
        g = z[self.control_slice]
        T = float(z[-1]) if self.free_time else float(self.mode.T)
        return X, g, T

    def pack(self, states, controls, T: float | None = None) -> np.ndarray:
        """Assemble z; slacks, if any, are set to the clipped interpolant values."""
        states = np.asarray(states, dtype=float).reshape(self.N, model.STATE_DIM)
        controls = np.broadcast_to(np.asarray(controls, dtype=float), (self.N,))
        parts = [states.ravel(), controls]
        if self.n_check:
            parts.append(np.clip(self.check_matrix @ controls, -self.G0, self.G0))
        if self.free_time:
            if T is None:
                raise ValueError("free-T layout needs a final time")
            parts.append([T])
        return np.concatenate(parts)

    def objective(self, z) -> float:
        return float(z[-1]) if self.free_time else 0.0

    def objective_gradient(self, z) -> np.ndarray:
        grad = np.zeros(self.n_vars)
        if self.free_time:
            grad[-1] = 1.0
        return grad

    def defects(self, z) -> np.ndarray:
        """Collocation defects D x - (T/2) f(x, g), shape (N, 10)."""
        X, g, T = self.split(z)
        F = X @ model.FREE_MATRIX.T + g[:, None] * (X @ model.COUPLING_MATRIX.T)
        # D annihilates constants only to rounding; differencing against
        # node 0 makes constant trajectories exact
        return self.grid.D @ (X - X[0]) - 0.5 * T * F

    def boundary_residual(self, z) -> np.ndarray:
        X, _, _ = self.split(z)
        return np.concatenate([X[0] - self.start, X[-1] - self.goal])

    def check_residual(self, z) -> np.ndarray:
        """s - M g for the interpolant bound rows (empty without them)."""
        if not self.n_check:
            return np.zeros(0)
        z = np.asarray(z, dtype=float)
        return z[self.slack_slice] - self.check_matrix @ z[self.control_slice]

    def constraints(self, z) -> np.ndarray:
        return np.concatenate(
            [self.defects(z).ravel(), self.boundary_residual(z), self.check_residual(z)]
        )

    @property
    def implied_rows(self) -> np.ndarray:
        """Terminal rows for J1, J0 and J2, implied by the others on the feasible set.

        The model conserves three quadratic forms for every g (the two
        Casimirs and a second invariant of the 6-dim block). LGL quadrature
        integrates x^T M x' exactly for nodal polynomials, so with zero
        defects the discrete trajectory conserves them too, and the terminal
        values of J1, J0, J2 follow from the remaining terminal pins. Keeping
        these rows makes the constraint Jacobian rank deficient at every
        feasible point.
        """
        base = 10 * self.N + model.STATE_DIM
        return base + np.array([0, 4, 9])

    @property
    def independent_rows(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_cons), self.implied_rows)

    def jacobian(self, z):
        """Sparse constraint Jacobian (CSR) from the bilinear structure."""
        X, g, T = self.split(z)
        N, n = self.N, model.STATE_DIM
        nx, C = N * n, self.n_check
        eye = sparse.identity(n, format="csr")
        blocks = [model.system_matrix(gk) for gk in g]
        dx = sparse.kron(self.grid.D, eye, format="csr") - 0.5 * T * sparse.block_diag(
            blocks, format="csr"
        )
        # d defect_k / d g_k = -(T/2) A1 x_k, one column per node.
        ax = X @ model.COUPLING_MATRIX.T
        cols = np.repeat(np.arange(N), n)
        dg = sparse.csr_matrix((-0.5 * T * ax.ravel(), (np.arange(nx), cols)), shape=(nx, N))
        cols_def = [dx, dg, sparse.csr_matrix((nx, C))]
        if self.free_time:
            F = X @ model.FREE_MATRIX.T + g[:, None] * ax
            cols_def.append(sparse.csr_matrix(-0.5 * F.reshape(-1, 1)))
        top = sparse.hstack(cols_def, format="csr")
        pins = np.concatenate([np.arange(n), (N - 1) * n + np.arange(n)])
        bnd = sparse.csr_matrix(
            (np.ones(2 * n), (np.arange(2 * n), pins)), shape=(2 * n, self.n_vars)
        )
        parts = [top, bnd]
        if C:
            chk = sparse.hstack(
                [
                    sparse.csr_matrix((C, nx)),
                    sparse.csr_matrix(-self.check_matrix),
                    sparse.identity(C, format="csr"),
                    sparse.csr_matrix((C, self.n_vars - nx - N - C)),
                ],
                format="csr",
            )
            parts.append(chk)
        return sparse.vstack(parts, format="csr")

    @cached_property
    def _gram_kron(self) -> np.ndarray:
        return np.kron(self.grid.D.T @ self.grid.D, np.eye(model.STATE_DIM))

    def normal_matrix(self, z) -> np.ndarray:
        """Dense J^T J over ``independent_rows``, assembled block by block.

        Equal to ``(J.T @ J)`` for the row-restricted Jacobian but several
        times cheaper, since the x-x block is built from D^T D and the
        per-node matrices B_k = (T/2) A(g_k) directly.
        """
        X, g, T = self.split(z)
        N, n = self.N, model.STATE_DIM
        D = self.grid.D
        A1 = model.COUPLING_MATRIX
        B = 0.5 * T * (model.FREE_MATRIX[None] + g[:, None, None] * A1[None])
        V = -0.5 * T * (X @ A1.T)  # x-derivative columns for the controls
        nx = N * n
        # x-x: kron(D^T D, I) - M - M^T + blockdiag(B_k^T B_k), where block
        # (j, l) of M is D_lj B_l
        rows = np.repeat(D.T, n, axis=1)
        cols = B.transpose(1, 0, 2).reshape(n, nx)
        M = (rows[:, None, :] * cols[None, :, :]).reshape(nx, nx)
        H = np.zeros((self.n_vars, self.n_vars))
        xx = H[:nx, :nx]
        xx[...] = self._gram_kron
        xx -= M
        xx -= M.T
        diag = xx.reshape(N, n, N, n)
        diag[np.arange(N), :, np.arange(N), :] += np.einsum("kca,kcb->kab", B, B)
        # x-g: block j, column l is D_lj v_l - delta_lj B_l^T v_l
        xg = D.T[:, None, :] * V.T[None, :, :]
        xg[np.arange(N), :, np.arange(N)] -= np.einsum("kca,kc->ka", B, V)
        xg = xg.reshape(nx, N)
        H[:nx, nx : nx + N] = xg
        H[nx : nx + N, :nx] = xg.T
        H[nx + np.arange(N), nx + np.arange(N)] = np.einsum("ka,ka->k", V, V)
        if self.free_time:
            t = -0.5 * (X @ model.FREE_MATRIX.T + g[:, None] * (X @ A1.T))
            xt = (D.T @ t - np.einsum("kca,kc->ka", B, t)).ravel()
            H[:nx, -1] = xt
            H[-1, :nx] = xt
            gt = np.einsum("ka,ka->k", V, t)
            H[nx : nx + N, -1] = gt
            H[-1, nx : nx + N] = gt
            H[-1, -1] = float(np.sum(t * t))
        # boundary pins contribute unit diagonal entries on the pinned states
        rows = self.independent_rows
        pinned = rows[(rows >= nx) & (rows < nx + 2 * n)] - nx
        idx = np.where(pinned < n, pinned, (N - 2) * n + pinned)
        H[idx, idx] += 1.0
        if self.n_check:
            Mc = self.check_matrix
            gs, ss = self.control_slice, self.slack_slice
            H[gs, gs] += Mc.T @ Mc
            H[gs, ss] = -Mc.T
            H[ss, gs] = -Mc
            H[ss, ss] = np.eye(self.n_check)
        return H

    def constraint_hessian(self, z, y) -> np.ndarray:
        """Dense sum_i y_i * Hess(c_i); only the bilinear cross terms survive."""
        X, g, T = self.split(z)
        N, n = self.N, model.STATE_DIM
        Y = np.asarray(y[: N * n], dtype=float).reshape(N, n)
        H = np.zeros((self.n_vars, self.n_vars))
        A1 = model.COUPLING_MATRIX
        gx = -0.5 * T * (Y @ A1)  # row k: d^2/dg_k dx_k
        for k in range(N):
            c = 10 * N + k
            H[c, k * n : (k + 1) * n] = gx[k]
            H[k * n : (k + 1) * n, c] = gx[k]
        if self.free_time:
            t = self.n_vars - 1
            Ag = model.FREE_MATRIX[None, :, :] + g[:, None, None] * A1[None, :, :]
            tx = -0.5 * np.einsum("ki,kij->kj", Y, Ag).ravel()
            H[t, : N * n] = tx
            H[: N * n, t] = tx
            tg = -0.5 * np.einsum("ki,ki->k", Y, X @ A1.T)
            H[t, 10 * N : 11 * N] = tg
            H[10 * N : 11 * N, t] = tg
        return H


def check_points(grid: CollocationGrid, per_interval: int) -> np.ndarray:
    """``per_interval`` equally spaced interior points in each node interval."""
    frac = np.arange(1, per_interval + 1) / (per_interval + 1)
    x = grid.nodes
    return (x[:-1, None] + np.diff(x)[:, None] * frac[None, :]).ravel()


def transcribe(
    G0: float, grid: CollocationGrid, mode: FixedT | FreeT, checks_per_interval: int = 0
) -> TranscribedNLP:
    """Build the NLP for bound ``G0`` on ``grid`` in fixed- or free-time mode.

    ``checks_per_interval > 0`` also bounds the control interpolant at that
    many points inside every node interval.
    """
    if not G0 > 0:
        raise ValueError(f"G0 must be positive, got {G0}")
    if isinstance(mode, FixedT):
        if not mode.T > 0:
            raise ValueError(f"T must be positive, got {mode.T}")
    elif isinstance(mode, FreeT):
        if not (mode.T_lo > 0 and mode.T_hi > 0):
            raise ValueError("time bounds must be positive")
        if mode.T_hi < mode.T_lo:
            raise ValueError(f"T_hi={mode.T_hi} < T_lo={mode.T_lo}")
    else:
        raise TypeError(f"unknown mode {mode!r}")
    if int(checks_per_interval) != checks_per_interval or checks_per_interval < 0:
        raise ValueError(f"checks_per_interval must be a non-negative integer, got {checks_per_interval}")
    check = None
    if checks_per_interval:
        check = interpolation_matrix(grid, check_points(grid, int(checks_per_interval)))
    return TranscribedNLP(G0=float(G0), grid=grid, mode=mode, check_matrix=check)
