"""Augmented-Lagrangian solver for the transcribed minimum-time program.

The outer loop updates multipliers and the penalty on the equality
constraints. The inner loop minimizes the augmented Lagrangian over the box
with damped Newton steps: the unbounded states are eliminated by one
Cholesky factorization per iterate, and the remaining box-constrained
quadratic in the controls, slacks and T is solved exactly, so the bounds
hold at every iterate.

Only the independent constraint rows enter the penalty (see
``TranscribedNLP.implied_rows``); feasibility is always reported over the
full set.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from . import model
from .collocation import TranscribedNLP

log = logging.getLogger(__name__)

CONVERGED = "converged"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"

_ROUNDOFF = 1e-14
_INNER_TOL = 1e-2


@dataclass
class SolverOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-6
    max_outer: int = 40
    max_inner: int = 200
    mu0: float = 10.0
    mu_factor: float = 10.0
    mu_max: float = 1e8
    # an outer step is accepted when the constraint norm drops by this factor
    decrease: float = 0.25
    # consecutive penalty increases without a 1% gain before giving up
    stall_limit: int = 3
    multistart: int = 5
    perturbation: float = 0.2
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NlpResult:
    z_star: np.ndarray
    status: str
    constraint_norm: float
    objective: float
    iterations: int
    multipliers: np.ndarray = field(repr=False)
    optimality: float = np.inf
    restarts: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def residuals_and_gradient(nlp: TranscribedNLP, z):
    """Constraint residuals, objective gradient and sparse constraint Jacobian.

    All ``10 N + 20`` rows are returned; the Jacobian is a CSR matrix whose
    action on a direction is ``J @ d``.
    """
    z = np.asarray(z, dtype=float)
    return nlp.constraints(z), nlp.objective_gradient(z), nlp.jacobian(z)


def _projected_gradient(z, grad, lo, hi) -> float:
    return float(np.max(np.abs(z - np.clip(z - grad, lo, hi)), initial=0.0))


def kkt_residual(nlp: TranscribedNLP, z, lam=None) -> float:
    """Projected-gradient norm of the Lagrangian.

    With ``lam`` omitted, least-squares multipliers over the free variables
    are used; they are well defined even when the multipliers are not unique.
    """
    lo, hi = nlp.lower_bounds(), nlp.upper_bounds()
    _, gf, J = residuals_and_gradient(nlp, z)
    if lam is not None:
        return _projected_gradient(z, gf + J.T @ lam, lo, hi)
    if not np.any(gf):
        return 0.0
    Jr = J[nlp.independent_rows].toarray()
    free = (z > lo) & (z < hi)
    lam_r, *_ = linalg.lstsq(Jr[:, free].T, -gf[free], check_finite=False)
    return _projected_gradient(z, gf + Jr.T @ lam_r, lo, hi)


class _AugmentedLagrangian:
    def __init__(self, nlp: TranscribedNLP, rows: np.ndarray, lam: np.ndarray, mu: float):
        self.nlp = nlp
        self.rows = rows
        self.lam = lam
        self.mu = mu

    def value(self, z) -> float:
        c = self.nlp.constraints(z)[self.rows]
        return self.nlp.objective(z) + self.lam @ c + 0.5 * self.mu * (c @ c)

    def derivatives(self, z):
        """Value, gradient and a positive-leaning Hessian model.

        The model is mu J^T J plus the multiplier-weighted constraint
        curvature; the mu c_i Hess(c_i) terms, which vanish at a feasible
        point and make the exact Hessian indefinite away from it, are left
        out.
        """
        c, gf, J = residuals_and_gradient(self.nlp, z)
        c, J = c[self.rows], J[self.rows]
        val = self.nlp.objective(z) + self.lam @ c + 0.5 * self.mu * (c @ c)
        grad = gf + J.T @ (self.lam + self.mu * c)
        lam_full = np.zeros(self.nlp.n_cons)
        lam_full[self.rows] = self.lam
        H = self.mu * self.nlp.normal_matrix(z) + self.nlp.constraint_hessian(z, lam_full)
        return val, grad, H


def box_qp(S, r, lb, ub, max_iter: int = 100):
    """Minimize 0.5 d^T S d + r^T d over lb <= d <= ub, for positive definite S.

    Projected Newton with an exact subspace solve: variables at a bound whose
    gradient points outward are held, the rest take the Newton step of the
    subspace problem, and the projected step is backtracked on the QP value.
    Requires lb <= 0 <= ub.
    """
    d = np.zeros_like(r)
    q = r.copy()
    value = 0.0
    for _ in range(max_iter):
        held = ((d <= lb) & (q > 0)) | ((d >= ub) & (q < 0))
        free = ~held
        if not np.any(free):
            break
        Sf = S[np.ix_(free, free)]
        target = d.copy()
        target[free] = linalg.solve(Sf, -(r[free] + S[np.ix_(free, held)] @ d[held]), assume_a="pos", check_finite=False)
        direction = target - d
        alpha = 1.0
        while True:
            trial = np.clip(d + alpha * direction, lb, ub)
            q_trial = S @ trial + r
            v_trial = 0.5 * trial @ (q_trial + r)
            if v_trial <= value or alpha < 1e-12:
                break
            alpha *= 0.5
        moved = np.max(np.abs(trial - d), initial=0.0)
        d, q, value = trial, q_trial, v_trial
        if alpha == 1.0 and np.array_equal(np.clip(target, lb, ub), target):
            # unconstrained subspace optimum; done if the held set is consistent
            held_ok = np.all(q[(d <= lb)] >= -1e-14 * (1 + np.abs(r[d <= lb]))) and np.all(
                q[(d >= ub)] <= 1e-14 * (1 + np.abs(r[d >= ub]))
            )
            if held_ok:
                break
        if moved == 0.0:
            break
    return d


class _ReducedModel:
    """Quadratic model with the unbounded states eliminated.

    The first ``nx`` variables are states; their Hessian block is mu J_x^T J_x
    (the bilinear constraints have no state-state curvature), which is
    positive definite because the state Jacobian of the defects and pins has
    full column rank. One Cholesky factorization per iterate therefore
    reduces the model to the bounded variables (controls, slacks and T),
    where the damping acts and the box QP is solved exactly.
    """

    def __init__(self, H, grad, nx):
        Hxx = H[:nx, :nx]
        shift = 0.0
        while True:
            try:
                L = linalg.cholesky(Hxx + shift * np.eye(nx), lower=True, check_finite=False)
                break
            except linalg.LinAlgError:
                shift = max(10.0 * shift, 1e-14 * float(np.max(np.diag(Hxx))))
        self.L = L
        rhs = np.column_stack([H[:nx, nx:], grad[:nx]])
        Y = linalg.solve_triangular(L, rhs, lower=True, check_finite=False)
        self.Yu, self.yg = Y[:, :-1], Y[:, -1]
        S = H[nx:, nx:] - self.Yu.T @ self.Yu
        self.S = 0.5 * (S + S.T)
        self.r = grad[nx:] - self.Yu.T @ self.yg

    def step(self, lb, ub, damping):
        """Box-constrained minimizer for the given damping, or None if not convex."""
        Sd = self.S + damping * np.eye(self.S.shape[0])
        try:
            linalg.cholesky(Sd, lower=True, check_finite=False)
        except linalg.LinAlgError:
            return None
        du = np.clip(box_qp(Sd, self.r, lb, ub), lb, ub)
        dx = -linalg.solve_triangular(
            self.L, self.yg + self.Yu @ du, lower=True, trans="T", check_finite=False
        )
        return np.concatenate([dx, du])


def _inner_solve(al: _AugmentedLagrangian, z, lo, hi, tol, max_iter):
    """Minimize ``al`` over the box [lo, hi] by damped Newton box-QP steps.

    Each step minimizes the Hessian model plus a damping term on the bounded
    variables over the box; the damping follows the ratio of actual to
    predicted decrease, as in Levenberg-Marquardt.
    """
    nx = al.nlp.N * model.STATE_DIM
    val, grad, H = al.derivatives(z)
    damping = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        pg = _projected_gradient(z, grad, lo, hi)
        if pg <= tol:
            return z, it - 1, pg
        reduced = _ReducedModel(H, grad, nx)
        lb, ub = lo[nx:] - z[nx:], hi[nx:] - z[nx:]
        floor = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(reduced.S)))))
        accepted = False
        for _ in range(60):
            step = reduced.step(lb, ub, damping)
            if step is None:
                damping = max(10.0 * damping, floor)
                continue
            pred = -(grad @ step + 0.5 * step @ (H @ step))
            if pred <= _ROUNDOFF * abs(val):
                # predicted decrease is below what the AL value can resolve
                return z, it, pg
            trial = z + step
            rho = (val - al.value(trial)) / pred
            if rho > 1e-4:
                accepted = True
                if rho > 0.75:
                    damping = damping / 4.0 if damping > floor else 0.0
                elif rho < 0.25:
                    damping = max(4.0 * damping, floor)
                break
            damping = max(4.0 * damping, floor)
        if not accepted:
            return z, it, pg
        z = trial
        val, grad, H = al.derivatives(z)
    return z, it, _projected_gradient(z, grad, lo, hi)


def _solve_once(nlp: TranscribedNLP, z0, opts: SolverOptions) -> NlpResult:
    lo, hi = nlp.lower_bounds(), nlp.upper_bounds()
    rows = nlp.independent_rows
    z = np.clip(np.asarray(z0, dtype=float), lo, hi)
    lam = np.zeros(rows.size)
    mu = opts.mu0
    # the first inner solve sets the reference for the decrease test
    cnorm_ref = np.inf
    total_inner = 0
    history = []
    status = ITERATION_LIMIT
    optimality = np.inf
    best = None
    stalls = 0
    last = np.inf
    for outer in range(1, opts.max_outer + 1):
        al = _AugmentedLagrangian(nlp, rows, lam, mu)
        z, n_inner, _ = _inner_solve(al, z, lo, hi, _INNER_TOL * opts.opt_tol, opts.max_inner)
        total_inner += n_inner
        c_full = nlp.constraints(z)
        c = c_full[rows]
        cnorm = float(np.linalg.norm(c_full))
        if best is None or cnorm < best[1]:
            best = (z.copy(), cnorm)
        if cnorm <= opts.feas_tol or cnorm <= opts.decrease * cnorm_ref:
            lam = lam + mu * c
            cnorm_ref = cnorm
            lam_full = np.zeros(nlp.n_cons)
            lam_full[rows] = lam
            optimality = kkt_residual(nlp, z, lam_full)
            if cnorm <= opts.feas_tol and optimality > opts.opt_tol:
                optimality = min(optimality, kkt_residual(nlp, z))
            history.append((outer, mu, cnorm, optimality, True))
            log.debug(
                "outer %d mu=%.0e |c|=%.3e opt=%.3e obj=%.9g inner=%d",
                outer, mu, cnorm, optimality, nlp.objective(z), n_inner,
            )
            stalls = 0
            if cnorm <= opts.feas_tol and optimality <= opts.opt_tol:
                status = CONVERGED
                break
        else:
            history.append((outer, mu, cnorm, np.nan, False))
            log.debug("outer %d mu=%.0e |c|=%.3e rejected inner=%d", outer, mu, cnorm, n_inner)
            stalls = stalls + 1 if cnorm > 0.99 * last else 0
            if stalls >= opts.stall_limit or mu * opts.mu_factor > opts.mu_max:
                status = INFEASIBLE
                break
            mu *= opts.mu_factor
        last = cnorm
    if status != CONVERGED and best is not None:
        z = best[0]
    return NlpResult(
        z_star=z,
        status=status,
        constraint_norm=float(np.linalg.norm(nlp.constraints(z))),
        objective=nlp.objective(z),
        iterations=total_inner,
        multipliers=lam,
        optimality=optimality,
        history=history,
    )


def solve_nlp(nlp: TranscribedNLP, guess, opts: SolverOptions | None = None) -> NlpResult:
    """Solve ``nlp`` from ``guess``; retry from perturbed controls if infeasible.

    Perturbations are uniform noise of amplitude ``opts.perturbation * G0``
    on the control block, drawn from a generator seeded with ``opts.seed``.
    """
    opts = opts or SolverOptions()
    guess = np.asarray(guess, dtype=float)
    if guess.shape != (nlp.n_vars,):
        raise ValueError(f"guess has shape {guess.shape}, expected ({nlp.n_vars},)")
    result = _solve_once(nlp, guess, opts)
    rng = np.random.default_rng(opts.seed)
    restarts = 0
    iterations = result.iterations
    while result.status == INFEASIBLE and restarts < opts.multistart:
        restarts += 1
        z0 = guess.copy()
        z0[nlp.control_slice] += opts.perturbation * nlp.G0 * rng.uniform(-1, 1, nlp.N)
        log.debug("restart %d", restarts)
        trial = _solve_once(nlp, z0, opts)
        iterations += trial.iterations
        if trial.status == CONVERGED or trial.constraint_norm < result.constraint_norm:
            result = trial
    result.iterations = iterations
    result.restarts = restarts
    return result

