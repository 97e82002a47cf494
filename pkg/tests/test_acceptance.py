"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
import warnings

import numpy as np
import pytest
from conftest import record_acceptance, solved

from omcool import collocation as C, integrate, mintime, model, reachability
from omcool.controls import ConstantControl, PiecewiseConstantControl

T31 = 0.5 * math.pi * math.sqrt(10)
T51 = 0.5 * math.pi * math.sqrt(26)


def test_01_constant_control_oracle():
    start = time.perf_counter()
    traj = integrate.propagate(ConstantControl(0.3), T31, 20_000)
    err = integrate.final_error(traj)
    elapsed = time.perf_counter() - start
    ok = err < 1e-6 and elapsed < 1.0
    record_acceptance(1, "g=0.3 reaches the target", ok, f"error={err:.3g} runtime={elapsed:.3f}s")
    assert ok


def test_02_second_oracle_and_negative_control():
    err = integrate.final_error(integrate.propagate(ConstantControl(5 / 26), T51, 20_000))
    neg = integrate.final_error(integrate.propagate(ConstantControl(-0.3), T31, 20_000))
    ok = err < 1e-6
    record_acceptance(2, "g=5/26 reaches the target", ok, f"error={err:.3g}; g=-0.3 error={neg:.3g} (reported)")
    assert ok


def test_03_even_pair_misses():
    err = integrate.final_error(integrate.propagate(ConstantControl(0.4), 0.5 * math.pi * math.sqrt(5), 20_000))
    ok = err > 0.5
    record_acceptance(3, "(2,1) pair misses the target", ok, f"error={err:.3g}")
    assert ok


@pytest.mark.parametrize(
    "G0,m",
    [(0.35, 3), (0.2, 5), (0.13, 7), (11 / 122, 11)],
    ids=["0.35", "0.2", "0.13", "11/122"],
)
def test_04_staircase_table(G0, m):
    e = reachability.staircase_time(G0)
    T = 0.5 * math.pi * math.sqrt(m * m + 1)
    ok = e.m == m and e.n == 1 and abs(e.T - T) <= 1e-12 and abs(e.G - m / (m * m + 1)) <= 1e-12
    record_acceptance(4, f"staircase at G0={G0:.6g}", ok, f"expected m={m} T={T:.12g}, got m={e.m} T={e.T:.12g}")
    assert ok


def test_05_bang_point():
    sol, elapsed = solved(0.3, 70)
    dev = float(np.max(np.abs(sol.control - 0.3)))
    ok = abs(sol.t_star - 4.96729) <= 0.02 and dev <= 0.05 * 0.3 and elapsed < 60
    record_acceptance(
        5, "G0=0.3 N=70 bang", ok,
        f"T={sol.t_star:.6f} max|g-G0|={dev:.3g} status={sol.status} runtime={elapsed:.1f}s",
    )
    assert ok


def test_06_half_bound_solve():
    sol, elapsed = solved(0.5, 130)
    report = mintime.verify(sol)
    ok = (
        3.95 <= sol.t_star <= 4.25
        and sol.t_star < 4.95
        and report.reintegration_error <= 1e-3
        and elapsed < 120
    )
    record_acceptance(
        6, "G0=0.5 N=130", ok,
        f"T={sol.t_star:.6f} reintegration={report.reintegration_error:.3g} runtime={elapsed:.1f}s",
    )
    assert ok


def test_07_sweep_monotone():
    values = [0.50, 0.45, 0.40, 0.35, 0.30, 0.25, 0.20]
    start = time.perf_counter()
    table = mintime.sweep(0.5, 0.2, 0.05, N=mintime.SWEEP_NODES, values=values)
    elapsed = time.perf_counter() - start
    g0 = [r.g0 for r in table.rows]
    T = [r.t_star for r in table.rows]
    # descending G0, so T must not fall by more than the tolerance
    ok = g0 == values and all(b >= a - 0.01 for a, b in zip(T, T[1:])) and all(np.isfinite(T))
    record_acceptance(
        7, "coarse sweep is monotone", ok,
        " ".join(f"{g:.2f}:{t:.4f}" for g, t in zip(g0, T)) + f" runtime={elapsed:.1f}s",
    )
    assert ok


def test_08_invariants_under_random_controls():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        pieces = int(rng.integers(1, 25))
        breaks = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 10.0, pieces - 1))])
        control = PiecewiseConstantControl(breaks, rng.uniform(-0.5, 0.5, pieces))
        worst = max(worst, integrate.invariant_drift(integrate.propagate(control, 10.0)))
    ok = worst < 1e-9
    record_acceptance(8, "casimirs conserved", ok, f"max drift={worst:.3g}")
    assert ok


def _grid_checks(N):
    grid = C.lgl_grid(N)
    x, w, D = grid.nodes, grid.weights, grid.D
    wsum = abs(w.sum() - 2.0)
    quad = max(abs(w @ x**k - (2.0 / (k + 1) if k % 2 == 0 else 0.0)) for k in range(2 * N - 2))
    const = float(np.max(np.abs(D @ np.ones(N))))
    corner = max(abs(D[0, 0] + (N - 1) * N / 4), abs(D[-1, -1] - (N - 1) * N / 4))
    return wsum, quad, const, corner


def _reference_defect(N):
    X, g, T = mintime.staircase_guess(0.3, N)
    nlp = C.transcribe(0.3, C.lgl_grid(N), C.FixedT(T))
    return float(np.linalg.norm(nlp.defects(nlp.pack(X, g))))


def test_09_collocation_suite():
    details, ok = [], True
    for N in (5, 20, 70, 130):
        wsum, quad, const, corner = _grid_checks(N)
        good = wsum <= 1e-12 and quad <= 1e-10 and const <= 1e-10 and corner <= 1e-10
        ok &= good
        details.append(f"N={N}:{'ok' if good else 'bad'}(w={wsum:.1e},q={quad:.1e},D1={const:.1e},c={corner:.1e})")
    # the decay is monotone until the rounding floor, which N=25 already reaches
    decay = [_reference_defect(N) for N in (5, 10, 15, 20, 25)]
    at40 = _reference_defect(40)
    ok &= all(b < a for a, b in zip(decay, decay[1:])) and at40 < 1e-6
    details.append("defects " + " ".join(f"{d:.1e}" for d in decay) + f" N=40:{at40:.1e}")
    record_acceptance(9, "collocation suite", ok, "; ".join(details))
    assert ok


def test_10_jacobian_finite_differences():
    rng = np.random.default_rng(10)
    nlp = C.transcribe(0.5, C.lgl_grid(12), C.FreeT(1.0, 10.0), checks_per_interval=1)
    h = 1e-6
    worst = 0.0
    for _ in range(20):
        z = rng.uniform(-1.0, 1.0, nlp.n_vars)
        z[nlp.control_slice] *= 0.5
        z[-1] = rng.uniform(1.0, 10.0)
        J = nlp.jacobian(z).toarray()
        fd = np.empty_like(J)
        for j in range(z.size):
            e = np.zeros(z.size)
            e[j] = h
            fd[:, j] = (nlp.constraints(z + e) - nlp.constraints(z - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(J - fd)) / np.max(np.abs(J))))
    ok = worst < 1e-6
    record_acceptance(10, "constraint Jacobian", ok, f"max relative error={worst:.3g} over 20 points")
    assert ok


@pytest.mark.parametrize("G0,N", [(0.22, 70), (0.5, 130)], ids=["0.22", "0.5"])
def test_11_symmetry_diagnostic(G0, N):
    sol, _ = solved(G0, N)
    dev = sol.diagnostics.symmetry_deviation
    ok = dev <= 0.1 * G0
    record_acceptance(
        11, f"symmetry at G0={G0}", ok, f"deviation={dev:.3g} bound={0.1 * G0:.3g} N={N}", warn_only=True
    )
    if not ok:
        warnings.warn(f"symmetry deviation {dev:.3g} exceeds {0.1 * G0:.3g} at G0={G0}")


def test_12_rwa_reference():
    g = 0.01
    traj = integrate.propagate(ConstantControl(g), math.pi / (2 * g))
    final = traj.final
    ratios = [model.phonon_number(final, n_b) / n_b for n_b in (1.0, 10.0, 1000.0)]
    ok = final[0] >= 0.98 and max(ratios) <= 0.02
    record_acceptance(12, "RWA regime", ok, f"J1={final[0]:.6f} max phonons/n_b={max(ratios):.3g}")
    assert ok
