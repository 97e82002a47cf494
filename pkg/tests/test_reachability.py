import math

import numpy as np
import pytest

from omcool import model, reachability as R


def test_eigenfrequencies_examples():
    wp, wm = R.eigenfrequencies(0.3)
    assert wp == pytest.approx(1.2649110640673518, abs=1e-12)
    assert wm == pytest.approx(0.6324555320336759, abs=1e-12)
    assert R.eigenfrequencies(0.5) == (math.sqrt(2.0), 0.0)
    T = 0.5 * math.pi * math.sqrt(10)
    assert (wp + wm) * T == pytest.approx(3 * math.pi, abs=1e-12)
    assert (wp - wm) * T == pytest.approx(math.pi, abs=1e-12)


def test_eigenfrequencies_match_matrix_spectrum():
    G = 0.3
    wp, wm = R.eigenfrequencies(G)
    ev_a = np.sort(np.abs(np.linalg.eigvals(model.system_matrix_a(G)).imag))
    np.testing.assert_allclose(ev_a, np.sort([wp - wm, wp - wm, wp + wm, wp + wm]), atol=1e-12)
    ev_b = np.sort(np.abs(np.linalg.eigvals(model.system_matrix_b(G)).imag))
    np.testing.assert_allclose(ev_b, np.sort([0, 0, 2 * wp, 2 * wp, 2 * wm, 2 * wm]), atol=1e-7)


@pytest.mark.parametrize("G", [0.0, -0.1, 0.51])
def test_eigenfrequencies_reject_out_of_range(G):
    with pytest.raises(ValueError):
        R.eigenfrequencies(G)


def test_pair_to_control_examples():
    assert R.pair_to_control(3, 1) == (0.3, 0.5 * math.pi * math.sqrt(10))
    G, T = R.pair_to_control(5, 1)
    assert G == pytest.approx(5 / 26, abs=1e-15) and T == pytest.approx(8.0095211222070457, abs=1e-12)
    assert R.pair_to_control(5, 3) == (15 / 34, 0.5 * math.pi * math.sqrt(34))


@pytest.mark.parametrize("m,n", [(2, 1), (3, 2), (1, 1), (3, 3), (1, 3), (-3, 1), (3, 0), (3.5, 1)])
def test_pair_to_control_rejects(m, n):
    with pytest.raises(ValueError):
        R.pair_to_control(m, n)


def test_feasible_pairs_examples():
    pairs = {(e.m, e.n) for e in R.feasible_pairs(0.5, 5)}
    assert {(3, 1), (5, 1), (5, 3)} <= pairs
    pairs = {(e.m, e.n) for e in R.feasible_pairs(0.2, 7)}
    assert (5, 1) in pairs and (7, 1) in pairs and (3, 1) not in pairs
    assert [(e.m, e.n) for e in R.feasible_pairs(0.3, 3)] == [(3, 1)]


def test_feasible_pairs_sorted_and_bounded():
    entries = R.feasible_pairs(0.27, 21)
    times = [e.T for e in entries]
    assert times == sorted(times)
    bound = R.ratio_bound(0.27)
    for e in entries:
        assert e.G <= 0.27 and e.G < 0.5
        assert e.n / e.m <= bound + 1e-12


@pytest.mark.parametrize(
    "G0,m",
    [(0.35, 3), (0.3, 3), (0.2, 5), (5 / 26, 5), (0.1, 11), (11 / 122, 11), (0.5, 3), (0.9, 3), (0.13, 9)],
)
def test_staircase_levels(G0, m):
    e = R.staircase_time(G0)
    assert (e.m, e.n) == (m, 1)
    assert e.G == m / (m * m + 1)
    assert e.T == 0.5 * math.pi * math.sqrt(m * m + 1)
    assert e.G <= G0


def test_staircase_half_open_intervals():
    for m in range(3, 31, 2):
        low = m / (m * m + 1)
        assert R.staircase_level(low) == m
        assert R.staircase_level(np.nextafter(low, 0)) == m + 2


def test_staircase_is_monotone():
    g0 = np.linspace(0.02, 0.6, 2000)
    T = [R.staircase_time(g).T for g in g0]
    assert np.all(np.diff(T) <= 0)


def test_step_heights_increase_towards_pi():
    h = [R.step_height(m) for m in range(5, 101, 2)]
    assert np.all(np.diff(h) > 0)
    assert max(h) < math.pi
    assert math.pi - h[-1] < 0.01


def test_staircase_rejects_non_positive():
    with pytest.raises(ValueError):
        R.staircase_time(0.0)


def test_format():
    assert R.staircase_time(0.35).format() == "m=3 n=1 G=0.29999999999999999 T=4.9672941328980507"
