import numpy as np
import pytest

from omcool import model


def test_system_matrix_a_examples():
    expected = np.array([[0, 0.5, 0, 0], [-0.5, 0, 0.5, 0], [0, 0.5, 0, 2], [0, 0, -2, 0]])
    np.testing.assert_array_equal(model.system_matrix_a(0.25), expected)
    off = model.system_matrix_a(0.0)
    assert off[2, 3] == 2 and off[3, 2] == -2
    assert np.count_nonzero(off) == 2
    np.testing.assert_array_equal(
        model.system_matrix_a(0.5), [[0, 1, 0, 0], [-1, 0, 1, 0], [0, 1, 0, 2], [0, 0, -2, 0]]
    )


def test_system_matrix_b_examples():
    # rows follow the state order (J0, Q1, K1, Q3, K3, J2)
    np.testing.assert_array_equal(model.system_matrix_b(0.5)[1], [-1, 0, -2, 1, 0, 0])
    np.testing.assert_array_equal(model.system_matrix_b(0.25)[4], [0, 0, -0.5, 2, 0, -0.5])
    off = model.system_matrix_b(0.0)
    assert off[1, 2] == -2 and off[2, 1] == 2 and off[3, 4] == -2 and off[4, 3] == 2
    assert not off[0].any() and not off[5].any()
    assert np.count_nonzero(off) == 4


@pytest.mark.parametrize("g1,g2", [(0.1, 0.2), (-0.3, 0.45), (0.125, 0.375)])
def test_matrices_are_linear_in_g(g1, g2):
    for fn in (model.system_matrix_a, model.system_matrix_b, model.system_matrix):
        np.testing.assert_array_equal(fn(g1) + fn(g2) - fn(0.0), fn(g1 + g2))


def test_full_matrix_is_block_diagonal():
    A = model.system_matrix(0.3)
    np.testing.assert_array_equal(A[:4, :4], model.system_matrix_a(0.3))
    np.testing.assert_array_equal(A[4:, 4:], model.system_matrix_b(0.3))
    assert not A[:4, 4:].any() and not A[4:, :4].any()


def test_rhs_examples():
    x0 = model.initial_state()
    np.testing.assert_array_equal(model.rhs(x0, 0.0), np.zeros(10))
    q2 = np.zeros(10)
    q2[3] = 1.0
    expected = np.zeros(10)
    expected[2] = 2.0
    np.testing.assert_array_equal(model.rhs(q2, 0.0), expected)
    d = model.rhs(x0, 0.3)
    expected = np.zeros(10)
    expected[1] = 0.6
    expected[5] = -0.6
    np.testing.assert_allclose(d, expected, atol=1e-15)


def test_boundary_states():
    x0, xf = model.initial_state(), model.target_state()
    np.testing.assert_array_equal(x0, [-1, 0, 0, 0, 1, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(xf, [1, 0, 0, 0, 1, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(xf[:4], -x0[:4])
    np.testing.assert_array_equal(xf[4:], x0[4:])
    assert model.STATE_NAMES == ("J1", "J3", "K2", "Q2", "J0", "Q1", "K1", "Q3", "K3", "J2")


def test_casimirs():
    assert model.casimirs(model.initial_state()) == (-1.0, -1.0)
    assert model.casimirs(model.target_state()) == (-1.0, -1.0)
    assert model.casimirs(np.zeros(10)) == (0.0, 0.0)


@pytest.mark.parametrize("n_b", [0.0, 1.0, 10.0, 1234.5])
def test_readouts(n_b):
    x0, xf = model.initial_state(), model.target_state()
    assert model.phonon_number(x0, n_b) == pytest.approx(n_b, abs=1e-12)
    assert model.photon_number(x0, n_b) == pytest.approx(0.0, abs=1e-12)
    assert model.phonon_number(xf, n_b) == pytest.approx(0.0, abs=1e-12)
    assert model.photon_number(xf, n_b) == pytest.approx(n_b, abs=1e-12)


def test_readout_hand_value_and_sum_identity(rng):
    x = np.zeros(10)
    x[4] = 1.0
    assert model.phonon_number(x, 1.0) == 0.5
    for _ in range(10):
        x = rng.normal(size=10)
        n_b = rng.uniform(0, 50)
        total = model.phonon_number(x, n_b) + model.photon_number(x, n_b)
        assert total == pytest.approx((n_b + 1) * x[4] - 1, abs=1e-12)


def test_readouts_reject_negative_occupation():
    with pytest.raises(ValueError):
        model.phonon_number(model.initial_state(), -1.0)
    with pytest.raises(ValueError):
        model.photon_number(model.initial_state(), -1.0)


def test_rwa_state():
    g = 0.07
    assert model.rwa_state(g, 0.0) == (-1.0, 0.0)
    j1, j3 = model.rwa_state(g, model.rwa_swap_time(g))
    assert j1 == pytest.approx(1.0, abs=1e-15) and j3 == pytest.approx(0.0, abs=1e-15)
    assert model.rwa_swap_time(0.01) == pytest.approx(50 * np.pi, rel=1e-15)
    t = np.linspace(0, 300, 1001)
    j1, j3 = model.rwa_state(0.01, t)
    np.testing.assert_allclose(j1**2 + j3**2, 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        model.rwa_state(0.0, 1.0)
