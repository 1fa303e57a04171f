import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from semilab.hermite import hermite_eigenvalues, hermite_function, rs_second_order


def _q(m, beta):
    t = np.zeros((m,) * 4)
    t[(0,) * 4] = beta
    return t


def test_harmonic_spectrum_levels():
    assert np.allclose(hermite_eigenvalues([1.0], 3), [1, 3, 5, 7])
    assert hermite_eigenvalues([4.0], 0)[0] == pytest.approx(2.0)


def test_banded_oracle_ground():
    # -w'' + y^2 w on [-10, 10], 2000 interior nodes
    n = 2000
    y = np.linspace(-10, 10, n + 2)[1:-1]
    h = y[1] - y[0]
    d = 2 / h ** 2 + y ** 2
    e = -np.ones(n - 1) / h ** 2
    ground = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, 0))[0][0]
    assert ground == pytest.approx(hermite_eigenvalues([1.0], 0)[0], abs=1e-3)
    # second-order scheme: the eigenvalue error is O(h^2) ~ 1e-5 at this resolution
    assert abs(ground - 1) < 2e-5


@pytest.mark.parametrize("lam,beta,expect", [(1.0, 1.0, 0.75), (1.0, 2.5, 1.875), (4.0, 1.0, 3 / 16)])
def test_quartic_mean(lam, beta, expect):
    out = rs_second_order([lam], np.zeros((1, 1, 1)), _q(1, beta))
    assert out["theta"] == pytest.approx(expect, rel=1e-12)


def test_cubic_second_order_matches_dense():
    # oracle: ground energy of -w'' + y^2 w + g y^3 on a fine grid, second difference in g
    c3 = np.zeros((1, 1, 1)); c3[0, 0, 0] = 1.0
    out = rs_second_order([1.0], c3, np.zeros((1,) * 4))
    n = 3000
    y = np.linspace(-7, 7, n + 2)[1:-1]
    h = y[1] - y[0]

    def e0(g):
        d = 2 / h ** 2 + y ** 2 + g * y ** 3
        return sla.eigh_tridiagonal(d, -np.ones(n - 1) / h ** 2, select="i", select_range=(0, 0))[0][0]

    d2 = lambda g: (e0(g) - 2 * e0(0.0) + e0(-g)) / (2 * g * g)
    e2 = (4 * d2(0.01) - d2(0.02)) / 3  # remove the g^2 contamination
    assert -e2 == pytest.approx(out["cubic_sum"], rel=1e-4)
    assert out["cubic_sum"] == pytest.approx(11 / 16, rel=1e-12)
    assert out["max_level_used"] == 3


def test_zero_perturbation_is_zero():
    assert rs_second_order([1.0, 2.0], np.zeros((2,) * 3), np.zeros((2,) * 4))["theta"] == 0.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.integers(0, 4))
def test_hermite_function_is_eigenfunction(lam, n):
    y = np.linspace(-3, 3, 2001)
    h = y[1] - y[0]
    w = hermite_function((n,), (y,), [lam])
    lap = (w[2:] - 2 * w[1:-1] + w[:-2]) / h ** 2
    res = -lap + lam * y[1:-1] ** 2 * w[1:-1] - (2 * n + 1) * np.sqrt(lam) * w[1:-1]
    assert np.max(np.abs(res)) < 1e-3 * max(1.0, np.max(np.abs(w))) * (1 + n) ** 2 * lam
