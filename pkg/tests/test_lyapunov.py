import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semilab import library_scenario
from semilab.lyapunov import (LyapunovError, certify_scenario, decompose_field, descent_check,
                              local_lyapunov_cycle_planar, local_lyapunov_point, scenario_descent, solve_lyapunov)

ANNULUS_B = lambda r, th: (1 - r, 1.0 + 0 * r)


def test_scalar_lyapunov():
    lm = solve_lyapunov([[-1.0]])
    assert lm.A[0, 0] == pytest.approx(2.0, rel=1e-12)
    assert lm.residual <= lm.bound


def test_diagonal_lyapunov():
    assert np.allclose(solve_lyapunov(np.diag([-1.0, -2.0])).A, np.diag([2.0, 4.0]), rtol=1e-10)


@pytest.mark.parametrize("a,mu", [(0.5, 1.0), (3.0, 0.5), (1.0, 2.0)])
def test_scaled_identity(a, mu):
    lm = solve_lyapunov(-a * np.eye(3), mu)
    assert np.allclose(lm.A, 2 * a / mu * np.eye(3), rtol=1e-10)


def test_unstable_rejected():
    with pytest.raises(LyapunovError, match="not a stable linearization"):
        solve_lyapunov([[0.1, 0.0], [0.0, -1.0]])


@st.composite
def stable_matrices(draw):
    n = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 2 ** 31))
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    shift = np.max(np.linalg.eigvals(M).real) + draw(st.floats(0.1, 2.0))
    return M - shift * np.eye(n), draw(st.floats(0.2, 3.0))


@settings(max_examples=100, deadline=None)
@given(stable_matrices())
def test_random_stable_lyapunov(args):
    D, mu = args
    lm = solve_lyapunov(D, mu)
    assert lm.ok and lm.min_eig > 0
    assert np.allclose(lm.A, lm.A.T)
    E = lm.A @ D + D.T @ lm.A + mu * lm.A @ lm.A
    assert np.max(np.abs(np.linalg.eigvals(E))) <= lm.bound


def test_point_example():
    loc = local_lyapunov_point(lambda x: (-x,), [0.0])
    x = np.array([[0.3], [-0.7]])
    assert loc.L(x) == pytest.approx(2 * x[:, 0] ** 2)
    assert loc.psi(x) == pytest.approx(2 * x[:, 0] ** 2)
    assert loc.margin(x) == pytest.approx(4 * x[:, 0] ** 2)
    assert loc.L([[0.0]])[0] == 0 and loc.psi([[0.0]])[0] == 0


def test_point_rejections():
    with pytest.raises(LyapunovError, match="reverse"):
        local_lyapunov_point(lambda x: (x,), [0.0])
    assert local_lyapunov_point(lambda x: (x,), [0.0], reverse=True).L([[1.0]])[0] == pytest.approx(2.0)
    with pytest.raises(LyapunovError, match="saddle"):
        local_lyapunov_point(lambda x, y: (-x, y), [0.0, 0.0])
    with pytest.raises(LyapunovError, match="mu < 2"):
        local_lyapunov_point(lambda x: (-x,), [0.0], mu=3.0)


def test_point_margin_quadratic():
    b = lambda x, y: (-x + y ** 2, -2 * y + x * y)
    loc = local_lyapunov_point(b, [0.0, 0.0])
    d = np.geomspace(1e-3, 1e-1, 9)
    direction = np.array([0.6, 0.8])
    m = loc.margin(d[:, None] * direction)
    slope = np.polyfit(np.log(d), np.log(m), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_cycle_beta2_certified():
    loc = local_lyapunov_cycle_planar(ANNULUS_B, 1.0, beta=2.0)
    X = np.array([[1.2, 0.3], [0.7, 4.0]])
    assert loc.psi(X) == pytest.approx(2 * (X[:, 0] - 1) ** 2)
    assert loc.L([[1.0, 2.0]])[0] == 0 and loc.psi([[1.0, 2.0]])[0] == 0


def test_cycle_beta1_rejected():
    with pytest.raises(LyapunovError, match="larger beta"):
        local_lyapunov_cycle_planar(ANNULUS_B, 1.0, beta=1.0)


def test_not_an_orbit():
    with pytest.raises(LyapunovError, match="not a closed orbit"):
        local_lyapunov_cycle_planar(ANNULUS_B, 1.2)


def test_decompose_examples():
    d = decompose_field(lambda x: (2 * x,), lambda x: x ** 2)
    assert d.omega(np.array([0.5, 1.0]))[0] == pytest.approx([0.0, 0.0], abs=1e-8)
    c = decompose_field(lambda x, y: (1.0 + 0 * x, 2.0 + 0 * x), lambda x, y: 0 * x)
    assert [float(v) for v in c.omega(0.3, 0.4)] == pytest.approx([1.0, 2.0])
    r = np.array([0.8, 1.3])
    an = decompose_field(ANNULUS_B, lambda r, th: 2 * (r - 1) ** 2, metric="polar",
                         samples=np.column_stack([r, [0.1, 2.0]]))
    om = an.omega(r, np.array([0.1, 2.0]))
    assert om[0] == pytest.approx(5 * (1 - r), abs=1e-7)
    assert om[1] == pytest.approx([1.0, 1.0])
    assert an.sign_pattern == "negative" and an.psi_full_min > 0


def test_descent_examples():
    rep = descent_check(lambda x: 2 * x ** 2, lambda x: (-x,), [[1.0], [0.0]])
    a, b = rep.trajectories
    assert a.L_end == pytest.approx(2 * np.exp(-20), abs=1e-8) and a.max_increment <= rep.tolerance
    assert b.L_start == 0 and b.L_end == 0
    an = descent_check(lambda r, th: 2 * (r - 1) ** 2, ANNULUS_B, [[1.3, 0.0]], metric="polar")
    assert an.passed and an.trajectories[0].margin > 0


def test_descent_flags_escape():
    rep = descent_check(lambda x: x ** 2, lambda x: (x,), [[0.5], [0.0]],
                        valid=lambda X: np.abs(X[:, 0]) < 1)
    assert len(rep.flagged) == 1
    assert rep.trajectories[1].escaped is False


def test_annulus_certificate_robust():
    spec = library_scenario("annulus-cycle")
    a, b = certify_scenario(spec, 65), certify_scenario(spec, 129)
    assert a.passed and b.passed
    assert a.min_ratio == pytest.approx(0.5, rel=1e-6)
    assert a.alternative_min_ratio == pytest.approx(0.875, rel=1e-6)


def test_shipped_descent():
    for name in ("annulus-cycle", "gradient-1d", "gradient-2d"):
        for label, rep in scenario_descent(library_scenario(name)).items():
            if not isinstance(rep, str):
                assert rep.passed, (name, label)
