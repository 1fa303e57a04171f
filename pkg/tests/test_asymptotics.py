import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semilab import library_scenario
from semilab.asymptotics import (K_gaussian, K_paper, chi_ledger, concentration_weights, cycle_average,
                                 fk_kernel, gradient_weights, hermite_spectrum, lambda_cap, predict,
                                 pressure_contribution, theta_oracle_rs, theta_predictor, topological_pressure)
from semilab.scenario import CriticalPointData as CP, CycleData


def _min(x, q, value=1.0, **kw):
    return CP(location=np.atleast_1d(x), value=value, quad=np.atleast_1d(q), **kw)


def _crit(x, h, value):
    return CP(location=np.atleast_1d(x), value=value, hessian_phi=np.atleast_1d(h), role="critical")


def test_lambda_cap_examples():
    assert lambda_cap([_min(1.0, 4.0)]).Lambda == pytest.approx(2.0)
    assert lambda_cap([_min(np.zeros(3), np.ones(3))]).Lambda == pytest.approx(3.0)
    a, b = _min(-1.0, 1.0), _min(1.0, 4.0)
    cap = lambda_cap([a, b])
    assert cap.Lambda == pytest.approx(1.0)
    assert [p.label for p in cap.C_minmin] == [a.label]
    assert len(cap.C_min) == 2


def test_lambda_cap_empty():
    with pytest.raises(ValueError):
        lambda_cap([])


def test_weights_examples():
    assert concentration_weights([_min(-1, 4), _min(1, 4)], [1, 1]) == pytest.approx(
        {"P(-1)": 0.5, "P(1)": 0.5})
    assert list(concentration_weights([_min(0, 3)]).values()) == [pytest.approx(1.0)]
    w = list(concentration_weights([_min(-1, 1), _min(1, 4)], [1, 1]).values())
    assert w == pytest.approx([0.5858, 0.4142], abs=1e-4)
    with pytest.raises(ValueError, match="no maximally charged point"):
        concentration_weights([_min(0, 1)], [0.5])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=2, max_size=5), st.randoms())
def test_weights_sum_and_permutation(qs, rnd):
    pts = [_min(float(i), q) for i, q in enumerate(qs)]
    w = concentration_weights(pts)
    assert sum(w.values()) == pytest.approx(1.0)
    perm = pts[:]
    rnd.shuffle(perm)
    assert concentration_weights(perm) == pytest.approx(w)
    g = gradient_weights([_crit(float(i), q, 1.0) for i, q in enumerate(qs)])
    assert sum(g.values()) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=4), st.floats(0.3, 3))
def test_lambda_scaling(qs, s):
    pts = [_min(np.zeros(len(qs)), qs)]
    scaled = [_min(np.zeros(len(qs)), np.array(qs) * s ** 4)]
    assert lambda_cap(scaled).Lambda == pytest.approx(s ** 2 * lambda_cap(pts).Lambda, rel=1e-10)
    assert hermite_spectrum(qs, 0)[0] == pytest.approx(lambda_cap(pts).Lambda, rel=1e-12)


def test_K_conventions():
    pts = [_min(0, 1.0)]
    assert K_paper(pts) == pytest.approx(1 / np.sqrt(2 * np.pi))
    assert K_gaussian(pts) == pytest.approx(1 / np.sqrt(np.pi))


def test_pressure_examples():
    p = _crit([0.0, 0.0], [-1.0, 3.0], 2.0)
    assert pressure_contribution(p) == pytest.approx(3.0)
    r = _crit(1.0, 2.0, 5.0)
    assert pressure_contribution(r) == pytest.approx(5.0)
    a, b = _crit(0.0, -1.0, 2.0), _crit(1.0, 2.0, 5.0)
    Pr, S, _ = topological_pressure([a, b])
    assert Pr == pytest.approx(3.0) and [s.label for s in S] == [a.label]
    Pr2, S2, _ = topological_pressure([a, b, _crit(2.0, 1.0, 7.0)])
    assert Pr2 == Pr and len(S2) == 1


def test_gradient_weights_examples():
    w = list(gradient_weights([_crit(0.0, 1.0, 1.0), _crit(1.0, -4.0, 1.0)]).values())
    assert w == pytest.approx([2 / 3, 1 / 3])
    assert list(gradient_weights([_crit(0.0, 3.0, 1.0)]).values()) == [pytest.approx(1.0)]
    assert list(gradient_weights([_crit(0.0, 2.0, 1.0), _crit(1.0, 2.0, 1.0)]).values()) == pytest.approx([0.5, 0.5])
    with pytest.raises(ValueError, match="non-hyperbolic point"):
        gradient_weights([_crit(0.0, 0.0, 1.0)])


def test_hermite_spectrum():
    assert hermite_spectrum([1.0], 2) == pytest.approx([1, 3, 5])
    assert hermite_spectrum([4.0], 0)[0] == pytest.approx(2.0)


def test_theta_truc_examples():
    assert theta_predictor(_min(0, 1.0)).value_printed == 0.0
    beta = 0.7
    t = theta_predictor(_min(0, 1.0, quartic0=beta))
    assert t.value_printed == pytest.approx(2 ** -0.5 * beta / 2)
    R = np.zeros((2, 2)); R[0, 1] = R[1, 0] = 1.0
    from semilab.scenario import Curvature
    p = _min([0.0, 0.0], [1.0, 1.0], curvature=Curvature(R=2.0, R_ijij=R))
    # R enters as -R/4 and each R_ijij sqrt(l_i/l_j) with weight -1/12
    assert theta_predictor(p).curvature_terms == pytest.approx(-0.5 - 2 / 12)


def test_theta_truc_sign_switch():
    t = theta_predictor(_min(0, 1.0, cubic=1.0))
    assert t.bracket_printed == pytest.approx(-t.bracket_flipped)
    assert t.C > 0


def test_theta_rs_examples():
    assert theta_oracle_rs(_min(0, 1.0, quartic0=2.0)) == pytest.approx(1.5)
    assert theta_oracle_rs(_min(0, 4.0, quartic0=1.0)) == pytest.approx(3 / 16)
    assert theta_oracle_rs(_min([0, 0], [1.0, 2.0])) == 0.0


def test_fk_kernel_examples():
    assert fk_kernel(0.7, 0.3, np.linspace(-2, 2, 5), 0.0) == pytest.approx(np.ones(5))
    assert fk_kernel(0.5, 0.0, 0.0, 1.0) == pytest.approx(1 / np.sqrt(np.cosh(1.0)))
    assert np.isfinite(fk_kernel(2.0, 1.0, 0.5, 500.0))


def test_fk_kernel_pde_residual():
    lam, mu = 1.3, 0.6
    res = []
    for h in (0.02, 0.01):
        x = np.arange(-1, 1 + h / 2, h)
        t = 0.5
        z = lambda tt: fk_kernel(lam, mu, x, tt)
        zt = (z(t + h) - z(t - h)) / (2 * h)
        zx = z(t)
        zxx = (zx[2:] - 2 * zx[1:-1] + zx[:-2]) / h ** 2
        r = zt[1:-1] - 0.5 * zxx + lam * (x[1:-1] ** 2 + mu * x[1:-1]) * zx[1:-1]
        res.append(np.max(np.abs(r)))
    assert res[1] < 1e-3
    assert res[0] / res[1] == pytest.approx(4, rel=0.1)


def test_chi_ledger_cases():
    asym = library_scenario("asymmetric-well-1d").critical_points
    assert chi_ledger(asym).removed_at == 1
    sym = library_scenario("double-well-1d").critical_points
    led = chi_ledger(sym)
    assert led.verdict == "degenerate case" and len(led.C3) == 2
    one = chi_ledger([_min(0, 1.0)])
    assert one.removed_at == 0 and len(one.C1) == 1


def test_cycle_average_examples():
    circ = lambda t: (np.ones_like(t), t)
    assert cycle_average(lambda r, th: 4.0 + 0 * r, circ, 2 * np.pi) == pytest.approx(4.0)
    assert cycle_average(lambda r, th: 2 + (r - 1) ** 2, CycleData(1.0, 2 * np.pi)) == pytest.approx(2.0)
    assert cycle_average(lambda r, th: 2 + np.cos(th), circ, 2 * np.pi) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        cycle_average(lambda r, th: r, circ)


def test_predict_reports():
    rep = predict(library_scenario("double-well-1d"))
    assert rep.case == "potential" and rep.Lambda == pytest.approx(2.0)
    assert rep.gamma == pytest.approx({"x=-1": 0.5, "x=+1": 0.5})
    g = predict(library_scenario("gradient-1d"))
    assert g.topological_pressure == pytest.approx(1.0)
    assert '"case": "gradient"' in g.to_json()
    a = predict(library_scenario("annulus-cycle"))
    assert a.cycle_averages["r=1"] == pytest.approx(2.0)
