import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semilab import library_scenario
from semilab.blowup import (ProfileError, argmax_velocity, concentration_masses, decay_off_wells, extract_profile,
                            fit_expansion, supnorm_growth, w1_correction)
from semilab.eigensolver import solve, sweep
from semilab.scenario import CriticalPointData as CP


@pytest.fixture(scope="module")
def dw_sweep():
    return sweep(library_scenario("double-well-1d"), 4097, np.geomspace(1e-2, 1e-3, 6))


def test_exact_harmonic_profile_refines():
    spec = library_scenario("exact-harmonic-1d")
    P = spec.critical_points[0]
    res = []
    for eps, n in ((1e-2, 1025), (1e-3, 4097)):
        prof = extract_profile(solve(spec, eps, n), P, spec=spec)
        res.append(prof.residual)
        assert prof.fitted_quad[0] == pytest.approx(1.0, rel=0.02)
        assert np.all(prof.w > 0) and np.all(prof.w <= 1)
    assert res[1] < res[0] < 1e-2


def test_flat_profile_rejected():
    spec = library_scenario("constant-torus-1d")
    with pytest.raises(ProfileError, match="no curvature"):
        extract_profile(solve(spec, 0.1, 256), CP(location=[0.5], value=3.0, quad=[1.0]), spec=spec)


def test_ball_exit_reports_radius():
    spec = library_scenario("double-well-1d")
    with pytest.raises(ProfileError, match="max admissible"):
        extract_profile(solve(spec, 0.5, 1025), spec.critical_points[1], spec=spec, y_radius=4)


def test_symmetric_wells_fit_agree():
    spec = library_scenario("double-well-1d")
    pair = solve(spec, 1e-3, 8193)
    q = [extract_profile(pair, P, spec=spec).fitted_quad[0] for P in spec.critical_points]
    assert q[0] == pytest.approx(q[1], rel=0.01)


def test_symmetric_masses(dw_sweep):
    spec = library_scenario("double-well-1d")
    rep = concentration_masses(dw_sweep.pairs[-1], spec)
    assert rep.masses["x=-1"] == pytest.approx(0.5, abs=1e-3)
    assert rep.masses["x=+1"] == pytest.approx(0.5, abs=1e-3)
    assert max(rep.f.values()) == pytest.approx(1.0)
    assert sum(rep.masses.values()) + rep.remainder == pytest.approx(1.0, abs=1e-10)
    first = concentration_masses(dw_sweep.pairs[0], spec)
    assert rep.remainder < first.remainder


def test_overlapping_balls_rejected(dw_sweep):
    with pytest.raises(ValueError, match="overlapping"):
        concentration_masses(dw_sweep.pairs[-1], library_scenario("double-well-1d"), delta=1.5)


def test_annulus_weighted_L_mass():
    spec = library_scenario("annulus-cycle")
    pair = solve(spec, 1e-3, (257, 64))
    rep = concentration_masses(pair, spec, delta=0.1, measure="weighted-L")
    assert rep.masses["r=1"] > 0.95


def test_symmetric_argmax_stays_at_center():
    spec = library_scenario("exact-harmonic-1d")
    tr = argmax_velocity(sweep(spec, 2049, np.geomspace(1e-2, 1e-3, 4)), spec)
    assert max(tr.distance) < 1e-12


def test_tilted_argmax_bounded(dw_sweep):
    # each well of the double well carries a cubic term, so the argmax drifts at rate sqrt(eps)
    tr = argmax_velocity(dw_sweep, library_scenario("double-well-1d"))
    assert tr.bounded and not tr.splits
    assert tr.exponent == pytest.approx(0.5, abs=0.05)


def test_argmax_needs_four_points():
    spec = library_scenario("double-well-1d")
    with pytest.raises(ValueError):
        argmax_velocity(sweep(spec, 257, [0.1, 0.05]), spec)


def test_supnorm_slopes(dw_sweep):
    fit = supnorm_growth(dw_sweep, "potential", library_scenario("double-well-1d"))
    assert fit.slope == pytest.approx(-1 / 8, abs=0.01)
    c = supnorm_growth(sweep(library_scenario("constant-torus-1d"), 128, np.geomspace(0.1, 1e-3, 5)),
                       "potential")
    assert abs(c.slope) < 1e-10


def test_decay_coarse_regime_allowed():
    spec = library_scenario("double-well-1d")
    rep = decay_off_wells(solve(spec, 0.5, 1025), spec, 0.3)
    assert 0.1 < rep.ratio <= 1


def test_decay_empty_set():
    spec = library_scenario("double-well-1d")
    with pytest.raises(ValueError, match="empty"):
        decay_off_wells(solve(spec, 0.5, 257), spec, 5.0)


def test_fit_expansion_exact_basis():
    eps = np.geomspace(1e-1, 1e-3, 6)
    fit = fit_expansion(eps, 1 + 2 * np.sqrt(eps) + 3 * eps)
    assert fit.coefficients == pytest.approx((1, 2, 3), abs=1e-12)
    with pytest.raises(ValueError, match=">= 4"):
        fit_expansion(eps[:3], eps[:3])


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_fit_expansion_recovers_any_basis_point(a, b, c):
    eps = np.geomspace(1e-1, 1e-4, 7)
    fit = fit_expansion(eps, a + b * np.sqrt(eps) + c * eps)
    assert fit.coefficients == pytest.approx((a, b, c), abs=1e-9)


def test_double_well_expansion(dw_sweep):
    fit = fit_expansion(dw_sweep)
    assert fit.c0 == pytest.approx(1.0, abs=1e-3)
    assert fit.c1 == pytest.approx(2.0, rel=0.05)


def test_w1_zero_cubic():
    rep = w1_correction(CP(location=[0.0], value=1.0, quad=[1.0]))
    assert all(abs(v) < 1e-12 for k, v in rep.coefficients.items() if any(k))


def test_w1_linear_in_cubic():
    a = w1_correction(CP(location=[0.0], value=1.0, quad=[1.0], cubic=0.5))
    b = w1_correction(CP(location=[0.0], value=1.0, quad=[1.0], cubic=1.0))
    for k in b.coefficients:
        assert b.coefficients[k] == pytest.approx(2 * a.coefficients.get(k, 0.0), abs=1e-12)
    assert set(k for k, v in b.coefficients.items() if abs(v) > 1e-12) <= {(1,), (3,)}
    steps, resid = zip(*b.residuals)
    assert resid[-1] < 1e-6
