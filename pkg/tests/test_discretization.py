import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semilab import library_scenario
from semilab.discretization import (ResolutionWarning, assemble_operator, build_grid, dump_matrix,
                                    gauge_transform, weighted_measure)
from semilab.eigensolver import principal_eigenpair
from semilab.scenario import DomainSpec, ScenarioError, ScenarioSpec, scenario_from_dict


def _interval(a, b, boundary="dirichlet-zero"):
    kind = "flat-torus" if boundary == "periodic" else "interval"
    return DomainSpec(kind, ((a, b),), boundary)


def test_dirichlet_grid_counts():
    g = build_grid(_interval(0, np.pi), 101)
    assert g.n_free == 99
    assert g.spacing[0] == pytest.approx(np.pi / 100)
    assert g.weights_full.sum() == pytest.approx(np.pi, rel=1e-12)


def test_torus_grid_wraps():
    g = build_grid(_interval(0, 1, "periodic"), 64)
    assert g.n_free == 64
    assert g.weights.sum() == pytest.approx(1.0, rel=1e-12)


def test_annulus_weights_are_polar():
    an = library_scenario("annulus-cycle")
    g = build_grid(an.domain, (129, 32))
    assert g.weights_full.sum() == pytest.approx(an.domain.volume(), rel=1e-12)
    gr = build_grid(an.domain, 129, radial=True)
    assert gr.weights_full.sum() == pytest.approx(an.domain.volume(), rel=1e-12)


def test_too_coarse_rejected():
    with pytest.raises(ValueError):
        build_grid(_interval(0, 1), 8)


def test_layer_rule_warns():
    with pytest.warns(ResolutionWarning):
        g = build_grid(_interval(-2, 2), 65, eps=1e-3)
    assert g.warnings


def test_constant_potential_on_torus():
    spec = ScenarioSpec(_interval(0, 1, "periodic"), lambda x: 3.0 + 0 * x)
    g = build_grid(spec.domain, 64)
    A = assemble_operator(spec, g, 0.1).matrix
    assert np.allclose(A @ np.ones(64), 3.0)


def test_dirichlet_eigenvalue_tends_to_one():
    spec = ScenarioSpec(_interval(0, np.pi), lambda x: 1 + 0 * x)
    errs = []
    for n in (101, 201, 401):
        g = build_grid(spec.domain, n)
        errs.append(abs(principal_eigenpair(assemble_operator(spec, g, 1.0, c_override=0.0), g).lam - 1))
    assert errs[-1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)


def test_upwind_large_drift_m_matrix():
    spec = scenario_from_dict(dict(domain=dict(kind="interval", bounds=[[0.0, 1.0]]), c="1 + 0*x",
                                   field=dict(kind="gradient-of-phi", phi="50*x")))
    op = assemble_operator(spec, build_grid(spec.domain, 65), 1e-3, "upwind")
    A = op.matrix.tocoo()
    assert np.all(A.data[A.row != A.col] <= 0)
    assert op.is_m_matrix()


def test_central_rejects_high_peclet():
    spec = scenario_from_dict(dict(domain=dict(kind="interval", bounds=[[0.0, 1.0]]), c="1 + 0*x",
                                   field=dict(kind="gradient-of-phi", phi="50*x")))
    with pytest.raises(ValueError):
        assemble_operator(spec, build_grid(spec.domain, 65), 1e-3, "central")


@pytest.mark.parametrize("mode,order", [("central", 2), ("upwind", 1)])
def test_consistency_order(mode, order):
    spec = scenario_from_dict(dict(domain=dict(kind="interval", bounds=[[0.0, 1.0]]), c="2 + x",
                                   field=dict(kind="gradient-of-phi", phi="x**2/2 + x")))
    f = lambda x: np.sin(np.pi * x) * np.exp(x)
    fp = lambda x: np.exp(x) * (np.pi * np.cos(np.pi * x) + np.sin(np.pi * x))
    fpp = lambda x: np.exp(x) * ((1 - np.pi ** 2) * np.sin(np.pi * x) + 2 * np.pi * np.cos(np.pi * x))
    eps = 0.5
    errs = []
    for n in (65, 129, 257):
        g = build_grid(spec.domain, n)
        x = g.coords[0]
        exact = -eps * fpp(x) + (x + 1) * fp(x) + (2 + x) * f(x)
        errs.append(np.max(np.abs(assemble_operator(spec, g, eps, mode).matrix @ f(x) - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - order) < 0.2)


def test_gauge_constant_phi_scales():
    spec = scenario_from_dict(dict(domain=dict(kind="interval", bounds=[[-1.0, 1.0]]), c="2 + x**2",
                                   field=dict(kind="gradient-of-phi", phi="0*x + 3")))
    gp = gauge_transform(spec, 0.1)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(gp.c_eps(x), 0.1 * (2 + x ** 2), atol=1e-9)


def test_gauge_quadratic_phi_potential():
    # phi = x^2 with the ordinary Laplacian: eps c - eps + x^2
    gp = gauge_transform(library_scenario("gauge-quadratic-1d"), 0.05)
    x = np.linspace(-1, 1, 7)
    assert np.allclose(gp.c_eps(x), 0.05 * 2 - 0.05 + x ** 2, atol=1e-7)


def test_gauge_spectra_agree():
    spec = library_scenario("gauge-quadratic-1d")
    g = build_grid(spec.domain, 8193)
    a = principal_eigenpair(assemble_operator(spec, g, 0.05, "central"), g).lam
    b = principal_eigenpair(gauge_transform(spec, 0.05).assemble_scaled(g), g).lam
    c = principal_eigenpair(gauge_transform(spec, 0.05).assemble(g), g).lam
    assert abs(a - b) / a < 1e-6
    assert b == pytest.approx(c, rel=1e-9)


def test_gauge_requires_gradient_field():
    with pytest.raises(ScenarioError):
        gauge_transform(library_scenario("double-well-1d"), 0.1)


def test_annulus_radial_matches_polar():
    an = library_scenario("annulus-cycle")
    g2 = build_grid(an.domain, (129, 32))
    g1 = build_grid(an.domain, 129, radial=True)
    l2 = principal_eigenpair(assemble_operator(an, g2, 1e-2), g2).lam
    l1 = principal_eigenpair(assemble_operator(an, g1, 1e-2), g1).lam
    assert abs(l2 - l1) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(-1.0, 1.0))
def test_weighted_measure_normalized(eps, shift):
    g = build_grid(_interval(-1, 1), 129)
    u = np.exp(-(g.coords[0] - 0.2) ** 2)
    m = weighted_measure(u, lambda x: (x - shift) ** 2, eps, g)
    assert np.all(m >= 0)
    assert m.sum() == pytest.approx(1.0, abs=1e-12)


def test_weighted_measure_plain_and_concentration():
    g = build_grid(_interval(-1, 1), 201)
    u = np.cos(g.coords[0])
    m0 = weighted_measure(u, None, 1.0, g)
    ref = u ** 2 * g.weights
    assert np.allclose(m0, ref / ref.sum())
    m = weighted_measure(np.ones(g.n_free), lambda x: (x - 0.3) ** 2, 1e-5, g)
    assert g.coords[0][np.argmax(m)] == pytest.approx(0.3, abs=g.spacing[0])
    assert m.max() > 0.5


def test_weighted_measure_survives_underflow():
    g = build_grid(_interval(-1, 1), 201)
    m = weighted_measure(np.ones(g.n_free), lambda x: 1e3 + x ** 2, 1e-4, g)
    assert m.sum() == pytest.approx(1.0)


def test_dump_matrix(tmp_path):
    spec = library_scenario("double-well-1d")
    op = assemble_operator(spec, build_grid(spec.domain, 33), 0.1)
    lines = dump_matrix(op, tmp_path / "A.txt").read_text().splitlines()
    assert lines[0].startswith("# 31 31")
    assert len(lines) - 1 == op.matrix.nnz
