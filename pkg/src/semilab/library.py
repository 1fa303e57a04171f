"""Built-in scenarios keyed by name.

Taylor coefficients below were expanded by hand and are re-checked by
`validate_scenario` (see tests/test_scenario.py).
"""
from __future__ import annotations

import numpy as np

from .scenario import ScenarioError, ScenarioSpec, scenario_from_dict

_PI = float(np.pi)

_DEFS: dict[str, dict] = {
    "double-well-1d": dict(
        description="symmetric double well c = (x^2-1)^2 + 1",
        domain=dict(kind="interval", bounds=[[-2.0, 2.0]], boundary="dirichlet-zero"),
        c="(x**2 - 1)**2 + 1",
        critical_points=[
            dict(location=[-1.0], value=1.0, quad=[4.0], cubic=-4.0, quartic0=1.0, label="x=-1"),
            dict(location=[1.0], value=1.0, quad=[4.0], cubic=4.0, quartic0=1.0, label="x=+1"),
        ],
    ),
    "asymmetric-well-1d": dict(
        description="equal-depth wells with unequal curvature, c = 1 + (x^2-1)^2 (1 + x/3)",
        domain=dict(kind="interval", bounds=[[-2.0, 2.0]], boundary="dirichlet-zero"),
        c="1 + (x**2 - 1)**2 * (1 + x/3)",
        critical_points=[
            dict(location=[-1.0], value=1.0, quad=[8 / 3], cubic=-4 / 3, quartic0=-2 / 3, label="x=-1"),
            dict(location=[1.0], value=1.0, quad=[16 / 3], cubic=20 / 3, quartic0=8 / 3, label="x=+1"),
        ],
    ),
    "quartic-well-1d": dict(
        description="single anharmonic well c = 1 + x^2 + 0.1 x^4",
        domain=dict(kind="interval", bounds=[[-2.0, 2.0]], boundary="dirichlet-zero"),
        c="1 + x**2 + 0.1*x**4",
        critical_points=[dict(location=[0.0], value=1.0, quad=[1.0], cubic=0.0, quartic0=0.1, label="x=0")],
    ),
    "exact-harmonic-1d": dict(
        description="harmonic well c = 1 + x^2; Gaussian ground state at scale eps^(1/4)",
        domain=dict(kind="interval", bounds=[[-2.0, 2.0]], boundary="dirichlet-zero"),
        c="1 + x**2",
        critical_points=[dict(location=[0.0], value=1.0, quad=[1.0], label="x=0")],
    ),
    "harmonic-2d": dict(
        description="anisotropic harmonic well c = 1 + x^2 + 2 y^2",
        domain=dict(kind="box", bounds=[[-1.5, 1.5], [-1.5, 1.5]], boundary="dirichlet-zero"),
        c="1 + x**2 + 2*y**2",
        critical_points=[dict(location=[0.0, 0.0], value=1.0, quad=[1.0, 2.0], label="origin")],
    ),
    "periodic-well-1d": dict(
        description="c = 2 + sin x on the circle of length 2 pi",
        domain=dict(kind="flat-torus", bounds=[[0.0, 2 * _PI]], boundary="periodic"),
        c="2 + sin(x)",
        critical_points=[dict(location=[1.5 * _PI], value=1.0, quad=[0.5], cubic=0.0,
                              quartic0=-1 / 24, label="x=3pi/2")],
    ),
    "constant-torus-1d": dict(
        description="constant potential on a circle; the constant vector is exact",
        domain=dict(kind="flat-torus", bounds=[[0.0, 1.0]], boundary="periodic"),
        c="3.0 + 0*x",
    ),
    "gradient-1d": dict(
        description="b = grad phi, phi = (x^2-1)^2 with two hyperbolic minima, c = 1.25 + x/4",
        domain=dict(kind="interval", bounds=[[-2.0, 2.0]], boundary="dirichlet-zero"),
        c="1.25 + 0.25*x",
        field=dict(kind="gradient-of-phi", phi="(x**2 - 1)**2", b=["4*x*(x**2 - 1)"]),
        critical_points=[
            dict(location=[-1.0], value=1.0, hessian_phi=[8.0], role="critical", label="x=-1"),
            dict(location=[0.0], value=1.25, hessian_phi=[-4.0], role="critical", label="x=0"),
            dict(location=[1.0], value=1.5, hessian_phi=[8.0], role="critical", label="x=+1"),
        ],
    ),
    "gauge-quadratic-1d": dict(
        description="b = grad phi with phi = x^2 and constant c = 2",
        domain=dict(kind="interval", bounds=[[-2.0, 2.0]], boundary="dirichlet-zero"),
        c="2.0 + 0*x",
        field=dict(kind="gradient-of-phi", phi="x**2", b=["2*x"]),
        critical_points=[dict(location=[0.0], value=2.0, hessian_phi=[2.0], role="critical", label="x=0")],
    ),
    "gradient-2d": dict(
        description="b = grad phi, phi = (x^2-1)^2 + y^2, c = 1.25 + x/4 + y^2/10",
        domain=dict(kind="box", bounds=[[-2.0, 2.0], [-1.5, 1.5]], boundary="dirichlet-zero"),
        c="1.25 + 0.25*x + 0.1*y**2",
        field=dict(kind="gradient-of-phi", phi="(x**2 - 1)**2 + y**2",
                   b=["4*x*(x**2 - 1)", "2*y"]),
        critical_points=[
            dict(location=[-1.0, 0.0], value=1.0, hessian_phi=[2.0, 8.0], role="critical", label="(-1,0)"),
            dict(location=[0.0, 0.0], value=1.25, hessian_phi=[-4.0, 2.0], role="critical", label="(0,0)"),
            dict(location=[1.0, 0.0], value=1.5, hessian_phi=[2.0, 8.0], role="critical", label="(+1,0)"),
        ],
    ),
    "annulus-cycle": dict(
        description="attracting cycle r = 1: b_r = 1 - r, b_theta = 1, a = 2 + (r-1)^2",
        domain=dict(kind="annulus-polar", bounds=[[0.5, 1.5], [0.0, 2 * _PI]],
                    boundary=["dirichlet-zero", "periodic"]),
        c="2 + (r - 1)**2 + 0*theta",
        field=dict(kind="general", b=["1 - r", "1.0 + 0*r"], lyapunov="2*(r - 1)**2 + 0*theta"),
        cycles=[dict(radius=1.0, period=2 * _PI, label="r=1")],
    ),
}

LIBRARY = tuple(_DEFS)


def library_scenario(name: str) -> ScenarioSpec:
    try:
        d = dict(_DEFS[name])
    except KeyError:
        raise ScenarioError(f"unknown library scenario {name!r}; choose from {list(_DEFS)}") from None
    d["name"] = name
    return scenario_from_dict(d)
