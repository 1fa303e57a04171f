"""Closed-form predictors evaluated from critical-point data alone.

Conventions: quad (lambda_i) are the x_i^2 coefficients of c - min c, so Lambda
= sum sqrt(lambda_i) is the harmonic ground energy of -lap + sum lambda_i y_i^2.
Cubic/quartic data are symmetric tensors; Eq. (truc) of the source is written
for ordered-monomial coefficients c_ijk (i <= j <= k), obtained here by
multiplying tensor entries by their index multiplicities.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import hermite
from .scenario import CriticalPointData, CycleData, ScenarioSpec

TIE_RTOL = 1e-9


def _ties(values, rtol=TIE_RTOL):
    v = np.asarray(values, dtype=float)
    best = v.min()
    return [i for i, x in enumerate(v) if x - best <= rtol * max(1.0, abs(best))]


def _fmap(points, f) -> np.ndarray:
    if f is None:
        return np.ones(len(points))
    if isinstance(f, Mapping):
        return np.array([float(f[p.label]) for p in points])
    return np.asarray(f, dtype=float)


# --------------------------------------------------------------------------
# Lambda and point sets

@dataclass
class CapResult:
    min_c: float
    Lambda: float
    C_min: list[CriticalPointData]
    C_minmin: list[CriticalPointData]


def lambda_cap(points: Sequence[CriticalPointData]) -> CapResult:
    """Lambda = min over C_min of sum sqrt(quad), with C_min and C_minmin (ties at 1e-9 relative)."""
    pts = [p for p in points if p.role == "minimum" and p.quad is not None]
    if not pts:
        raise ValueError("no declared minima: C_min is empty")
    cmin = _ties([p.value for p in pts])
    C_min = [pts[i] for i in cmin]
    caps = [float(np.sum(np.sqrt(p.quad))) for p in C_min]
    mm = _ties(caps)
    return CapResult(float(min(p.value for p in pts)), float(min(caps)), C_min, [C_min[i] for i in mm])


def concentration_weights(points: Sequence[CriticalPointData], f=None) -> dict[str, float]:
    """gamma_P proportional to f_P^2 prod lambda_k^(-1/4)."""
    fv = _fmap(points, f)
    if fv.size == 0 or fv.max() < 1 - 1e-9:
        raise ValueError("no maximally charged point: all f_P < 1")
    raw = np.array([fp ** 2 * np.prod(p.quad ** -0.25) for p, fp in zip(points, fv)])
    return {p.label: float(r / raw.sum()) for p, r in zip(points, raw)}


def K_paper(points, f=None) -> float:
    """K as printed: 1 / sum (2 pi)^(m/2) f^2 prod lambda^(-1/4)."""
    fv = _fmap(points, f)
    m = points[0].dim
    return 1.0 / sum((2 * np.pi) ** (m / 2) * fp ** 2 * np.prod(p.quad ** -0.25) for p, fp in zip(points, fv))


def K_gaussian(points, f=None) -> float:
    """lim eps^(m/4) (sup u)^2 for L2-normalized u with profile exp(-sqrt(lambda) y^2 / 2).

    Integrating that profile gives pi^(m/2) prod lambda^(-1/4), so this is
    K_paper times 2^(m/2).
    """
    fv = _fmap(points, f)
    m = points[0].dim
    return 1.0 / sum(np.pi ** (m / 2) * fp ** 2 * np.prod(p.quad ** -0.25) for p, fp in zip(points, fv))


# --------------------------------------------------------------------------
# gradient case

def pressure_contribution(p: CriticalPointData) -> float:
    if p.hessian_phi is None:
        raise ValueError(f"{p.label}: field eigenvalues (hessian_phi) missing")
    return float(p.value - np.sum(np.minimum(0.0, p.hessian_phi)))


def topological_pressure(points: Sequence[CriticalPointData]):
    """(Pr, S, contributions) with Pr = min_P [c(P) - sum min(0, field eigenvalue)]."""
    contrib = [pressure_contribution(p) for p in points]
    idx = _ties(contrib)
    return float(min(contrib)), [points[i] for i in idx], dict(zip([p.label for p in points], contrib))


def gradient_weights(points: Sequence[CriticalPointData], f=None) -> dict[str, float]:
    """c_P proportional to f_P^2 prod |eigenvalue|^(-1/2) over the supplied set."""
    fv = _fmap(points, f)
    raw = []
    for p, fp in zip(points, fv):
        h = np.asarray(p.hessian_phi, dtype=float)
        if np.any(h == 0):
            raise ValueError(f"non-hyperbolic point {p.label}")
        raw.append(fp ** 2 * np.prod(np.abs(h) ** -0.5))
    raw = np.array(raw)
    return {p.label: float(r / raw.sum()) for p, r in zip(points, raw)}


def K_gradient(points, f=None) -> float:
    """lim eps^(m/2) (sup v)^2 for L2-normalized v with profile exp(-|h| y^2 / 4)."""
    fv = _fmap(points, f)
    m = points[0].dim
    return 1.0 / sum(np.pi ** (m / 2) * fp ** 2 * np.prod((np.abs(p.hessian_phi) / 2) ** -0.5)
                     for p, fp in zip(points, fv))


# --------------------------------------------------------------------------
# spectra and kernels

def hermite_spectrum(quad, k_max: int) -> np.ndarray:
    q = np.atleast_1d(np.asarray(quad, dtype=float))
    if np.any(q <= 0):
        raise ValueError("quad entries must be positive")
    return hermite.hermite_eigenvalues(q, k_max)


def fk_kernel(lam, mu, x, t):
    """Closed-form bounded solution of z_t = z_xx / 2 - lam (x^2 + mu x) z, z(0, .) = 1."""
    lam, mu = float(lam), float(mu)
    x, t = np.asarray(x, dtype=float), np.asarray(t, dtype=float)
    w = t * np.sqrt(2 * lam)
    # cosh^(-1/2) computed in log form to stay finite for large t
    logcosh = np.abs(w) + np.log1p(np.exp(-2 * np.abs(w))) - np.log(2.0)
    expo = -(np.sqrt(lam) * np.tanh(w) / np.sqrt(2)) * (x + mu / 2) ** 2 + lam * mu ** 2 * t / 4
    out = np.exp(-0.5 * logcosh + expo)
    return float(out) if out.ndim == 0 else out


def cycle_average(c: Callable, cycle, T: float | None = None, n: int = 1024) -> float:
    """(1/T) int_0^T c(x0(t)) dt by the periodic trapezoid rule.

    `cycle` is a CycleData or a callable t -> coordinate tuple.
    """
    if isinstance(cycle, CycleData):
        T = cycle.period if T is None else T
        param = cycle.param
    else:
        param = cycle
    if T is None or T <= 0:
        raise ValueError("positive period required")
    t = np.arange(n) * (T / n)
    vals = np.asarray(c(*param(t)), dtype=float)
    return float(np.mean(np.broadcast_to(vals, t.shape)))


# --------------------------------------------------------------------------
# theta

def _ordered(P: CriticalPointData):
    """Ordered-monomial coefficients c_ijk (i<=j<=k) and c_ijkl (i<=j<=k<=l)."""
    m = P.dim
    c3, c4 = {}, {}
    for idx in itertools.combinations_with_replacement(range(m), 3):
        mult = math.factorial(3) / np.prod([math.factorial(v) for v in Counter(idx).values()])
        c3[idx] = float(mult * P.cubic[idx])
    for idx in itertools.combinations_with_replacement(range(m), 4):
        mult = math.factorial(4) / np.prod([math.factorial(v) for v in Counter(idx).values()])
        c4[idx] = float(mult * P.quartic0[idx])
    return c3, c4


@dataclass
class ThetaBreakdown:
    label: str
    prefactor: float
    single_well_prefactor: float
    curvature_terms: float
    mixed_quartic: float
    pure_quartic: float
    A: float
    B: float
    C: float
    bracket_printed: float      # with +(A+B+C) as printed
    bracket_flipped: float      # with -(A+B+C), the sign of the limit computed in the derivation
    value_printed: float
    value_flipped: float


def theta_predictor(P: CriticalPointData, f_P: float = 1.0, K: float | None = None) -> ThetaBreakdown:
    """Eq. (truc) evaluated term by term at P.

    The mixed quartic sum runs over i < j; with i = j included a 1D check
    value beta/2 at quad = 1 would become 3 beta / 4 (see notes).
    """
    lam = np.asarray(P.quad, dtype=float)
    m = lam.size
    if K is None:
        K = K_paper([P], [f_P])
    pref = np.pi ** (m / 2) * K * f_P ** 2 / np.prod(lam) ** 0.25
    curv = P.curvature
    Rijij = np.asarray(curv.R_ijij, dtype=float)
    curv_terms = -curv.R / 4 - sum(Rijij[i, j] * np.sqrt(lam[i] / lam[j])
                                   for i in range(m) for j in range(m)) / 12
    c3, c4 = _ordered(P)
    mixed = sum(c4[(i, i, j, j)] / np.sqrt(lam[i] * lam[j]) for i, j in itertools.combinations(range(m), 2)) / 4
    pure = 0.5 * sum(c4[(i, i, i, i)] / lam[i] for i in range(m))
    sq = np.sqrt(lam)
    A = sum(c3[(i, j, k)] ** 2 / (16 * np.sqrt(lam[i] * lam[j] * lam[k]) * (sq[i] + sq[j] + sq[k]))
            for i, j, k in itertools.combinations(range(m), 3))
    B = sum(c3[(i, i, j)] ** 2 / (8 * lam[i] * sq[j]) + c3[(i, j, j)] ** 2 / (8 * lam[j] * sq[i])
            for i, j in itertools.combinations(range(m), 2))
    C = sum((c3[(i, i, j)] ** 2 + c3[(i, j, j)] ** 2) / (16 * lam[i] * lam[j])
            for i, j in itertools.combinations(range(m), 2)) + sum(c3[(i, i, i)] ** 2 / (8 * lam[i] ** 2) for i in range(m))
    base = curv_terms + mixed + pure
    bp, bf = base + (A + B + C), base - (A + B + C)
    return ThetaBreakdown(P.label, float(pref), 2.0 ** (-m / 2), float(curv_terms), float(mixed), float(pure),
                          float(A), float(B), float(C), float(bp), float(bf), float(pref * bp), float(pref * bf))


def theta_oracle_rs(P: CriticalPointData, levels: int = 40) -> float:
    """Second-order Rayleigh-Schrodinger coefficient for -lap + lam y^2 + e^(1/4) T(y) + e^(1/2) Q(y)."""
    return theta_rs_breakdown(P, levels)["theta"]


def theta_rs_breakdown(P: CriticalPointData, levels: int = 40) -> dict:
    out = hermite.rs_second_order(P.quad, P.cubic, P.quartic0, n_max=levels)
    # the cubic image of the ground state stops at level 3, so a lower cutoff must agree
    check = hermite.rs_second_order(P.quad, P.cubic, P.quartic0, n_max=max(4, levels // 2))
    out["cutoff_change"] = abs(check["theta"] - out["theta"])
    return out


# --------------------------------------------------------------------------
# degeneracy ledger

@dataclass
class ChiLedger:
    chi0: float
    C1: list[str]
    chi1: float
    C2: list[str]
    chi2: float
    C3: list[str]
    chi2_per_point: dict[str, float]
    method: str
    removed_at: int | None      # n with |C_{n+1}| = 1, or None when still degenerate at n = 2

    @property
    def verdict(self) -> str:
        return "degenerate case" if self.removed_at is None else f"degeneracy removed at chi{self.removed_at}"


def chi_ledger(points: Sequence[CriticalPointData], f=None, K=None, method: str = "truc") -> ChiLedger:
    """chi0 = min c, chi1 = Lambda, chi2 = theta contribution, with C1 ⊇ C2 ⊇ C3."""
    cap = lambda_cap(points)
    C2 = cap.C_minmin
    fv = _fmap(C2, f if f is None or isinstance(f, Mapping) else dict(zip([p.label for p in C2], f)))
    per = {}
    for p, fp in zip(C2, fv):
        if method == "truc":
            per[p.label] = theta_predictor(p, fp, K).value_printed
        elif method == "rs":
            per[p.label] = theta_oracle_rs(p)
        else:
            raise ValueError(f"unknown chi2 method {method!r}")
    vals = list(per.values())
    C3 = [C2[i].label for i in _ties(vals)]
    if len(cap.C_min) == 1:
        removed = 0
    elif len(C2) == 1:
        removed = 1
    elif len(C3) == 1:
        removed = 2
    else:
        removed = None
    return ChiLedger(cap.min_c, [p.label for p in cap.C_min], cap.Lambda, [p.label for p in C2],
                     float(min(vals)), C3, per, method, removed)


# --------------------------------------------------------------------------
# report

@dataclass
class PredictorReport:
    scenario: str
    case: str
    min_c: float | None = None
    Lambda: float | None = None
    C_min: list[str] = field(default_factory=list)
    C_minmin: list[str] = field(default_factory=list)
    theta: float | None = None
    theta_breakdown: list[dict] = field(default_factory=list)
    theta_rs: dict[str, float] = field(default_factory=dict)
    gamma: dict[str, float] = field(default_factory=dict)
    K_paper: float | None = None
    K_gaussian: float | None = None
    topological_pressure: float | None = None
    S: list[str] = field(default_factory=list)
    pressure_contributions: dict[str, float] = field(default_factory=dict)
    gradient_weights: dict[str, float] = field(default_factory=dict)
    K_gradient: float | None = None
    chi: dict | None = None
    cycle_averages: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def predict(spec: ScenarioSpec, f=None, K=None) -> PredictorReport:
    """All predictors applicable to the scenario's case.

    f defaults to 1 at every point of the relevant set (all maximally charged).
    """
    rep = PredictorReport(spec.name, spec.case)
    if spec.case == "potential" and spec.minima():
        cap = lambda_cap(spec.critical_points)
        rep.min_c, rep.Lambda = cap.min_c, cap.Lambda
        rep.C_min = [p.label for p in cap.C_min]
        rep.C_minmin = [p.label for p in cap.C_minmin]
        fm = None if f is None else {p.label: (f[p.label] if isinstance(f, Mapping) else 1.0) for p in cap.C_minmin}
        rep.gamma = concentration_weights(cap.C_minmin, fm)
        rep.K_paper = K_paper(cap.C_minmin, fm)
        rep.K_gaussian = K_gaussian(cap.C_minmin, fm)
        Kuse = rep.K_paper if K is None else K
        bd = [theta_predictor(p, 1.0 if fm is None else fm[p.label], Kuse) for p in cap.C_minmin]
        rep.theta_breakdown = [asdict(b) for b in bd]
        rep.theta = float(min(b.value_printed for b in bd))
        rep.theta_rs = {p.label: theta_oracle_rs(p) for p in cap.C_min}
        led = chi_ledger(spec.critical_points, fm, Kuse)
        rep.chi = asdict(led) | {"verdict": led.verdict}
    elif spec.case == "gradient" and spec.critical_points:
        pr, S, contrib = topological_pressure(spec.critical_points)
        rep.topological_pressure, rep.S, rep.pressure_contributions = pr, [p.label for p in S], contrib
        rep.gradient_weights = gradient_weights(S, None if f is None else {p.label: f.get(p.label, 1.0) for p in S})
        rep.K_gradient = K_gradient(S)
    for cyc in spec.cycles:
        rep.cycle_averages[cyc.label] = cycle_average(spec.c, cyc)
    return rep
