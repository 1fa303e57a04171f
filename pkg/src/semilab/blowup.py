"""Post-processing of eigenpairs: blow-up profiles, masses, tracks and fits.

Two amplitudes appear. In the potential case the eigenvector u itself is
analysed. In the gradient case the analysed function is the gauge amplitude
v = u exp(-phi/(2 eps)), whose square is the phi-weighted measure density.
Amplitudes are handled as logarithms so ratios like exp(phi/eps) never
overflow.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import hermite
from .asymptotics import lambda_cap
from .eigensolver import EigenPair, SweepResult
from .scenario import CriticalPointData, CycleData, ScenarioSpec

GAUSS_FIT_FLOOR = 1e-8


class ProfileError(ValueError):
    pass


# --------------------------------------------------------------------------
# amplitudes

def log_amplitude(pair: EigenPair, spec: ScenarioSpec | None, target: str) -> np.ndarray:
    """log of u ('u') or of v = u exp(-phi/(2 eps)) ('v') on free nodes, unnormalized."""
    with np.errstate(divide="ignore"):
        base = np.log(pair.u)
    if target == "u" and not pair.gauge or target == "v" and pair.gauge:
        return base
    if spec is None or spec.field.phi is None:
        raise ValueError("converting between u and v needs the scenario's phi")
    phi = pair.grid.sample(spec.field.phi)
    sign = 1.0 if target == "u" else -1.0
    return base + sign * phi / (2 * pair.eps)


def amplitude(pair: EigenPair, spec: ScenarioSpec | None, target: str, normalize: str = "l2") -> np.ndarray:
    """Amplitude on free nodes, scaled to unit L2 norm ('l2') or unit maximum ('max')."""
    la = log_amplitude(pair, spec, target)
    a = np.exp(la - la.max())
    if normalize == "l2":
        a /= np.sqrt(np.sum(pair.grid.weights * a * a))
    return a


def case_target(spec: ScenarioSpec | None, pair: EigenPair) -> str:
    if spec is not None and spec.case == "gradient":
        return "v"
    return "v" if pair.gauge else "u"


def _interpolator(grid, values_free: np.ndarray):
    full = grid.extend(values_free)
    axes = list(grid.axes)
    for k, per in enumerate(grid.periodic):
        if per:
            L = grid.domain.bounds[k][1] - grid.domain.bounds[k][0]
            axes[k] = np.append(axes[k], axes[k][0] + L)
            full = np.concatenate([full, np.take(full, [0], axis=k)], axis=k)
    return RegularGridInterpolator(axes, full, method="linear")


def refined_argmax(grid, values: np.ndarray) -> np.ndarray:
    """Location of the maximum with per-axis parabolic sub-grid refinement."""
    full = grid.extend(values)
    idx = np.unravel_index(int(np.argmax(full)), full.shape)
    loc = []
    for k, i in enumerate(idx):
        x = grid.axes[k][i]
        n = full.shape[k]
        if grid.periodic[k] or 0 < i < n - 1:
            lo = list(idx); hi = list(idx)
            lo[k] = (i - 1) % n; hi[k] = (i + 1) % n
            fm, f0, fp = full[tuple(lo)], full[idx], full[tuple(hi)]
            den = fm - 2 * f0 + fp
            if den < 0:
                x += 0.5 * grid.spacing[k] * (fm - fp) / den
        loc.append(x)
    return np.array(loc)


# --------------------------------------------------------------------------
# profiles

@dataclass
class BlowupProfile:
    center: np.ndarray
    eps: float
    s: float
    case: str
    y: tuple[np.ndarray, ...]       # y-grid per axis
    w: np.ndarray                   # rescaled samples on the tensor y-grid
    fitted_exponents: np.ndarray    # q with w ~ exp(-sum q_i y_i^2 / 2)
    fitted_quad: np.ndarray         # q^2 (potential) or q (gradient): comparable with lambda_i
    reference_exponents: np.ndarray
    residual: float                 # L2 distance of unit-normalized profiles

    def reference(self) -> np.ndarray:
        mesh = np.meshgrid(*self.y, indexing="ij")
        return np.exp(-0.5 * sum(q * m ** 2 for q, m in zip(self.reference_exponents, mesh)))

    def gaussian_fit(self) -> np.ndarray:
        mesh = np.meshgrid(*self.y, indexing="ij")
        return np.exp(-0.5 * sum(q * m ** 2 for q, m in zip(self.fitted_exponents, mesh)))


def _l2(f, y):
    integrand = f * f
    for k in reversed(range(len(y))):
        integrand = np.trapezoid(integrand, y[k], axis=k)
    return float(np.sqrt(integrand))


def reference_exponents(P: CriticalPointData, case: str) -> np.ndarray:
    if case == "gradient":
        return np.abs(P.hessian_phi) / 2.0
    return np.sqrt(P.quad)


def extract_profile(pair: EigenPair, P: CriticalPointData, eps: float | None = None, s: float | None = None,
                    y_radius: float = 4.0, spec: ScenarioSpec | None = None, n_y: int = 201,
                    case: str | None = None) -> BlowupProfile:
    """w(y) = A(P + eps^s y) / max A with A = u (potential) or v (gradient)."""
    eps = pair.eps if eps is None else eps
    case = case or (spec.case if spec is not None else ("gradient" if pair.gauge else "potential"))
    s = s if s is not None else (0.5 if case == "gradient" else 0.25)
    grid = pair.grid
    target = "v" if case == "gradient" else "u"
    A = amplitude(pair, spec, target, normalize="max")
    scale = eps ** s
    radius = scale * y_radius
    for k, per in enumerate(grid.periodic):
        if per:
            continue
        a, b = grid.domain.bounds[k]
        room = min(P.location[k] - a, b - P.location[k])
        if radius > room:
            raise ProfileError(f"blow-up ball exits the domain on axis {k}; max admissible y_radius "
                               f"is {room / scale:.4g}")
    y = tuple(np.linspace(-y_radius, y_radius, n_y) for _ in range(grid.dim))
    mesh = np.meshgrid(*y, indexing="ij")
    pts = []
    for k in range(grid.dim):
        x = P.location[k] + scale * mesh[k]
        if grid.periodic[k]:
            a, b = grid.domain.bounds[k]
            x = a + (x - a) % (b - a)
        pts.append(x.ravel())
    w = _interpolator(grid, A)(np.column_stack(pts)).reshape(mesh[0].shape)
    w = np.clip(w, 0.0, 1.0)
    mask = w > GAUSS_FIT_FLOOR
    cols = [np.ones(mask.sum())] + [m[mask] ** 2 for m in mesh] + [m[mask] for m in mesh]
    G = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(G, -2 * np.log(w[mask]), rcond=None)
    q = coef[1: 1 + grid.dim]
    if np.max(np.abs(q)) < 1e-6:
        raise ProfileError("no curvature: flat profile, Gaussian fit rejected")
    ref = reference_exponents(P, case)
    g = np.exp(-0.5 * sum(qq * m ** 2 for qq, m in zip(ref, mesh)))
    resid = _l2(w / _l2(w, y) - g / _l2(g, y), y)
    fq = q ** 2 if case == "potential" else q
    return BlowupProfile(P.location, float(eps), float(s), case, y, w, q, fq, ref, resid)


# --------------------------------------------------------------------------
# masses

@dataclass
class ConcentrationReport:
    eps: float
    measure: str
    delta: float
    labels: list[str]
    masses: dict[str, float]
    f: dict[str, float]
    remainder: float
    argmax: list[float]
    sup: float

    def as_dict(self):
        return asdict(self)


def _sets(spec: ScenarioSpec, points):
    if points is None:
        pts = list(spec.critical_points)
        cyc = list(spec.cycles)
    else:
        pts = [p for p in points if isinstance(p, CriticalPointData)]
        cyc = [p for p in points if isinstance(p, CycleData)]
    return pts, cyc


def default_delta(spec: ScenarioSpec, pts, cycles) -> float:
    cap = 0.25 * spec.domain.diameter()
    d = []
    for p, q in itertools.combinations(pts, 2):
        d.append(float(spec.domain.distance([np.array([v]) for v in q.location], p.location)[0]))
    for a, b in itertools.combinations(cycles, 2):
        d.append(abs(a.radius - b.radius))
    return min(cap, 0.5 * min(d)) if d else cap


def _set_distance(grid, spec, item) -> np.ndarray:
    if isinstance(item, CycleData):
        return np.abs(grid.coords[0] - item.radius)
    return grid.distance_to(item.location)


def concentration_masses(pair: EigenPair, spec: ScenarioSpec, eps: float | None = None,
                         delta: float | None = None, measure: str = "plain-u2", points=None) -> ConcentrationReport:
    """Masses of the normalized measure in open balls |x - P| < delta (tubes around cycles)."""
    eps = pair.eps if eps is None else eps
    grid = pair.grid
    pts, cycles = _sets(spec, points)
    items = pts + cycles
    if not items:
        raise ValueError("no critical points or cycles to measure around")
    if delta is None:
        delta = default_delta(spec, pts, cycles)
    for a, b in itertools.combinations(items, 2):
        if isinstance(a, CycleData) and isinstance(b, CycleData):
            sep = abs(a.radius - b.radius)
        elif isinstance(a, CriticalPointData) and isinstance(b, CriticalPointData):
            sep = float(spec.domain.distance([np.array([v]) for v in b.location], a.location)[0])
        else:
            sep = np.inf
        if sep < 2 * delta:
            raise ValueError(f"overlapping balls around {a.label} and {b.label} for delta = {delta:g}")
    if measure == "plain-u2":
        logd = 2 * log_amplitude(pair, spec, "u")
    elif measure == "weighted-phi":
        logd = 2 * log_amplitude(pair, spec, "v")
    elif measure == "weighted-L":
        if spec.field.lyapunov is None:
            raise ValueError("weighted-L needs a Lyapunov function")
        logd = 2 * log_amplitude(pair, spec, "u") - grid.sample(spec.field.lyapunov) / eps
    else:
        raise ValueError(f"unknown measure kind {measure!r}")
    top = logd.max()
    if not np.isfinite(top):
        raise FloatingPointError("weight collapsed; compute the weight in log space")
    dens = np.exp(logd - top)
    mass = dens * grid.weights
    mass /= mass.sum()
    amp = np.sqrt(dens)
    masses, fs = {}, {}
    inside = np.zeros(grid.n_free, dtype=bool)
    for it in items:
        ball = _set_distance(grid, spec, it) < delta
        inside |= ball
        masses[it.label] = float(mass[ball].sum())
        fs[it.label] = float(amp[ball].max()) if ball.any() else 0.0
    loc = refined_argmax(grid, amp)
    return ConcentrationReport(float(eps), measure, float(delta), [it.label for it in items], masses, fs,
                               float(mass[~inside].sum()), loc.tolist(), float(np.exp(0.5 * top)))


# --------------------------------------------------------------------------
# tracks

def _pairs(sweep) -> list[EigenPair]:
    if isinstance(sweep, SweepResult):
        return sweep.pairs
    return list(sweep)


@dataclass
class ArgmaxTrack:
    case: str
    eps: list[float]
    location: list[list[float]]
    nearest: list[str]
    distance: list[float]
    d2_ratio: list[float]            # d^2/sqrt(eps) (potential) or d^2/eps (gradient)
    d_over_sqrt_eps: list[float]
    exponent: float | None           # slope of log d vs log eps
    bounded: bool
    decreasing_tail: bool            # d/sqrt(eps) strictly decreasing over the last 4 points
    splits: list[int]                # sweep indices where the nearest point changes
    lemma_max_bound: float | None = None


def lemma_max_constant(spec: ScenarioSpec, grid) -> float:
    """Gamma * Lambda with Gamma = sup d^2(x, C_min) / (c(x) - min c) over grid nodes."""
    cap = lambda_cap(spec.critical_points)
    X = grid.coords
    d2 = np.min([grid.distance_to(p.location) ** 2 for p in cap.C_min], axis=0)
    gap = grid.sample(spec.c) - cap.min_c
    ok = gap > 1e-12
    return float(np.max(d2[ok] / gap[ok]) * cap.Lambda)


def argmax_velocity(sweep, spec: ScenarioSpec, points: Sequence[CriticalPointData] | None = None,
                    case: str | None = None) -> ArgmaxTrack:
    pairs = _pairs(sweep)
    if len(pairs) < 4:
        raise ValueError("argmax track needs >= 4 sweep points")
    case = case or spec.case
    pts = list(points) if points is not None else list(spec.critical_points)
    target = "v" if case == "gradient" else "u"
    eps, locs, near, dist = [], [], [], []
    for pr in pairs:
        a = amplitude(pr, spec, target, normalize="max")
        loc = refined_argmax(pr.grid, a)
        ds = [float(spec.domain.distance([np.array([v]) for v in loc], p.location)[0]) for p in pts]
        j = int(np.argmin(ds))
        eps.append(pr.eps); locs.append(loc.tolist()); near.append(pts[j].label); dist.append(ds[j])
    eps_a, d = np.array(eps), np.array(dist)
    d2r = d ** 2 / (eps_a if case == "gradient" else np.sqrt(eps_a))
    dse = d / np.sqrt(eps_a)
    pos = d > 0
    expo = float(np.polyfit(np.log(eps_a[pos]), np.log(d[pos]), 1)[0]) if pos.sum() >= 2 else None
    half = len(d2r) // 2
    # bound set by the coarse half of the sweep must hold on the fine half
    bounded = bool(np.max(d2r[half:]) <= np.max(d2r[:half]) * (1 + 1e-9) + 1e-12)
    tail = dse[-4:]
    decreasing = bool(np.all(np.diff(tail) < 0))
    splits = [i for i in range(1, len(near)) if near[i] != near[i - 1]]
    bound = None
    if case == "potential" and spec.minima():
        bound = lemma_max_constant(spec, pairs[-1].grid)
    return ArgmaxTrack(case, eps, locs, near, dist, d2r.tolist(), dse.tolist(), expo, bounded, decreasing,
                       splits, bound)


@dataclass
class SupnormFit:
    case: str
    eps: list[float]
    sup: list[float]
    slope: float
    expected_slope: float
    intercept: float
    K_series: list[float]
    K: float


def supnorm_growth(sweep, case: str = "potential", spec: ScenarioSpec | None = None) -> SupnormFit:
    """Slope of log sup A vs log eps, A the L2-normalized u (potential) or v (gradient)."""
    pairs = _pairs(sweep)
    if len(pairs) < 4:
        raise ValueError("supnorm fit needs >= 4 sweep points")
    m = pairs[0].grid.dim
    target = "v" if case == "gradient" else "u"
    eps = np.array([p.eps for p in pairs])
    sup = np.array([amplitude(p, spec, target, "l2").max() for p in pairs])
    slope, icpt = np.polyfit(np.log(eps), np.log(sup), 1)
    power = m / 2 if case == "gradient" else m / 4
    Ks = eps ** power * sup ** 2
    return SupnormFit(case, eps.tolist(), sup.tolist(), float(slope), -m / 4 if case == "gradient" else -m / 8,
                      float(icpt), Ks.tolist(), float(Ks[-1]))


@dataclass
class DecayReport:
    eps: float
    margin: float
    ratio: float
    k: float            # log(ratio) / log(eps)
    n_nodes: int


def decay_off_wells(pair: EigenPair, spec: ScenarioSpec, margin: float,
                    points: Sequence[CriticalPointData] | None = None) -> DecayReport:
    """max over {dist to all points >= margin} of u, relative to max u."""
    pts = list(points) if points is not None else list(spec.critical_points)
    if not pts:
        raise ValueError("decay check needs declared critical points")
    grid = pair.grid
    target = case_target(spec, pair) if spec.case == "gradient" else "u"
    a = amplitude(pair, spec, target, "max")
    far = np.min([grid.distance_to(p.location) for p in pts], axis=0) >= margin
    if not far.any():
        raise ValueError("compact set is empty for this margin")
    ratio = float(a[far].max())
    k = math.log(ratio) / math.log(pair.eps) if ratio > 0 else math.inf
    return DecayReport(pair.eps, float(margin), ratio, float(k), int(far.sum()))


def decay_track(sweep, spec: ScenarioSpec, margin: float, points=None):
    reps = [decay_off_wells(p, spec, margin, points) for p in _pairs(sweep)]
    ks = np.array([r.k for r in reps])
    return reps, bool(np.all(np.diff(ks) > 0))


# --------------------------------------------------------------------------
# expansion fit

@dataclass
class ExpansionFit:
    c0: float
    c1: float
    c2: float
    residual: float         # RMS of the fit residuals
    eps_range: tuple[float, float]
    condition: float
    n: int

    @property
    def coefficients(self):
        return (self.c0, self.c1, self.c2)


def fit_expansion(eps, lam=None) -> ExpansionFit:
    """Least squares of lambda_eps on {1, sqrt(eps), eps}; accepts a SweepResult."""
    if isinstance(eps, SweepResult):
        eps, lam = eps.eps, eps.lam
    eps = np.asarray(eps, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if eps.size < 4:
        raise ValueError("expansion fit needs >= 4 points")
    if eps.max() / eps.min() < 10 * (1 - 1e-9):
        raise ValueError("expansion fit needs eps values spanning at least one decade")
    G = np.column_stack([np.ones_like(eps), np.sqrt(eps), eps])
    coef, *_ = np.linalg.lstsq(G, lam, rcond=None)
    cond = float(np.linalg.cond(G))
    if cond > 1e8:
        warnings.warn(f"expansion fit is ill-conditioned (condition {cond:.3g})", RuntimeWarning, stacklevel=2)
    res = lam - G @ coef
    return ExpansionFit(float(coef[0]), float(coef[1]), float(coef[2]), float(np.sqrt(np.mean(res ** 2))),
                        (float(eps.min()), float(eps.max())), cond, int(eps.size))


# --------------------------------------------------------------------------
# first-order eigenfunction correction

@dataclass
class W1Report:
    label: str
    quad: np.ndarray
    coefficients: dict[tuple, float]      # w1 = sum beta_n Phi_n (physicists' Hermite functions)
    lemma_table: dict[tuple, float]       # closed form as printed, same basis
    missing_from_lemma: dict[tuple, float]
    residuals: list[tuple[float, float]]  # (grid step, max |L_P w1 + V3 w_P|)

    def evaluate(self, y) -> np.ndarray:
        return sum(b * hermite.hermite_function(n, y, self.quad) for n, b in self.coefficients.items())


def _lemma_table(P: CriticalPointData) -> dict[tuple, float]:
    from .asymptotics import _ordered
    lam = P.quad
    m = lam.size
    c3, _ = _ordered(P)
    sq = np.sqrt(lam)
    tab: dict[tuple, float] = {}

    def add(idx, v):
        tab[idx] = tab.get(idx, 0.0) + v
    for i, j, k in itertools.combinations_with_replacement(range(m), 3):
        n = [0] * m
        for a in (i, j, k):
            n[a] += 1
        add(tuple(n), -c3[(i, j, k)] / (16 * (lam[i] * lam[j] * lam[k]) ** 0.25 * (sq[i] + sq[j] + sq[k])))
    for i, j in itertools.combinations(range(m), 2):
        ej = [0] * m; ej[j] = 1
        ei = [0] * m; ei[i] = 1
        add(tuple(ej), -c3[(i, i, j)] / (8 * (lam[i] ** 2 * lam[j] ** 3) ** 0.25))
        add(tuple(ei), -c3[(i, j, j)] / (8 * (lam[i] ** 3 * lam[j] ** 2) ** 0.25))
    return {k: v for k, v in tab.items() if v != 0.0}


def w1_correction(P: CriticalPointData, radius: float = 8.0, steps=(0.1, 0.05, 0.025)) -> W1Report:
    """Solve L_P w1 = -V3 w_P with L_P = -lap + sum lam y^2 - Lambda, w_P the ground Gaussian.

    The solution is orthogonal to w_P. Coefficients are obtained by projection
    in the harmonic eigenbasis and converted to Phi_n = prod H_n(lam^(1/4) y)
    exp(-sqrt(lam) y^2/2). The grid residual uses a fourth-order Laplacian.
    """
    lam = np.asarray(P.quad, dtype=float)
    m = lam.size
    g0 = hermite.ground(m)
    v3 = hermite.apply_tensor(g0, P.cubic, lam)
    coef = {}
    for idx, amp in v3.items():
        if any(idx):
            coef[idx] = -amp / hermite.excitation(idx, lam) * hermite.phys_norm_ratio(idx)
    lemma = _lemma_table(P)
    keys = set(coef) | set(lemma)
    missing = {k: coef.get(k, 0.0) - lemma.get(k, 0.0) for k in keys
               if abs(coef.get(k, 0.0) - lemma.get(k, 0.0)) > 1e-12 * max(1.0, abs(coef.get(k, 0.0)))}
    rep = W1Report(P.label, lam, coef, lemma, missing, [])
    Lam = float(np.sum(np.sqrt(lam)))
    for h in steps:
        y1 = np.arange(-radius, radius + h / 2, h)
        mesh = np.meshgrid(*([y1] * m), indexing="ij")
        w1 = np.broadcast_to(rep.evaluate(tuple(mesh)), mesh[0].shape).astype(float)
        wP = np.exp(-0.5 * sum(np.sqrt(l) * g ** 2 for l, g in zip(lam, mesh)))
        V3 = sum(P.cubic[idx] * mesh[idx[0]] * mesh[idx[1]] * mesh[idx[2]]
                 for idx in itertools.product(range(m), repeat=3))
        lap = np.zeros_like(w1)
        for k in range(m):
            lap += (-np.roll(w1, 2, k) + 16 * np.roll(w1, 1, k) - 30 * w1 + 16 * np.roll(w1, -1, k)
                    - np.roll(w1, -2, k)) / (12 * h * h)
        r = -lap + (sum(l * g ** 2 for l, g in zip(lam, mesh)) - Lam) * w1 + V3 * wP
        inner = tuple(slice(2, -2) for _ in range(m))
        rep.residuals.append((float(h), float(np.max(np.abs(r[inner])) if r.size else 0.0)))
    return rep
