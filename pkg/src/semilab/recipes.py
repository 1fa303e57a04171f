"""Canned experiments with verdicts against the acceptance thresholds.

Each recipe returns a RunReport whose verdict lines carry the measured
value, the prediction, the tolerance and a source tag naming the result
the check comes from. Sweeps are cached per process so several recipes
can share one.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import asymptotics as asy
from . import blowup as bu
from . import lyapunov as ly
from . import stochastic as st
from .discretization import assemble_operator, build_grid, gauge_transform
from .eigensolver import SweepResult, principal_eigenpair, solve, sweep
from .library import LIBRARY
from .scenario import library_scenario


# --------------------------------------------------------------------------
# reports

@dataclass
class Verdict:
    name: str
    measured: object
    predicted: object
    tolerance: str
    source: str
    passed: bool
    asserted: bool = True
    note: str = ""

    def line(self) -> str:
        flag = ("PASS" if self.passed else "FAIL") if self.asserted else "INFO"
        return (f"[{flag}] {self.name}: measured={_fmt(self.measured)} predicted={_fmt(self.predicted)} "
                f"tol={self.tolerance} source={self.source}" + (f" ({self.note})" if self.note else ""))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items()) + "}"
    return str(v)


@dataclass
class RunReport:
    command: str
    config: dict = field(default_factory=dict)
    eigen: list[dict] = field(default_factory=list)
    predictor: dict | None = None
    concentration: list[dict] = field(default_factory=list)
    expansion: dict | None = None
    verdicts: list[Verdict] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts if v.asserted)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def add(self, *args, **kw) -> Verdict:
        v = Verdict(*args, **kw)
        self.verdicts.append(v)
        return v

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k) if not isinstance(k, tuple) else ",".join(map(str, k)): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def eigen_rows(res: SweepResult) -> list[dict]:
    rows = []
    for p in res.points:
        if p.ok:
            rows.append({"eps": p.eps, "lambda": p.pair.lam, "residual": p.pair.residual,
                         "iterations": p.pair.iterations, "nodes": p.pair.grid.n_free})
        else:
            rows.append({"eps": p.eps, "error": p.error})
    return rows


# --------------------------------------------------------------------------
# shared computations

DW_EPS = tuple(float(e) for e in np.geomspace(1e-2, 1e-3, 8))
NODES_1D = 8193


@lru_cache(maxsize=16)
def cached_sweep(name: str, nodes, eps: tuple, route: str | None = None) -> SweepResult:
    return sweep(library_scenario(name), nodes, list(eps), route=route)


def _set_timing(rep: RunReport, t0: float):
    rep.timing["seconds"] = time.perf_counter() - t0


# --------------------------------------------------------------------------
# recipes

def potential_theorem(eps=DW_EPS, nodes=NODES_1D, **_) -> RunReport:
    """Double-well eigenvalue bounds, expansion fit, sup-norm growth and argmax track."""
    t0 = time.perf_counter()
    spec = library_scenario("double-well-1d")
    res = cached_sweep(spec.name, nodes, tuple(eps))
    rep = RunReport("reproduce:potential-theorem", {"scenario": spec.name, "eps": list(eps), "nodes": nodes})
    rep.eigen = eigen_rows(res)
    pred = asy.predict(spec)
    rep.predictor = pred.to_dict()
    cap = asy.lambda_cap(spec.critical_points)
    theta = min(abs(v) for v in pred.theta_rs.values())
    ev, lam = res.eps, res.lam
    tol = 1e-8
    upper = cap.min_c + cap.Lambda * np.sqrt(ev) + 0.5 * ev * theta + tol
    inside = bool(np.all(lam >= cap.min_c - tol) and np.all(lam <= upper))
    worst = float(np.max(np.maximum(cap.min_c - lam, lam - upper)))
    rep.add("lambda_in_bounds", worst, "<= 0", "min c <= lambda <= min c + Lambda sqrt(eps) + eps|theta|/2 + 1e-8",
            "potential-theorem", inside, note="measured = max excursion outside the band")
    fit = bu.fit_expansion(res)
    rep.expansion = asdict(fit)
    rep.add("c0_vs_min_c", fit.c0, cap.min_c, "abs 1e-4", "potential-theorem", abs(fit.c0 - cap.min_c) <= 1e-4)
    rep.add("c1_vs_Lambda", fit.c1, cap.Lambda, "rel 5%", "potential-theorem",
            abs(fit.c1 - cap.Lambda) <= 0.05 * cap.Lambda)
    sup = bu.supnorm_growth(res, "potential", spec)
    rep.add("supnorm_slope", sup.slope, sup.expected_slope, "abs 0.05", "th4-weights",
            abs(sup.slope - sup.expected_slope) <= 0.05)
    rep.add("K_measured_vs_gaussian", sup.K, pred.K_gaussian, "info", "th4-weights", True, asserted=False,
            note=f"K as printed = {pred.K_paper:.6g}")
    track = bu.argmax_velocity(res, spec)
    rep.add("argmax_d2_over_sqrt_eps_bounded", max(track.d2_ratio), max(track.d2_ratio[: len(track.d2_ratio) // 2]),
            "fine-half max <= coarse-half max", "potential-theorem", track.bounded)
    rep.data["argmax"] = asdict(track)
    rep.data["supnorm"] = asdict(sup)
    rep.data["series"] = {"lambda_vs_eps": list(zip(ev.tolist(), lam.tolist())),
                          "supnorm_vs_eps": list(zip(sup.eps, sup.sup))}
    _set_timing(rep, t0)
    return rep


def thnf_profile(eps: float = 1e-3, nodes=NODES_1D, refinement=((1e-2, 1025), (3e-3, 2049), (1e-3, 4097), (1e-3, 8193)),
                 **_) -> RunReport:
    t0 = time.perf_counter()
    rep = RunReport("reproduce:thnf-profile", {"eps": eps, "nodes": nodes, "refinement": [list(r) for r in refinement]})
    q = library_scenario("quartic-well-1d")
    pair = cached_sweep(q.name, nodes, DW_EPS).pairs[-1] if math.isclose(eps, DW_EPS[-1]) else solve(q, eps, nodes)
    prof = bu.extract_profile(pair, q.critical_points[0], spec=q)
    rep.add("quartic_profile_L2", prof.residual, 0.0, "<= 0.05", "thnf-profile", prof.residual <= 0.05,
            note=f"fitted lambda = {prof.fitted_quad.tolist()}")
    h = library_scenario("exact-harmonic-1d")
    dists = []
    for e, n in refinement:
        pr = bu.extract_profile(solve(h, e, n), h.critical_points[0], spec=h)
        dists.append(pr.residual)
    dec = bool(np.all(np.diff(dists) < 0))
    rep.add("harmonic_refinement_decreasing", dists, "strictly decreasing", "monotone", "thnf-profile", dec)
    rep.data["profile"] = {"y": prof.y[0].tolist(), "w": (prof.w / prof.w.max()).tolist()}
    _set_timing(rep, t0)
    return rep


def th4_weights(eps: float = 1e-3, nodes=NODES_1D, **_) -> RunReport:
    t0 = time.perf_counter()
    rep = RunReport("reproduce:th4-weights", {"eps": eps, "nodes": nodes})
    dw = library_scenario("double-well-1d")
    pair = cached_sweep(dw.name, nodes, DW_EPS).pairs[-1] if math.isclose(eps, DW_EPS[-1]) else solve(dw, eps, nodes)
    cr = bu.concentration_masses(pair, dw)
    rep.concentration.append(cr.as_dict())
    ms = [cr.masses[p.label] for p in dw.critical_points]
    rep.add("symmetric_masses", ms, [0.5, 0.5], "abs 0.03 each", "th4-weights",
            all(abs(m - 0.5) <= 0.03 for m in ms))
    g = asy.concentration_weights(dw.critical_points, cr.f)
    gm = [g[p.label] for p in dw.critical_points]
    rep.add("gamma_vs_weights_symmetric", ms, gm, "abs 0.05 each", "th4-weights",
            all(abs(a - b) <= 0.05 for a, b in zip(ms, gm)), note=f"f measured = {_fmt(cr.f)}")
    asym = library_scenario("asymmetric-well-1d")
    pa = solve(asym, eps, nodes)
    ca = bu.concentration_masses(pa, asym)
    rep.concentration.append(ca.as_dict())
    cap = asy.lambda_cap(asym.critical_points)
    sel = sum(ca.masses[p.label] for p in cap.C_minmin)
    rep.add("asymmetric_Cminmin_mass", sel, ">= 0.95", ">= 0.95", "th4-weights", sel >= 0.95,
            note=f"C_minmin = {[p.label for p in cap.C_minmin]}")
    ga = asy.concentration_weights(asym.critical_points, ca.f)
    dev = max(abs(ca.masses[k] - ga[k]) for k in ga)
    rep.add("gamma_vs_weights_asymmetric", {k: ca.masses[k] for k in ga}, ga, "abs 0.05 each", "th4-weights",
            dev <= 0.05, note=f"f measured = {_fmt(ca.f)}")
    _set_timing(rep, t0)
    return rep


def thhk_expansion(eps=DW_EPS, nodes=NODES_1D, **_) -> RunReport:
    t0 = time.perf_counter()
    q = library_scenario("quartic-well-1d")
    res = cached_sweep(q.name, nodes, tuple(eps))
    rep = RunReport("reproduce:thhk-expansion", {"scenario": q.name, "eps": list(eps), "nodes": nodes})
    rep.eigen = eigen_rows(res)
    fit = bu.fit_expansion(res)
    rep.expansion = asdict(fit)
    P = q.critical_points[0]
    th = asy.theta_oracle_rs(P)
    rep.add("c2_vs_theta_rs", fit.c2, th, "rel 10%", "thhk-expansion", abs(fit.c2 - th) <= 0.1 * abs(th))
    pred = asy.predict(q)
    rep.predictor = pred.to_dict()
    b = asy.theta_predictor(P, 1.0, pred.K_paper)
    rep.add("theta_truc_printed_sign", b.value_printed, th, "info", "thhk-expansion", True, asserted=False)
    rep.add("theta_truc_flipped_sign", b.value_flipped, th, "info", "thhk-expansion", True, asserted=False)
    dw = library_scenario("double-well-1d")
    w = bu.w1_correction(dw.critical_points[-1])
    rep.add("w1_grid_residual", w.residuals[-1][1], 0.0, "info", "thhk-expansion", True, asserted=False,
            note=f"terms absent from the closed form: {_fmt(w.missing_from_lemma)}")
    rep.data["w1"] = {"coefficients": w.coefficients, "lemma_table": w.lemma_table}
    _set_timing(rep, t0)
    return rep


GRAD_EPS = DW_EPS


def tp_gradient(eps=GRAD_EPS, nodes=NODES_1D, **_) -> RunReport:
    t0 = time.perf_counter()
    spec = library_scenario("gradient-1d")
    res = cached_sweep(spec.name, nodes, tuple(eps), "gauge")
    rep = RunReport("reproduce:tp-gradient", {"scenario": spec.name, "eps": list(eps), "nodes": nodes, "route": "gauge"})
    rep.eigen = eigen_rows(res)
    pred = asy.predict(spec)
    rep.predictor = pred.to_dict()
    pr = pred.topological_pressure
    lam = float(res.lam[-1])
    rep.add("lambda_vs_pressure", lam, pr, "rel 5%", "tp-gradient", abs(lam - pr) <= 0.05 * abs(pr),
            note=f"eps = {res.eps[-1]:g}")
    S = [p for p in spec.critical_points if p.label in pred.S]
    pair = res.pairs[-1]
    cr = bu.concentration_masses(pair, spec, measure="weighted-phi")
    rep.concentration.append(cr.as_dict())
    mS = sum(cr.masses[p.label] for p in S)
    rep.add("weighted_phi_mass_in_S", mS, ">= 0.9", ">= 0.9", "tp-gradient", mS >= 0.9)
    worst = 0.0
    for P in S:
        worst = max(worst, bu.extract_profile(pair, P, spec=spec, case="gradient").residual)
    rep.add("gradient_profile_L2", worst, 0.0, "<= 0.05", "tp-gradient", worst <= 0.05)
    sup = bu.supnorm_growth(res, "gradient", spec)
    rep.add("gradient_supnorm_slope", sup.slope, sup.expected_slope, "abs 0.05", "tp-gradient",
            abs(sup.slope - sup.expected_slope) <= 0.05)
    track = bu.argmax_velocity(res, spec, S, case="gradient")
    rep.add("gradient_argmax_decreasing", track.d_over_sqrt_eps[-4:], "strictly decreasing", "monotone",
            "tp-gradient", track.decreasing_tail)
    rep.data["argmax"] = asdict(track)
    rep.data["series"] = {"lambda_vs_eps": list(zip(res.eps.tolist(), res.lam.tolist()))}
    _set_timing(rep, t0)
    return rep


def thfdtpr_cycle(eps: float = 1e-2, counts=(257, 64), delta: float = 0.1, beta: float = 2.0, **_) -> RunReport:
    t0 = time.perf_counter()
    spec = library_scenario("annulus-cycle")
    rep = RunReport("reproduce:thfdtpr-cycle", {"eps": eps, "counts": list(counts), "delta": delta, "beta": beta})
    b = spec.field.b
    loc = ly.local_lyapunov_cycle_planar(b, 1.0, beta, band=tuple(spec.domain.bounds[0]))
    rep.add("psi_certificate", loc.min_psi, "> 0", "> 0 off the cycle", "thfdtpr-cycle", loc.min_psi > 0)
    pair = solve(spec, eps, counts)
    rep.eigen.append({"eps": eps, "lambda": pair.lam, "residual": pair.residual, "iterations": pair.iterations})
    cr = bu.concentration_masses(pair, spec, delta=delta, measure="weighted-L", points=spec.cycles)
    rep.concentration.append(cr.as_dict())
    m = cr.masses[spec.cycles[0].label]
    rep.add("weighted_L_mass_near_cycle", m, "> 0.95", "> 0.95", "thfdtpr-cycle", m > 0.95)
    avg = asy.cycle_average(spec.c, spec.cycles[0])
    rep.add("lambda_vs_cycle_average", pair.lam, avg, "rel 10%", "thfdtpr-cycle",
            abs(pair.lam - avg) <= 0.1 * abs(avg))
    rep.add("lambda_vs_cycle_average_plus_contraction", pair.lam, avg + 1.0, "info", "thfdtpr-cycle", True,
            asserted=False, note="radial Floquet exponent of b_r = 1 - r is 1")
    _set_timing(rep, t0)
    return rep


NOYAU_LAM = (0.5, 2.0)
NOYAU_MU = (0.0, 1.0)
NOYAU_X = (-0.5, 0.0, 0.5)
NOYAU_T = (0.25, 0.5, 1.0)


def noyau(seed: int = 0, n_paths: int = 100_000, dt: float = 1e-3, lams=NOYAU_LAM, mus=NOYAU_MU,
          xs=NOYAU_X, ts=NOYAU_T, **_) -> RunReport:
    t0 = time.perf_counter()
    rep = RunReport("reproduce:noyau", {"seed": seed, "n_paths": n_paths, "dt": dt, "lambda": list(lams),
                                        "mu": list(mus), "x": list(xs), "t": list(ts)})
    rows = []
    ss = np.random.SeedSequence(seed)
    keys = ss.generate_state(len(lams) * len(mus))
    k = 0
    zmax, shift = 0.0, 0.0
    for lam in lams:
        for mu in mus:
            tab = st.verify_kernel(lam, mu, xs, ts, n_paths, dt, int(keys[k]))
            k += 1
            rows.extend(asdict(r) for r in tab.rows)
            zmax = max(zmax, tab.max_abs_z)
            shift = max(shift, tab.max_halving_shift)
    rep.data["table"] = rows
    rep.add("max_abs_z", zmax, 0.0, "<= 3", "noyau", zmax <= 3)
    rep.add("dt_halving_shift_in_se", shift, 0.0, "< 1", "noyau", shift < 1)
    _set_timing(rep, t0)
    return rep


def appendix2_decay(eps=DW_EPS, nodes=NODES_1D, margin: float = 0.3, **_) -> RunReport:
    t0 = time.perf_counter()
    spec = library_scenario("double-well-1d")
    res = cached_sweep(spec.name, nodes, tuple(eps))
    rep = RunReport("reproduce:appendix2-decay", {"eps": list(eps), "nodes": nodes, "margin": margin})
    reps, mono = bu.decay_track(res, spec, margin)
    rep.data["decay"] = [asdict(r) for r in reps]
    last = reps[-1]
    rep.add("decay_ratio", last.ratio, "<= 1e-6", "<= 1e-6", "appendix2-decay", last.ratio <= 1e-6,
            note=f"eps = {last.eps:g}, margin = {margin}")
    rep.add("decay_exponent_increasing", [r.k for r in reps], "strictly increasing", "monotone",
            "appendix2-decay", mono)
    _set_timing(rep, t0)
    return rep


def appendix1(seed: int = 0, n_matrices: int = 100, **_) -> RunReport:
    """Lyapunov-matrix property suite, annulus certificates and descent on shipped scenarios."""
    t0 = time.perf_counter()
    rep = RunReport("lyapunov", {"seed": seed, "n_matrices": n_matrices})
    rng = np.random.default_rng(seed)
    worst, min_eig = 0.0, np.inf
    for _ in range(n_matrices):
        n = int(rng.integers(2, 7))
        M = rng.standard_normal((n, n))
        D = M - (np.max(np.linalg.eigvals(M).real) + rng.uniform(0.1, 2.0)) * np.eye(n)
        r = ly.solve_lyapunov(D, float(rng.uniform(0.1, 4.0)))
        worst = max(worst, r.residual / r.bound)
        min_eig = min(min_eig, r.min_eig)
    rep.add("lyapunov_residual_over_bound", worst, 1.0, "<= 1 (bound 1e-10 |A|^2)", "appendix1", worst <= 1.0)
    rep.add("lyapunov_min_eig", float(min_eig), "> 0", "> 0", "appendix1", min_eig > 0)
    an = library_scenario("annulus-cycle")
    band = tuple(an.domain.bounds[0])
    ok2 = True
    try:
        loc = ly.local_lyapunov_cycle_planar(an.field.b, 1.0, 2.0, band)
        rep.data["cycle_certificate"] = loc.report()
    except ly.LyapunovError:
        ok2 = False
    rep.add("annulus_beta2_certified", ok2, True, "certified", "appendix1", ok2)
    try:
        ly.local_lyapunov_cycle_planar(an.field.b, 1.0, 1.0, band)
        rej = False
    except ly.LyapunovError:
        rej = True
    rep.add("annulus_beta1_rejected", rej, True, "rejected", "appendix1", rej)
    cert = ly.certify_scenario(an)
    fine = ly.certify_scenario(an, 129)
    rep.add("annulus_certificate_step_robust", [cert.passed, fine.passed], [True, True], "no flip under halving",
            "appendix1", cert.passed and fine.passed, note=f"alternative prefactor min ratio {cert.alternative_min_ratio:.3g}")
    dec = ly.decompose_field(an.field.b, an.field.lyapunov, metric="polar", samples=ly.domain_samples(an, 33))
    rep.data["decomposition"] = dec.to_dict()
    margins = {}
    all_ok = True
    for name in LIBRARY:
        for label, d in ly.scenario_descent(library_scenario(name)).items():
            if isinstance(d, str):
                margins[f"{name}:{label}"] = d
                continue
            margins[f"{name}:{label}"] = d.to_dict()
            all_ok &= d.passed
    rep.data["descent"] = margins
    mins = [v["min_margin"] for v in margins.values() if isinstance(v, dict)]
    rep.add("descent_margins_nonnegative", min(mins), ">= 0", "max increment <= 1e-8 |L0|", "appendix1", all_ok)
    _set_timing(rep, t0)
    return rep


def infrastructure(seed: int = 0, **_) -> RunReport:
    t0 = time.perf_counter()
    rep = RunReport("infrastructure", {"seed": seed})
    gq = library_scenario("gauge-quadratic-1d")
    g = build_grid(gq.domain, NODES_1D)
    a = principal_eigenpair(assemble_operator(gq, g, 0.05, "central"), g).lam
    b = principal_eigenpair(gauge_transform(gq, 0.05).assemble_scaled(g), g).lam
    rel = abs(a - b) / abs(a)
    rep.add("gauge_spectrum_agreement", rel, 0.0, "rel 1e-6", "tp-gradient", rel <= 1e-6)
    e = np.geomspace(0.1, 1e-3, 12)
    fit = bu.fit_expansion(e, 1.5 - 0.7 * np.sqrt(e) + 0.3 * e)
    err = max(abs(fit.c0 - 1.5), abs(fit.c1 + 0.7), abs(fit.c2 - 0.3))
    rep.add("expansion_fit_recovery", err, 0.0, "abs 1e-10", "thhk-expansion", err <= 1e-10)
    dw = library_scenario("double-well-1d")
    r1 = sweep(dw, 1025, [1e-2, 5e-3])
    r2 = sweep(dw, 1025, [1e-2, 5e-3])
    same_pde = bool(np.array_equal(r1.lam, r2.lam) and all(np.array_equal(p.u, q.u) for p, q in zip(r1.pairs, r2.pairs)))
    kill = st.kernel_kill(1.0, 0.5)
    m1 = st.simulate_fk(None, 1.0, kill, [0.2], 0.5, None, 5e-3, 4000, seed, workers=1)
    m2 = st.simulate_fk(None, 1.0, kill, [0.2], 0.5, None, 5e-3, 4000, seed, workers=4)
    same_mc = m1.mean == m2.mean and m1.se == m2.se
    rep.add("bit_identical_reruns", [same_pde, same_mc], [True, True], "exact", "infrastructure", same_pde and same_mc)
    bad = []
    for name in LIBRARY:
        spec = library_scenario(name)
        if spec.domain.dim == 1:
            grid = build_grid(spec.domain, 257)
        else:
            grid = build_grid(spec.domain, (65, 48) if spec.domain.kind == "annulus-polar" else (65, 65))
        for eps in (1e-1, 1e-2):
            if not assemble_operator(spec, grid, eps, "upwind").is_m_matrix():
                bad.append(f"{name}@{eps:g}")
    rep.add("upwind_m_matrix", bad, [], "all shipped scenarios", "infrastructure", not bad)
    _set_timing(rep, t0)
    return rep


RECIPES: dict[str, Callable[..., RunReport]] = {
    "potential-theorem": potential_theorem,
    "thnf-profile": thnf_profile,
    "th4-weights": th4_weights,
    "thhk-expansion": thhk_expansion,
    "tp-gradient": tp_gradient,
    "thfdtpr-cycle": thfdtpr_cycle,
    "noyau": noyau,
    "appendix2-decay": appendix2_decay,
}
