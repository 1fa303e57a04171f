"""Command-line harness: `lab <command> --config run.toml [--scenario NAME] [--out DIR] [--seed N]`.

Exit status is 0 when every asserted verdict passes, 2 when some verdict
fails and 1 on execution errors.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import blowup as bu
from . import recipes
from .eigensolver import SweepResult, solve, sweep, write_eigenpair_csv, write_sweep_csv
from .library import LIBRARY
from .recipes import RunReport, eigen_rows
from .scenario import ScenarioError, ScenarioSpec, load_scenario

try:
    import tomllib
except ModuleNotFoundError:          # Python 3.10
    import tomli as tomllib

COMMANDS = ("solve", "sweep", "predict", "blowup", "fk-verify", "lyapunov", "reproduce")

DEFAULT_TOL = {"c0_abs": 1e-4, "c1_rel": 0.05, "pressure_rel": 0.05, "profile_l2": 0.05}


class CatalogError(LookupError):
    pass


@dataclass
class RunConfig:
    command: str = "solve"
    scenario: str | None = None
    eps: list[float] = field(default_factory=lambda: [1e-2])
    grid: object = 2049
    mode: str = "upwind"
    route: str | None = None
    tol: float = 1e-10
    max_iter: int = 20000
    tolerances: dict = field(default_factory=dict)
    out: str = "lab-out"
    seed: int = 0
    blowup: dict = field(default_factory=dict)
    fk: dict = field(default_factory=dict)
    lyapunov: dict = field(default_factory=dict)
    tag: str | None = None

    def __post_init__(self):
        self.eps = [float(e) for e in np.atleast_1d(self.eps)]
        if any(e <= 0 for e in self.eps):
            raise ValueError("eps values must be positive")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError("eps list must be strictly decreasing")
        if isinstance(self.grid, list):
            self.grid = tuple(int(n) for n in self.grid)

    @classmethod
    def from_toml(cls, path) -> "RunConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        solver = data.pop("solver", {})
        data.update({k: solver[k] for k in ("mode", "route", "tol", "max_iter") if k in solver})
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOL[key]))

    def out_dir(self) -> Path:
        p = Path(self.out)
        p.mkdir(parents=True, exist_ok=True)
        if not os.access(p, os.W_OK):
            raise PermissionError(f"output directory {p} is not writable")
        return p


def _scenario(cfg: RunConfig) -> ScenarioSpec:
    if not cfg.scenario:
        raise CatalogError("no scenario given")
    if cfg.scenario not in LIBRARY and not Path(cfg.scenario).exists():
        raise CatalogError(f"unknown scenario {cfg.scenario!r}")
    return load_scenario(cfg.scenario)


def _write_dat(path: Path, rows, header: str = ""):
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        for a, b in rows:
            fh.write(f"{a:.12g} {b:.12g}\n")


# --------------------------------------------------------------------------
# commands

def cmd_solve(cfg: RunConfig) -> RunReport:
    spec = _scenario(cfg)
    eps = cfg.eps[0]
    pair = solve(spec, eps, cfg.grid, cfg.mode, cfg.route, cfg.tol, cfg.max_iter)
    rep = RunReport("solve", asdict(cfg))
    rep.eigen.append({"eps": eps, "lambda": pair.lam, "residual": pair.residual, "iterations": pair.iterations,
                      "nodes": pair.grid.n_free})
    rep.timing["solve_seconds"] = pair.seconds
    if spec.case == "potential":
        mc = float(np.min(pair.grid.sample(spec.c)))
        rep.add("lambda_lower_bound", pair.lam, mc, ">= min c on grid - 1e-8", "potential-theorem",
                pair.lam >= mc - 1e-8)
    out = cfg.out_dir()
    write_eigenpair_csv(pair, out / "eigenpair.csv")
    if pair.grid.dim == 1:
        _write_dat(out / "eigenfunction.dat", zip(pair.grid.coords[0], pair.u), "x u")
    return rep


def _sweep(cfg: RunConfig, spec: ScenarioSpec) -> SweepResult:
    return sweep(spec, cfg.grid, cfg.eps, cfg.mode, cfg.route, tol=cfg.tol, max_iter=cfg.max_iter)


def cmd_sweep(cfg: RunConfig) -> RunReport:
    spec = _scenario(cfg)
    if len(cfg.eps) < 4:
        raise ValueError("expansion fit needs >= 4 points")
    res = _sweep(cfg, spec)
    rep = RunReport("sweep", asdict(cfg))
    rep.eigen = eigen_rows(res)
    out = cfg.out_dir()
    write_sweep_csv(res, out / "sweep.csv")
    _write_dat(out / "lambda_vs_eps.dat", zip(res.eps, res.lam), "eps lambda")
    fit = bu.fit_expansion(res)
    rep.expansion = asdict(fit)
    pred = asy.predict(spec)
    rep.predictor = pred.to_dict()
    if spec.case == "potential" and pred.min_c is not None:
        rep.add("c0_vs_min_c", fit.c0, pred.min_c, f"abs {cfg.tolerance('c0_abs'):g}", "potential-theorem",
                abs(fit.c0 - pred.min_c) <= cfg.tolerance("c0_abs"))
        rep.add("c1_vs_Lambda", fit.c1, pred.Lambda, f"rel {cfg.tolerance('c1_rel'):g}", "potential-theorem",
                abs(fit.c1 - pred.Lambda) <= cfg.tolerance("c1_rel") * pred.Lambda)
    elif spec.case == "gradient" and pred.topological_pressure is not None:
        pr = pred.topological_pressure
        rep.add("lambda_vs_pressure", float(res.lam[-1]), pr, f"rel {cfg.tolerance('pressure_rel'):g}",
                "tp-gradient", abs(res.lam[-1] - pr) <= cfg.tolerance("pressure_rel") * abs(pr))
    if spec.case in ("potential", "gradient") and spec.critical_points:
        sup = bu.supnorm_growth(res, spec.case, spec)
        rep.data["supnorm"] = asdict(sup)
        _write_dat(out / "supnorm.dat", zip(sup.eps, sup.sup), "eps sup")
        rep.add("supnorm_slope", sup.slope, sup.expected_slope, "abs 0.05",
                "th4-weights" if spec.case == "potential" else "tp-gradient",
                abs(sup.slope - sup.expected_slope) <= 0.05)
        pts = [p for p in spec.critical_points if p.label in pred.S] if spec.case == "gradient" else None
        rep.data["argmax"] = asdict(bu.argmax_velocity(res, spec, pts))
        reps, mono = bu.decay_track(res, spec, float(cfg.blowup.get("margin", 0.3)))
        rep.data["decay"] = {"reports": [asdict(r) for r in reps], "k_increasing": mono}
    return rep


def cmd_predict(cfg: RunConfig) -> RunReport:
    spec = _scenario(cfg)
    rep = RunReport("predict", asdict(cfg))
    rep.predictor = asy.predict(spec).to_dict()
    return rep


def cmd_blowup(cfg: RunConfig) -> RunReport:
    spec = _scenario(cfg)
    rep = RunReport("blowup", asdict(cfg))
    out = cfg.out_dir()
    measure = cfg.blowup.get("measure", "weighted-phi" if spec.case == "gradient" else "plain-u2")
    delta = cfg.blowup.get("delta")
    pred = asy.predict(spec)
    labels = pred.S if spec.case == "gradient" else pred.C_minmin
    pts = [p for p in spec.critical_points if p.label in labels]
    case = "gradient" if spec.case == "gradient" else "potential"
    for eps in cfg.eps:
        pair = solve(spec, eps, cfg.grid, cfg.mode, cfg.route, cfg.tol, cfg.max_iter)
        rep.eigen.append({"eps": eps, "lambda": pair.lam, "residual": pair.residual})
        cr = bu.concentration_masses(pair, spec, delta=delta, measure=measure)
        rep.concentration.append(cr.as_dict())
        for P in pts:
            prof = bu.extract_profile(pair, P, spec=spec, case=case,
                                      y_radius=float(cfg.blowup.get("y_radius", 4.0)))
            tol = cfg.tolerance("profile_l2")
            rep.add(f"profile_L2[{P.label}, eps={eps:g}]", prof.residual, 0.0, f"<= {tol:g}",
                    "thnf-profile" if case == "potential" else "tp-gradient", prof.residual <= tol,
                    note=f"fitted lambda = {np.round(prof.fitted_quad, 6).tolist()}")
            if prof.w.ndim == 1:
                safe = P.label.replace("=", "").replace(",", "_").replace("(", "").replace(")", "")
                _write_dat(out / f"profile_{safe}_eps{eps:g}.dat", zip(prof.y[0], prof.w / prof.w.max()), "y w")
    return rep


def cmd_fk_verify(cfg: RunConfig) -> RunReport:
    fk = dict(cfg.fk)
    kw = {"seed": cfg.seed, "n_paths": int(fk.get("n_paths", 100_000)), "dt": float(fk.get("dt", 1e-3)),
          "lams": tuple(fk.get("lambda", recipes.NOYAU_LAM)), "mus": tuple(fk.get("mu", recipes.NOYAU_MU)),
          "xs": tuple(fk.get("x", recipes.NOYAU_X)), "ts": tuple(fk.get("t", recipes.NOYAU_T))}
    rep = recipes.noyau(**kw)
    rep.command = "fk-verify"
    rep.config = asdict(cfg)
    _write_fk_table(rep, cfg.out_dir() / "fk_table.csv")
    return rep


def _write_fk_table(rep: RunReport, path: Path):
    rows = rep.data.get("table", [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "mu", "x", "t", "closed_form", "mc_mean", "mc_se", "z", "dt", "halved_mean",
                    "halving_shift_in_se"])
        for r in rows:
            w.writerow([r["lam"], r["mu"], r["x"], r["t"], f"{r['closed_form']:.10g}", f"{r['mc_mean']:.10g}",
                        f"{r['mc_se']:.4g}", f"{r['z']:.4f}", r["dt"], r["halved_mean"], r["halving_shift_in_se"]])


def cmd_lyapunov(cfg: RunConfig) -> RunReport:
    from . import lyapunov as ly
    rep = recipes.appendix1(seed=cfg.seed, n_matrices=int(cfg.lyapunov.get("n_matrices", 100)))
    rep.config = asdict(cfg)
    if cfg.scenario:
        spec = _scenario(cfg)
        if spec.field.kind == "general":
            cert = ly.certify_scenario(spec, int(cfg.lyapunov.get("samples", 65)))
            rep.data["scenario_certificate"] = cert.to_dict()
            rep.add(f"psi_certificate[{spec.name}]", cert.min_ratio, "> 0", "Psi / (|grad L|^2/4) > 0",
                    "thfdtpr-cycle", cert.passed)
    return rep


def cmd_reproduce(cfg: RunConfig) -> RunReport:
    tag = cfg.tag
    if tag not in recipes.RECIPES:
        raise CatalogError(f"unknown reproduce tag {tag!r}")
    rep = recipes.RECIPES[tag](seed=cfg.seed)
    rep.config = asdict(cfg) | rep.config
    if tag == "noyau":
        _write_fk_table(rep, cfg.out_dir() / "fk_table.csv")
    for name, series in rep.data.get("series", {}).items():
        _write_dat(cfg.out_dir() / f"{name}.dat", series, name.replace("_vs_", " vs "))
    return rep


HANDLERS = {"solve": cmd_solve, "sweep": cmd_sweep, "predict": cmd_predict, "blowup": cmd_blowup,
            "fk-verify": cmd_fk_verify, "lyapunov": cmd_lyapunov, "reproduce": cmd_reproduce}


# --------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description="principal-eigenpair experiments")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("tag", nargs="?", help="recipe tag for `reproduce`")
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--scenario", help="library scenario name or TOML scenario file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="seed for all randomness")
    return ap


def catalog() -> str:
    return ("scenarios: " + ", ".join(LIBRARY) + "\nreproduce tags: " + ", ".join(recipes.RECIPES))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_toml(args.config) if args.config else RunConfig()
        cfg.command = args.command
        if args.scenario:
            cfg.scenario = args.scenario
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tag:
            cfg.tag = args.tag
        t0 = time.perf_counter()
        rep = HANDLERS[args.command](cfg)
        rep.timing["wall_seconds"] = time.perf_counter() - t0
        out = cfg.out_dir()
        (out / "report.json").write_text(rep.to_json())
    except CatalogError as exc:
        print(f"error: {exc}\n{catalog()}", file=sys.stderr)
        return 1
    except (ValueError, ScenarioError, RuntimeError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for v in rep.verdicts:
        print(v.line())
    print(f"report: {out / 'report.json'}")
    return 0 if rep.passed else 2


if __name__ == "__main__":
    sys.exit(main())
