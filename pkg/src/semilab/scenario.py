"""Declarative verification problems.

A scenario bundles a flat domain, a positive potential c, a drift field b
(zero, gradient of phi, or general with a Lyapunov function L) and
user-declared Taylor data at the critical points. The Taylor data is never
auto-detected; `validate_scenario` probes it with finite differences.

Function handles are plain vectorized callables taking one coordinate array
per axis: ``c(x)`` in 1D, ``c(x, y)`` on boxes and tori, ``c(r, theta)`` on
the polar annulus. Vector handles return a tuple with one array per axis; on
the annulus the components are (b_r, b_theta) in the orthonormal polar frame.
"""
from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

DOMAIN_KINDS = ("interval", "box", "flat-torus", "annulus-polar")
BOUNDARY_KINDS = ("dirichlet-zero", "periodic")
FIELD_KINDS = ("zero", "gradient-of-phi", "general")

PROBE_STEP = 1e-5
PROBE_TOL = 1e-10


class ScenarioError(ValueError):
    """Malformed scenario data; `axis` is set when a domain axis is at fault."""

    def __init__(self, msg: str, axis: int | None = None):
        super().__init__(msg)
        self.axis = axis


# --------------------------------------------------------------------------
# expression handles

_EXPR_NS = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "cosh", "sinh",
    "arctan", "arctan2", "hypot", "abs", "where", "minimum", "maximum",
)}
_EXPR_NS.update(pi=np.pi, e=np.e, np=np)


class Expr:
    """Scalar handle compiled from a numpy expression string."""

    def __init__(self, source: str, variables: Sequence[str]):
        self.source = str(source)
        self.variables = tuple(variables)
        self._code = compile(self.source, f"<expr {self.source!r}>", "eval")

    def __call__(self, *coords):
        if len(coords) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} coordinates, got {len(coords)}")
        ns = dict(zip(self.variables, coords))
        out = eval(self._code, {"__builtins__": {}, **_EXPR_NS}, ns)
        shape = np.broadcast(*[np.asarray(c) for c in coords]).shape
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    def __repr__(self):
        return f"Expr({self.source!r})"


class VectorExpr:
    def __init__(self, sources: Sequence[str], variables: Sequence[str]):
        self.components = tuple(Expr(s, variables) for s in sources)

    @property
    def source(self):
        return [c.source for c in self.components]

    def __call__(self, *coords):
        return tuple(comp(*coords) for comp in self.components)

    def __repr__(self):
        return f"VectorExpr({self.source!r})"


def axis_names(kind: str, dim: int) -> tuple[str, ...]:
    if kind == "annulus-polar":
        return ("r", "theta")
    return ("x", "y")[:dim]


# --------------------------------------------------------------------------
# data types

@dataclass(frozen=True)
class DomainSpec:
    kind: str
    bounds: tuple[tuple[float, float], ...]
    boundary: tuple[str, ...] | str = "dirichlet-zero"

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ScenarioError(f"unknown domain kind {self.kind!r}")
        bounds = tuple(tuple(float(v) for v in b) for b in self.bounds)
        dim = len(bounds)
        if dim not in (1, 2):
            raise ScenarioError(f"dimension must be 1 or 2, got {dim}")
        for i, b in enumerate(bounds):
            if len(b) != 2 or not all(math.isfinite(v) for v in b) or not b[0] < b[1]:
                raise ScenarioError(f"malformed bounds {b} on axis {i}", axis=i)
        bc = self.boundary
        if isinstance(bc, str):
            if self.kind == "annulus-polar" and bc != "periodic":
                bc = (bc, "periodic")
            else:
                bc = (bc,) * dim
        bc = tuple(bc)
        if len(bc) != dim:
            raise ScenarioError(f"need one boundary type per axis, got {len(bc)} for {dim} axes")
        for i, k in enumerate(bc):
            if k not in BOUNDARY_KINDS:
                raise ScenarioError(f"unknown boundary {k!r} on axis {i}", axis=i)
        if self.kind == "interval" and dim != 1:
            raise ScenarioError("interval domains are one-dimensional")
        if self.kind in ("box", "annulus-polar") and dim != 2:
            raise ScenarioError(f"{self.kind} domains are two-dimensional")
        if self.kind == "flat-torus":
            for i, k in enumerate(bc):
                if k != "periodic":
                    raise ScenarioError("flat-torus requires periodic on all axes", axis=i)
        if self.kind == "annulus-polar":
            if not bounds[0][0] > 0:
                raise ScenarioError("annulus requires 0 < r_min < r_max", axis=0)
            if bc[1] != "periodic":
                raise ScenarioError("annulus angular axis must be periodic", axis=1)
            if bc[0] != "dirichlet-zero":
                raise ScenarioError("annulus radial axis must be dirichlet-zero", axis=0)
            if not np.isclose(bounds[1][1] - bounds[1][0], 2 * np.pi, rtol=1e-12):
                raise ScenarioError("annulus angular axis must span 2*pi", axis=1)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "boundary", bc)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(k == "periodic" for k in self.boundary)

    @property
    def boundary_label(self) -> str:
        kinds = set(self.boundary)
        return self.boundary[0] if len(kinds) == 1 else "mixed-per-axis"

    @property
    def variables(self) -> tuple[str, ...]:
        return axis_names(self.kind, self.dim)

    def volume(self) -> float:
        if self.kind == "annulus-polar":
            (r0, r1), (t0, t1) = self.bounds
            return 0.5 * (r1 ** 2 - r0 ** 2) * (t1 - t0)
        return float(np.prod([b - a for a, b in self.bounds]))

    def diameter(self) -> float:
        if self.kind == "annulus-polar":
            return 2 * self.bounds[0][1]
        return float(np.sqrt(sum((b - a) ** 2 for a, b in self.bounds)))

    def contains(self, point) -> bool:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        for (a, b), per, v in zip(self.bounds, self.periodic, p):
            if not per and not (a <= v <= b):
                return False
        return True

    def displacement(self, coords, point):
        """Per-axis displacement from `point`, wrapped on periodic axes."""
        out = []
        for (a, b), per, x, p in zip(self.bounds, self.periodic, coords, point):
            d = np.asarray(x, dtype=float) - p
            if per:
                L = b - a
                d = (d + 0.5 * L) % L - 0.5 * L
            out.append(d)
        return out

    def distance(self, coords, point):
        return np.sqrt(sum(d ** 2 for d in self.displacement(coords, point)))


@dataclass
class FieldSpec:
    kind: str = "zero"
    phi: Callable | None = None
    b: Callable | None = None
    lyapunov: Callable | None = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ScenarioError(f"unknown field kind {self.kind!r}")
        if self.kind == "zero" and (self.phi is not None or self.b is not None):
            raise ScenarioError("zero field must not carry phi or b")
        if self.kind == "gradient-of-phi" and self.phi is None:
            raise ScenarioError("gradient-of-phi field needs phi")
        if self.kind == "general" and (self.b is None or self.lyapunov is None):
            raise ScenarioError("general field needs both b and a Lyapunov function L")

    def drift(self, dim: int) -> Callable | None:
        """Drift handle b, or None for the zero field."""
        if self.kind == "zero":
            return None
        if self.b is not None:
            return self.b
        phi = self.phi
        return lambda *coords: fd_gradient(phi, coords)


@dataclass
class Curvature:
    R: float = 0.0
    R_ijij: np.ndarray | None = None  # (m, m) sectional-type components R_ijij
    Ric: np.ndarray | None = None

    def is_flat(self) -> bool:
        arrs = [np.asarray(a) for a in (self.R_ijij, self.Ric) if a is not None]
        return self.R == 0.0 and all(not np.any(a) for a in arrs)


def symmetrize(t) -> np.ndarray:
    """Average a tensor over all index permutations."""
    t = np.asarray(t, dtype=float)
    if t.ndim <= 1:
        return t.copy()
    perms = list(itertools.permutations(range(t.ndim)))
    return sum(np.transpose(t, p) for p in perms) / len(perms)


def _tensor(value, m: int, order: int) -> np.ndarray:
    if value is None:
        return np.zeros((m,) * order)
    a = np.asarray(value, dtype=float)
    if a.ndim == 0 and m == 1:
        a = a.reshape((1,) * order)
    if a.shape != (m,) * order:
        raise ScenarioError(f"tensor of order {order} must have shape {(m,) * order}, got {a.shape}")
    return a


@dataclass
class CriticalPointData:
    """Taylor data at a declared critical point.

    quad holds the coefficients of x_i^2 in c - min c (so c'' = 2*quad), cubic
    and quartic0 the symmetric tensors T with c = ... + T_ijk x_i x_j x_k +
    Q_ijkl x_i x_j x_k x_l summed over all index tuples. hessian_phi holds the
    Hessian eigenvalues of phi (gradient case only).
    """

    location: np.ndarray
    value: float
    quad: np.ndarray | None = None
    cubic: np.ndarray | None = None
    quartic0: np.ndarray | None = None
    hessian_phi: np.ndarray | None = None
    curvature: Curvature = dc_field(default_factory=Curvature)
    role: str = "minimum"  # "minimum" of c, or "critical" point of phi / zero of b
    label: str = ""

    def __post_init__(self):
        self.location = np.atleast_1d(np.asarray(self.location, dtype=float))
        m = self.location.size
        self.value = float(self.value)
        self.quad = None if self.quad is None else np.atleast_1d(np.asarray(self.quad, dtype=float))
        if self.quad is not None and self.quad.shape != (m,):
            raise ScenarioError("quad must have one entry per axis")
        self.cubic = _tensor(self.cubic, m, 3)
        self.quartic0 = _tensor(self.quartic0, m, 4)
        if self.hessian_phi is not None:
            self.hessian_phi = np.atleast_1d(np.asarray(self.hessian_phi, dtype=float))
            if self.hessian_phi.shape != (m,):
                raise ScenarioError("hessian_phi must have one entry per axis")
        if self.curvature.R_ijij is None:
            self.curvature.R_ijij = np.zeros((m, m))
        if self.curvature.Ric is None:
            self.curvature.Ric = np.zeros((m, m))
        if self.role not in ("minimum", "critical"):
            raise ScenarioError(f"unknown critical point role {self.role!r}")
        if not self.label:
            self.label = "P(" + ", ".join(f"{v:g}" for v in self.location) + ")"

    @property
    def dim(self) -> int:
        return self.location.size

    @property
    def field_eigenvalues_half(self) -> np.ndarray:
        """|hessian_phi|/2: the x^2 coefficients of phi - phi(P) in absolute value."""
        return np.abs(self.hessian_phi) / 2.0


@dataclass
class CycleData:
    """Closed orbit {r = radius} of a polar field, traversed in `period`."""

    radius: float
    period: float = 2 * np.pi
    label: str = ""

    def __post_init__(self):
        if not self.label:
            self.label = f"cycle(r={self.radius:g})"

    def param(self, t):
        t = np.asarray(t, dtype=float)
        return (np.full_like(t, self.radius), (2 * np.pi * t / self.period) % (2 * np.pi))


@dataclass
class ScenarioSpec:
    domain: DomainSpec
    c: Callable
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    critical_points: list[CriticalPointData] = dc_field(default_factory=list)
    cycles: list[CycleData] = dc_field(default_factory=list)
    name: str = "unnamed"
    description: str = ""
    metadata: dict = dc_field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def case(self) -> str:
        """Blow-up regime: 'potential' (b = 0), 'gradient', or 'general'."""
        return {"zero": "potential", "gradient-of-phi": "gradient"}.get(self.field.kind, "general")

    def minima(self) -> list[CriticalPointData]:
        return [p for p in self.critical_points if p.role == "minimum"]


# --------------------------------------------------------------------------
# finite differences

def _directional(f, point, direction, order: int, h: float) -> float:
    """Central finite-difference derivative of s -> f(point + s*direction)."""
    p = np.asarray(point, dtype=float)
    u = np.asarray(direction, dtype=float)
    if order == 1:
        st, w = (-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12)
    elif order == 2:
        st, w = (-2, -1, 0, 1, 2), (-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12)
    elif order == 3:
        st, w = (-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)
    elif order == 4:
        st, w = (-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)
    else:
        raise ValueError(order)
    vals = [float(f(*(p + s * h * u))) for s in st]
    return sum(wi * vi for wi, vi in zip(w, vals)) / h ** order


def fd_gradient(f, coords, h: float = 1e-4):
    """Fourth-order central gradient of a scalar handle at coordinate arrays."""
    coords = [np.asarray(c, dtype=float) for c in coords]
    out = []
    for i in range(len(coords)):
        def shifted(s):
            cc = list(coords)
            cc[i] = cc[i] + s * h
            return np.asarray(f(*cc), dtype=float)
        out.append((8 * (shifted(1) - shifted(-1)) - (shifted(2) - shifted(-2))) / (12 * h))
    return tuple(out)


def fd_laplacian(f, coords, h: float = 1e-3):
    coords = [np.asarray(c, dtype=float) for c in coords]
    f0 = np.asarray(f(*coords), dtype=float)
    total = np.zeros(np.broadcast(*coords).shape)
    for i in range(len(coords)):
        def shifted(s):
            cc = list(coords)
            cc[i] = cc[i] + s * h
            return np.asarray(f(*cc), dtype=float)
        total = total + (-shifted(2) + 16 * shifted(1) - 30 * f0 + 16 * shifted(-1) - shifted(-2)) / (12 * h * h)
    return total


def fd_hessian(f, point, h: float = 1e-3) -> np.ndarray:
    m = len(point)
    H = np.zeros((m, m))
    eye = np.eye(m)
    for i in range(m):
        H[i, i] = _directional(f, point, eye[i], 2, h)
    for i, j in itertools.combinations(range(m), 2):
        dp = _directional(f, point, eye[i] + eye[j], 2, h)
        dm = _directional(f, point, eye[i] - eye[j], 2, h)
        H[i, j] = H[j, i] = (dp - dm) / 4
    return H


def probe_gradient(f, point, h: float = PROBE_STEP) -> np.ndarray:
    eye = np.eye(len(point))
    return np.array([_directional(f, point, eye[i], 1, h) for i in range(len(point))])


def _probe_directions(m: int) -> list[np.ndarray]:
    if m == 1:
        return [np.array([1.0])]
    return [np.array(v, dtype=float) for v in ((1, 0), (0, 1), (1, 1), (1, -1), (1, 2))]


# --------------------------------------------------------------------------
# validation

@dataclass
class Check:
    name: str
    passed: bool
    residual: float = 0.0
    detail: str = ""


@dataclass
class ValidationReport:
    scenario: str
    checks: list[Check] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def add(self, name, passed, residual=0.0, detail=""):
        self.checks.append(Check(name, bool(passed), float(residual), detail))

    def raise_if_failed(self):
        if not self.ok:
            msgs = "; ".join(f"{c.name}: {c.detail}" for c in self.failures())
            raise ScenarioError(f"scenario {self.scenario!r} rejected: {msgs}")

    def as_dict(self):
        return {"scenario": self.scenario, "ok": self.ok,
                "checks": [vars(c) for c in self.checks]}


def probe_points(domain: DomainSpec, n: int = 65):
    axes = []
    for (a, b), per in zip(domain.bounds, domain.periodic):
        axes.append(np.linspace(a, b, n, endpoint=not per))
    mesh = np.meshgrid(*axes, indexing="ij")
    return tuple(m.ravel() for m in mesh)


def validate_scenario(spec: ScenarioSpec, probe_n: int = 65) -> ValidationReport:
    """Check every scenario invariant; a scenario is usable only if all pass."""
    rep = ValidationReport(spec.name)
    dom = spec.domain
    pts = probe_points(dom, probe_n)
    cvals = np.asarray(spec.c(*pts), dtype=float)
    extra = [p.location for p in spec.critical_points if dom.contains(p.location)]
    if extra:
        cvals = np.concatenate([cvals, [float(spec.c(*p)) for p in extra]])
        pts = tuple(np.concatenate([pts[i], [p[i] for p in extra]]) for i in range(dom.dim))
    k = int(np.argmin(cvals))
    where = tuple(float(x[k]) for x in pts)
    cmin = float(cvals[k])
    if np.all(np.isfinite(cvals)):
        # the sample grid can straddle a zero of c; polish the sampled minimum
        res = optimize.minimize(lambda z: float(spec.c(*z)), np.array(where), method="L-BFGS-B",
                                bounds=list(dom.bounds))
        if res.fun < cmin:
            cmin, where = float(res.fun), tuple(float(v) for v in res.x)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(cvals))))
    rep.add("c_positive", np.all(np.isfinite(cvals)) and cmin > floor, cmin,
            "ok" if cmin > floor else f"c not strictly positive: c = {cmin:.3g} at {where}")

    scalar_for = {"zero": spec.c, "gradient-of-phi": spec.field.phi}
    for P in spec.critical_points:
        tag = P.label
        if P.dim != dom.dim:
            rep.add(f"{tag}:dimension", False, detail=f"point has {P.dim} coordinates, domain has {dom.dim}")
            continue
        rep.add(f"{tag}:inside", dom.contains(P.location), detail="location inside domain")
        cP = float(spec.c(*P.location))
        rep.add(f"{tag}:value", abs(cP - P.value) <= 1e-10 * max(1.0, abs(cP)), abs(cP - P.value),
                f"declared c(P) = {P.value:g}, evaluated {cP:g}")
        for nm, t in (("cubic", P.cubic), ("quartic0", P.quartic0)):
            asym = float(np.max(np.abs(t - symmetrize(t)))) if t.ndim > 1 else 0.0
            rep.add(f"{tag}:{nm}_symmetric", asym <= 1e-14 * max(1.0, np.max(np.abs(t))), asym)
        rep.add(f"{tag}:flat_curvature", P.curvature.is_flat(), detail="flat scenarios carry zero curvature")

        # gradient vanishing
        f = spec.c if P.role == "minimum" else scalar_for.get(spec.field.kind)
        if f is not None:
            g = probe_gradient(f, P.location)
            tol = PROBE_TOL * max(1.0, abs(float(f(*P.location))))
            gn = float(np.max(np.abs(g)))
            rep.add(f"{tag}:gradient_vanishes", gn <= tol, gn,
                    f"|grad| = {gn:.3g} at probe (tolerance {tol:.1e})")
        elif spec.field.kind == "general":
            bvals = np.array(spec.field.b(*P.location), dtype=float)
            gn = float(np.max(np.abs(bvals)))
            rep.add(f"{tag}:field_vanishes", gn <= PROBE_TOL, gn, f"|b| = {gn:.3g}")

        if P.role == "minimum":
            ok = P.quad is not None and np.all(P.quad > 0)
            rep.add(f"{tag}:quad_positive", ok, detail="Morse non-degeneracy at minimum of c")
            if P.quad is not None:
                _check_taylor(rep, spec.c, P)
        if spec.field.kind == "gradient-of-phi" and P.hessian_phi is not None:
            H = fd_hessian(spec.field.phi, P.location)
            ev = np.sort(np.linalg.eigvalsh(0.5 * (H + H.T)))
            err = float(np.max(np.abs(ev - np.sort(P.hessian_phi))))
            rep.add(f"{tag}:hessian_phi", err <= 1e-5 * max(1.0, np.max(np.abs(ev))), err,
                    f"finite-difference eigenvalues {ev.tolist()}")
            rep.add(f"{tag}:hyperbolic", np.all(P.hessian_phi != 0), detail="nonzero Hessian eigenvalues")

    if spec.field.kind == "gradient-of-phi" and spec.field.b is not None:
        sub = tuple(x[:: max(1, len(x) // 500)] for x in pts)
        bu = spec.field.b(*sub)
        bg = fd_gradient(spec.field.phi, sub)
        err = max(float(np.max(np.abs(np.asarray(u) - np.asarray(v)))) for u, v in zip(bu, bg))
        rep.add("b_matches_grad_phi", err <= 1e-8, err)

    for cyc in spec.cycles:
        ok = dom.kind == "annulus-polar" and dom.bounds[0][0] < cyc.radius < dom.bounds[0][1]
        rep.add(f"{cyc.label}:inside", ok, detail="cycle radius strictly inside annulus")

    if spec.field.kind == "general":
        from .lyapunov import certify_scenario
        cert = certify_scenario(spec)
        rep.add("lyapunov_psi_certificate", cert.passed, cert.min_ratio, cert.detail)
    return rep


def _check_taylor(rep: ValidationReport, c, P: CriticalPointData):
    """Directional derivatives of c against declared quad/cubic/quartic data."""
    rel = lambda a, b: abs(a - b) / max(1.0, abs(b))
    worst = {2: 0.0, 3: 0.0, 4: 0.0}
    for u in _probe_directions(P.dim):
        d2 = _directional(c, P.location, u, 2, 1e-3)
        worst[2] = max(worst[2], rel(d2, 2 * float(np.sum(P.quad * u ** 2))))
        d3 = _directional(c, P.location, u, 3, 1e-2)
        worst[3] = max(worst[3], rel(d3, 6 * float(np.einsum("ijk,i,j,k", P.cubic, u, u, u))))
        d4 = _directional(c, P.location, u, 4, 2e-2)
        worst[4] = max(worst[4], rel(d4, 24 * float(np.einsum("ijkl,i,j,k,l", P.quartic0, u, u, u, u))))
    rep.add(f"{P.label}:quad_matches", worst[2] <= 1e-6, worst[2], "second derivatives vs 2*quad")
    rep.add(f"{P.label}:cubic_matches", worst[3] <= 1e-3, worst[3], "third derivatives vs 6*cubic")
    rep.add(f"{P.label}:quartic_matches", worst[4] <= 1e-2, worst[4], "fourth derivatives vs 24*quartic0")


def require_valid(spec: ScenarioSpec) -> ScenarioSpec:
    validate_scenario(spec).raise_if_failed()
    return spec


# --------------------------------------------------------------------------
# file format

def scenario_from_dict(d: dict) -> ScenarioSpec:
    """Build a scenario from the nested-table layout used by scenario files."""
    try:
        dd = d["domain"]
        domain = DomainSpec(dd["kind"], tuple(tuple(b) for b in dd["bounds"]),
                            dd.get("boundary", "dirichlet-zero"))
    except KeyError as exc:
        raise ScenarioError(f"missing key {exc}") from None
    var = domain.variables
    c = Expr(d["c"], var) if isinstance(d.get("c"), str) else d["c"]
    fd = d.get("field", {"kind": "zero"})
    kind = fd.get("kind", "zero")

    def mk(v, vec=False):
        if v is None or callable(v):
            return v
        return VectorExpr(v, var) if vec else Expr(v, var)

    fspec = FieldSpec(kind, phi=mk(fd.get("phi")), b=mk(fd.get("b"), vec=True), lyapunov=mk(fd.get("lyapunov")))
    pts = []
    for p in d.get("critical_points", []):
        curv = p.get("curvature", {})
        pts.append(CriticalPointData(
            location=p["location"], value=p["value"], quad=p.get("quad"),
            cubic=p.get("cubic"), quartic0=p.get("quartic0"), hessian_phi=p.get("hessian_phi"),
            curvature=Curvature(float(curv.get("R", 0.0)), curv.get("R_ijij"), curv.get("Ric")),
            role=p.get("role", "minimum"), label=p.get("label", "")))
    cycles = [CycleData(float(cy["radius"]), float(cy.get("period", 2 * np.pi)), cy.get("label", ""))
              for cy in d.get("cycles", [])]
    return ScenarioSpec(domain, c, fspec, pts, cycles, name=d.get("name", "unnamed"),
                        description=d.get("description", ""), metadata=dict(d.get("metadata", {})))


def load_scenario(ref: str | Path) -> ScenarioSpec:
    """Load a scenario by library name or from a TOML file path."""
    from .library import LIBRARY, library_scenario as lib
    if isinstance(ref, str) and ref in LIBRARY:
        return lib(ref)
    path = Path(ref)
    if not path.exists():
        raise ScenarioError(f"no library scenario or file named {ref!r}; library: {sorted(LIBRARY)}")
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    data.setdefault("name", path.stem)
    return scenario_from_dict(data)


def library_scenario(name: str) -> ScenarioSpec:
    from .library import library_scenario as lib
    return lib(name)
