"""Lyapunov matrices, local Lyapunov functions and Psi certificates.

Fields follow the scenario convention: a handle b(*coords) returning one
component per axis. On the polar annulus the components are physical
(b_r, b_theta) in the orthonormal frame, so grad L = (dL/dr, dL/dtheta / r)
and the flow is r' = b_r, theta' = b_theta / r.

Psi(L) = (|grad L|^2 + 2 <grad L, b>) / 4 with the full field b. L decreases
along x' = b where <grad L, b> < 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad_vec, solve_ivp
from scipy.linalg import expm

from .scenario import ScenarioSpec, fd_gradient

REL_TOL = 1e-12   # Psi counts as positive when Psi > REL_TOL * |grad L|^2 / 4


class LyapunovError(ValueError):
    pass


# --------------------------------------------------------------------------
# matrix equation  A D + D* A = -mu A^2

@dataclass
class LyapunovMatrix:
    D: np.ndarray
    mu: float
    A: np.ndarray
    residual: float

    @property
    def bound(self) -> float:
        return 1e-10 * float(np.linalg.norm(self.A, 2)) ** 2

    @property
    def min_eig(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.A)))

    @property
    def ok(self) -> bool:
        return self.residual <= self.bound and self.min_eig > 0


def solve_lyapunov(D, mu: float = 1.0) -> LyapunovMatrix:
    """A from A^-1 = mu int_0^inf e^{tD} e^{tD*} dt, truncated at 40/|max Re eig D|.

    With G = A^-1 one has D G + G D* = -mu I, which is the matrix equation
    multiplied by G on both sides.
    """
    D = np.atleast_2d(np.asarray(D))
    if D.shape[0] != D.shape[1]:
        raise ValueError("D must be square")
    if mu <= 0:
        raise ValueError("mu must be positive")
    top = float(np.max(np.linalg.eigvals(D).real))
    if top >= 0:
        raise LyapunovError(f"not a stable linearization (max Re eig = {top:.3g})")
    Dh = D.conj().T
    t_max = 40.0 / abs(top)

    def integrand(t):
        E = expm(t * D)
        return E @ E.conj().T

    G, _ = quad_vec(integrand, 0.0, t_max, epsabs=0.0, epsrel=1e-14, norm="max", limit=2000)
    A = np.linalg.inv(mu * G)
    A = 0.5 * (A + A.conj().T)
    if np.isrealobj(D):
        A = A.real
    residual = float(np.linalg.norm(A @ D + Dh @ A + mu * A @ A, 2))
    return LyapunovMatrix(D, float(mu), A, residual)


# --------------------------------------------------------------------------
# field plumbing

def field_array(b: Callable) -> Callable:
    """Wrap a handle b(*coords) -> components as F(X) with X of shape (n, m)."""
    def F(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        comps = b(*X.T)
        return np.column_stack([np.broadcast_to(np.asarray(c, dtype=float), X.shape[0]) for c in comps])
    return F


def scalar_array(L: Callable) -> Callable:
    def f(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.broadcast_to(np.asarray(L(*X.T), dtype=float), X.shape[0]).copy()
    return f


def physical_gradient(L: Callable, X: np.ndarray, metric: str = "cartesian") -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g = np.column_stack(fd_gradient(L, tuple(X.T)))
    if metric == "polar":
        g[:, 1] = g[:, 1] / X[:, 0]
    return g


def psi(grad: np.ndarray, bvec: np.ndarray) -> np.ndarray:
    return 0.25 * (np.sum(grad * grad, axis=1) + 2.0 * np.sum(grad * bvec, axis=1))


def psi_lemma1(grad: np.ndarray, bvec: np.ndarray) -> np.ndarray:
    """Secondary diagnostic: (|grad L|^2 + <grad L, b>/2) / 4."""
    return 0.25 * (np.sum(grad * grad, axis=1) + 0.5 * np.sum(grad * bvec, axis=1))


def _positive(p, grad) -> np.ndarray:
    return p > REL_TOL * 0.25 * np.sum(grad * grad, axis=1)


# --------------------------------------------------------------------------
# local Lyapunov functions

@dataclass
class LocalLyapunov:
    kind: str                       # "point" or "cycle"
    center: object                  # fixed point array or cycle radius
    L: Callable                     # X (n, m) -> (n,)
    grad: Callable                  # X (n, m) -> (n, m), physical components
    b: Callable                     # X (n, m) -> (n, m), the field the certificate uses
    radius: float                   # validity radius (distance or |r - r0|)
    params: dict = field(default_factory=dict)
    min_psi: float = float("nan")
    n_samples: int = 0

    def psi(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return psi(self.grad(X), self.b(X))

    def margin(self, X) -> np.ndarray:
        """Descent rate -dL/dt = -<grad L, b>."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return -np.sum(self.grad(X) * self.b(X), axis=1)

    def report(self) -> dict:
        c = self.center.tolist() if isinstance(self.center, np.ndarray) else self.center
        out = {"kind": self.kind, "center": c, "radius": self.radius, "min_psi": self.min_psi,
               "n_samples": self.n_samples}
        out.update({k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()})
        return out


def jacobian(F: Callable, P: np.ndarray, h: float = 1e-5) -> np.ndarray:
    m = P.size
    J = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m); e[j] = h
        J[:, j] = (F(P + e)[0] - F(P - e)[0]) / (2 * h)
    return J


def _ball_samples(P: np.ndarray, r: float, n: int = 32) -> np.ndarray:
    m = P.size
    shells = r * np.arange(1, n + 1) / n
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif m == 2:
        a = 2 * np.pi * np.arange(32) / 32
        dirs = np.column_stack([np.cos(a), np.sin(a)])
    else:
        eye = np.eye(m)
        dirs = [s * eye[i] for i in range(m) for s in (1, -1)]
        dirs += [(eye[i] + s * eye[j]) / np.sqrt(2) for i in range(m) for j in range(i + 1, m) for s in (1, -1)]
        dirs = np.array(dirs)
    return (P[None, None, :] + shells[:, None, None] * dirs[None, :, :]).reshape(-1, m)


def local_lyapunov_point(b: Callable, P, mu: float = 1.0, radius: float = 0.5, reverse: bool = False,
                         n_samples: int = 32) -> LocalLyapunov:
    """L(x) = (A(x-P), x-P) at an attracting fixed point of x' = b (or of -b with reverse).

    The validity radius is halved until Psi > 0 and dL/dt < 0 on the sampled
    punctured ball. Psi is positive near P only for mu < 2.
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    F0 = field_array(b)
    F = (lambda X: -F0(X)) if reverse else F0
    D = jacobian(F, P)
    ev = np.linalg.eigvals(D)
    if np.any(np.abs(ev.real) < 1e-8):
        raise LyapunovError(f"non-hyperbolic fixed point at {P.tolist()}")
    if np.all(ev.real > 0):
        raise LyapunovError(f"repelling fixed point at {P.tolist()}: apply to -b (reverse=True)")
    if np.any(ev.real > 0):
        raise LyapunovError(f"saddle at {P.tolist()}: needs the stable/unstable splitting, "
                            "which is outside the numerical constructions here")
    lm = solve_lyapunov(D, mu)
    A = lm.A

    def L(X):
        Y = np.atleast_2d(X) - P
        return np.einsum("ni,ij,nj->n", Y, A, Y)

    def grad(X):
        return 2.0 * (np.atleast_2d(X) - P) @ A

    loc = LocalLyapunov("point", P, L, grad, F, radius, {"mu": mu, "A": A, "jacobian": D,
                                                         "lyapunov_residual": lm.residual})
    r = float(radius)
    for _ in range(40):
        X = _ball_samples(P, r, n_samples)
        g = grad(X)
        p = psi(g, F(X))
        if np.all(_positive(p, g)) and np.all(loc.margin(X) > 0):
            loc.radius, loc.min_psi, loc.n_samples = r, float(p.min()), len(X)
            return loc
        bad = X[np.argmin(p - REL_TOL * 0.25 * np.sum(g * g, axis=1))]
        r *= 0.5
    raise LyapunovError(f"Psi not positive near {P.tolist()} (e.g. at {bad.tolist()}); "
                        f"the quadratic part is (1 - mu/2)|A xi|^2, so take mu < 2")


def local_lyapunov_cycle_planar(b: Callable, r0: float, beta: float = 2.0, band: tuple | None = None,
                                n_r: int = 64, n_theta: int = 32) -> LocalLyapunov:
    """L = beta (r - r0)^2 for a circular cycle of a polar field; certifies Psi > 0 off the cycle."""
    F = field_array(b)
    lo, hi = band if band is not None else (0.5 * r0, 1.5 * r0)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    on = np.column_stack([np.full(n_theta, r0), th])
    bo = F(on)
    if np.max(np.abs(bo[:, 0])) > 1e-8 or np.min(np.abs(bo[:, 1])) == 0:
        raise LyapunovError(f"r = {r0} is not a closed orbit of the field")

    def L(X):
        X = np.atleast_2d(X)
        return beta * (X[:, 0] - r0) ** 2

    def grad(X):
        X = np.atleast_2d(X)
        return np.column_stack([2 * beta * (X[:, 0] - r0), np.zeros(len(X))])

    rs = np.linspace(lo, hi, n_r)
    rs = rs[np.abs(rs - r0) > 1e-9 * max(1.0, r0)]
    R, T = np.meshgrid(rs, th, indexing="ij")
    X = np.column_stack([R.ravel(), T.ravel()])
    g = grad(X)
    p = psi(g, F(X))
    ok = _positive(p, g)
    if not np.all(ok):
        i = int(np.flatnonzero(~ok)[0])
        raise LyapunovError(f"Psi <= 0 at r = {X[i, 0]:.6g}, theta = {X[i, 1]:.6g} "
                            f"(Psi = {p[i]:.3g}) for beta = {beta}; try a larger beta")
    return LocalLyapunov("cycle", float(r0), L, grad, F, float(min(r0 - lo, hi - r0)),
                         {"beta": beta, "band": [lo, hi]}, float(p.min()), len(X))


# --------------------------------------------------------------------------
# decomposition b = grad L + Omega

@dataclass
class Decomposition:
    omega: Callable
    psi_L_min: float = float("nan")
    psi_L_max: float = float("nan")
    psi_full_min: float = float("nan")
    sign_pattern: str = "unsampled"

    def to_dict(self) -> dict:
        return {"psi_L_min": self.psi_L_min, "psi_L_max": self.psi_L_max,
                "psi_full_min": self.psi_full_min, "sign_pattern": self.sign_pattern}


def _sign_pattern(v: np.ndarray, scale: float) -> str:
    tol = 1e-12 * max(scale, 1e-300)
    pos, neg = bool(np.any(v > tol)), bool(np.any(v < -tol))
    return {(True, False): "positive", (False, True): "negative", (True, True): "mixed"}.get((pos, neg), "zero")


def decompose_field(b: Callable, L: Callable, grad_L: Callable | None = None, metric: str = "cartesian",
                    samples: np.ndarray | None = None) -> Decomposition:
    """Omega = b - grad L, with Psi_L = |grad L|^2/4 + <grad L, Omega>/2 sampled for its sign.

    `grad_L` maps X (n, m) to physical gradient components; finite differences
    of L are used otherwise. Psi_L differs from the full-field Psi by
    |grad L|^2 / 2, so the two can carry opposite signs.
    """
    gfun = grad_L if grad_L is not None else (lambda X: physical_gradient(L, X, metric))
    F = field_array(b)

    def omega(*coords):
        X = np.column_stack([np.ravel(np.broadcast_to(c, np.broadcast(*coords).shape)) for c in coords])
        shape = np.broadcast(*coords).shape
        W = F(X) - gfun(X)
        return tuple(W[:, k].reshape(shape) if shape else float(W[0, k]) for k in range(W.shape[1]))

    dec = Decomposition(omega)
    if samples is not None:
        X = np.atleast_2d(np.asarray(samples, dtype=float))
        g = gfun(X)
        W = F(X) - g
        pl = 0.25 * np.sum(g * g, axis=1) + 0.5 * np.sum(g * W, axis=1)
        pf = psi(g, F(X))
        scale = float(np.max(np.sum(g * g, axis=1))) if len(X) else 0.0
        dec.psi_L_min, dec.psi_L_max = float(pl.min()), float(pl.max())
        dec.psi_full_min = float(pf.min())
        dec.sign_pattern = _sign_pattern(pl, scale)
    return dec


# --------------------------------------------------------------------------
# descent along trajectories

@dataclass
class Trajectory:
    start: list
    L_start: float
    L_end: float
    max_increment: float
    escaped: bool = False

    @property
    def margin(self) -> float:
        return self.L_start - self.L_end


@dataclass
class DescentReport:
    trajectories: list[Trajectory]
    tolerance: float

    @property
    def max_increment(self) -> float:
        vals = [t.max_increment for t in self.trajectories if not t.escaped]
        return max(vals) if vals else 0.0

    @property
    def min_margin(self) -> float:
        vals = [t.margin for t in self.trajectories if not t.escaped]
        return min(vals) if vals else 0.0

    @property
    def flagged(self) -> list[Trajectory]:
        return [t for t in self.trajectories if t.escaped]

    @property
    def passed(self) -> bool:
        return self.max_increment <= self.tolerance and self.min_margin >= -self.tolerance

    def to_dict(self) -> dict:
        return {"max_increment": self.max_increment, "min_margin": self.min_margin,
                "tolerance": self.tolerance, "flagged": [t.start for t in self.flagged],
                "passed": self.passed}


def descent_check(L: Callable, b: Callable, starts, horizon: float = 10.0, dt: float = 0.01,
                  metric: str = "cartesian", valid: Callable | None = None, rtol: float = 1e-10,
                  atol: float = 1e-12) -> DescentReport:
    """Integrate x' = b from each start and track the largest increase of L.

    L and b take coordinate arrays (scenario convention). `valid(X) -> bool
    array` marks the validity region; a trajectory leaving it is flagged and
    excluded from the summary.
    """
    F = field_array(b)
    Lf = scalar_array(L)

    def rhs(_, x):
        v = F(x[None, :])[0]
        if metric == "polar":
            v = v.copy(); v[1] = v[1] / x[0]
        return v

    t_eval = np.linspace(0.0, horizon, int(round(horizon / dt)) + 1)
    out = []
    for s in starts:
        x0 = np.atleast_1d(np.asarray(s, dtype=float))
        sol = solve_ivp(rhs, (0.0, horizon), x0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol)
        Y = sol.y.T
        vals = Lf(Y)
        inc = float(max(0.0, np.max(np.diff(vals)))) if len(vals) > 1 else 0.0
        esc = bool(valid is not None and not np.all(valid(Y)))
        out.append(Trajectory(x0.tolist(), float(vals[0]), float(vals[-1]), inc, esc))
    scale = max([abs(t.L_start) for t in out] + [1.0])
    return DescentReport(out, 1e-8 * scale)


# --------------------------------------------------------------------------
# scenario-level certificates

@dataclass
class PsiCertificate:
    passed: bool
    min_ratio: float                 # min of Psi / (|grad L|^2 / 4) over samples with L > 0
    min_psi: float
    at: list
    n_samples: int
    L_nonnegative: bool
    alternative_min_ratio: float     # same ratio for the Lemma-1 prefactor
    detail: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def domain_samples(spec: ScenarioSpec, n: int = 65) -> np.ndarray:
    """Uniform sample grid; periodic axes omit the duplicated endpoint."""
    dom = spec.domain
    axes = []
    for (lo, hi), per in zip(dom.bounds, dom.periodic):
        axes.append(np.linspace(lo, hi, n, endpoint=not per))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def certify_scenario(spec: ScenarioSpec, n: int = 65) -> PsiCertificate:
    """Psi certificate for the Lyapunov function carried by a general-field scenario."""
    fs = spec.field
    if fs.lyapunov is None or fs.b is None:
        raise LyapunovError("scenario carries no Lyapunov function")
    metric = "polar" if spec.domain.kind == "annulus-polar" else "cartesian"
    X = domain_samples(spec, n)
    Lv = scalar_array(fs.lyapunov)(X)
    L_nonneg = bool(np.all(Lv >= -1e-12 * max(1.0, float(np.max(np.abs(Lv))))))
    keep = Lv > 1e-10 * max(float(np.max(Lv)), 1e-300)
    X = X[keep]
    g = physical_gradient(fs.lyapunov, X, metric)
    bvec = field_array(fs.b)(X)
    q = 0.25 * np.sum(g * g, axis=1)
    good = q > 0
    ratio = psi(g, bvec)[good] / q[good]
    alt = psi_lemma1(g, bvec)[good] / q[good]
    if ratio.size == 0:
        return PsiCertificate(False, float("nan"), float("nan"), [], 0, L_nonneg, float("nan"),
                              "no samples with nonzero grad L")
    i = int(np.argmin(ratio))
    p = psi(g, bvec)[good]
    passed = bool(ratio[i] > REL_TOL and L_nonneg)
    detail = (f"min Psi/(|grad L|^2/4) = {ratio[i]:.6g} at {X[good][i].tolist()} over {ratio.size} samples"
              + ("" if L_nonneg else "; L takes negative values"))
    return PsiCertificate(passed, float(ratio[i]), float(p.min()), X[good][i].tolist(), int(ratio.size),
                          L_nonneg, float(alt.min()), detail)


def scenario_descent(spec: ScenarioSpec, horizon: float = 10.0) -> dict[str, DescentReport | str]:
    """Descent checks for every Lyapunov construction a shipped scenario admits.

    General fields use the scenario's L from starts inside the domain. For
    gradient fields each hyperbolic non-saddle critical point gets a local
    quadratic L (repellors of x' = b use -b). Zero fields have no flow.
    """
    out: dict = {}
    fs = spec.field
    if fs.kind == "zero":
        out["field"] = "zero field: no flow to descend"
        return out
    if fs.kind == "general":
        metric = "polar" if spec.domain.kind == "annulus-polar" else "cartesian"
        X = domain_samples(spec, 9)
        lo = np.array([bd[0] for bd in spec.domain.bounds])
        hi = np.array([bd[1] for bd in spec.domain.bounds])
        inner = np.all((X > lo + 0.1 * (hi - lo)) | np.array(spec.domain.periodic), axis=1) & \
            np.all((X < hi - 0.1 * (hi - lo)) | np.array(spec.domain.periodic), axis=1)
        out["scenario-L"] = descent_check(fs.lyapunov, fs.b, X[inner][::3], horizon, metric=metric)
    b = fs.drift(spec.dim)
    for P in spec.critical_points:
        if P.hessian_phi is None:
            continue
        H = np.asarray(P.hessian_phi, dtype=float)
        h = np.linalg.eigvalsh(np.diag(H) if H.ndim == 1 else np.atleast_2d(H))
        if np.any(h > 0) and np.any(h < 0):
            out[P.label] = "saddle: skipped (stable/unstable splitting not constructed)"
            continue
        try:
            loc = local_lyapunov_point(b, P.location, 1.0, radius=0.25, reverse=bool(np.all(h > 0)))
        except LyapunovError as exc:
            out[P.label] = f"skipped: {exc}"
            continue
        m = loc.center.size
        starts = [loc.center + s * 0.5 * loc.radius * e for e in np.eye(m) for s in (1, -1)]
        Fs = loc.b
        bl = lambda *c, F=Fs: tuple(F(np.column_stack(np.broadcast_arrays(*c))).T)
        Ll = lambda *c, f=loc.L: f(np.column_stack(np.broadcast_arrays(*c)))
        out[P.label] = descent_check(Ll, bl, starts, horizon)
    return out
