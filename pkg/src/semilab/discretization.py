"""Grids and sparse finite-difference assembly of L_eps.

Every assembled matrix represents -eps * lap + b . grad + c on free nodes,
lap being the ordinary Laplacian (so -lap is the positive operator the paper
writes as its Laplacian). Dirichlet rows are eliminated, periodic axes wrap.

On the polar annulus the operator is
    -eps (u_rr + u_r / r + u_tt / r^2) + b_r u_r + (b_t / r) u_t + c u
and every axis is handled through the same generic form
    sum_k [ -a_k d_kk + beta_k d_k ] + c
with a diffusion coefficient a_k and a transport coefficient beta_k per axis.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .scenario import DomainSpec, FieldSpec, ScenarioError, ScenarioSpec, fd_gradient, fd_laplacian

MIN_COUNT = 16
MODES = ("upwind", "central", "hybrid")


class ResolutionWarning(UserWarning):
    pass


@dataclass
class Grid:
    domain: DomainSpec
    counts: tuple[int, ...]
    spacing: tuple[float, ...]
    axes: tuple[np.ndarray, ...]          # node coordinates per axis, boundary nodes included
    free_axes: tuple[np.ndarray, ...]     # indices of free nodes per axis
    weights_full: np.ndarray              # quadrature weights on the full node array
    radial: bool = False                  # 1D radial reduction of a polar annulus
    warnings: list[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return self.domain.periodic[: self.dim]

    @property
    def free_shape(self) -> tuple[int, ...]:
        return tuple(len(f) for f in self.free_axes)

    @property
    def n_free(self) -> int:
        return int(np.prod(self.free_shape))

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.ones(self.counts, dtype=bool)
        mask[np.ix_(*self.free_axes)] = False
        return mask

    @property
    def free_axis_coords(self) -> tuple[np.ndarray, ...]:
        return tuple(a[f] for a, f in zip(self.axes, self.free_axes))

    @property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Flattened coordinates of the free nodes (C order, axis 0 slowest)."""
        mesh = np.meshgrid(*self.free_axis_coords, indexing="ij")
        return tuple(m.ravel() for m in mesh)

    @property
    def weights(self) -> np.ndarray:
        return self.weights_full[np.ix_(*self.free_axes)].ravel()

    def eval_coords(self) -> tuple[np.ndarray, ...]:
        """Coordinates at which scenario handles are evaluated (adds theta = 0 for radial grids)."""
        if self.radial:
            r = self.coords[0]
            return (r, np.zeros_like(r))
        return self.coords

    def sample(self, f: Callable) -> np.ndarray:
        return np.asarray(f(*self.eval_coords()), dtype=float)

    def extend(self, u: np.ndarray) -> np.ndarray:
        """Free-node vector to full node array (zeros on Dirichlet nodes)."""
        full = np.zeros(self.counts)
        full[np.ix_(*self.free_axes)] = np.asarray(u).reshape(self.free_shape)
        return full

    def distance_to(self, point) -> np.ndarray:
        if self.radial:
            return np.abs(self.coords[0] - point[0])
        return self.domain.distance(self.coords, point)


def _axis_nodes(a: float, b: float, n: int, periodic: bool):
    if periodic:
        h = (b - a) / n
        x = a + h * np.arange(n)
        w = np.full(n, h)
        free = np.arange(n)
    else:
        h = (b - a) / (n - 1)
        x = np.linspace(a, b, n)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        free = np.arange(1, n - 1)
    return x, h, w, free


def build_grid(domain: DomainSpec, resolution, eps: float | None = None,
               case: str = "potential", radial: bool = False) -> Grid:
    """Uniform grid with node counts per axis, boundary nodes included.

    With `eps` given, the layer rule h <= eps^(1/4)/8 (potential) or
    h <= eps^(1/2)/8 (gradient) is checked and a warning attached if violated.
    `radial=True` on an annulus builds the 1D radial grid of the reduced problem.
    """
    counts = (int(resolution),) if np.isscalar(resolution) else tuple(int(n) for n in resolution)
    ndim = 1 if radial else domain.dim
    if radial and domain.kind != "annulus-polar":
        raise ScenarioError("radial grids are defined for annulus-polar domains only")
    if len(counts) != ndim:
        raise ValueError(f"need {ndim} node counts, got {len(counts)}")
    for i, n in enumerate(counts):
        if n < MIN_COUNT:
            raise ValueError(f"at least {MIN_COUNT} nodes per axis required, axis {i} has {n}")
    axes, hs, ws, frees = [], [], [], []
    for (a, b), per, n in zip(domain.bounds, domain.periodic, counts):
        x, h, w, free = _axis_nodes(a, b, n, per)
        axes.append(x), hs.append(h), ws.append(w), frees.append(free)
    weights = ws[0] if ndim == 1 else np.multiply.outer(ws[0], ws[1])
    if domain.kind == "annulus-polar":
        if radial:
            weights = weights * axes[0] * 2 * np.pi
        else:
            weights = weights * axes[0][:, None]
    grid = Grid(domain, counts, tuple(hs), tuple(axes), tuple(frees), weights, radial=radial)
    if eps is not None:
        scale = eps ** 0.5 if case == "gradient" else eps ** 0.25
        hmax = max(hs[: (1 if domain.kind == "annulus-polar" else ndim)])
        if hmax > scale / 8:
            msg = (f"grid spacing {hmax:.3g} exceeds layer width/8 = {scale / 8:.3g} "
                   f"for eps = {eps:g} ({case} case)")
            grid.warnings.append(msg)
            warnings.warn(msg, ResolutionWarning, stacklevel=2)
    return grid


# --------------------------------------------------------------------------
# assembly

@dataclass
class OperatorMatrix:
    matrix: sp.csr_matrix
    eps: float
    mode: str
    grid: Grid
    sign_convention: str = "negative-laplacian"
    peclet: float = 0.0
    scale: float = 1.0   # eigenvalues of `matrix` equal scale * lambda_eps
    gauge: bool = False

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, u):
        return self.matrix @ u

    def is_m_matrix(self, tol: float = 0.0) -> bool:
        """Off-diagonals <= 0 and weak row diagonal dominance."""
        A = self.matrix.tocoo()
        off = A.row != A.col
        if np.any(A.data[off] > tol):
            return False
        diag = self.matrix.diagonal()
        offsum = np.asarray(abs(self.matrix).sum(axis=1)).ravel() - np.abs(diag)
        return bool(np.all(diag - offsum >= -1e-12 * np.maximum(1.0, np.abs(diag))))


def _axis_ops(n_free: int, h: float, periodic: bool):
    """1D second difference, forward, backward and central differences on free nodes."""
    e = np.ones(n_free)
    S = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], format="lil")
    Dp = sp.diags([-e, e[:-1]], [0, 1], format="lil")
    Dm = sp.diags([e, -e[:-1]], [0, -1], format="lil")
    Dc = sp.diags([-e[:-1], e[:-1]], [-1, 1], format="lil")
    if periodic:
        S[0, n_free - 1] = 1.0
        S[n_free - 1, 0] = 1.0
        Dp[n_free - 1, 0] = 1.0
        Dm[0, n_free - 1] = -1.0
        Dc[0, n_free - 1] = -1.0
        Dc[n_free - 1, 0] = 1.0
    return (S.tocsr() / h ** 2, Dp.tocsr() / h, Dm.tocsr() / h, Dc.tocsr() / (2 * h))


def _lift(M, axis: int, shape):
    if len(shape) == 1:
        return M
    if axis == 0:
        return sp.kron(M, sp.identity(shape[1]), format="csr")
    return sp.kron(sp.identity(shape[0]), M, format="csr")


def _coefficients(spec_field: FieldSpec, domain: DomainSpec, grid: Grid, eps: float):
    """Per-axis diffusion a_k and transport beta_k at free nodes."""
    X = grid.eval_coords()
    n = grid.n_free
    b = spec_field.drift(grid.dim)
    bvals = [np.zeros(n) for _ in range(domain.dim)] if b is None else \
        [np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in b(*X)]
    if domain.kind == "annulus-polar":
        r = X[0]
        a = [np.full(n, eps)] + ([] if grid.radial else [eps / r ** 2])
        beta = [bvals[0] - eps / r] + ([] if grid.radial else [bvals[1] / r])
    else:
        a = [np.full(n, eps) for _ in range(grid.dim)]
        beta = list(bvals[: grid.dim])
    return a, beta


def assemble_operator(spec: ScenarioSpec, grid: Grid, eps: float, mode: str = "upwind",
                      c_override: Callable | float | None = None) -> OperatorMatrix:
    """Sparse free-node matrix of -eps lap + b . grad + c.

    `c_override` replaces the potential (e.g. 0.0 for pure-Laplacian tests).
    Central mode requires cell Peclet number max|beta| h / (2 a) < 1.
    """
    if mode not in MODES:
        raise ValueError(f"unknown assembly mode {mode!r}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    a, beta = _coefficients(spec.field, spec.domain, grid, eps)
    shape = grid.free_shape
    if c_override is None:
        cvals = grid.sample(spec.c)
    elif callable(c_override):
        cvals = grid.sample(c_override)
    else:
        cvals = np.full(grid.n_free, float(c_override))
    A = sp.diags(np.broadcast_to(cvals, (grid.n_free,)).astype(float), format="csr")
    pe_max = 0.0
    for k in range(grid.dim):
        S, Dp, Dm, Dc = (_lift(M, k, shape) for M in _axis_ops(shape[k], grid.spacing[k], grid.periodic[k]))
        pe = np.abs(beta[k]) * grid.spacing[k] / (2 * a[k])
        pe_max = max(pe_max, float(pe.max(initial=0.0)))
        A = A - sp.diags(a[k]) @ S
        up = sp.diags(np.maximum(beta[k], 0)) @ Dm + sp.diags(np.minimum(beta[k], 0)) @ Dp
        if mode == "upwind":
            A = A + up
        elif mode == "central":
            A = A + sp.diags(beta[k]) @ Dc
        else:
            use_c = pe < 1
            A = A + sp.diags(np.where(use_c, beta[k], 0.0)) @ Dc + sp.diags((~use_c).astype(float)) @ up
    if mode == "central" and pe_max >= 1:
        raise ValueError(f"central mode needs cell Peclet < 1, got {pe_max:.3g}; use upwind or hybrid")
    A = A.tocsr()
    A.eliminate_zeros()
    return OperatorMatrix(A, float(eps), mode, grid, peclet=pe_max)


# --------------------------------------------------------------------------
# gauge transform

@dataclass
class GaugeProblem:
    """Drift-free problem -eps^2 lap v + c_eps v = eps * lambda * v with v = u exp(-phi/(2 eps)).

    Substituting u = exp(phi/(2 eps)) v into -eps lap u + grad phi . grad u + c u
    gives c_eps = eps c - eps lap(phi)/2 + |grad phi|^2 / 4 (ordinary Laplacian).
    """

    source: ScenarioSpec
    eps: float
    c_eps: Callable
    phi: Callable

    @property
    def scenario(self) -> ScenarioSpec:
        """Equivalent problem -eps lap v + (c_eps/eps) v = lambda v."""
        eps, ce = self.eps, self.c_eps
        return ScenarioSpec(self.source.domain, lambda *x: ce(*x) / eps, FieldSpec("zero"),
                            list(self.source.critical_points), list(self.source.cycles),
                            name=f"{self.source.name}[gauge]", description=self.source.description,
                            metadata={"gauge_of": self.source.name, "eps": eps})

    def assemble(self, grid: Grid) -> OperatorMatrix:
        """Matrix of -eps^2 lap + c_eps; its eigenvalues are eps * lambda_eps."""
        op = assemble_operator(_drift_free(self.source), grid, self.eps ** 2, "central", c_override=self.c_eps)
        op.eps, op.scale, op.gauge = self.eps, self.eps, True
        return op

    def assemble_scaled(self, grid: Grid) -> OperatorMatrix:
        """Matrix of -eps lap + c_eps/eps, whose eigenvalues are lambda_eps directly."""
        op = assemble_operator(self.scenario, grid, self.eps, "central")
        op.gauge = True
        return op


def _drift_free(spec: ScenarioSpec) -> ScenarioSpec:
    return ScenarioSpec(spec.domain, spec.c, FieldSpec("zero"), name=spec.name)


def gauge_transform(spec: ScenarioSpec, eps: float) -> GaugeProblem:
    if spec.field.kind != "gradient-of-phi":
        raise ScenarioError("gauge_transform requires a gradient-of-phi field")
    if spec.domain.kind == "annulus-polar":
        raise ScenarioError("gauge_transform is implemented for Cartesian domains")
    phi, c, b = spec.field.phi, spec.c, spec.field.b

    def grad(*x):
        return b(*x) if b is not None else fd_gradient(phi, x)

    def c_eps(*x):
        g2 = sum(np.asarray(g, dtype=float) ** 2 for g in grad(*x))
        return eps * np.asarray(c(*x), dtype=float) - 0.5 * eps * fd_laplacian(phi, x) + 0.25 * g2

    return GaugeProblem(spec, float(eps), c_eps, phi)


# --------------------------------------------------------------------------
# measures

def weighted_measure(u: np.ndarray, weight_exponent, eps: float, grid: Grid) -> np.ndarray:
    """Normalized node masses proportional to exp(-w/eps) u^2 * quadrature weight.

    `weight_exponent` may be a handle, an array on free nodes, or None (w = 0).
    Computed in log space with max subtraction.
    """
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise ValueError("u is identically zero")
    if weight_exponent is None:
        w = 0.0
    elif callable(weight_exponent):
        w = grid.sample(weight_exponent)
    else:
        w = np.asarray(weight_exponent, dtype=float)
    with np.errstate(divide="ignore"):
        logm = 2 * np.log(np.abs(u)) - w / eps + np.log(grid.weights)
    top = np.max(logm)
    if not np.isfinite(top):
        raise FloatingPointError("weight collapsed; compute the weight in log space")
    m = np.exp(logm - top)
    total = m.sum()
    if not (total > 0 and np.isfinite(total)):
        raise FloatingPointError("weight collapsed; compute the weight in log space")
    return m / total


def dump_matrix(op: OperatorMatrix, path) -> Path:
    """Write the matrix as 'row col value' lines (0-based)."""
    path = Path(path)
    A = op.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {A.shape[0]} {A.shape[1]} {A.nnz} eps={op.eps:.17g} mode={op.mode} "
                 f"sign={op.sign_convention}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i} {j} {v:.17g}\n")
    return path
