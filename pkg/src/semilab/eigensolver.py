"""Principal eigenpair by shift-invert power iteration.

For an inverse-positive matrix (upwind M-matrix) or a symmetric positive
definite one, the dominant eigenvector of A^-1 is the Perron vector and
plain power iteration on A^-1 converges to it from any positive start.
"""
from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import Grid, OperatorMatrix, assemble_operator, build_grid, gauge_transform
from .scenario import ScenarioSpec

DIRECT_LIMIT = 150_000   # free nodes above which the inner solve switches to ILU + GMRES
POSITIVITY_TOL = 1e-10   # relative size of tolerated negative roundoff
WORKERS_ENV = "SEMILAB_WORKERS"


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=float("nan"), iterations=0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class PositivityError(RuntimeError):
    pass


@dataclass
class EigenPair:
    lam: float
    u: np.ndarray            # free-node values, quadrature-normalized
    residual: float
    iterations: int
    grid: Grid
    eps: float
    gauge: bool = False      # True when u is the gauge-transformed v = u exp(-phi/(2 eps))
    min_relative: float = 0.0
    seconds: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.grid.weights * self.u ** 2)))

    def full(self) -> np.ndarray:
        return self.grid.extend(self.u)


def _inner_solver(M: sp.csr_matrix):
    n = M.shape[0]
    if n <= DIRECT_LIMIT:
        lu = spla.splu(M.tocsc(), permc_spec="NATURAL" if _banded(M) else "COLAMD")
        return lu.solve
    ilu = spla.spilu(M.tocsc(), drop_tol=1e-6, fill_factor=20)
    prec = spla.LinearOperator(M.shape, ilu.solve)

    def solve(b):
        x, info = spla.gmres(M, b, M=prec, rtol=1e-14, atol=0.0, restart=60, maxiter=500)
        if info != 0:
            raise ConvergenceError(f"inner GMRES failed (info={info})")
        return x
    return solve


def _banded(M) -> bool:
    A = M.tocoo()
    return bool(np.max(np.abs(A.row - A.col), initial=0) <= 1)


def principal_eigenpair(A: OperatorMatrix, grid: Grid | None = None, tol: float = 1e-10,
                        max_iter: int = 20000, v0: np.ndarray | None = None,
                        shift: float = 0.0) -> EigenPair:
    """Smallest-real eigenvalue and its positive eigenvector.

    Stops when both the relative eigenvalue change and the residual
    ||Au - lam u||_2 / ||u||_2 drop below `tol`. The returned eigenvalue is
    divided by `A.scale` so gauge matrices report lambda_eps.
    """
    t0 = time.perf_counter()
    grid = grid if grid is not None else A.grid
    M = A.matrix
    n = M.shape[0]
    shifted = M - shift * sp.identity(n, format="csr") if shift else M
    solve = _inner_solver(shifted)
    x = np.ones(n) if v0 is None else np.array(v0, dtype=float)
    if x.shape != (n,):
        raise ValueError("start vector has wrong size")
    x /= np.linalg.norm(x)
    lam_old = np.inf
    res = np.inf
    for it in range(1, max_iter + 1):
        y = solve(x)
        x = y / np.linalg.norm(y)
        Ax = M @ x
        lam = float(x @ Ax)
        res = float(np.linalg.norm(Ax - lam * x))
        dlam = abs(lam - lam_old) / max(abs(lam), 1e-300)
        lam_old = lam
        if dlam < tol and res < tol:
            break
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (residual {res:.3g})",
                               residual=res, iterations=max_iter)
    if x.sum() < 0:
        x = -x
    top = np.max(np.abs(x))
    min_rel = float(x.min() / top)
    if min_rel < -POSITIVITY_TOL:
        raise PositivityError(f"positivity violated: min u / max u = {min_rel:.3g}; "
                              "the discretization is too coarse")
    x = np.maximum(x, 0.0)
    x /= np.sqrt(np.sum(grid.weights * x * x))
    return EigenPair(lam / A.scale, x, res, it, grid, A.eps, gauge=A.gauge, min_relative=min_rel,
                     seconds=time.perf_counter() - t0)


# --------------------------------------------------------------------------
# sweeps

@dataclass
class SweepPoint:
    eps: float
    pair: EigenPair | None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.pair is not None


@dataclass
class SweepResult:
    scenario: str
    route: str
    mode: str
    points: list[SweepPoint] = field(default_factory=list)

    def converged(self) -> list[SweepPoint]:
        return [p for p in self.points if p.ok]

    @property
    def eps(self) -> np.ndarray:
        return np.array([p.eps for p in self.converged()])

    @property
    def lam(self) -> np.ndarray:
        return np.array([p.pair.lam for p in self.converged()])

    @property
    def pairs(self) -> list[EigenPair]:
        return [p.pair for p in self.converged()]

    @property
    def total_iterations(self) -> int:
        return sum(p.pair.iterations for p in self.converged())


def default_route(spec: ScenarioSpec) -> str:
    return "gauge" if spec.field.kind == "gradient-of-phi" else "direct"


def operator_for(spec: ScenarioSpec, grid: Grid, eps: float, mode: str = "upwind",
                 route: str = "direct") -> OperatorMatrix:
    if route == "gauge":
        return gauge_transform(spec, eps).assemble_scaled(grid)
    return assemble_operator(spec, grid, eps, mode)


def solve(spec: ScenarioSpec, eps: float, resolution, mode: str = "upwind", route: str | None = None,
          tol: float = 1e-10, max_iter: int = 20000) -> EigenPair:
    route = route or default_route(spec)
    grid = build_grid(spec.domain, resolution, eps=eps, case=spec.case if spec.case != "general" else "potential")
    return principal_eigenpair(operator_for(spec, grid, eps, mode, route), grid, tol, max_iter)


def _resolve_grid(spec, policy, eps) -> Grid:
    if isinstance(policy, Grid):
        return policy
    counts = policy(eps) if callable(policy) else policy
    case = spec.case if spec.case != "general" else "potential"
    return build_grid(spec.domain, counts, eps=eps, case=case)


def _transfer(prev: EigenPair, grid: Grid) -> np.ndarray:
    """Warm start on a possibly different grid by linear interpolation."""
    if prev.grid.counts == grid.counts and prev.grid.free_shape == grid.free_shape:
        return prev.u.copy()
    from scipy.interpolate import RegularGridInterpolator
    f = RegularGridInterpolator(prev.grid.axes, prev.full(), bounds_error=False, fill_value=0.0)
    v = f(np.column_stack(grid.coords))
    return np.maximum(v, 1e-300) if np.any(v > 0) else np.ones(grid.n_free)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def sweep(spec: ScenarioSpec, grid_policy, eps_list: Sequence[float], mode: str = "upwind",
          route: str | None = None, warm: bool = True, tol: float = 1e-10, max_iter: int = 20000,
          workers: int | None = None) -> SweepResult:
    """Principal eigenpairs along a decreasing eps list.

    `grid_policy` is a Grid, fixed node counts, or a callable eps -> counts.
    With `warm=True` each solve starts from the previous eigenvector and the
    sweep runs sequentially; cold sweeps may run on several threads.
    Failures are recorded per point and do not abort the sweep.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    route = route or default_route(spec)
    result = SweepResult(spec.name, route, mode)

    def one(eps, v0=None):
        try:
            grid = _resolve_grid(spec, grid_policy, eps)
            op = operator_for(spec, grid, eps, mode, route)
            start = None if v0 is None else _transfer(v0, grid)
            return SweepPoint(eps, principal_eigenpair(op, grid, tol, max_iter, v0=start))
        except (ConvergenceError, PositivityError, ValueError, FloatingPointError) as exc:
            return SweepPoint(eps, None, f"{type(exc).__name__}: {exc}")

    workers = worker_count() if workers is None else workers
    if warm:
        prev = None
        for eps in eps_list:
            pt = one(eps, prev)
            result.points.append(pt)
            if pt.ok:
                prev = pt.pair
    elif workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            result.points.extend(ex.map(one, eps_list))
    else:
        result.points.extend(one(e) for e in eps_list)
    return result


# --------------------------------------------------------------------------
# output

def write_eigenpair_csv(pair: EigenPair, path) -> Path:
    path = Path(path)
    names = list(pair.grid.domain.variables[: pair.grid.dim])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["u"])
        for row in zip(*pair.grid.coords, pair.u):
            w.writerow([f"{v:.12g}" for v in row])
    return path


def write_sweep_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "lambda", "residual", "iterations", "error"])
        for p in result.points:
            if p.ok:
                w.writerow([f"{p.eps:.12g}", f"{p.pair.lam:.15g}", f"{p.pair.residual:.3e}",
                            p.pair.iterations, ""])
            else:
                w.writerow([f"{p.eps:.12g}", "", "", "", p.error])
    return path
