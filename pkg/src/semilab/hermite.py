"""Harmonic-oscillator algebra for the blown-up operator -lap + sum_k lam_k y_k^2.

States are sparse dicts {multi-index: amplitude} in the orthonormal
eigenbasis |n>. With s_k = (2 sqrt(lam_k))^(-1/2) the coordinate acts as
y_k = s_k (a_k + a_k^dagger) and E_n - E_0 = 2 <n, sqrt(lam)>. Polynomial
perturbations map the ground state onto finitely many levels, so the
Rayleigh-Schrodinger sums below are exact once the level cutoff exceeds
the polynomial degree.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np
from numpy.polynomial import hermite as H

State = dict


def _apply_y(state: State, k: int, s: float, n_max: int) -> State:
    out: State = defaultdict(float)
    for idx, amp in state.items():
        n = idx[k]
        if n + 1 <= n_max:
            up = list(idx); up[k] = n + 1
            out[tuple(up)] += amp * s * math.sqrt(n + 1)
        if n > 0:
            dn = list(idx); dn[k] = n - 1
            out[tuple(dn)] += amp * s * math.sqrt(n)
    return dict(out)


def apply_monomial(state: State, axes, quad, n_max: int = 40) -> State:
    s = 1.0 / np.sqrt(2.0 * np.sqrt(np.asarray(quad, dtype=float)))
    for k in axes:
        state = _apply_y(state, k, float(s[k]), n_max)
    return state


def apply_tensor(state: State, tensor: np.ndarray, quad, n_max: int = 40) -> State:
    """Apply sum over all index tuples T_{i..} y_i ... to a state."""
    T = np.asarray(tensor, dtype=float)
    out: State = defaultdict(float)
    for idx in itertools.product(range(T.shape[0]), repeat=T.ndim):
        coef = T[idx]
        if coef == 0.0:
            continue
        for key, amp in apply_monomial(state, idx, quad, n_max).items():
            out[key] += coef * amp
    return {k: v for k, v in out.items() if v != 0.0}


def excitation(idx, quad) -> float:
    return 2.0 * float(np.dot(idx, np.sqrt(quad)))


def ground(m: int) -> State:
    return {(0,) * m: 1.0}


def rs_second_order(quad, cubic, quartic, n_max: int = 40) -> dict:
    """Second-order energy coefficient of -lap + lam y^2 + g T(y) + g^2 Q(y) at g = 0.

    Returns first-order quartic mean, cubic second-order sum and their total.
    The cutoff n_max bounds each level index; the cubic image of the ground
    state lives on levels <= 3.
    """
    quad = np.asarray(quad, dtype=float)
    m = quad.size
    g0 = ground(m)
    v4 = apply_tensor(g0, quartic, quad, n_max)
    first = float(v4.get((0,) * m, 0.0))
    v3 = apply_tensor(g0, cubic, quad, n_max)
    second = 0.0
    for idx, amp in v3.items():
        if any(idx):
            second += amp * amp / excitation(idx, quad)
    return {"quartic_mean": first, "cubic_sum": second, "theta": first - second,
            "levels": n_max, "max_level_used": max((max(k) for k in v3), default=0)}


# --------------------------------------------------------------------------
# Hermite functions

def phys_norm_ratio(idx) -> float:
    """||Phi_0|| / ||Phi_n|| for Phi_n = prod H_{n_j}(lam^(1/4) y) exp(-sqrt(lam) y^2/2)."""
    return float(np.prod([1.0 / math.sqrt(2.0 ** n * math.factorial(n)) for n in idx]))


def hermite_function(idx, y, quad) -> np.ndarray:
    """Phi_n(y): physicists' Hermite polynomials times the ground Gaussian (unnormalized).

    `y` is a tuple of coordinate arrays, one per axis.
    """
    out = 1.0
    for n, yk, lam in zip(idx, y, np.atleast_1d(quad)):
        xi = np.asarray(yk, dtype=float) * lam ** 0.25
        c = np.zeros(n + 1); c[n] = 1.0
        out = out * H.hermval(xi, c) * np.exp(-0.5 * xi * xi)
    return out


def hermite_eigenvalues(quad, k_max: int) -> np.ndarray:
    """Spectrum sum_n (2 k_n + 1) sqrt(lam_n) over multi-indices of total degree <= k_max."""
    sq = np.sqrt(np.asarray(quad, dtype=float))
    m = sq.size
    vals = [float(np.dot(2 * np.array(k) + 1, sq))
            for k in itertools.product(range(k_max + 1), repeat=m) if sum(k) <= k_max]
    return np.sort(np.array(vals))
