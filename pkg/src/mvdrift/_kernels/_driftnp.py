"""Pure-numpy drift kernels (fallback when the compiled extension is absent).

Each function returns the full interaction drift

    out_i = -(1/(2N)) * sum_j part'(x_i - x_j)

for the parametric part of the potential.  The naive kernels are the
O(N^2) pairwise reference; the fast kernel regroups the same sum through
power sums and angle-addition identities in O(N (J1^2 + J)).
"""

from __future__ import annotations

import math

import numpy as np

# Cap on elements of a pairwise chunk (rows x N); keeps peak memory ~64 MB.
_CHUNK_ELEMENTS = 1 << 23


def _row_chunks(n: int):
    rows = max(1, _CHUNK_ELEMENTS // max(n, 1))
    for start in range(0, n, rows):
        yield start, min(start + rows, n)


def parametric_drift_naive(x, a_poly, thetas, a_trig):
    """Pairwise O(N^2) evaluation of the polynomial + trigonometric drift."""
    x = np.asarray(x, dtype=float)
    a_poly = np.asarray(a_poly, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    a_trig = np.asarray(a_trig, dtype=float)
    n = x.size
    out = np.empty(n)
    for lo, hi in _row_chunks(n):
        d = x[lo:hi, None] - x[None, :]
        acc = np.zeros_like(d)
        d2 = d * d
        p = d.copy()  # d^(2k-1)
        for k in range(1, a_poly.size + 1):
            acc += (2 * k * a_poly[k - 1]) * p
            p = p * d2
        for t in range(thetas.size):
            acc += (-a_trig[t] * thetas[t]) * np.sin(thetas[t] * d)
        out[lo:hi] = acc.sum(axis=1)
    return out * (-0.5 / n)


def parametric_drift_fast(x, a_poly, thetas, a_trig):
    """O(N) regrouped evaluation, identical to the naive sum in exact arithmetic."""
    x = np.asarray(x, dtype=float)
    a_poly = np.asarray(a_poly, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    a_trig = np.asarray(a_trig, dtype=float)
    n = x.size
    j1 = a_poly.size
    out = np.zeros(n)
    if j1:
        deg = 2 * j1 - 1
        powers = np.empty((deg + 1, n))
        powers[0] = 1.0
        for m in range(1, deg + 1):
            powers[m] = powers[m - 1] * x
        s = powers.sum(axis=1)  # power sums S_m = sum_j x_j^m
        # sum_j (x_i - x_j)^(2k-1) = sum_r C(2k-1, r) (-1)^(2k-1-r) x_i^r S_(2k-1-r)
        gamma = np.zeros(deg + 1)
        for k in range(1, j1 + 1):
            c = 2 * k * a_poly[k - 1]
            for r in range(2 * k):
                sign = -1.0 if (2 * k - 1 - r) % 2 else 1.0
                gamma[r] += c * math.comb(2 * k - 1, r) * sign * s[2 * k - 1 - r]
        out += gamma @ powers
    for t in range(thetas.size):
        th = thetas[t]
        cos_tx = np.cos(th * x)
        sin_tx = np.sin(th * x)
        csum = cos_tx.sum()
        ssum = sin_tx.sum()
        # sum_j sin(th (x_i - x_j)) = sin(th x_i) csum - cos(th x_i) ssum
        out += (-a_trig[t] * th) * (sin_tx * csum - cos_tx * ssum)
    return out * (-0.5 / n)


def beta_drift_pairwise(x, deriv_fn):
    """Pairwise O(N^2) drift of a nonparametric part with derivative ``deriv_fn``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.empty(n)
    for lo, hi in _row_chunks(n):
        d = x[lo:hi, None] - x[None, :]
        out[lo:hi] = deriv_fn(d.ravel()).reshape(d.shape).sum(axis=1)
    return out * (-0.5 / n)
