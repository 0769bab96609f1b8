# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled drift kernels: the hot inner loops of the particle simulation.

Mirrors the numpy fallback in ``_driftnp``; both return

    out_i = -(1/(2N)) * sum_j part'(x_i - x_j).
"""

from libc.math cimport cos, sin

import math

import numpy as np

cdef double SERIES_CUTOFF = 0.25


cdef inline double _g1(double u) noexcept nogil:
    cdef double u2 = u * u
    return u * (-1.0 / 12 + u2 * (1.0 / 180 + u2 * (-1.0 / 6720
           + u2 * (1.0 / 453600 - u2 / 47900160))))


cdef inline double _beta1_prime(double d, double b) noexcept nogil:
    # derivative of (1 - cos(b d)) / d^2
    cdef double u = b * d
    if -SERIES_CUTOFF < u < SERIES_CUTOFF:
        return b * b * b * _g1(u)
    return (b * d * sin(u) + 2.0 * cos(u) - 2.0) / (d * d * d)


cdef inline double _beta2_prime(double d, int k) noexcept nogil:
    # derivative of (sin(d)/d)^(2k)
    cdef double s, s1, d2, acc
    cdef int i
    if -SERIES_CUTOFF < d < SERIES_CUTOFF:
        d2 = d * d
        s = 1.0 + d2 * (-1.0 / 6 + d2 * (1.0 / 120 + d2 * (-1.0 / 5040
            + d2 * (1.0 / 362880 - d2 / 39916800))))
        s1 = d * (-1.0 / 3 + d2 * (1.0 / 30 + d2 * (-1.0 / 840
             + d2 * (1.0 / 45360 - d2 / 3991680))))
    else:
        s = sin(d) / d
        s1 = cos(d) / d - sin(d) / (d * d)
    acc = 2.0 * k * s1
    for i in range(2 * k - 1):
        acc *= s
    return acc


def parametric_drift_naive(x, a_poly, thetas, a_trig):
    """Pairwise O(N^2) evaluation of the polynomial + trigonometric drift."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] ap = np.ascontiguousarray(a_poly, dtype=np.float64)
    cdef double[::1] th = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef double[::1] at = np.ascontiguousarray(a_trig, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], j1 = ap.shape[0], jt = th.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, jj, k, t
    cdef double xi, d, d2, p, acc, total, scale
    scale = -0.5 / n
    with nogil:
        for i in range(n):
            xi = xv[i]
            total = 0.0
            for jj in range(n):
                d = xi - xv[jj]
                d2 = d * d
                p = d
                acc = 0.0
                for k in range(j1):
                    acc += ap[k] * (2.0 * (k + 1)) * p
                    p *= d2
                for t in range(jt):
                    acc -= at[t] * th[t] * sin(th[t] * d)
                total += acc
            out[i] = total * scale
    return out_arr


def parametric_drift_fast(x, a_poly, thetas, a_trig):
    """O(N) regrouped evaluation, identical to the naive sum in exact arithmetic."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] ap = np.ascontiguousarray(a_poly, dtype=np.float64)
    cdef double[::1] th = np.ascontiguousarray(thetas, dtype=np.float64)
    cdef double[::1] at = np.ascontiguousarray(a_trig, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], j1 = ap.shape[0], jt = th.shape[0]
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, m, t, deg = 2 * j1 - 1 if j1 else 0
    cdef double xi, p, acc, scale, thv, csum, ssum, cx, sx
    cdef double[::1] gamma
    cdef double[::1] s
    scale = -0.5 / n

    if j1:
        # power sums S_m = sum_j x_j^m, m = 0..2 J1 - 1
        s_arr = np.zeros(deg + 1, dtype=np.float64)
        s = s_arr
        with nogil:
            for i in range(n):
                xi = xv[i]
                p = 1.0
                for m in range(deg + 1):
                    s[m] += p
                    p *= xi
        # sum_j (x_i - x_j)^(2k-1) = sum_r C(2k-1,r) (-1)^(2k-1-r) x_i^r S_(2k-1-r)
        g_arr = np.zeros(deg + 1, dtype=np.float64)
        for k in range(1, j1 + 1):
            c = 2 * k * float(ap[k - 1])
            for r in range(2 * k):
                sign = -1.0 if (2 * k - 1 - r) % 2 else 1.0
                g_arr[r] += c * math.comb(2 * k - 1, r) * sign * s_arr[2 * k - 1 - r]
        gamma = g_arr
        with nogil:
            for i in range(n):
                xi = xv[i]
                acc = gamma[deg]
                for m in range(deg - 1, -1, -1):
                    acc = acc * xi + gamma[m]
                out[i] = acc
    with nogil:
        for t in range(jt):
            thv = th[t]
            csum = 0.0
            ssum = 0.0
            for i in range(n):
                csum += cos(thv * xv[i])
                ssum += sin(thv * xv[i])
            for i in range(n):
                cx = cos(thv * xv[i])
                sx = sin(thv * xv[i])
                # sum_j sin(th (x_i - x_j)) = sin(th x_i) csum - cos(th x_i) ssum
                out[i] += (-at[t] * thv) * (sx * csum - cx * ssum)
    with nogil:
        for i in range(n):
            out[i] *= scale
    return out_arr


def beta_drift_pairwise_analytic(x, int family, double b, int k):
    """Pairwise O(N^2) drift of an analytic beta family (1: cos-bump, 2: sinc-power)."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, jj
    cdef double xi, d, total, scale
    scale = -0.5 / n
    if family not in (1, 2):
        raise ValueError("family must be 1 (cos-bump) or 2 (sinc-power)")
    with nogil:
        for i in range(n):
            xi = xv[i]
            total = 0.0
            if family == 1:
                for jj in range(n):
                    total += _beta1_prime(xi - xv[jj], b)
            else:
                for jj in range(n):
                    total += _beta2_prime(xi - xv[jj], k)
            out[i] = total * scale
    return out_arr
