# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the bootstrap hot loops.

Mirrors ``_kernels_py.py``; see that module for the contract. The
fixed-point grid objective runs once per bootstrap replicate and dominates
study runtime, so it gets a tight C loop here.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p, M_PI

cnp.import_array()

cdef double RESP_CLIP = 1e-12


def fixed_point_curve(odds_in, t_in):
    """Mean Bayes-corrected probability at each candidate odds factor."""
    cdef const double[::1] odds = np.ascontiguousarray(odds_in, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(t_in, dtype=np.float64)
    cdef Py_ssize_t n = odds.shape[0]
    cdef Py_ssize_t g = t.shape[0]
    out = np.empty(g, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, n4 = n - (n & 3)
    cdef double tj, s0, s1, s2, s3
    for j in range(g):
        tj = t[j]
        s0 = s1 = s2 = s3 = 0.0
        # four accumulators keep the divide pipeline busy without
        # changing results run to run
        for i in range(0, n4, 4):
            s0 += odds[i] / (odds[i] + tj)
            s1 += odds[i + 1] / (odds[i + 1] + tj)
            s2 += odds[i + 2] / (odds[i + 2] + tj)
            s3 += odds[i + 3] / (odds[i + 3] + tj)
        for i in range(n4, n):
            s0 += odds[i] / (odds[i] + tj)
        ov[j] = (s0 + s1 + s2 + s3) / n
    return out


def weighted_group_moments(x_in, w_in, gidx_in, Py_ssize_t n_groups):
    """Per-group weighted sums (sum w, sum w*x, sum w*x^2)."""
    cdef const double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef const long long[::1] gidx = np.ascontiguousarray(gidx_in, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0]
    sw_a = np.zeros(n_groups, dtype=np.float64)
    swx_a = np.zeros(n_groups, dtype=np.float64)
    swxx_a = np.zeros(n_groups, dtype=np.float64)
    cdef double[::1] sw = sw_a
    cdef double[::1] swx = swx_a
    cdef double[::1] swxx = swxx_a
    cdef Py_ssize_t i
    cdef long long gi
    cdef double wi, wx
    for i in range(n):
        gi = gidx[i]
        wi = w[i]
        wx = wi * x[i]
        sw[gi] += wi
        swx[gi] += wx
        swxx[gi] += wx * x[i]
    return sw_a, swx_a, swxx_a


def em_accumulate(x_in, mu1_in, mu0_in, double var1, double var0,
                  lm1_in, lm0_in, gidx_in, Py_ssize_t n_groups):
    """One fused E-step pass for the two-component hierarchical mixture."""
    cdef const double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef const double[::1] mu1 = np.ascontiguousarray(mu1_in, dtype=np.float64)
    cdef const double[::1] mu0 = np.ascontiguousarray(mu0_in, dtype=np.float64)
    cdef const double[::1] lm1 = np.ascontiguousarray(lm1_in, dtype=np.float64)
    cdef const double[::1] lm0 = np.ascontiguousarray(lm0_in, dtype=np.float64)
    cdef const long long[::1] gidx = np.ascontiguousarray(gidx_in, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0]

    resp_a = np.empty(n, dtype=np.float64)
    sw1_a = np.zeros(n_groups, dtype=np.float64)
    swx1_a = np.zeros(n_groups, dtype=np.float64)
    swxx1_a = np.zeros(n_groups, dtype=np.float64)
    sw0_a = np.zeros(n_groups, dtype=np.float64)
    swx0_a = np.zeros(n_groups, dtype=np.float64)
    swxx0_a = np.zeros(n_groups, dtype=np.float64)
    cdef double[::1] resp = resp_a
    cdef double[::1] sw1 = sw1_a
    cdef double[::1] swx1 = swx1_a
    cdef double[::1] swxx1 = swxx1_a
    cdef double[::1] sw0 = sw0_a
    cdef double[::1] swx0 = swx0_a
    cdef double[::1] swxx0 = swxx0_a

    cdef double c1 = -0.5 * log(2.0 * M_PI * var1)
    cdef double c0 = -0.5 * log(2.0 * M_PI * var0)
    cdef double h1 = 1.0 / (2.0 * var1)
    cdef double h0 = 1.0 / (2.0 * var0)
    cdef double loglik = 0.0
    cdef double u, v, d1, d0, e, r, r0, t1, t0, xi
    cdef Py_ssize_t i
    cdef long long gi
    for i in range(n):
        xi = x[i]
        d1 = xi - mu1[i]
        d0 = xi - mu0[i]
        u = lm1[i] + c1 - d1 * d1 * h1
        v = lm0[i] + c0 - d0 * d0 * h0
        if u >= v:
            e = exp(v - u)
            loglik += u + log1p(e)
            r = 1.0 / (1.0 + e)
        else:
            e = exp(u - v)
            loglik += v + log1p(e)
            r = e / (1.0 + e)
        if r < RESP_CLIP:
            r = RESP_CLIP
        elif r > 1.0 - RESP_CLIP:
            r = 1.0 - RESP_CLIP
        resp[i] = r
        r0 = 1.0 - r
        gi = gidx[i]
        t1 = r * xi
        sw1[gi] += r
        swx1[gi] += t1
        swxx1[gi] += t1 * xi
        t0 = r0 * xi
        sw0[gi] += r0
        swx0[gi] += t0
        swxx0[gi] += t0 * xi
    return resp_a, loglik, sw1_a, swx1_a, swxx1_a, sw0_a, swx0_a, swxx0_a
