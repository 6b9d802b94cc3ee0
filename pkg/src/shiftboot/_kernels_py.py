"""Pure-numpy implementations of the hot numerical kernels.

Semantically mirrors the compiled extension in ``_kernels.pyx``; the
``shiftboot.kernels`` facade picks one of the two at import time. Keep the
two files in sync: same signatures, same clipping constants, same outputs
up to floating-point summation order.
"""

import numpy as np

RESP_CLIP = 1e-12


def fixed_point_curve(odds, t):
    """Mean Bayes-corrected probability at each candidate odds factor.

    Parameters
    ----------
    odds : (n,) float64
        Raw prediction odds a/(1-a) for the records being averaged.
    t : (g,) float64
        Candidate odds correction factors, one per grid point.

    Returns
    -------
    (g,) float64
        mean_i odds_i / (odds_i + t_j) for each grid point j.
    """
    odds = np.ascontiguousarray(odds, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    n = odds.shape[0]
    out = np.empty(t.shape[0])
    # chunk the grid so the broadcast buffer stays small
    step = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, t.shape[0], step):
        hi = min(lo + step, t.shape[0])
        out[lo:hi] = (odds / (odds + t[lo:hi, None])).mean(axis=1)
    return out


def weighted_group_moments(x, w, gidx, n_groups):
    """Per-group weighted sums (sum w, sum w*x, sum w*x^2).

    gidx holds int group codes in [0, n_groups).
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    gidx = np.asarray(gidx)
    wx = w * x
    sw = np.bincount(gidx, weights=w, minlength=n_groups)
    swx = np.bincount(gidx, weights=wx, minlength=n_groups)
    swxx = np.bincount(gidx, weights=wx * x, minlength=n_groups)
    return sw, swx, swxx


def em_accumulate(x, mu1, mu0, var1, var0, log_mix1, log_mix0, gidx, n_groups):
    """One fused E-step pass for the two-component hierarchical mixture.

    Computes class-1 responsibilities (clipped to [1e-12, 1-1e-12]), the
    observed-data log-likelihood, and the per-group weighted moments of x
    under each class's responsibilities.

    Parameters
    ----------
    x, mu1, mu0 : (n,) float64
        Observations and per-record component means (fixed effect plus
        group intercept, already gathered per record).
    var1, var0 : positive floats
        Component variances.
    log_mix1, log_mix0 : (n,) float64
        Per-record log mixing proportions log(pi) and log(1-pi).
    gidx : (n,) int
        Group codes in [0, n_groups).

    Returns
    -------
    (resp, loglik, sw1, swx1, swxx1, sw0, swx0, swxx0)
    """
    x = np.asarray(x, dtype=np.float64)
    d1 = x - mu1
    d0 = x - mu0
    u = log_mix1 - 0.5 * np.log(2.0 * np.pi * var1) - d1 * d1 / (2.0 * var1)
    v = log_mix0 - 0.5 * np.log(2.0 * np.pi * var0) - d0 * d0 / (2.0 * var0)
    lse = np.logaddexp(u, v)
    loglik = float(lse.sum())
    resp = np.exp(u - lse)
    np.clip(resp, RESP_CLIP, 1.0 - RESP_CLIP, out=resp)
    sw1, swx1, swxx1 = weighted_group_moments(x, resp, gidx, n_groups)
    sw0, swx0, swxx0 = weighted_group_moments(x, 1.0 - resp, gidx, n_groups)
    return resp, loglik, sw1, swx1, swxx1, sw0, swx0, swxx0
