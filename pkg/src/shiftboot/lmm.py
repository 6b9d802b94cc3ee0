"""Probability-weighted random-intercept Gaussian model for
class-conditional means, plus weighted and threshold mean baselines.

Model per class: x_i ~ N(beta_{c_i} + b_{k_i}, sigma^2 / w_i) with
b_k ~ N(0, omega^2), groups nested within conditions. Weights are class
membership probabilities, so each class is fitted from all records with
its own weight vector.

Estimation profiles beta and sigma^2 out analytically, leaving a 1-d
search over the variance ratio gamma = omega^2 / sigma^2; the criterion
equals the full marginal ML criterion at the optimum. Group-level
sufficient statistics make each objective evaluation O(#groups).
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from .exceptions import DataError, FitError
from .kernels import weighted_group_moments

WEIGHT_FLOOR = 1e-8
SIGMA2_FLOOR = 1e-10

_LOG_GAMMA_LO = -18.5
_LOG_GAMMA_HI = 18.5
_COARSE_POINTS = 49
_REFINE_ROUNDS = 6
_REFINE_POINTS = 5  # each side of the incumbent


@dataclasses.dataclass
class MixedEffectsFit:
    """Weighted mixed-model estimates for both classes.

    beta maps (condition, class) to the fixed effect; sigma2 maps class to
    the residual variance. In shared mode omega2 is a float and b_hat maps
    group to its intercept; in label-dependent mode omega2 maps class to a
    variance, b_hat maps (group, class), and residuals is a dict per class.
    Residuals keep the fixed effect: e_i = x_i - b_hat[k_i].
    """

    beta: dict
    sigma2: dict
    omega2: object
    b_hat: dict
    residuals: object
    loglik: float
    label_dependent: bool
    meta: dict = dataclasses.field(default_factory=dict)


def _group_stats(x, w, cond_codes, group_codes, n_cond, n_groups):
    """Per-group weighted moments and bookkeeping after weight flooring."""
    w = np.where(w >= WEIGHT_FLOOR, w, 0.0)
    sw, swx, swxx = weighted_group_moments(x, w, group_codes, n_groups)
    n_inc = int(np.count_nonzero(w))
    return w, sw, swx, swxx, n_inc


def _beta_given_gamma(sw, swx, gcond, n_cond, gamma):
    shrink = 1.0 / (1.0 + gamma * sw)
    num = np.bincount(gcond, weights=swx * shrink, minlength=n_cond)
    den = np.bincount(gcond, weights=sw * shrink, minlength=n_cond)
    with np.errstate(invalid="ignore", divide="ignore"):
        return num / den


def _profile_objective(gamma, sw, swx, swxx, gcond, n_cond, n_inc):
    """Profiled -2 log-likelihood up to constants: n*log(Q) + sum log(1+gamma*s)."""
    beta = _beta_given_gamma(sw, swx, gcond, n_cond, gamma)
    bg = beta[gcond]
    resid_lin = swx - bg * sw
    q = float(np.sum(swxx - 2.0 * bg * swx + bg * bg * sw
                     - gamma * resid_lin * resid_lin / (1.0 + gamma * sw)))
    q = max(q, n_inc * SIGMA2_FLOOR)
    return n_inc * math.log(q) + float(np.sum(np.log1p(gamma * sw))), q, beta


def _profile_fit(x, w, cond_codes, group_codes, n_cond, n_groups, gcond):
    """Fit one class. Returns (beta, sigma2, omega2, b, loglik, included_mask, trace).

    beta is per-condition, b per-group. trace is the best-so-far profiled
    criterion across optimizer evaluations (non-increasing).
    """
    w, sw, swx, swxx, n_inc = _group_stats(x, w, cond_codes, group_codes, n_cond, n_groups)
    if n_inc == 0:
        raise DataError("all-zero weights: nothing to fit for this class")
    cond_w = np.bincount(cond_codes, weights=w, minlength=n_cond)
    if np.any(cond_w <= 0.0):
        bad = int(np.argmin(cond_w))
        raise FitError(f"condition index {bad} has zero effective weight for this class")

    eff_groups = int(np.count_nonzero(sw > 0.0))
    single_group = eff_groups < 2
    if single_group:
        warnings.warn(
            "random-intercept variance is unidentifiable with fewer than "
            "2 effective groups; fixing it at 0",
            stacklevel=3,
        )

    trace = []
    best = (np.inf, 0.0, None, None)  # criterion, gamma, q, beta
    # evaluate gamma = 0 (no random effect) and a log-spaced coarse grid,
    # then shrink the bracket around the incumbent a few times
    candidates = [0.0]
    if not single_group:
        candidates += list(np.exp(np.linspace(_LOG_GAMMA_LO, _LOG_GAMMA_HI, _COARSE_POINTS)))
    for g in candidates:
        crit, q, beta = _profile_objective(g, sw, swx, swxx, gcond, n_cond, n_inc)
        if crit < best[0]:
            best = (crit, g, q, beta)
        trace.append(best[0])
    if not single_group:
        step = (_LOG_GAMMA_HI - _LOG_GAMMA_LO) / (_COARSE_POINTS - 1)
        for _ in range(_REFINE_ROUNDS):
            center = best[1]
            if center == 0.0:
                break
            step /= _REFINE_POINTS
            lc = math.log(center)
            for i in range(-_REFINE_POINTS, _REFINE_POINTS + 1):
                if i == 0:
                    continue
                g = math.exp(lc + i * step)
                crit, q, beta = _profile_objective(g, sw, swx, swxx, gcond, n_cond, n_inc)
                if crit < best[0]:
                    best = (crit, g, q, beta)
                trace.append(best[0])

    crit, gamma, q, beta = best
    if beta is None or not np.all(np.isfinite(beta[np.unique(gcond)])):
        raise FitError("variance-profile optimizer failed: non-finite fixed effects")
    sigma2 = max(q / n_inc, SIGMA2_FLOOR)
    omega2 = gamma * sigma2
    bg = beta[gcond]
    b = gamma * (swx - bg * sw) / (1.0 + gamma * sw)

    included = w > 0.0
    logw = np.log(w[included]).sum()
    loglik = -0.5 * (n_inc * math.log(2.0 * math.pi * sigma2) - logw
                     + float(np.sum(np.log1p(gamma * sw))) + q / sigma2)
    return beta, sigma2, omega2, b, loglik, included, trace


def fit_weighted_lmm(data, weights, label_dependent=False):
    """Fit the weighted random-intercept model for both classes.

    weights holds the class-1 membership probability per record; class 0
    is fitted with the complement. Records with class weight below 1e-8
    are excluded from that class's fit; if that empties class 0 entirely
    (all weights 1) the complement fit is skipped in shared mode and its
    entries are absent. In shared mode the random-effect variance and
    intercepts come from the class-1 fit and residuals are
    e_i = x_i - b_hat[k_i]; in label-dependent mode each class keeps its
    own variance, intercepts, and residual vector.
    """
    if data.x is None or not np.all(np.isfinite(data.x)):
        raise DataError("fit_weighted_lmm needs a finite x for every record")
    w1 = np.asarray(weights, dtype=np.float64).ravel()
    if w1.shape[0] != len(data):
        raise DataError("weights must have one entry per record")
    if np.any(~np.isfinite(w1)) or w1.min() < 0.0 or w1.max() > 1.0:
        raise DataError("weights must lie in [0, 1]")

    x = np.asarray(data.x, dtype=np.float64)
    cc = data.cond_codes
    gc = data.group_codes
    n_cond = len(data.conditions)
    n_groups = len(data.groups)
    gcond = data.group_condition_codes

    b1_res = _profile_fit(x, w1, cc, gc, n_cond, n_groups, gcond)
    beta1, sig1, om1, b1, ll1, _, tr1 = b1_res

    # the complement class is informational in shared mode; with every
    # class-0 weight under the floor (weights all 1) it is skipped rather
    # than failing the whole fit. Label-dependent mode needs both classes.
    w0 = 1.0 - w1
    have_class0 = bool(np.any(w0 >= WEIGHT_FLOOR))
    if label_dependent and not have_class0:
        raise DataError("label-dependent fit needs class-0 weight somewhere")
    if have_class0:
        beta0, sig0, om0, b0, ll0, _, tr0 = _profile_fit(
            x, w0, cc, gc, n_cond, n_groups, gcond)
    else:
        beta0 = sig0 = om0 = b0 = None
        ll0 = 0.0
        tr0 = []

    beta = {}
    for ci, cname in enumerate(data.conditions):
        beta[(cname, 1)] = float(beta1[ci])
        if have_class0:
            beta[(cname, 0)] = float(beta0[ci])
    sigma2 = {1: float(sig1)}
    if have_class0:
        sigma2[0] = float(sig0)

    if label_dependent:
        omega2 = {1: float(om1), 0: float(om0)}
        b_hat = {}
        for gi, gname in enumerate(data.groups):
            b_hat[(gname, 1)] = float(b1[gi])
            b_hat[(gname, 0)] = float(b0[gi])
        residuals = {1: x - b1[gc], 0: x - b0[gc]}
    else:
        omega2 = float(om1)
        b_hat = {gname: float(b1[gi]) for gi, gname in enumerate(data.groups)}
        residuals = x - b1[gc]

    return MixedEffectsFit(
        beta=beta,
        sigma2=sigma2,
        omega2=omega2,
        b_hat=b_hat,
        residuals=residuals,
        loglik=float(ll1 + ll0),
        label_dependent=label_dependent,
        meta={
            "criterion_trace": {1: tr1, 0: tr0},
            "n_records": len(data),
            "skipped_class": None if have_class0 else 0,
        },
    )


def weighted_class_mean(x, weights):
    """Weighted mean sum(w*x)/sum(w)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if x.shape[0] != w.shape[0]:
        raise DataError("x and weights must have equal length")
    total = w.sum()
    if total <= 0.0:
        raise DataError("zero total weight")
    return float((w * x).sum() / total)


def threshold_class_mean(x, probs, h=0.5):
    """Mean of x over records whose probability exceeds the threshold."""
    x = np.asarray(x, dtype=np.float64).ravel()
    p = np.asarray(probs, dtype=np.float64).ravel()
    if x.shape[0] != p.shape[0]:
        raise DataError("x and probs must have equal length")
    mask = p > h
    if not mask.any():
        raise DataError(f"no record exceeds threshold {h}")
    return float(x[mask].mean())
