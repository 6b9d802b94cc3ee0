"""Two-component hierarchical Gaussian mixture with fixed mixing
proportions and per-class random intercepts, fitted by penalized EM.

The mixing proportions come from outside (a label-shift estimate) and are
never updated. Group intercepts b_{k,y} enter as penalized parameters
with Gaussian penalty b^2/(2*omega_y^2); the penalized observed-data
log-likelihood is non-decreasing across iterations and is asserted so.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pandas as pd

from .exceptions import DataError, FitError
from .kernels import em_accumulate

SIGMA2_FLOOR = 1e-10
EFF_GROUP_WEIGHT = 1e-8
OMEGA2_ZERO_TOL = 1e-8
MAX_EM_ITER = 500
EM_TOL = 1e-8
DEFAULT_RESTARTS = 3

_LOG_2PI = math.log(2.0 * math.pi)


@dataclasses.dataclass
class MixtureFit:
    """Fitted mixture: per-condition class means, per-class variances,
    per-(group, class) intercepts, and per-record class-1 responsibilities."""

    beta: dict
    sigma2: dict
    omega2: dict
    b_hat: dict
    responsibilities: np.ndarray
    loglik: float
    meta: dict = dataclasses.field(default_factory=dict)


def _mixing_per_record(data, mixing):
    """Broadcast a mixing map keyed by group (preferred when complete) or
    by condition onto records."""
    keys = {str(k) for k in mixing}
    if set(data.groups) <= keys:
        values = {str(k): float(v) for k, v in mixing.items()}
        pi = np.fromiter((values[k] for k in data.k), dtype=np.float64, count=len(data))
        keyed = "group"
    elif set(data.conditions) <= keys:
        values = {str(k): float(v) for k, v in mixing.items()}
        pi = np.fromiter((values[c] for c in data.c), dtype=np.float64, count=len(data))
        keyed = "condition"
    else:
        raise DataError("mixing map must cover every condition (or every group)")
    if np.any(pi <= 0.0) or np.any(pi >= 1.0):
        raise DataError("mixing proportions must lie strictly in (0, 1)")
    return pi, keyed


def _penalty(b, omega2, n_groups):
    """Gaussian penalty for one class; zero when the variance is pinned at 0."""
    if omega2 <= 0.0:
        return 0.0
    return float(np.sum(b * b) / (2.0 * omega2) + 0.5 * n_groups * (_LOG_2PI + math.log(omega2)))


def _m_step_class(sw, swx, swxx, gcond, n_cond, sigma2, omega2, n_groups,
                  zero_tol=OMEGA2_ZERO_TOL):
    """Closed-form update of (beta, b, sigma2, omega2) for one class given
    its responsibility-weighted group moments."""
    total = float(sw.sum())
    if omega2 > 0.0:
        lam = sigma2 / omega2
        denom = sw + lam
        num = np.bincount(gcond, weights=swx / denom, minlength=n_cond)
        den = np.bincount(gcond, weights=sw / denom, minlength=n_cond)
    else:
        num = np.bincount(gcond, weights=swx, minlength=n_cond)
        den = np.bincount(gcond, weights=sw, minlength=n_cond)
    with np.errstate(invalid="ignore", divide="ignore"):
        beta = num / den
    beta = np.where(np.isfinite(beta), beta, 0.0)
    if omega2 > 0.0:
        b = (swx - sw * beta[gcond]) / (sw + sigma2 / omega2)
    else:
        b = np.zeros(n_groups)

    mu = beta[gcond] + b
    ss = float(np.sum(swxx - 2.0 * mu * swx + mu * mu * sw))
    raw_sigma2 = ss / total if total > 0.0 else 0.0
    collapsed = raw_sigma2 < SIGMA2_FLOOR
    if collapsed and total < 2.0:
        raise FitError(
            "component collapse: variance floor reached with degenerate responsibilities"
        )
    sigma2_new = max(raw_sigma2, SIGMA2_FLOOR)

    eff_groups = int(np.count_nonzero(sw > EFF_GROUP_WEIGHT))
    if eff_groups < 2:
        omega2_new = 0.0
        b = np.zeros(n_groups)
    else:
        omega2_new = float(np.mean(b * b))
        # variance shrinking geometrically toward the boundary: snap to an
        # exact 0 (absorbing; the penalty convention switches off with it)
        if omega2_new < zero_tol:
            omega2_new = 0.0
            b = np.zeros(n_groups)
    return beta, b, sigma2_new, omega2_new, collapsed


def _initial_params(x, cond_codes, n_cond, pi_rec, init_probs, offset):
    """Starting values: class means per condition from weighted means under
    the supplied probabilities, else from a quantile split; variances from
    the within-split spread. offset shifts the means apart (restarts)."""
    beta1 = np.zeros(n_cond)
    beta0 = np.zeros(n_cond)
    v1_acc = v0_acc = w_acc = 0.0
    for ci in range(n_cond):
        mask = cond_codes == ci
        xc = x[mask]
        sd = float(xc.std()) or 1.0
        if init_probs is not None:
            w = np.clip(init_probs[mask], 1e-6, 1.0 - 1e-6)
            m1 = float((w * xc).sum() / w.sum())
            m0 = float(((1.0 - w) * xc).sum() / (1.0 - w).sum())
            v1 = float((w * (xc - m1) ** 2).sum() / w.sum())
            v0 = float(((1.0 - w) * (xc - m0) ** 2).sum() / (1.0 - w).sum())
        else:
            q = np.quantile(xc, 1.0 - float(pi_rec[mask].mean()))
            hi = xc[xc >= q]
            lo = xc[xc < q]
            if len(hi) == 0 or len(lo) == 0:
                m = float(xc.mean())
                m1, m0 = m + 0.5 * sd, m - 0.5 * sd
                v1 = v0 = float(xc.var())
            else:
                m1, m0 = float(hi.mean()), float(lo.mean())
                v1, v0 = float(hi.var()), float(lo.var())
        beta1[ci] = m1 + offset * sd
        beta0[ci] = m0 - offset * sd
        nc = mask.sum()
        v1_acc += v1 * nc
        v0_acc += v0 * nc
        w_acc += nc
    sig1 = max(v1_acc / w_acc, 1e-6)
    sig0 = max(v0_acc / w_acc, 1e-6)
    return beta1, beta0, sig1, sig0


def _em_run(x, cond_codes, group_codes, gcond, n_cond, n_groups, pi_rec,
            init_probs, offset, max_iter, tol):
    beta1, beta0, sig1, sig0 = _initial_params(
        x, cond_codes, n_cond, pi_rec, init_probs, offset
    )
    var_x = float(x.var())
    om1 = om0 = 0.1 * var_x if n_groups >= 2 and var_x > 0.0 else 0.0
    zero_tol = max(1e-12, OMEGA2_ZERO_TOL * max(var_x, 1.0))
    b1 = np.zeros(n_groups)
    b0 = np.zeros(n_groups)
    lm1 = np.log(pi_rec)
    lm0 = np.log1p(-pi_rec)

    trace = []
    boundary = {1: None, 0: None}
    prev_ll = -np.inf
    collapsed_any = False
    resp = None
    for it in range(1, max_iter + 1):
        mu1 = beta1[cond_codes] + b1[group_codes]
        mu0 = beta0[cond_codes] + b0[group_codes]
        resp, obs_ll, sw1, swx1, swxx1, sw0, swx0, swxx0 = em_accumulate(
            x, mu1, mu0, sig1, sig0, lm1, lm0, group_codes, n_groups
        )
        ll = obs_ll - _penalty(b1, om1, n_groups) - _penalty(b0, om0, n_groups)
        trace.append(ll)
        if np.isfinite(prev_ll) and ll < prev_ll - 1e-8 * (abs(prev_ll) + 1.0):
            raise FitError(f"EM penalized log-likelihood decreased at iteration {it}")
        if np.isfinite(prev_ll) and abs(ll - prev_ll) <= tol * (abs(prev_ll) + 1.0):
            return {
                "beta1": beta1, "beta0": beta0, "b1": b1, "b0": b0,
                "sig1": sig1, "sig0": sig0, "om1": om1, "om0": om0,
                "resp": resp, "loglik": ll, "trace": trace, "iterations": it,
                "collapsed": collapsed_any, "boundary": boundary,
            }
        prev_ll = ll
        om1_was, om0_was = om1, om0
        beta1, b1, sig1, om1, col1 = _m_step_class(
            sw1, swx1, swxx1, gcond, n_cond, sig1, om1, n_groups, zero_tol
        )
        beta0, b0, sig0, om0, col0 = _m_step_class(
            sw0, swx0, swxx0, gcond, n_cond, sig0, om0, n_groups, zero_tol
        )
        collapsed_any = collapsed_any or col1 or col0
        # a class variance pinned to the zero boundary removes its penalty
        # from the objective; restart the monotonicity baseline there
        if om1 == 0.0 and om1_was > 0.0:
            boundary[1] = it
            prev_ll = -np.inf
        if om0 == 0.0 and om0_was > 0.0:
            boundary[0] = it
            prev_ll = -np.inf
    raise FitError(f"EM did not converge after {max_iter} iterations")


def fit_hier_gmm(data, mixing, init=None, restarts=DEFAULT_RESTARTS,
                 max_iter=MAX_EM_ITER, tol=EM_TOL):
    """Fit the mixture by penalized EM with fixed mixing proportions.

    mixing maps conditions (or groups) to class-1 proportions. init, when
    given, is a per-record class-1 probability vector used to place the
    starting component means; otherwise a quantile split is used.
    Restarts perturb the starting means deterministically; the best
    penalized log-likelihood wins, ties going to the earliest restart.
    """
    if data.x is None or not np.all(np.isfinite(data.x)):
        raise DataError("fit_hier_gmm needs a finite x for every record")
    x = np.asarray(data.x, dtype=np.float64)
    pi_rec, keyed = _mixing_per_record(data, mixing)
    if init is not None:
        init = np.asarray(init, dtype=np.float64).ravel()
        if init.shape[0] != len(data):
            raise DataError("init probabilities must have one entry per record")
        if np.any(~np.isfinite(init)) or init.min() < 0.0 or init.max() > 1.0:
            raise DataError("init probabilities must lie in [0, 1]")
    if restarts < 1:
        raise DataError("restarts must be >= 1")

    cc = data.cond_codes
    gc = data.group_codes
    gcond = data.group_condition_codes
    n_cond = len(data.conditions)
    n_groups = len(data.groups)

    offsets = [0.0]
    for r in range(1, restarts):
        mag = 0.5 * ((r + 1) // 2)
        offsets.append(mag if r % 2 == 1 else -mag)

    best = None
    best_r = -1
    failures = []
    for r, off in enumerate(offsets):
        try:
            run = _em_run(x, cc, gc, gcond, n_cond, n_groups, pi_rec,
                          init, off, max_iter, tol)
        except FitError as err:
            failures.append((r, str(err)))
            continue
        if best is None or run["loglik"] > best["loglik"]:
            best = run
            best_r = r
    if best is None:
        raise FitError(f"all EM restarts failed: {failures[0][1]}")

    beta = {}
    for ci, cname in enumerate(data.conditions):
        beta[(cname, 1)] = float(best["beta1"][ci])
        beta[(cname, 0)] = float(best["beta0"][ci])
    b_hat = {}
    for gi, gname in enumerate(data.groups):
        b_hat[(gname, 1)] = float(best["b1"][gi])
        b_hat[(gname, 0)] = float(best["b0"][gi])
    return MixtureFit(
        beta=beta,
        sigma2={1: float(best["sig1"]), 0: float(best["sig0"])},
        omega2={1: float(best["om1"]), 0: float(best["om0"])},
        b_hat=b_hat,
        responsibilities=best["resp"],
        loglik=float(best["loglik"]),
        meta={
            "iterations": best["iterations"],
            "trace": [float(v) for v in best["trace"]],
            "restart": best_r,
            "collapsed": best["collapsed"],
            "variance_boundary": best["boundary"],
            "mixing_keyed_by": keyed,
            "failed_restarts": failures,
        },
    )


def _fit_arrays(fit, data):
    """Reassemble per-condition / per-group parameter arrays from a fit,
    checking that the fit covers the data."""
    try:
        beta1 = np.array([fit.beta[(c, 1)] for c in data.conditions])
        beta0 = np.array([fit.beta[(c, 0)] for c in data.conditions])
        b1 = np.array([fit.b_hat[(g, 1)] for g in data.groups])
        b0 = np.array([fit.b_hat[(g, 0)] for g in data.groups])
    except KeyError as err:
        raise DataError(f"fit does not cover the data: missing {err}") from None
    return beta1, beta0, b1, b0


def mixture_loglik(fit, data, mixing):
    """Penalized observed-data log-likelihood of a fit on a dataset."""
    if data.x is None or not np.all(np.isfinite(data.x)):
        raise DataError("mixture_loglik needs a finite x for every record")
    x = np.asarray(data.x, dtype=np.float64)
    pi_rec, _ = _mixing_per_record(data, mixing)
    beta1, beta0, b1, b0 = _fit_arrays(fit, data)
    cc = data.cond_codes
    gc = data.group_codes
    mu1 = beta1[cc] + b1[gc]
    mu0 = beta0[cc] + b0[gc]
    sig1, sig0 = fit.sigma2[1], fit.sigma2[0]
    u = np.log(pi_rec) - 0.5 * (np.log(2.0 * np.pi * sig1) + (x - mu1) ** 2 / sig1)
    v = np.log1p(-pi_rec) - 0.5 * (np.log(2.0 * np.pi * sig0) + (x - mu0) ** 2 / sig0)
    obs = float(np.logaddexp(u, v).sum())
    n_groups = len(data.groups)
    return obs - _penalty(b1, fit.omega2[1], n_groups) - _penalty(b0, fit.omega2[0], n_groups)


def component_curves(fit, data, n_points=200):
    """Per-group fitted component density curves, ready for CSV export."""
    beta1, beta0, b1, b0 = _fit_arrays(fit, data)
    xs = np.linspace(float(data.x.min()), float(data.x.max()), n_points)
    rows = []
    for gi, gname in enumerate(data.groups):
        ci = data.group_condition_codes[gi]
        for cls, beta_c, b_g, sig in ((1, beta1[ci], b1[gi], fit.sigma2[1]),
                                      (0, beta0[ci], b0[gi], fit.sigma2[0])):
            mu = beta_c + b_g
            dens = np.exp(-0.5 * (xs - mu) ** 2 / sig) / math.sqrt(2.0 * math.pi * sig)
            rows.append(pd.DataFrame({
                "group": gname, "cls": cls, "x": xs, "density": dens,
            }))
    return pd.concat(rows, ignore_index=True)
