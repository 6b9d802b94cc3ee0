"""Label-shift prevalence estimation and Bayes-rule prediction correction.

Two estimators of the per-condition test prevalence are provided: a
confusion-matrix inversion built on thresholded predictions, and a
fixed-point grid search for the prevalence at which the mean corrected
prediction equals the prevalence itself.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .classifier import predict_from_design, predict_proba
from .exceptions import DataError, FitError
from .kernels import fixed_point_curve

PROB_CLIP = 1e-6
DET_TOL = 1e-12
DEFAULT_SEARCH_RANGE = (0.001, 0.999)
DEFAULT_GRID_SIZE = 2000
REFINE_FACTOR = 10


@dataclasses.dataclass
class ShiftEstimate:
    """Per-condition prevalence estimates with method tag and diagnostics."""

    method: str
    prevalence: dict
    train_prevalence: float
    diagnostics: dict = dataclasses.field(default_factory=dict)

    def prevalence_for(self, c):
        c = str(c)
        if c not in self.prevalence:
            raise DataError(f"unknown condition {c!r}")
        return self.prevalence[c]


def clip_probs(p):
    """Clip raw probabilities away from 0/1 before odds-based corrections."""
    return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


def correct_predictions(p_raw, pi_train, pi_test):
    """Bayes-rule reweighting of class-1 probabilities from training
    prevalence pi_train to test prevalence pi_test.

    Scalar or array p_raw. Values exactly 0 or 1 pass through unchanged;
    the function is strictly increasing in p_raw and is the identity when
    the prevalences agree.
    """
    if not 0.0 < pi_train < 1.0:
        raise DataError("pi_train must lie in (0, 1)")
    if not 0.0 <= pi_test <= 1.0:
        raise DataError("pi_test must lie in [0, 1]")
    p = np.asarray(p_raw, dtype=np.float64)
    r1 = pi_test / pi_train
    r0 = (1.0 - pi_test) / (1.0 - pi_train)
    num = r1 * p
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / (num + r0 * (1.0 - p))
    # 0 and 1 are exact fixed points; enforce despite any float fuzz
    out = np.where(p == 0.0, 0.0, out)
    out = np.where(p == 1.0, 1.0, out)
    if np.isscalar(p_raw) or np.ndim(p_raw) == 0:
        return float(out)
    return out


def corrected_probs(p_raw, pi_train, pi_test):
    """Pipeline form of correct_predictions: clips raw probabilities to
    [1e-6, 1-1e-6] first so degenerate predictions cannot blow up."""
    return correct_predictions(clip_probs(np.asarray(p_raw, dtype=np.float64)),
                               pi_train, pi_test)


def discretization_solve(M, pi_hat_test, pi_train1):
    """Confusion-matrix inversion: returns ((M^-1 pi_hat_test)[1]) * pi_train1
    and whether the raw solution needed clipping into [0, 1]."""
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) < DET_TOL:
        raise FitError(
            "confusion matrix singular: classifier has no discriminative "
            "power at this threshold"
        )
    ratio = (-M[1, 0] * pi_hat_test[0] + M[0, 0] * pi_hat_test[1]) / det
    raw = ratio * pi_train1
    clipped = not 0.0 <= raw <= 1.0
    return float(np.clip(raw, 0.0, 1.0)), clipped


def _confusion_joint(pred_pos, y):
    """2x2 joint distribution of (thresholded prediction, label)."""
    pred_pos = np.asarray(pred_pos, dtype=bool)
    y = np.asarray(y)
    m = len(y)
    M = np.empty((2, 2))
    M[1, 1] = np.count_nonzero(pred_pos & (y == 1)) / m
    M[1, 0] = np.count_nonzero(pred_pos & (y == 0)) / m
    M[0, 1] = np.count_nonzero(~pred_pos & (y == 1)) / m
    M[0, 0] = np.count_nonzero(~pred_pos & (y == 0)) / m
    return M


def estimate_prevalence_discretization(model, train, test, h=0.5):
    """Prevalence per test condition by inverting the thresholded-prediction
    confusion matrix estimated on training data."""
    if not train.labeled:
        raise DataError("discretization estimator needs labeled training data")
    if not 0.0 < h < 1.0:
        raise DataError("threshold h must lie in (0, 1)")
    a_train = predict_proba(model, train.z)
    a_test = predict_proba(model, test.z)
    M = _confusion_joint(np.atleast_1d(a_train) > h, train.y)
    pi_train1 = float(np.mean(train.y))

    prevalence = {}
    diagnostics = {"M": M.tolist(), "h": h, "clipped": {}}
    pred_pos = np.atleast_1d(a_test) > h
    for c in test.conditions:
        mask = test.c == c
        share_pos = float(np.mean(pred_pos[mask]))
        est, clipped = discretization_solve(M, np.array([1.0 - share_pos, share_pos]), pi_train1)
        prevalence[c] = est
        diagnostics["clipped"][c] = clipped
    return ShiftEstimate(
        method="discretization",
        prevalence=prevalence,
        train_prevalence=pi_train1,
        diagnostics=diagnostics,
    )


def fixed_point_search(odds, pi_train, search_range=DEFAULT_SEARCH_RANGE,
                       grid_size=DEFAULT_GRID_SIZE):
    """Grid search for the prevalence whose corrected-prediction mean is
    closest to itself, with one 10x local refinement pass.

    odds holds raw prediction odds a/(1-a) for the records of one
    condition. Returns (estimate, info dict).
    """
    a, b = search_range
    if not (0.0 < a < b < 1.0):
        raise DataError("search range must satisfy 0 < a < b < 1")
    if grid_size < 2:
        raise DataError("grid_size must be >= 2")
    odds = np.asarray(odds, dtype=np.float64)
    train_odds = pi_train / (1.0 - pi_train)

    def objective(grid):
        t = train_odds * (1.0 - grid) / grid
        curve = fixed_point_curve(odds, t)
        if not np.all(np.isfinite(curve)):
            raise FitError("fixed-point objective non-finite: degenerate predictions")
        return np.abs(curve - grid)

    grid = np.linspace(a, b, grid_size)
    obj = objective(grid)
    j = int(np.argmin(obj))
    step = (b - a) / (grid_size - 1)
    lo = max(a, grid[j] - step)
    hi = min(b, grid[j] + step)
    fine = np.linspace(lo, hi, 2 * REFINE_FACTOR + 1)
    fobj = objective(fine)
    if fobj.min() < obj[j]:
        jf = int(np.argmin(fobj))
        est, val = float(fine[jf]), float(fobj[jf])
    else:
        est, val = float(grid[j]), float(obj[j])
    return est, {"objective": val, "coarse_estimate": float(grid[j]),
                 "coarse_objective": float(obj[j]), "grid_size": grid_size,
                 "search_range": [a, b]}


def estimate_prevalence_fixed_point(model, test, search_range=DEFAULT_SEARCH_RANGE,
                                    grid_size=DEFAULT_GRID_SIZE):
    """Prevalence per test condition by the fixed-point grid search, using
    the model's training prevalence for the correction."""
    pi_train = model.train_prevalence
    if not 0.0 < pi_train < 1.0:
        raise DataError("model train_prevalence must lie in (0, 1)")
    a_test = clip_probs(np.atleast_1d(predict_proba(model, test.z)))
    odds_all = a_test / (1.0 - a_test)

    prevalence = {}
    diagnostics = {}
    for c in test.conditions:
        est, info = fixed_point_search(odds_all[test.c == c], pi_train,
                                       search_range, grid_size)
        prevalence[c] = est
        diagnostics[c] = info
    return ShiftEstimate(
        method="fixed_point",
        prevalence=prevalence,
        train_prevalence=pi_train,
        diagnostics=diagnostics,
    )


def naive_prevalence(model, test):
    """Per-condition mean of uncorrected predictions (the biased baseline)."""
    a_test = np.atleast_1d(predict_proba(model, test.z))
    prevalence = {c: float(np.mean(a_test[test.c == c])) for c in test.conditions}
    return ShiftEstimate(
        method="naive",
        prevalence=prevalence,
        train_prevalence=model.train_prevalence,
        diagnostics={},
    )


def corrected_probs_by_condition(a_raw, cond_values, shift):
    """Apply the per-condition correction from a ShiftEstimate to raw
    probabilities; used to build class weights downstream."""
    a_raw = np.asarray(a_raw, dtype=np.float64)
    out = np.empty_like(a_raw)
    for c, pi in shift.prevalence.items():
        mask = cond_values == c
        out[mask] = corrected_probs(a_raw[mask], shift.train_prevalence, pi)
    return out


def predict_from_design_clipped(design, coef):
    """Raw probabilities from a precomputed design, pipeline-clipped."""
    return clip_probs(predict_from_design(design, coef))
