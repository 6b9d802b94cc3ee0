"""Penalized logistic additive spline classifier with a Gaussian
coefficient posterior.

The posterior covariance (the inverse penalized information matrix at
convergence) lets bootstrap procedures draw whole classifier functions
cheaply instead of refitting per replicate.
"""

from __future__ import annotations

import dataclasses
import json
import warnings

import numpy as np
import scipy.linalg
from scipy.special import expit

from .data import Dataset
from .exceptions import DataError, FitError
from .splines import BasisSpec, block_sizes, build_design, build_penalty, feature_knots

# the grid floor keeps the fit away from the near-unpenalized regime,
# where separable training data makes the coefficient posterior so
# diffuse that sampled classifiers stop resembling refits
LAMBDA_GRID = tuple(10.0 ** np.arange(-1, 4))
MAX_PIRLS_ITER = 50
PIRLS_TOL = 1e-8
EIG_CLAMP = 1e-10
# information eigenvalues this far below the largest carry no usable signal
# about the coefficient direction; sampling them would inject pure noise
INFO_RCOND = 1e-4
# small ridge on all coefficients: gives the penalty-null directions a
# finite optimum when a basis tail region holds only one class
RIDGE_EPS = 1e-6

_P_LO = 1e-300
_P_HI = float(np.nextafter(1.0, 0.0))


@dataclasses.dataclass
class ClassifierModel:
    """Fitted additive logistic spline model.

    coef holds the penalized maximum-likelihood coefficients; cov the
    clamped positive-semidefinite coefficient sampling covariance (a
    sandwich form calibrated so sampled coefficient vectors spread like
    refits on resampled training rows) and cov_factor a matrix square
    root used for coefficient sampling.
    """

    spec: BasisSpec
    knots: list
    ranges: np.ndarray
    coef: np.ndarray
    cov: np.ndarray
    cov_factor: np.ndarray
    lam: float
    train_prevalence: float
    d: int
    meta: dict = dataclasses.field(default_factory=dict)

    def design(self, z):
        """Design matrix for raw feature rows (clamped to training range)."""
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = z.reshape(-1, self.d) if self.d == 1 else z.reshape(1, -1)
        if z.shape[1] != self.d:
            raise DataError(f"dimension mismatch: model expects d={self.d}, got {z.shape[1]}")
        return build_design(z, self.knots, self.ranges, self.spec)


def _deviance(y, mu):
    mu = np.clip(mu, 1e-12, 1.0 - 1e-12)
    return -2.0 * float(np.sum(y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu)))


def _pirls(X, y, S, lam):
    """Penalized IRLS for Bernoulli-logit; returns (beta, info, trace).

    info is the penalized information matrix X'WX + lam*S at convergence.
    trace records the penalized deviance per accepted iteration; it is
    non-increasing by construction (step-halving on increases).
    """
    n, p = X.shape
    beta = np.zeros(p)
    eta = np.zeros(n)
    pen_dev = _deviance(y, expit(eta))  # beta=0 has zero penalty
    trace = [pen_dev]
    converged = False
    it = 0

    def penalty(b):
        return lam * float(b @ S @ b) + RIDGE_EPS * float(b @ b)

    for it in range(1, MAX_PIRLS_ITER + 1):
        mu = expit(eta)
        w = np.clip(mu * (1.0 - mu), 1e-10, None)
        zwork = eta + (y - mu) / w
        XtW = X.T * w
        A = XtW @ X + lam * S + RIDGE_EPS * np.eye(p)
        rhs = XtW @ zwork
        try:
            candidate = scipy.linalg.solve(A, rhs, assume_a="pos")
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as err:
            raise FitError(f"singular penalized system at iteration {it}: {err}") from None
        new = candidate
        new_dev = _deviance(y, expit(X @ new)) + penalty(new)
        halvings = 0
        while new_dev > pen_dev + 1e-12 * (abs(pen_dev) + 1.0) and halvings < 30:
            new = 0.5 * (beta + new)
            new_dev = _deviance(y, expit(X @ new)) + penalty(new)
            halvings += 1
        if new_dev > pen_dev + 1e-8 * (abs(pen_dev) + 1.0):
            # could not find a non-increasing step; accept current iterate
            break
        delta = abs(pen_dev - new_dev)
        beta, eta, pen_dev = new, X @ new, new_dev
        trace.append(pen_dev)
        if delta <= PIRLS_TOL * (abs(pen_dev) + 0.1):
            converged = True
            break
    if not converged:
        raise FitError(f"PIRLS did not converge after {it} iterations")
    mu = expit(eta)
    w = np.clip(mu * (1.0 - mu), 1e-10, None)
    info = (X.T * w) @ X + lam * S + RIDGE_EPS * np.eye(p)
    return beta, info, trace


def _holdout_split(train):
    """Row masks for lambda selection: hold out ~20 percent of groups
    (every fifth sorted group), falling back to every fifth row."""
    groups = train.groups
    if len(groups) >= 2:
        held = set(groups[::5])
        mask = np.fromiter((k in held for k in train.k), dtype=bool, count=len(train))
        if mask.any() and not mask.all():
            return ~mask, mask, "group"
    idx = np.arange(len(train))
    mask = idx % 5 == 0
    return ~mask, mask, "row"


def fit_classifier(train, spec=None, lambda_rule="grid"):
    """Fit the penalized logistic spline classifier.

    lambda_rule is either a fixed nonnegative penalty weight or "grid",
    which picks the weight from a small log-spaced grid by held-out
    deviance on a 20 percent within-training group split. A single shared
    weight is used across features.
    """
    spec = spec or BasisSpec()
    if not train.labeled:
        raise DataError("training data must be labeled")
    y = train.y.astype(np.float64)
    if y.min() == y.max():
        raise DataError("single-class data: need both labels present to fit")

    ranges = np.column_stack([train.z.min(axis=0), train.z.max(axis=0)])
    knots = [feature_knots(train.z[:, j], spec) for j in range(train.d)]
    X = build_design(train.z, knots, ranges, spec)
    S = build_penalty(block_sizes(knots, spec), spec)

    grid_info = None
    if isinstance(lambda_rule, str):
        if lambda_rule != "grid":
            raise DataError(f"unknown lambda rule {lambda_rule!r}")
        fit_mask, held_mask, split_kind = _holdout_split(train)
        if y[fit_mask].min() == y[fit_mask].max():
            fit_mask = np.ones(len(train), dtype=bool)
            held_mask = fit_mask
            split_kind = "degenerate"
        scores = []
        for lam_c in LAMBDA_GRID:
            try:
                beta_c, _, _ = _pirls(X[fit_mask], y[fit_mask], S, lam_c)
                score = _deviance(y[held_mask], expit(X[held_mask] @ beta_c))
            except FitError:
                score = np.inf
            scores.append(score)
        best = int(np.argmin(scores))
        if not np.isfinite(scores[best]):
            raise FitError("no lambda on the grid produced a convergent fit")
        lam = float(LAMBDA_GRID[best])
        grid_info = {
            "grid": [float(v) for v in LAMBDA_GRID],
            "heldout_deviance": [float(s) for s in scores],
            "split": split_kind,
        }
    else:
        lam = float(lambda_rule)
        if lam < 0:
            raise DataError("lambda must be nonnegative")

    beta, info, trace = _pirls(X, y, S, lam)

    ievals, evecs = np.linalg.eigh(0.5 * (info + info.T))
    if not np.all(np.isfinite(ievals)) or ievals.max() <= 0.0:
        raise FitError("singular penalized information matrix")
    # regularized inverse: directions the penalized likelihood cannot
    # identify get zero sampling variance instead of an arbitrarily
    # large one from the quadratic approximation
    identified = ievals > INFO_RCOND * ievals.max()
    evals = np.where(identified, 1.0 / np.where(identified, ievals, 1.0), 0.0)
    pen_inv = (evecs * evals) @ evecs.T
    # sandwich covariance: the penalty shrinks a refit along penalized
    # directions, so the coefficient sampling spread there is inv(H) J
    # inv(H) with J the unpenalized information, not inv(H) itself. The
    # plain inverse overstates those directions and sampled classifiers
    # stop resembling refits (one-sided estimate fliers).
    p_hat = expit(X @ beta)
    w_hat = p_hat * (1.0 - p_hat)
    J = (X.T * w_hat) @ X
    cov = pen_inv @ J @ pen_inv
    cov = 0.5 * (cov + cov.T)
    cevals, cvecs = np.linalg.eigh(cov)
    cevals = np.where(cevals < EIG_CLAMP, 0.0, cevals)
    cov = (cvecs * cevals) @ cvecs.T
    cov = 0.5 * (cov + cov.T)
    factor = cvecs * np.sqrt(cevals)

    meta = {
        "iterations": len(trace) - 1,
        "deviance_trace": [float(v) for v in trace],
        "final_penalized_deviance": float(trace[-1]),
        "lambda_grid": grid_info,
        "n_train": len(train),
        "posterior_rank": int(identified.sum()),
    }
    return ClassifierModel(
        spec=spec,
        knots=knots,
        ranges=ranges,
        coef=beta,
        cov=cov,
        cov_factor=factor,
        lam=lam,
        train_prevalence=float(y.mean()),
        d=train.d,
        meta=meta,
    )


def predict_proba(model, z):
    """Class-1 probability for feature row(s) z.

    A single point (length-d vector, or scalar when d=1) gives a float;
    an (n, d) array (or length-n vector when d=1) gives an array. Values
    are clipped into the open interval (0, 1).
    """
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 0 or (z.ndim == 1 and model.d > 1 and z.shape[0] == model.d)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z.reshape(1, -1) if single else z.reshape(-1, 1)
    p = predict_from_design(model.design(z), model.coef)
    return float(p[0]) if single or p.shape[0] == 1 and z.shape[0] == 1 else p


def predict_from_design(design, coef):
    """Probabilities from a precomputed design matrix (bootstrap hot path)."""
    return np.clip(expit(design @ coef), _P_LO, _P_HI)


def sample_classifier(model, rng):
    """Copy of the model with coefficients drawn from the Gaussian
    coefficient posterior N(coef, cov)."""
    if not np.all(np.isfinite(model.cov)):
        raise FitError("non-finite posterior covariance")
    draw = model.coef + model.cov_factor @ rng.standard_normal(model.coef.shape[0])
    return dataclasses.replace(model, coef=draw)


@dataclasses.dataclass
class CalibrationTable:
    """Equal-width probability bins with predicted vs observed rates."""

    edges: np.ndarray
    mean_predicted: np.ndarray
    observed_rate: np.ndarray
    count: np.ndarray

    @property
    def populated(self):
        return self.count > 0

    def max_gap(self):
        """Largest |mean predicted - observed| over populated bins."""
        mask = self.populated
        if not mask.any():
            return float("nan")
        return float(np.max(np.abs(self.mean_predicted[mask] - self.observed_rate[mask])))

    def rows(self):
        return [
            {
                "bin_low": float(self.edges[i]),
                "bin_high": float(self.edges[i + 1]),
                "mean_predicted": None if self.count[i] == 0 else float(self.mean_predicted[i]),
                "observed_rate": None if self.count[i] == 0 else float(self.observed_rate[i]),
                "count": int(self.count[i]),
            }
            for i in range(len(self.count))
        ]


def calibration_table(probs, labels, n_bins=10):
    """Bin predictions into n_bins equal slices of [0,1] and compare the
    mean prediction to the observed positive rate per bin. Empty bins get
    count 0 and NaN rates."""
    probs = np.asarray(probs, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if probs.shape[0] != labels.shape[0]:
        raise DataError("probs and labels must have equal length")
    if n_bins < 1:
        raise DataError("n_bins must be >= 1")
    idx = np.clip((probs * n_bins).astype(np.int64), 0, n_bins - 1)
    count = np.bincount(idx, minlength=n_bins)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean_pred = np.bincount(idx, weights=probs, minlength=n_bins) / count
        obs = np.bincount(idx, weights=labels, minlength=n_bins) / count
    return CalibrationTable(
        edges=np.linspace(0.0, 1.0, n_bins + 1),
        mean_predicted=mean_pred,
        observed_rate=obs,
        count=count,
    )


# -- JSON serialization -------------------------------------------------


def model_to_dict(model):
    return {
        "spec": model.spec.to_dict(),
        "knots": [k.tolist() for k in model.knots],
        "ranges": model.ranges.tolist(),
        "coef": model.coef.tolist(),
        "cov": model.cov.tolist(),
        "lam": model.lam,
        "train_prevalence": model.train_prevalence,
        "d": model.d,
        "meta": model.meta,
    }


def model_from_dict(doc):
    cov = np.asarray(doc["cov"], dtype=np.float64)
    evals, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
    evals = np.where(evals < EIG_CLAMP, 0.0, evals)
    return ClassifierModel(
        spec=BasisSpec.from_dict(doc["spec"]),
        knots=[np.asarray(k, dtype=np.float64) for k in doc["knots"]],
        ranges=np.asarray(doc["ranges"], dtype=np.float64),
        coef=np.asarray(doc["coef"], dtype=np.float64),
        cov=(evecs * evals) @ evecs.T,
        cov_factor=evecs * np.sqrt(evals),
        lam=float(doc["lam"]),
        train_prevalence=float(doc["train_prevalence"]),
        d=int(doc["d"]),
        meta=dict(doc.get("meta", {})),
    )


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
