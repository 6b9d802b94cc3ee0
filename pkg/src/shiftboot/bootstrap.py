"""Semiparametric bootstrap confidence intervals.

Four procedures share one skeleton: resample the training rows, draw or
refit the classifier, rebuild a synthetic test set, re-estimate the label
shift on the bootstrap pair, refit the downstream estimator, and collect
its target quantity. Replicate s always draws from a private stream
seeded by (seed, procedure salt, replicate_offset + s), so results are
bit-identical across worker counts and runs with offset k continue the
replicate sequence of a run with offset 0.
"""

from __future__ import annotations

import dataclasses
import math
import multiprocessing
import warnings

import numpy as np
from scipy.special import ndtri

from .classifier import fit_classifier, predict_from_design, predict_proba
from .data import Dataset
from .exceptions import DataError, FitError
from .lmm import fit_weighted_lmm
from .mixture import fit_hier_gmm
from .shift import (
    _confusion_joint,
    clip_probs,
    corrected_probs,
    corrected_probs_by_condition,
    discretization_solve,
    estimate_prevalence_discretization,
    estimate_prevalence_fixed_point,
    fixed_point_search,
    naive_prevalence,
)

SALT_PREVALENCE = 101
SALT_LMM = 103
SALT_LMM_CALIBRATED = 105
SALT_MIXTURE = 107

INTERVAL_KINDS = ("percentile", "pivotal", "normal_z")
CLASSIFIER_MODES = ("refit", "posterior_sample")
SHIFT_METHODS = ("discretization", "fixed_point")
SHIFT_MODES = ("label_shift", "none")


@dataclasses.dataclass(frozen=True)
class BootstrapConfig:
    """Settings shared by all bootstrap procedures.

    replicate_offset shifts the replicate stream indices: a run with
    offset k and B replicates continues exactly where an offset-0 run of
    B=k stopped, so long runs can be split without changing the draws.
    """

    B: int = 200
    level: float = 0.95
    interval_kind: str = "pivotal"
    classifier_mode: str = "posterior_sample"
    seed: int = 0
    shift_method: str = "fixed_point"
    shift_mode: str = "label_shift"
    threshold: float = 0.5
    search_range: tuple = (0.001, 0.999)
    grid_size: int = 2000
    restarts: int = 3
    workers: int = 1
    replicate_offset: int = 0
    stratify_train_by_group: bool = False

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 2:
            raise DataError("B must be an integer >= 2")
        if not 0.0 < self.level < 1.0:
            raise DataError("level must lie in (0, 1)")
        if self.interval_kind not in INTERVAL_KINDS:
            raise DataError(f"unknown interval kind {self.interval_kind!r}")
        if self.classifier_mode not in CLASSIFIER_MODES:
            raise DataError(f"unknown classifier mode {self.classifier_mode!r}")
        if self.shift_method not in SHIFT_METHODS:
            raise DataError(f"unknown shift method {self.shift_method!r}")
        if self.shift_mode not in SHIFT_MODES:
            raise DataError(f"unknown shift mode {self.shift_mode!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise DataError("seed must be a nonnegative integer")
        if not 0.0 < self.threshold < 1.0:
            raise DataError("threshold must lie in (0, 1)")
        if self.workers < 1:
            raise DataError("workers must be >= 1")
        if self.replicate_offset < 0:
            raise DataError("replicate_offset must be >= 0")
        object.__setattr__(self, "search_range",
                           (float(self.search_range[0]), float(self.search_range[1])))


@dataclasses.dataclass
class BootstrapResult:
    """Point estimate, surviving replicates, interval, and bookkeeping."""

    point: float
    replicates: np.ndarray
    interval: tuple
    n_failed: int
    diagnostics: dict = dataclasses.field(default_factory=dict)


def interval_from_replicates(point, reps, level, kind):
    """Confidence interval from a replicate vector.

    percentile uses the (alpha/2, 1-alpha/2) quantiles of the replicates;
    pivotal reflects those quantiles around the point estimate; normal_z
    is point +- z * sd. Quantiles interpolate order statistics linearly.
    """
    reps = np.asarray(reps, dtype=np.float64).ravel()
    if reps.size == 0:
        raise DataError("no replicates: cannot form an interval")
    if not np.all(np.isfinite(reps)) or not np.isfinite(point):
        raise DataError("non-finite replicate")
    if not 0.0 < level < 1.0:
        raise DataError("level must lie in (0, 1)")
    alpha = 1.0 - level
    if kind == "percentile":
        lo = float(np.quantile(reps, alpha / 2.0))
        hi = float(np.quantile(reps, 1.0 - alpha / 2.0))
    elif kind == "pivotal":
        qlo = float(np.quantile(reps, alpha / 2.0))
        qhi = float(np.quantile(reps, 1.0 - alpha / 2.0))
        lo, hi = 2.0 * point - qhi, 2.0 * point - qlo
    elif kind == "normal_z":
        sd = float(np.std(reps, ddof=1)) if reps.size > 1 else 0.0
        z = float(ndtri(1.0 - alpha / 2.0))
        lo, hi = point - z * sd, point + z * sd
    else:
        raise DataError(f"unknown interval kind {kind!r}")
    return float(lo), float(hi)


# -- replicate execution -------------------------------------------------

def _replicate_rng(seed, salt, index):
    return np.random.default_rng(np.random.SeedSequence((int(seed), salt, int(index))))


_ACTIVE_PLAN = None


def _run_chunk(bounds):
    lo, hi = bounds
    plan = _ACTIVE_PLAN
    out = []
    for s in range(lo, hi):
        try:
            value, diag = plan.replicate(s)
            out.append((s, True, float(value), diag))
        except (DataError, FitError) as err:
            out.append((s, False, str(err), None))
    return out


def _execute(plan, B, workers):
    """Run plan.replicate for s in 0..B-1, serially or in forked workers.

    Workers inherit the plan through a module global at fork time; chunks
    are contiguous and results are re-sorted by replicate index, so the
    output is independent of the schedule.
    """
    global _ACTIVE_PLAN
    n_workers = max(1, min(workers, B))
    pieces = np.array_split(np.arange(B), n_workers)
    bounds = [(int(a[0]), int(a[-1]) + 1) for a in pieces if a.size]
    _ACTIVE_PLAN = plan
    try:
        if n_workers == 1:
            chunks = [_run_chunk(b) for b in bounds]
        else:
            try:
                ctx = multiprocessing.get_context("fork")
            except ValueError:
                chunks = [_run_chunk(b) for b in bounds]
            else:
                with ctx.Pool(processes=n_workers) as pool:
                    chunks = pool.map(_run_chunk, bounds)
    finally:
        _ACTIVE_PLAN = None
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda t: t[0])
    return rows


def _collect(rows, cfg):
    """Split executed rows into surviving replicate values and per-replicate
    diagnostics; abort when more than a quarter of the replicates failed."""
    values = []
    diags = []
    errors = {}
    for s, ok, value, diag in rows:
        if ok:
            values.append(value)
            diags.append(diag)
        else:
            errors[s] = value
            diags.append(None)
    n_failed = len(errors)
    if n_failed > cfg.B / 4.0:
        first = next(iter(errors.values()))
        raise FitError(f"{n_failed} of {cfg.B} bootstrap replicates failed: {first}")
    return np.asarray(values, dtype=np.float64), n_failed, diags, errors


def _warn_small_b(cfg):
    if cfg.B < 10:
        warnings.warn(f"B={cfg.B} bootstrap replicates give an unstable interval")


def _single_condition(test):
    if len(test.conditions) != 1:
        raise DataError(
            "mean CI procedures expect a single-condition test set; "
            "split by condition first"
        )
    return test.conditions[0]


def _group_row_index(data):
    codes = data.group_codes
    return [np.flatnonzero(codes == g) for g in range(len(data.groups))]


def _point_shift(model, train, test, cfg):
    """Full-data shift estimate used for the point estimate and weights."""
    if cfg.shift_mode == "none":
        return naive_prevalence(model, test)
    if cfg.shift_method == "discretization":
        return estimate_prevalence_discretization(model, train, test, cfg.threshold)
    return estimate_prevalence_fixed_point(model, test, cfg.search_range, cfg.grid_size)


def _estimate_from_probs(cfg, p_train, y_train, p_test_c, implied_pi=None):
    """Single-condition prevalence estimate from prediction arrays; the
    per-replicate analogue of the full-data estimators.

    The fixed-point route takes its training prevalence from implied_pi
    when given. A refit classifier pins its mean fitted probability to
    the resample's label mean through the intercept score equation, so a
    sampled-coefficient replicate must supply the matching quantity (its
    own mean predicted probability) or the two noise sources decouple
    and the intervals come out too wide. The discretization route keeps
    the label mean: there the training margin cancels out of the
    confusion-matrix solve exactly when it equals the matrix's own
    column sum.
    """
    if cfg.shift_mode == "none":
        return float(np.mean(p_test_c)), {"pass_through": True}
    pi_train = float(np.mean(y_train))
    if not 0.0 < pi_train < 1.0:
        raise FitError("bootstrap training resample contains a single class")
    if cfg.shift_method == "discretization":
        M = _confusion_joint(p_train > cfg.threshold, y_train)
        share = float(np.mean(p_test_c > cfg.threshold))
        value, clipped = discretization_solve(
            M, np.array([1.0 - share, share]), pi_train
        )
        return value, {"clipped": clipped}
    if implied_pi is not None:
        pi_train = implied_pi
    odds = p_test_c / (1.0 - p_test_c)
    value, info = fixed_point_search(odds, pi_train, cfg.search_range, cfg.grid_size)
    return value, {"objective": info["objective"]}


class _PlanBase:
    """Immutable shared state for one bootstrap run."""

    def __init__(self, train, test, model, cfg, salt):
        if not train.labeled:
            raise DataError("bootstrap needs labeled training data")
        self.train = train
        self.test = test
        self.model = model
        self.cfg = cfg
        self.salt = salt
        self.y_train = train.y.astype(np.float64)
        if cfg.classifier_mode == "posterior_sample":
            self.D_train = model.design(train.z)
            self.D_test = model.design(test.z)
        else:
            self.D_train = self.D_test = None
        self.train_group_rows = (
            _group_row_index(train) if cfg.stratify_train_by_group else None
        )

    def _draw_train_indices(self, rng):
        m = len(self.train)
        if self.train_group_rows is None:
            return rng.integers(0, m, m)
        n_g = len(self.train_group_rows)
        chosen = rng.integers(0, n_g, n_g)
        return np.concatenate([self.train_group_rows[g] for g in chosen])

    def _classifier_state(self, rng, train_idx):
        """Posterior mode consumes one coefficient draw; refit mode refits
        on the resampled rows at the model's selected penalty weight."""
        if self.cfg.classifier_mode == "posterior_sample":
            coef = self.model.coef + self.model.cov_factor @ rng.standard_normal(
                self.model.coef.shape[0]
            )
            return "coef", coef
        resampled = self.train.take(train_idx, role="training")
        return "model", fit_classifier(resampled, self.model.spec,
                                       lambda_rule=self.model.lam)

    def _prob_pair(self, state, train_idx, test_idx):
        kind, obj = state
        if kind == "coef":
            p_tr = clip_probs(predict_from_design(self.D_train[train_idx], obj))
            p_te = clip_probs(predict_from_design(self.D_test[test_idx], obj))
        else:
            p_tr = clip_probs(np.atleast_1d(predict_proba(obj, self.train.z[train_idx])))
            p_te = clip_probs(np.atleast_1d(predict_proba(obj, self.test.z[test_idx])))
        return p_tr, p_te

    def _implied_train_prevalence(self, state):
        """Training prevalence the replicate classifier implies: its mean
        predicted probability over the full training covariates. A refit
        already satisfies this identity on its own resample (returns None
        so callers fall back to the resample's label mean); a sampled
        coefficient vector has no resample tied to it, so the implied
        value stands in and keeps the classifier level and the training
        prevalence moving together the way a refit would."""
        kind, obj = state
        if kind != "coef":
            return None
        return float(np.mean(clip_probs(predict_from_design(self.D_train, obj))))


class _PrevalencePlan(_PlanBase):
    def __init__(self, train, test, c, model, cfg):
        super().__init__(train, test, model, cfg, SALT_PREVALENCE)
        self.c = str(c)
        if self.c not in test.conditions:
            raise DataError(f"unknown condition {self.c!r}")

    def replicate(self, s):
        cfg = self.cfg
        rng = _replicate_rng(cfg.seed, self.salt, cfg.replicate_offset + s)
        train_idx = self._draw_train_indices(rng)
        state = self._classifier_state(rng, train_idx)
        n = len(self.test)
        test_idx = rng.integers(0, n, n)
        cmask = self.test.c[test_idx] == self.c
        if not cmask.any():
            raise FitError("condition absent from bootstrap test resample")
        p_tr, p_te = self._prob_pair(state, train_idx, test_idx)
        value, extra = _estimate_from_probs(
            cfg, p_tr, self.y_train[train_idx], p_te[cmask],
            implied_pi=self._implied_train_prevalence(state),
        )
        return value, {"prevalence": value, **extra}


class _LmmPlan(_PlanBase):
    """Shared or label-dependent random-intercept regeneration.

    The synthetic x is residual + freshly drawn group effect; in the
    label-dependent variant each record uses the residual and effect of
    its drawn class. Class draws happen in both variants so the two
    consume their streams identically.
    """

    def __init__(self, train, test, model, cfg, label_dependent, collect_variances):
        super().__init__(train, test, model, cfg, SALT_LMM)
        self.c0 = _single_condition(test)
        if test.x is None:
            raise DataError("mean CI procedures need x on the test set")
        self.label_dependent = label_dependent
        self.collect_variances = collect_variances
        self.point_shift = _point_shift(model, train, test, cfg)
        a_raw = np.atleast_1d(predict_proba(model, test.z))
        self.a_l = corrected_probs_by_condition(a_raw, test.c, self.point_shift)
        self.fit0 = fit_weighted_lmm(test, self.a_l, label_dependent=label_dependent)
        self.point = self.fit0.beta[(self.c0, 1)]
        self.n_groups = len(test.groups)
        if label_dependent:
            self.omega2 = dict(self.fit0.omega2)
            self.e1 = self.fit0.residuals[1]
            self.e0 = self.fit0.residuals[0]
        else:
            self.omega2 = {1: self.fit0.omega2, 0: self.fit0.omega2}
            self.e1 = self.e0 = self.fit0.residuals

    def with_adjusted_variances(self, omega2, salt):
        clone = object.__new__(_LmmPlan)
        clone.__dict__.update(self.__dict__)
        clone.omega2 = dict(omega2)
        clone.salt = salt
        clone.collect_variances = False
        return clone

    def replicate(self, s):
        cfg = self.cfg
        rng = _replicate_rng(cfg.seed, self.salt, cfg.replicate_offset + s)
        train_idx = self._draw_train_indices(rng)
        state = self._classifier_state(rng, train_idx)
        K = self.n_groups
        b1 = rng.normal(0.0, math.sqrt(self.omega2[1]), K)
        b0 = rng.normal(0.0, math.sqrt(self.omega2[0]), K)
        n = len(self.test)
        row_idx = rng.integers(0, n, n)
        y_star = rng.random(n) < self.a_l[row_idx]

        g_star = self.test.group_codes[row_idx]
        if self.label_dependent:
            x_star = np.where(y_star,
                              self.e1[row_idx] + b1[g_star],
                              self.e0[row_idx] + b0[g_star])
        else:
            x_star = self.e1[row_idx] + b1[g_star]
        test_star = Dataset(
            z=self.test.z[row_idx], c=self.test.c[row_idx], k=self.test.k[row_idx],
            x=x_star, role="test",
        )
        p_tr, p_te = self._prob_pair(state, train_idx, row_idx)
        y_tr = self.y_train[train_idx]
        implied = self._implied_train_prevalence(state)
        pi_star, _ = _estimate_from_probs(cfg, p_tr, y_tr, p_te,
                                          implied_pi=implied)
        if cfg.shift_mode == "none":
            a_l_star = p_te
        else:
            pi_prime = float(np.mean(y_tr)) if implied is None else implied
            a_l_star = corrected_probs(p_te, pi_prime, pi_star)
        fit_star = fit_weighted_lmm(test_star, a_l_star,
                                    label_dependent=self.label_dependent)
        value = fit_star.beta[(self.c0, 1)]
        diag = {"prevalence": pi_star}
        if self.collect_variances:
            denom = max(K - 1, 1)
            diag["omega2_star"] = {1: float(fit_star.omega2[1]),
                                   0: float(fit_star.omega2[0])}
            diag["v2"] = {1: float(np.sum(b1 * b1) / denom),
                          0: float(np.sum(b0 * b0) / denom)}
        return value, diag


class _MixturePlan(_PlanBase):
    def __init__(self, train, test, model, cfg):
        super().__init__(train, test, model, cfg, SALT_MIXTURE)
        self.c0 = _single_condition(test)
        if test.x is None:
            raise DataError("mean CI procedures need x on the test set")
        self.point_shift = _point_shift(model, train, test, cfg)
        a_raw = np.atleast_1d(predict_proba(model, test.z))
        self.a_l = corrected_probs_by_condition(a_raw, test.c, self.point_shift)
        mixing = {self.c0: self.point_shift.prevalence_for(self.c0)}
        self.fit0 = fit_hier_gmm(test, mixing, init=self.a_l, restarts=cfg.restarts)
        self.point = self.fit0.beta[(self.c0, 1)]
        self.n_groups = len(test.groups)
        gc = test.group_codes
        b1 = np.array([self.fit0.b_hat[(g, 1)] for g in test.groups])
        b0 = np.array([self.fit0.b_hat[(g, 0)] for g in test.groups])
        x = np.asarray(test.x, dtype=np.float64)
        self.e1 = x - b1[gc]
        self.e0 = x - b0[gc]
        self.omega2 = dict(self.fit0.omega2)

    def replicate(self, s):
        cfg = self.cfg
        rng = _replicate_rng(cfg.seed, self.salt, cfg.replicate_offset + s)
        train_idx = self._draw_train_indices(rng)
        state = self._classifier_state(rng, train_idx)
        K = self.n_groups
        b1 = rng.normal(0.0, math.sqrt(self.omega2[1]), K)
        b0 = rng.normal(0.0, math.sqrt(self.omega2[0]), K)
        n = len(self.test)
        row_idx = rng.integers(0, n, n)
        y_star = rng.random(n) < self.a_l[row_idx]

        g_star = self.test.group_codes[row_idx]
        x_star = np.where(y_star,
                          self.e1[row_idx] + b1[g_star],
                          self.e0[row_idx] + b0[g_star])
        test_star = Dataset(
            z=self.test.z[row_idx], c=self.test.c[row_idx], k=self.test.k[row_idx],
            x=x_star, role="test",
        )
        p_tr, p_te = self._prob_pair(state, train_idx, row_idx)
        y_tr = self.y_train[train_idx]
        implied = self._implied_train_prevalence(state)
        pi_star, _ = _estimate_from_probs(cfg, p_tr, y_tr, p_te,
                                          implied_pi=implied)
        if cfg.shift_mode == "none":
            a_l_star = p_te
        else:
            pi_prime = float(np.mean(y_tr)) if implied is None else implied
            a_l_star = corrected_probs(p_te, pi_prime, pi_star)
        # single restart: replicates start from corrected-probability means
        fit_star = fit_hier_gmm(test_star, {self.c0: pi_star}, init=a_l_star,
                                restarts=1)
        return fit_star.beta[(self.c0, 1)], {"prevalence": pi_star}


# -- public procedures ---------------------------------------------------

def bootstrap_prevalence_ci(train, test, c, model, cfg):
    """Bootstrap CI for the class-1 prevalence of test condition c.

    Per replicate: resample training rows, draw or refit the classifier,
    resample test rows, re-estimate the prevalence by cfg.shift_method.
    """
    _warn_small_b(cfg)
    plan = _PrevalencePlan(train, test, c, model, cfg)
    point = _point_shift(model, train, test, cfg).prevalence_for(plan.c)
    rows = _execute(plan, cfg.B, cfg.workers)
    reps, n_failed, diags, errors = _collect(rows, cfg)
    interval = interval_from_replicates(point, reps, cfg.level, cfg.interval_kind)
    return BootstrapResult(
        point=float(point), replicates=reps, interval=interval, n_failed=n_failed,
        diagnostics={
            "replicate_shift": [None if d is None else d["prevalence"] for d in diags],
            "errors": errors,
            "condition": plan.c,
        },
    )


def _calibration_line(xs, vs):
    """Least-squares line of v^2 on omega^2*; degenerate spread collapses
    to the constant mean(v^2)."""
    xs = np.asarray(xs, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    xbar = xs.mean()
    sxx = float(np.sum((xs - xbar) ** 2))
    if xs.size < 2 or sxx < 1e-300:
        return 0.0, float(vs.mean())
    slope = float(np.sum((xs - xbar) * (vs - vs.mean())) / sxx)
    return slope, float(vs.mean() - slope * xbar)


def bootstrap_mean_ci_lmm(train, test, model, cfg, label_dependent=False,
                          variance_calibration=False):
    """Bootstrap CI for the class-1 mean via the weighted random-intercept
    model, regenerating x from residuals plus fresh group effects.

    With variance_calibration (label-dependent only) a first pass of B
    replicates records, per class, the refitted effect variance and the
    empirical variance of the drawn effects; the adjusted variance is the
    fitted least-squares line evaluated at the original estimate, floored
    at zero, and a second pass of B replicates on fresh streams yields
    the reported interval. The first pass equals the uncalibrated run
    replicate for replicate, and its summary is kept in diagnostics.
    """
    _warn_small_b(cfg)
    if variance_calibration and not label_dependent:
        raise DataError("variance calibration requires label-dependent effects")
    plan = _LmmPlan(train, test, model, cfg, label_dependent,
                    collect_variances=variance_calibration)
    point = plan.point
    rows = _execute(plan, cfg.B, cfg.workers)
    reps, n_failed, diags, errors = _collect(rows, cfg)
    shift_track = [None if d is None else d["prevalence"] for d in diags]
    base_diag = {
        "replicate_shift": shift_track,
        "errors": errors,
        "shift_point": dict(plan.point_shift.prevalence),
        "omega2": dict(plan.omega2),
        "label_dependent": label_dependent,
    }
    if not variance_calibration:
        interval = interval_from_replicates(point, reps, cfg.level, cfg.interval_kind)
        return BootstrapResult(point=float(point), replicates=reps,
                               interval=interval, n_failed=n_failed,
                               diagnostics=base_diag)

    pass1_interval = interval_from_replicates(point, reps, cfg.level,
                                              cfg.interval_kind)
    lines = {}
    omega2_adj = {}
    ok_diags = [d for d in diags if d is not None]
    for y in (1, 0):
        slope, intercept = _calibration_line(
            [d["omega2_star"][y] for d in ok_diags],
            [d["v2"][y] for d in ok_diags],
        )
        lines[y] = (slope, intercept)
        omega2_adj[y] = max(0.0, intercept + slope * plan.omega2[y])

    plan2 = plan.with_adjusted_variances(omega2_adj, SALT_LMM_CALIBRATED)
    rows2 = _execute(plan2, cfg.B, cfg.workers)
    reps2, n_failed2, diags2, errors2 = _collect(rows2, cfg)
    interval2 = interval_from_replicates(point, reps2, cfg.level, cfg.interval_kind)
    diag = dict(base_diag)
    diag.update({
        "replicate_shift": [None if d is None else d["prevalence"] for d in diags2],
        "errors": errors2,
        "omega2_adjusted": omega2_adj,
        "calibration_lines": lines,
        "pass1": {
            "replicates": reps,
            "interval": pass1_interval,
            "n_failed": n_failed,
            "replicate_shift": shift_track,
        },
    })
    return BootstrapResult(point=float(point), replicates=reps2,
                           interval=interval2, n_failed=n_failed2,
                           diagnostics=diag)


def bootstrap_mean_ci_mixture(train, test, model, cfg):
    """Bootstrap CI for the class-1 mean via the hierarchical mixture,
    regenerating both classes from per-class residuals and fresh effects."""
    _warn_small_b(cfg)
    plan = _MixturePlan(train, test, model, cfg)
    point = plan.point
    rows = _execute(plan, cfg.B, cfg.workers)
    reps, n_failed, diags, errors = _collect(rows, cfg)
    interval = interval_from_replicates(point, reps, cfg.level, cfg.interval_kind)
    return BootstrapResult(
        point=float(point), replicates=reps, interval=interval, n_failed=n_failed,
        diagnostics={
            "replicate_shift": [None if d is None else d["prevalence"] for d in diags],
            "errors": errors,
            "shift_point": dict(plan.point_shift.prevalence),
            "omega2": dict(plan.omega2),
            "initial_loglik": plan.fit0.loglik,
        },
    )
