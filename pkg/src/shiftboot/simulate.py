"""Simulation scenarios and coverage studies.

Three scenarios stress the method's assumptions: S1 satisfies them all,
S2 shifts the training class-0 feature law so the classifier transfers
badly, and S3 adds a direct class effect to x so predictions stop being
sufficient. Each comes in a normal and a skewed variant and with shared
or label-dependent group effects.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .bootstrap import (
    BootstrapResult,
    bootstrap_mean_ci_lmm,
    bootstrap_mean_ci_mixture,
    bootstrap_prevalence_ci,
)
from .classifier import fit_classifier, predict_proba
from .data import Dataset
from .exceptions import DataError, FitError
from .shift import corrected_probs_by_condition

SCENARIOS = ("S1", "S2", "S3")
METHODS = ("prevalence", "lmm", "lmm-labeldep", "lmm-labeldep-calibrated", "mixture")

_SKEW_SCALE = 2.0
_SKEW_SHAPE = 3.0
# mean offset of SN(0, 2, 3): scale * delta * sqrt(2/pi)
_SKEW_OFFSET = _SKEW_SCALE * (_SKEW_SHAPE / math.sqrt(1.0 + _SKEW_SHAPE ** 2)) \
    * math.sqrt(2.0 / math.pi)


@dataclasses.dataclass(frozen=True)
class ScenarioSpec:
    """Generative settings for one simulation cell."""

    scenario: str = "S1"
    normal: bool = True
    label_dependent_re: bool = False
    m: int = 1000
    n: int = 3000
    n_groups: int = 15
    train_prevalence: float = 0.2
    test_prevalence: float = 0.4
    re_sd: float = math.sqrt(0.5)
    noise_sd: float = math.sqrt(0.2)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", str(self.scenario).upper())
        if self.scenario not in SCENARIOS:
            raise DataError(f"unknown scenario {self.scenario!r}; expected S1, S2, or S3")
        if self.m < 1 or self.n < 1 or self.n_groups < 1:
            raise DataError("sizes m, n, n_groups must be positive")
        for name in ("train_prevalence", "test_prevalence"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DataError(f"{name} must lie in (0, 1)")
        if self.re_sd < 0.0 or self.noise_sd < 0.0:
            raise DataError("re_sd and noise_sd must be nonnegative")
        if int(self.seed) != self.seed or self.seed < 0:
            raise DataError("seed must be a nonnegative integer")

    def to_dict(self):
        return dataclasses.asdict(self)


def sample_skew_normal(xi, omega, alpha, rng, size=None):
    """Skew-normal draw(s) via the bivariate-normal representation:
    xi + omega * (delta*|U0| + sqrt(1-delta^2)*U1) with delta derived
    from the shape parameter."""
    if omega <= 0.0:
        raise DataError("skew-normal scale must be positive")
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    u0 = rng.standard_normal(size)
    u1 = rng.standard_normal(size)
    return xi + omega * (delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * u1)


def skew_normal_mean(xi, omega, alpha):
    """Closed-form mean of SN(xi, omega, alpha)."""
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    return xi + omega * delta * math.sqrt(2.0 / math.pi)


def scenario_truth(spec):
    """True prevalence and class means implied by the generative laws."""
    if spec.normal:
        mu1, mu0 = 3.0, 0.0
    else:
        mu1, mu0 = 5.0 - _SKEW_OFFSET, _SKEW_OFFSET
    if spec.scenario == "S3":
        mu1 += 1.0
    return {
        "prevalence": spec.test_prevalence,
        "class_mean_1": mu1,
        "class_mean_0": mu0,
    }


def _draw_z(rng, y, spec, training):
    """Class-conditional feature draws; class 0 first, then class 1.
    S2 shifts the training-time class-0 location by -0.5."""
    z = np.empty(y.shape[0])
    i0 = np.flatnonzero(~y)
    i1 = np.flatnonzero(y)
    loc0 = -0.5 if training and spec.scenario == "S2" else 0.0
    if spec.normal:
        z[i0] = rng.normal(loc0, 1.0, i0.size)
        z[i1] = rng.normal(3.0, 1.0, i1.size)
    else:
        z[i0] = sample_skew_normal(loc0, _SKEW_SCALE, _SKEW_SHAPE, rng, size=i0.size)
        z[i1] = 8.0 - sample_skew_normal(3.0, _SKEW_SCALE, _SKEW_SHAPE, rng, size=i1.size)
    return z


def generate_scenario(spec, rng=None):
    """One (train, test, truth) triple.

    Training and test draws come from two spawned child streams, so the
    two sets are independent and the whole triple is reproducible from
    spec.seed (or from a caller-supplied generator).
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    rng_train, rng_test = rng.spawn(2)

    y_tr = rng_train.random(spec.m) < spec.train_prevalence
    z_tr = _draw_z(rng_train, y_tr, spec, training=True)
    g_tr = rng_train.integers(0, spec.n_groups, spec.m)
    train = Dataset(
        z=z_tr.reshape(-1, 1),
        c=["train"] * spec.m,
        k=[f"tg{g:02d}" for g in g_tr],
        y=y_tr.astype(np.int64),
        role="training",
    )

    y_te = rng_test.random(spec.n) < spec.test_prevalence
    z_te = _draw_z(rng_test, y_te, spec, training=False)
    g_te = rng_test.integers(0, spec.n_groups, spec.n)
    if spec.label_dependent_re:
        b0 = rng_test.normal(0.0, spec.re_sd, spec.n_groups)
        b1 = rng_test.normal(0.0, spec.re_sd, spec.n_groups)
        b_rec = np.where(y_te, b1[g_te], b0[g_te])
    else:
        b = rng_test.normal(0.0, spec.re_sd, spec.n_groups)
        b_rec = b[g_te]
    x = z_te + b_rec + rng_test.normal(0.0, spec.noise_sd, spec.n)
    if spec.scenario == "S3":
        x = x + y_te
    test = Dataset(
        z=z_te.reshape(-1, 1),
        c=["c1"] * spec.n,
        k=[f"g{g:02d}" for g in g_te],
        x=x,
        y=y_te.astype(np.int64),
        role="test",
    )
    return train, test, scenario_truth(spec)


# -- coverage studies ----------------------------------------------------

@dataclasses.dataclass
class CoverageCell:
    """Aggregates for one method within one scenario."""

    method: str
    truth: float
    mean_point: float
    mc_se: float
    coverage: float
    coverage_se: float
    n_pairs: int
    n_failed: int
    mean_lower: float
    mean_upper: float


@dataclasses.dataclass
class CoverageReport:
    spec: ScenarioSpec
    cells: dict
    meta: dict = dataclasses.field(default_factory=dict)

    def rows(self):
        out = []
        for method in sorted(self.cells):
            cell = self.cells[method]
            out.append({
                "scenario": self.spec.scenario,
                "normal": self.spec.normal,
                "label_dependent_re": self.spec.label_dependent_re,
                "method": method,
                "truth": cell.truth,
                "mean_point": cell.mean_point,
                "mc_se": cell.mc_se,
                "coverage": cell.coverage,
                "coverage_se": cell.coverage_se,
                "n_pairs": cell.n_pairs,
                "n_failed": cell.n_failed,
                "mean_lower": cell.mean_lower,
                "mean_upper": cell.mean_upper,
            })
        return out


def _pair_bootstrap_seed(cfg_seed, r):
    ss = np.random.SeedSequence((int(cfg_seed), 777, int(r)))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_method(method, train, test, model, cfg):
    """One bootstrap procedure; returns {outcome key: BootstrapResult}.
    The calibrated run also yields the uncalibrated result from its first
    pass, which uses the same streams an uncalibrated run would."""
    if method == "prevalence":
        res = bootstrap_prevalence_ci(train, test, test.conditions[0], model, cfg)
        return {"prevalence": res}
    if method == "lmm":
        return {"lmm": bootstrap_mean_ci_lmm(train, test, model, cfg)}
    if method == "lmm-labeldep":
        return {"lmm-labeldep": bootstrap_mean_ci_lmm(
            train, test, model, cfg, label_dependent=True)}
    if method == "lmm-labeldep-calibrated":
        res = bootstrap_mean_ci_lmm(train, test, model, cfg,
                                    label_dependent=True,
                                    variance_calibration=True)
        pass1 = res.diagnostics["pass1"]
        uncal = BootstrapResult(
            point=res.point,
            replicates=pass1["replicates"],
            interval=pass1["interval"],
            n_failed=pass1["n_failed"],
            diagnostics={"replicate_shift": pass1["replicate_shift"]},
        )
        return {"lmm-labeldep-calibrated": res, "lmm-labeldep": uncal}
    if method == "mixture":
        return {"mixture": bootstrap_mean_ci_mixture(train, test, model, cfg)}
    raise DataError(f"unknown method {method!r}; expected one of {METHODS}")


def coverage_study(spec, methods, R, cfg):
    """Empirical coverage over R regenerated (train, test) pairs.

    Every pair gets fresh data, a fresh classifier, and bootstrap seeds
    derived from (cfg.seed, pair index), so intervals are judged over the
    joint randomness of both datasets. Pair-level failures are counted
    per method and excluded from the aggregates.
    """
    methods = list(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise DataError(f"unknown method(s) {unknown}; expected one of {METHODS}")
    if not methods:
        raise DataError("no methods requested")
    if R < 1:
        raise DataError("R must be >= 1")
    # the calibrated run's first pass doubles as the uncalibrated run
    run_methods = list(methods)
    if "lmm-labeldep-calibrated" in run_methods and "lmm-labeldep" in run_methods:
        run_methods.remove("lmm-labeldep")

    truth = scenario_truth(spec)
    points = {m: [] for m in methods}
    covers = {m: [] for m in methods}
    lowers = {m: [] for m in methods}
    uppers = {m: [] for m in methods}
    failures = {m: [] for m in methods}

    for r in range(R):
        pair_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=spec.seed, spawn_key=(r,))
        )
        train, test, _ = generate_scenario(spec, pair_rng)
        pair_cfg = dataclasses.replace(cfg, seed=_pair_bootstrap_seed(cfg.seed, r))
        try:
            model = fit_classifier(train)
        except (DataError, FitError) as err:
            for m in methods:
                failures[m].append((r, f"classifier: {err}"))
            continue
        for m in run_methods:
            try:
                outcomes = _run_method(m, train, test, model, pair_cfg)
            except (DataError, FitError) as err:
                failures[m].append((r, str(err)))
                if m == "lmm-labeldep-calibrated" and "lmm-labeldep" in methods:
                    failures["lmm-labeldep"].append((r, str(err)))
                continue
            for name, res in outcomes.items():
                if name not in points:
                    continue
                target = truth["prevalence"] if name == "prevalence" \
                    else truth["class_mean_1"]
                points[name].append(res.point)
                covers[name].append(res.interval[0] <= target <= res.interval[1])
                lowers[name].append(res.interval[0])
                uppers[name].append(res.interval[1])

    cells = {}
    for m in methods:
        target = truth["prevalence"] if m == "prevalence" else truth["class_mean_1"]
        pts = np.asarray(points[m], dtype=np.float64)
        cov = np.asarray(covers[m], dtype=np.float64)
        n_ok = pts.size
        if n_ok:
            rate = float(cov.mean())
            cells[m] = CoverageCell(
                method=m,
                truth=target,
                mean_point=float(pts.mean()),
                mc_se=float(pts.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else 0.0,
                coverage=rate,
                coverage_se=math.sqrt(rate * (1.0 - rate) / n_ok),
                n_pairs=n_ok,
                n_failed=len(failures[m]),
                mean_lower=float(np.mean(lowers[m])),
                mean_upper=float(np.mean(uppers[m])),
            )
        else:
            cells[m] = CoverageCell(
                method=m, truth=target, mean_point=math.nan, mc_se=math.nan,
                coverage=math.nan, coverage_se=math.nan, n_pairs=0,
                n_failed=len(failures[m]), mean_lower=math.nan, mean_upper=math.nan,
            )
    return CoverageReport(
        spec=spec,
        cells=cells,
        meta={
            "R": R,
            "bootstrap": dataclasses.asdict(cfg),
            "failures": {m: failures[m] for m in methods if failures[m]},
        },
    )


def sufficiency_check(labeled, model, shift):
    """Compare corrected predictions from (z, condition) against a direct
    regression of the label on (z, x): if predictions capture everything
    x knows about the label, the two probability vectors agree."""
    if labeled.y is None:
        raise DataError("sufficiency check needs labeled data")
    if labeled.x is None or not np.all(np.isfinite(labeled.x)):
        raise DataError("sufficiency check needs a finite x for every record")
    a_raw = np.atleast_1d(predict_proba(model, labeled.z))
    a_l = corrected_probs_by_condition(a_raw, labeled.c, shift)

    augmented = Dataset(
        z=np.column_stack([labeled.z, labeled.x]),
        c=labeled.c, k=labeled.k, y=labeled.y, role="training",
    )
    direct = fit_classifier(augmented)
    p_xz = np.atleast_1d(predict_proba(direct, augmented.z))

    gap = float(np.mean(np.abs(a_l - p_xz)))
    if a_l.std() > 0.0 and p_xz.std() > 0.0:
        corr = float(np.corrcoef(a_l, p_xz)[0, 1])
    else:
        corr = 0.0
    return {
        "a_l": a_l,
        "p_xz": p_xz,
        "correlation": corr,
        "mean_abs_gap": gap,
    }
