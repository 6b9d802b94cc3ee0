"""Tests for the penalized logistic spline classifier."""

import dataclasses

import numpy as np
import pytest

from shiftboot.classifier import (
    LAMBDA_GRID,
    calibration_table,
    fit_classifier,
    load_model,
    model_from_dict,
    model_to_dict,
    predict_proba,
    sample_classifier,
    save_model,
)
from shiftboot.data import Dataset
from shiftboot.exceptions import DataError, FitError
from shiftboot.splines import BasisSpec


def make_training_data(rng, n=2000, pi=0.5, mu1=3.0):
    y = (rng.random(n) < pi).astype(np.int64)
    z = rng.normal(mu1 * y, 1.0)
    k = np.array([f"g{i % 10}" for i in range(n)])
    c = np.full(n, "train")
    return Dataset(z.reshape(-1, 1), c, k, y=y, role="training")


def newton_linear_logit(z, y, iters=50):
    """Plain two-parameter logistic MLE, fit by Newton steps."""
    X = np.column_stack([np.ones_like(z), z])
    beta = np.zeros(2)
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(X @ beta)))
        w = p * (1.0 - p)
        step = np.linalg.solve((X.T * w) @ X, X.T @ (y - p))
        beta = beta + step
        if np.max(np.abs(step)) < 1e-12:
            break
    return beta


class TestFitClassifier:
    def test_matches_bayes_oracle(self, gaussian_oracle):
        """Two unit-variance Gaussians three means apart: the fit should
        track the closed-form posterior probability closely."""
        rng = np.random.default_rng(42)
        train = make_training_data(rng, n=2000)
        model = fit_classifier(train)
        grid = np.linspace(train.z.min(), train.z.max(), 400)
        fitted = predict_proba(model, grid)
        oracle = gaussian_oracle(grid, float(np.mean(train.y)))
        assert np.mean(np.abs(fitted - oracle)) < 0.05

    def test_monotone_over_data_range(self):
        rng = np.random.default_rng(43)
        train = make_training_data(rng, n=2000)
        model = fit_classifier(train)
        grid = np.linspace(train.z.min(), train.z.max(), 400)
        fitted = predict_proba(model, grid)
        # class-1 density ratio rises in z, tiny spline wiggle allowed
        assert np.all(np.diff(fitted) > -1e-3)
        assert fitted[-1] > 0.9 > 0.1 > fitted[0]

    def test_single_class_rejected(self):
        rng = np.random.default_rng(1)
        z = rng.normal(0.0, 1.0, 100).reshape(-1, 1)
        k = np.array([f"g{i % 5}" for i in range(100)])
        train = Dataset(z, np.full(100, "t"), k,
                        y=np.zeros(100, dtype=np.int64), role="training")
        with pytest.raises(DataError, match="single-class"):
            fit_classifier(train)

    def test_large_penalty_collapses_to_linear_logit(self):
        """With a second-order difference penalty and uniform knots the
        penalty null space is exactly the linear-logit family, so a huge
        penalty reproduces the plain two-parameter fit."""
        rng = np.random.default_rng(44)
        train = make_training_data(rng, n=1500)
        spec = BasisSpec(knot_rule="uniform")
        model = fit_classifier(train, spec=spec, lambda_rule=1e6)
        grid = np.linspace(train.z.min() + 0.1, train.z.max() - 0.1, 200)
        fitted = predict_proba(model, grid)
        beta = newton_linear_logit(train.z[:, 0], train.y.astype(np.float64))
        linear = 1.0 / (1.0 + np.exp(-(beta[0] + beta[1] * grid)))
        assert np.max(np.abs(fitted - linear)) < 0.01

    def test_deviance_trace_non_increasing(self, s1_model):
        trace = np.asarray(s1_model.meta["deviance_trace"])
        assert np.all(np.diff(trace) <= 1e-8 * (1.0 + np.abs(trace[0])))

    def test_grid_selection_records_scores(self, s1_model):
        info = s1_model.meta["lambda_grid"]
        assert info["grid"] == [float(v) for v in LAMBDA_GRID]
        scores = info["heldout_deviance"]
        assert s1_model.lam == info["grid"][int(np.argmin(scores))]

    def test_fixed_lambda_rule(self, s1_pair):
        train, _, _ = s1_pair
        model = fit_classifier(train, lambda_rule=2.5)
        assert model.lam == 2.5
        assert model.meta["lambda_grid"] is None

    def test_lambda_validation(self, s1_pair):
        train, _, _ = s1_pair
        with pytest.raises(DataError, match="nonnegative"):
            fit_classifier(train, lambda_rule=-1.0)
        with pytest.raises(DataError, match="unknown lambda rule"):
            fit_classifier(train, lambda_rule="loocv")

    def test_train_prevalence_is_label_mean(self, s1_pair, s1_model):
        train, _, _ = s1_pair
        assert s1_model.train_prevalence == float(np.mean(train.y))

    def test_covariance_symmetric_psd(self, s1_model):
        cov = s1_model.cov
        np.testing.assert_allclose(cov, cov.T, rtol=0.0, atol=0.0)
        evals = np.linalg.eigvalsh(cov)
        assert evals.min() >= -1e-12 * max(evals.max(), 1.0)
        np.testing.assert_allclose(
            s1_model.cov_factor @ s1_model.cov_factor.T, cov, atol=1e-12)


class TestPredictProba:
    def test_probabilities_stay_interior(self, s1_model):
        # inputs far outside training support are clamped to the range edge
        p = predict_proba(s1_model, np.array([-1e6, 1e6]))
        assert np.all((p > 0.0) & (p < 1.0))
        lo, hi = s1_model.ranges[0]
        assert p[0] == predict_proba(s1_model, float(lo))
        assert p[1] == predict_proba(s1_model, float(hi))

    def test_scalar_gives_float(self, s1_model):
        out = predict_proba(s1_model, 1.5)
        assert isinstance(out, float)

    def test_zero_coefficients_give_half(self, s1_model):
        flat = dataclasses.replace(s1_model, coef=np.zeros_like(s1_model.coef))
        assert predict_proba(flat, 2.0) == 0.5

    def test_locally_positive_region(self, s1_model):
        # deep in the class-1 cluster
        assert predict_proba(s1_model, 3.0) > 0.5

    def test_dimension_mismatch(self, s1_model):
        with pytest.raises(DataError, match="dimension mismatch"):
            predict_proba(s1_model, np.ones((4, 3)))

    def test_logit_additive_across_features(self):
        """For an additive model, logits over a 2x2 grid of two-feature
        points satisfy the no-interaction identity."""
        rng = np.random.default_rng(45)
        n = 1200
        y = (rng.random(n) < 0.5).astype(np.int64)
        z = np.column_stack([rng.normal(3.0 * y, 1.0),
                             rng.normal(-2.0 * y, 1.0)])
        k = np.array([f"g{i % 8}" for i in range(n)])
        train = Dataset(z, np.full(n, "t"), k, y=y, role="training")
        model = fit_classifier(train)

        def logit(pt):
            p = predict_proba(model, np.asarray(pt))
            return np.log(p / (1.0 - p))

        ll = logit([0.5, -1.0]) + logit([2.0, 0.2])
        cross = logit([0.5, 0.2]) + logit([2.0, -1.0])
        assert ll == pytest.approx(cross, abs=1e-9)


class TestSampleClassifier:
    def test_zero_covariance_returns_exact_coefficients(self, s1_model):
        d = s1_model.coef.shape[0]
        frozen = dataclasses.replace(s1_model, cov=np.zeros((d, d)),
                                     cov_factor=np.zeros((d, d)))
        draw = sample_classifier(frozen, np.random.default_rng(0))
        assert np.array_equal(draw.coef, s1_model.coef)

    def test_draw_mean_matches_coefficients(self, s1_model):
        rng = np.random.default_rng(7)
        draws = np.array([sample_classifier(s1_model, rng).coef
                          for _ in range(10_000)])
        se = np.sqrt(np.diag(s1_model.cov) / draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - s1_model.coef)
                      <= 4.0 * se + 1e-12)

    def test_draw_covariance_matches_stored(self, s1_model):
        rng = np.random.default_rng(8)
        draws = np.array([sample_classifier(s1_model, rng).coef
                          for _ in range(10_000)])
        emp = np.cov(draws.T)
        cov = s1_model.cov
        dvar = np.diag(cov)
        # elementwise Gaussian MC error for covariance entries
        se = np.sqrt((np.outer(dvar, dvar) + cov ** 2) / draws.shape[0])
        assert np.all(np.abs(emp - cov) <= 6.0 * se + 1e-12)

    def test_same_seed_bit_identical(self, s1_model):
        a = sample_classifier(s1_model, np.random.default_rng(99)).coef
        b = sample_classifier(s1_model, np.random.default_rng(99)).coef
        assert np.array_equal(a, b)

    def test_keeps_penalty_and_basis(self, s1_model):
        draw = sample_classifier(s1_model, np.random.default_rng(3))
        assert draw.lam == s1_model.lam
        assert draw.spec == s1_model.spec
        assert draw.knots is s1_model.knots

    def test_non_finite_covariance_rejected(self, s1_model):
        bad = dataclasses.replace(s1_model, cov=np.full_like(s1_model.cov, np.nan))
        with pytest.raises(FitError, match="non-finite"):
            sample_classifier(bad, np.random.default_rng(0))


class TestCalibrationTable:
    def test_calibrated_constant(self):
        probs = np.full(10, 0.3)
        labels = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
        table = calibration_table(probs, labels, n_bins=1)
        assert table.mean_predicted[0] == pytest.approx(0.3, abs=1e-15)
        assert table.observed_rate[0] == pytest.approx(0.3, abs=1e-15)
        assert table.count[0] == 10

    def test_miscalibrated_constant(self):
        table = calibration_table(np.full(8, 0.9), np.zeros(8), n_bins=1)
        assert table.mean_predicted[0] == pytest.approx(0.9, abs=1e-15)
        assert table.observed_rate[0] == 0.0
        assert table.max_gap() == pytest.approx(0.9, abs=1e-15)

    def test_heldout_calibration_gap(self, gaussian_oracle):
        """Fresh draw from the training distribution: populated-bin gaps
        stay under 0.1."""
        rng = np.random.default_rng(46)
        train = make_training_data(rng, n=2000, pi=0.2)
        model = fit_classifier(train)
        # large held-out draw so per-bin binomial noise sits well under
        # the 0.1 contract
        y_new = (rng.random(20_000) < 0.2).astype(np.float64)
        z_new = rng.normal(3.0 * y_new, 1.0)
        table = calibration_table(predict_proba(model, z_new), y_new)
        assert table.max_gap() < 0.1

    def test_empty_bins_flagged(self):
        rng = np.random.default_rng(2)
        probs = rng.uniform(0.45, 0.55, 50)
        labels = (rng.random(50) < 0.5).astype(np.int64)
        table = calibration_table(probs, labels, n_bins=10)
        assert table.count[0] == 0 and table.count[-1] == 0
        assert not table.populated[0]
        rows = table.rows()
        assert rows[0]["mean_predicted"] is None
        assert rows[0]["count"] == 0
        assert np.isfinite(table.max_gap())

    def test_partition_and_counts(self):
        rng = np.random.default_rng(3)
        probs = rng.random(200)
        table = calibration_table(probs, np.zeros(200), n_bins=7)
        np.testing.assert_array_equal(table.edges, np.linspace(0.0, 1.0, 8))
        assert table.count.sum() == 200

    def test_validation(self):
        with pytest.raises(DataError, match="equal length"):
            calibration_table([0.5, 0.5], [1])
        with pytest.raises(DataError, match="n_bins"):
            calibration_table([0.5], [1], n_bins=0)


class TestSerialization:
    def test_json_round_trip(self, s1_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(s1_model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.coef, s1_model.coef)
        assert loaded.lam == s1_model.lam
        assert loaded.train_prevalence == s1_model.train_prevalence
        assert loaded.spec == s1_model.spec
        for a, b in zip(loaded.knots, s1_model.knots):
            assert np.array_equal(a, b)
        np.testing.assert_allclose(loaded.cov, s1_model.cov, atol=1e-12)
        grid = np.linspace(-2.0, 5.0, 50)
        np.testing.assert_array_equal(predict_proba(loaded, grid),
                                      predict_proba(s1_model, grid))

    def test_loaded_covariance_factorizes(self, s1_model):
        doc = model_to_dict(s1_model)
        loaded = model_from_dict(doc)
        np.testing.assert_allclose(
            loaded.cov_factor @ loaded.cov_factor.T, loaded.cov, atol=1e-12)
        evals = np.linalg.eigvalsh(loaded.cov)
        assert evals.min() >= -1e-12 * max(evals.max(), 1.0)
