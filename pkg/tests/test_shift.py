"""Tests for prevalence estimation and probability correction."""

import numpy as np
import pytest

from shiftboot.data import Dataset
from shiftboot.exceptions import DataError, FitError
from shiftboot.kernels import fixed_point_curve
from shiftboot.shift import (
    ShiftEstimate,
    correct_predictions,
    corrected_probs,
    corrected_probs_by_condition,
    discretization_solve,
    estimate_prevalence_discretization,
    estimate_prevalence_fixed_point,
    fixed_point_search,
    naive_prevalence,
)
from shiftboot.classifier import fit_classifier, predict_proba
from shiftboot.simulate import ScenarioSpec, generate_scenario


def _two_conditions_by_group(test):
    # groups nest inside conditions, so split the group set in half
    half = set(test.groups[: len(test.groups) // 2])
    return np.where(np.isin(test.k, list(half)), "a", "b")


class TestCorrectPredictions:
    def test_hand_value(self):
        # (2.0 * 0.5) / (2.0 * 0.5 + 0.75 * 0.5)
        out = correct_predictions(0.5, 0.2, 0.4)
        assert out == pytest.approx(8.0 / 11.0, abs=1e-15)

    def test_identity_when_prevalences_agree(self):
        p = np.linspace(0.01, 0.99, 23)
        np.testing.assert_allclose(correct_predictions(p, 0.3, 0.3), p,
                                   rtol=1e-15)

    def test_boundary_fixed_points_exact(self):
        out = correct_predictions(np.array([0.0, 1.0, 0.5]), 0.2, 0.4)
        assert out[0] == 0.0
        assert out[1] == 1.0
        assert 0.0 < out[2] < 1.0

    def test_strictly_monotone(self):
        p = np.linspace(1e-4, 1.0 - 1e-4, 500)
        out = correct_predictions(p, 0.7, 0.2)
        assert np.all(np.diff(out) > 0.0)

    def test_inversion_with_swapped_prevalences(self):
        """Correcting train->test and then test->train is the identity."""
        rng = np.random.default_rng(5)
        p = rng.uniform(0.001, 0.999, size=200)
        back = correct_predictions(correct_predictions(p, 0.2, 0.4), 0.4, 0.2)
        assert np.max(np.abs(back - p)) < 1e-12

    def test_scalar_in_float_out(self):
        out = correct_predictions(0.25, 0.5, 0.5)
        assert isinstance(out, float)
        assert out == pytest.approx(0.25, abs=1e-15)

    def test_rejects_degenerate_train_prevalence(self):
        with pytest.raises(DataError, match="pi_train"):
            correct_predictions(0.5, 0.0, 0.4)
        with pytest.raises(DataError, match="pi_train"):
            correct_predictions(0.5, 1.0, 0.4)

    def test_rejects_out_of_range_test_prevalence(self):
        with pytest.raises(DataError, match="pi_test"):
            correct_predictions(0.5, 0.2, -0.01)

    def test_pipeline_form_clips_first(self):
        # raw 0/1 get pulled to the clip bounds, so no exact pass-through
        out = corrected_probs(np.array([0.0, 1.0]), 0.2, 0.4)
        assert 0.0 < out[0] < out[1] < 1.0
        assert out[0] == correct_predictions(1e-6, 0.2, 0.4)


class TestDiscretizationSolve:
    def test_hand_example(self):
        """2x2 solve by hand: M^-1 q = [0.7, 2.2], and 2.2 * 0.2 = 0.44."""
        M = np.array([[0.7, 0.05], [0.1, 0.15]])
        est, clipped = discretization_solve(M, np.array([0.6, 0.4]), 0.2)
        assert est == pytest.approx(0.44, abs=1e-15)
        assert not clipped

    def test_perfect_classifier_identity(self):
        # M = diag(train priors): estimate equals the predicted-positive rate
        M = np.diag([0.8, 0.2])
        est, clipped = discretization_solve(M, np.array([0.55, 0.45]), 0.2)
        assert est == pytest.approx(0.45, rel=1e-12)
        assert not clipped

    def test_singular_matrix_rejected(self):
        M = np.array([[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(FitError, match="singular"):
            discretization_solve(M, np.array([0.6, 0.4]), 0.2)

    def test_out_of_range_solution_clipped_and_flagged(self):
        M = np.array([[0.5, 0.1], [0.1, 0.3]])
        est, clipped = discretization_solve(M, np.array([0.0, 1.0]), 0.9)
        assert est == 1.0
        assert clipped


class TestDiscretizationEstimator:
    def test_no_shift_recovers_training_prevalence(self):
        """Test set drawn from the training distribution: the estimate
        should sit near the training prevalence."""
        spec = ScenarioSpec(scenario="S1", normal=True, test_prevalence=0.2,
                            seed=7)
        train, test, _ = generate_scenario(spec)
        model = fit_classifier(train)
        shift = estimate_prevalence_discretization(model, train, test)
        pi_train = float(np.mean(train.y))
        assert shift.prevalence_for("c1") == pytest.approx(pi_train, abs=0.04)
        assert shift.method == "discretization"
        assert "M" in shift.diagnostics

    def test_requires_labeled_training_data(self, s1_pair, s1_model):
        train, test, _ = s1_pair
        unlabeled = Dataset(train.z, train.c, train.k, role="test")
        with pytest.raises(DataError, match="labeled"):
            estimate_prevalence_discretization(s1_model, unlabeled, test)

    def test_threshold_must_be_interior(self, s1_pair, s1_model):
        train, test, _ = s1_pair
        with pytest.raises(DataError, match="threshold"):
            estimate_prevalence_discretization(s1_model, train, test, h=1.0)

    def test_invariant_to_test_row_permutation(self, s1_pair, s1_model):
        train, test, _ = s1_pair
        c = _two_conditions_by_group(test)
        base = Dataset(test.z, c, test.k, role="test")
        perm = np.random.default_rng(11).permutation(len(c))
        shuffled = Dataset(test.z[perm], c[perm], test.k[perm], role="test")
        est0 = estimate_prevalence_discretization(s1_model, train, base)
        est1 = estimate_prevalence_discretization(s1_model, train, shuffled)
        assert est0.prevalence == est1.prevalence

    def test_invariant_to_condition_relabeling(self, s1_pair, s1_model):
        train, test, _ = s1_pair
        c = _two_conditions_by_group(test)
        renamed = np.where(c == "a", "x", "y")
        est0 = estimate_prevalence_discretization(
            s1_model, train, Dataset(test.z, c, test.k, role="test"))
        est1 = estimate_prevalence_discretization(
            s1_model, train, Dataset(test.z, renamed, test.k, role="test"))
        assert est1.prevalence["x"] == est0.prevalence["a"]
        assert est1.prevalence["y"] == est0.prevalence["b"]


class TestFixedPointSearch:
    def _objective_on_grid(self, odds, pi_train, search_range, grid_size):
        # mirror of the search objective, evaluated over the coarse grid
        a, b = search_range
        grid = np.linspace(a, b, grid_size)
        train_odds = pi_train / (1.0 - pi_train)
        t = train_odds * (1.0 - grid) / grid
        return grid, np.abs(fixed_point_curve(odds, t) - grid)

    def test_estimate_minimizes_objective_over_grid(self):
        rng = np.random.default_rng(3)
        p = rng.beta(2.0, 5.0, size=800)
        odds = p / (1.0 - p)
        est, info = fixed_point_search(odds, 0.2)
        grid, obj = self._objective_on_grid(odds, 0.2, (0.001, 0.999), 2000)
        assert info["objective"] <= obj.min()
        assert info["coarse_objective"] == obj[np.argmin(obj)]
        assert info["coarse_estimate"] == grid[np.argmin(obj)]

    def test_grid_refinement_stability(self):
        """A 10x finer grid moves the minimizer by at most one coarse step."""
        rng = np.random.default_rng(9)
        p = rng.beta(2.0, 4.0, size=1500)
        odds = p / (1.0 - p)
        coarse, _ = fixed_point_search(odds, 0.25, grid_size=200)
        fine, _ = fixed_point_search(odds, 0.25, grid_size=2000)
        step = (0.999 - 0.001) / (200 - 1)
        assert abs(fine - coarse) <= step

    def test_recovers_shifted_prevalence_from_oracle_probs(self, gaussian_oracle):
        """Posterior probabilities computed at the training prior, scored on
        a test draw with a different class balance, locate the new one."""
        rng = np.random.default_rng(21)
        n = 4000
        y = rng.random(n) < 0.4
        z = np.where(y, rng.normal(3.0, 1.0, n), rng.normal(0.0, 1.0, n))
        p = gaussian_oracle(z, 0.2)
        est, _ = fixed_point_search(p / (1.0 - p), 0.2)
        assert est == pytest.approx(0.4, abs=0.02)

    def test_no_shift_is_a_fixed_point(self, gaussian_oracle):
        rng = np.random.default_rng(22)
        n = 4000
        y = rng.random(n) < 0.2
        z = np.where(y, rng.normal(3.0, 1.0, n), rng.normal(0.0, 1.0, n))
        p = gaussian_oracle(z, 0.2)
        est, _ = fixed_point_search(p / (1.0 - p), 0.2)
        assert est == pytest.approx(0.2, abs=0.02)

    def test_search_range_validation(self):
        odds = np.ones(10)
        with pytest.raises(DataError, match="search range"):
            fixed_point_search(odds, 0.2, search_range=(0.5, 0.5))
        with pytest.raises(DataError, match="grid_size"):
            fixed_point_search(odds, 0.2, grid_size=1)


class TestFixedPointEstimator:
    def test_paper_scenario_mean_estimate(self):
        """Averaged over fresh simulations of the 0.2 -> 0.4 shift design,
        the fixed-point estimate lands on the true test prevalence."""
        estimates = []
        for seed in range(6):
            spec = ScenarioSpec(scenario="S1", normal=True, seed=300 + seed)
            train, test, _ = generate_scenario(spec)
            model = fit_classifier(train)
            shift = estimate_prevalence_fixed_point(model, test)
            estimates.append(shift.prevalence_for("c1"))
        assert np.mean(estimates) == pytest.approx(0.40, abs=0.02)

    def test_no_shift_recovers_training_prevalence(self):
        spec = ScenarioSpec(scenario="S1", normal=True, test_prevalence=0.2,
                            seed=7)
        train, test, _ = generate_scenario(spec)
        model = fit_classifier(train)
        shift = estimate_prevalence_fixed_point(model, test)
        assert shift.prevalence_for("c1") == pytest.approx(
            model.train_prevalence, abs=0.03)

    def test_diagnostics_carry_search_settings(self, s1_pair, s1_model):
        _, test, _ = s1_pair
        shift = estimate_prevalence_fixed_point(s1_model, test, grid_size=500)
        info = shift.diagnostics["c1"]
        assert info["grid_size"] == 500
        assert info["search_range"] == [0.001, 0.999]
        assert info["objective"] <= info["coarse_objective"]


class TestNaivePrevalence:
    def test_constant_predictions(self, s1_pair, s1_model, monkeypatch):
        _, test, _ = s1_pair
        monkeypatch.setattr("shiftboot.shift.predict_proba",
                            lambda model, z: np.full(len(z), 0.3))
        shift = naive_prevalence(s1_model, test)
        assert shift.prevalence_for("c1") == pytest.approx(0.3, abs=1e-15)

    def test_biased_below_truth_under_shift(self, s1_pair, s1_model):
        """Uncorrected prediction means undershoot when the test class
        balance exceeds the training one."""
        _, test, _ = s1_pair
        naive = naive_prevalence(s1_model, test).prevalence_for("c1")
        fixed = estimate_prevalence_fixed_point(s1_model, test).prevalence_for("c1")
        assert naive < fixed
        assert naive < 0.37

    def test_matches_per_condition_prediction_means(self, s1_pair, s1_model):
        _, test, _ = s1_pair
        c = _two_conditions_by_group(test)
        ds = Dataset(test.z, c, test.k, role="test")
        shift = naive_prevalence(s1_model, ds)
        p = np.atleast_1d(predict_proba(s1_model, ds.z))
        for cond in ("a", "b"):
            assert shift.prevalence[cond] == float(np.mean(p[c == cond]))

    def test_unknown_condition_query(self, s1_pair, s1_model):
        _, test, _ = s1_pair
        shift = naive_prevalence(s1_model, test)
        with pytest.raises(DataError, match="unknown condition"):
            shift.prevalence_for("nope")


class TestConditionApplication:
    def test_rows_get_their_own_condition_correction(self):
        shift = ShiftEstimate(method="fixed_point",
                              prevalence={"a": 0.4, "b": 0.6},
                              train_prevalence=0.2)
        rng = np.random.default_rng(13)
        p = rng.uniform(0.05, 0.95, size=40)
        cond = np.where(rng.random(40) < 0.5, "a", "b")
        out = corrected_probs_by_condition(p, cond, shift)
        for label, pi in (("a", 0.4), ("b", 0.6)):
            mask = cond == label
            np.testing.assert_allclose(out[mask],
                                       corrected_probs(p[mask], 0.2, pi),
                                       rtol=1e-14)
