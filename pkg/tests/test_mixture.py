"""Tests for the fixed-mixing hierarchical Gaussian mixture EM."""

import math

import numpy as np
import pytest

from shiftboot.data import Dataset
from shiftboot.exceptions import DataError
from shiftboot.lmm import fit_weighted_lmm
from shiftboot.mixture import (
    MixtureFit,
    component_curves,
    fit_hier_gmm,
    mixture_loglik,
)


def make_x_data(x, cond, groups):
    n = len(x)
    return Dataset(np.zeros((n, 1)), np.asarray(cond), np.asarray(groups),
                   x=np.asarray(x, dtype=np.float64), role="test")


def two_component_sample(rng, n=400, m0=-3.0, m1=-2.0, sd=0.1, pi=0.5,
                         n_groups=4, re_sd=0.0):
    y = (rng.random(n) < pi).astype(np.int64)
    groups = np.array([f"g{i % n_groups}" for i in range(n)])
    b = {f"g{j}": rng.normal(0.0, re_sd) if re_sd > 0.0 else 0.0
         for j in range(n_groups)}
    x = np.where(y == 1, m1, m0) + np.array([b[g] for g in groups])
    x = x + rng.normal(0.0, sd, n)
    return make_x_data(x, ["c"] * n, groups), y


def flat_fit(beta0, beta1, sig0=1.0, sig1=1.0, conds=("c",), groups=("g",)):
    """Hand-built fit with no random effects and no penalty."""
    beta = {}
    b_hat = {}
    for c in conds:
        beta[(c, 1)] = beta1
        beta[(c, 0)] = beta0
    for g in groups:
        b_hat[(g, 1)] = 0.0
        b_hat[(g, 0)] = 0.0
    return MixtureFit(beta=beta, sigma2={1: sig1, 0: sig0},
                      omega2={1: 0.0, 0: 0.0}, b_hat=b_hat,
                      responsibilities=np.array([]), loglik=0.0)


class TestFitHierGmm:
    def test_well_separated_components_recovered(self):
        rng = np.random.default_rng(51)
        data, _ = two_component_sample(rng)
        fit = fit_hier_gmm(data, {"c": 0.5})
        assert fit.beta[("c", 1)] == pytest.approx(-2.0, abs=0.05)
        assert fit.beta[("c", 0)] == pytest.approx(-3.0, abs=0.05)
        assert fit.sigma2[1] == pytest.approx(0.01, rel=0.5)

    def test_em_trace_monotone_on_random_instances(self):
        """Penalized log-likelihood must climb at every EM step, except
        across an omega->0 boundary snap where the objective convention
        changes (those iterations are recorded in the meta)."""
        rng = np.random.default_rng(52)
        for case in range(100):
            n = int(rng.integers(16, 41))
            n_groups = int(rng.integers(2, 5))
            gap = rng.uniform(0.5, 3.0)
            sd = rng.uniform(0.3, 1.5)
            pi = rng.uniform(0.15, 0.85)
            re_sd = rng.uniform(0.0, 0.8)
            data, _ = two_component_sample(
                rng, n=n, m0=0.0, m1=gap, sd=sd, pi=pi,
                n_groups=n_groups, re_sd=re_sd)
            fit = fit_hier_gmm(data, {"c": pi}, restarts=1)
            trace = np.asarray(fit.meta["trace"])
            resets = {it for it in fit.meta["variance_boundary"].values()
                      if it is not None}
            for j in range(1, len(trace)):
                if j + 1 in resets or j in resets:
                    continue
                assert trace[j] >= trace[j - 1] - 1e-8 * (abs(trace[j - 1]) + 1.0), \
                    f"case {case}: EM step {j} decreased"

    def test_label_swap_symmetry(self):
        rng = np.random.default_rng(53)
        data, y = two_component_sample(rng, n=200, m0=0.0, m1=1.5, sd=0.6,
                                       pi=0.3)
        init = np.clip(y.astype(np.float64), 0.05, 0.95)
        fit = fit_hier_gmm(data, {"c": 0.3}, init=init, restarts=1)
        mirror = fit_hier_gmm(data, {"c": 0.7}, init=1.0 - init, restarts=1)
        assert mirror.beta[("c", 0)] == pytest.approx(fit.beta[("c", 1)], abs=1e-6)
        assert mirror.beta[("c", 1)] == pytest.approx(fit.beta[("c", 0)], abs=1e-6)
        assert mirror.sigma2[0] == pytest.approx(fit.sigma2[1], rel=1e-6)
        assert mirror.omega2[0] == pytest.approx(fit.omega2[1], abs=1e-8)
        np.testing.assert_allclose(mirror.responsibilities,
                                   1.0 - fit.responsibilities, atol=1e-6)

    def test_mixing_near_one_matches_single_class_lmm(self):
        """As the class-1 proportion approaches 1, component 1 absorbs all
        records and its estimates approach the weighted mixed-model fit."""
        rng = np.random.default_rng(54)
        n = 60
        groups = np.array([f"g{i % 3}" for i in range(n)])
        b = {"g0": 0.3, "g1": -0.2, "g2": 0.1}
        x = 2.0 + np.array([b[g] for g in groups]) + rng.normal(0.0, 0.4, n)
        data = make_x_data(x, ["c"] * n, groups)
        gmm = fit_hier_gmm(data, {"c": 1.0 - 1e-9}, restarts=1)
        lmm = fit_weighted_lmm(data, np.ones(n))
        assert gmm.beta[("c", 1)] == pytest.approx(lmm.beta[("c", 1)], abs=1e-3)

    def test_responsibilities_satisfy_bayes_rule(self):
        rng = np.random.default_rng(55)
        data, _ = two_component_sample(rng, n=300, m0=0.0, m1=2.0, sd=0.8,
                                       pi=0.4, re_sd=0.3)
        fit = fit_hier_gmm(data, {"c": 0.4})
        mu1 = np.array([fit.beta[(c, 1)] for c in data.c]) \
            + np.array([fit.b_hat[(g, 1)] for g in data.k])
        mu0 = np.array([fit.beta[(c, 0)] for c in data.c]) \
            + np.array([fit.b_hat[(g, 0)] for g in data.k])
        f1 = 0.4 * np.exp(-0.5 * (data.x - mu1) ** 2 / fit.sigma2[1]) \
            / math.sqrt(fit.sigma2[1])
        f0 = 0.6 * np.exp(-0.5 * (data.x - mu0) ** 2 / fit.sigma2[0]) \
            / math.sqrt(fit.sigma2[0])
        np.testing.assert_allclose(fit.responsibilities, f1 / (f1 + f0),
                                   atol=1e-10)

    def test_loglik_beats_brute_force_grid(self):
        """Tiny single-group instance: no (beta0, beta1) grid point at the
        EM solution's variances scores a higher penalized likelihood."""
        rng = np.random.default_rng(56)
        y = (rng.random(20) < 0.4).astype(np.int64)
        x = np.where(y == 1, 2.5, 0.0) + rng.normal(0.0, 0.7, 20)
        data = make_x_data(x, ["c"] * 20, ["g"] * 20)
        fit = fit_hier_gmm(data, {"c": 0.4})
        assert fit.omega2 == {1: 0.0, 0: 0.0}
        assert fit.loglik == pytest.approx(
            mixture_loglik(fit, data, {"c": 0.4}), rel=1e-9)
        grid = np.linspace(x.min(), x.max(), 41)
        best = -np.inf
        for b0 in grid:
            for b1 in grid:
                cand = flat_fit(float(b0), float(b1),
                                sig0=fit.sigma2[0], sig1=fit.sigma2[1])
                best = max(best, mixture_loglik(cand, data, {"c": 0.4}))
        assert fit.loglik >= best - 1e-9

    def test_collapse_reported(self):
        x = np.full(30, 1.7)
        groups = np.repeat(["g1", "g2"], 15)
        fit = fit_hier_gmm(make_x_data(x, ["c"] * 30, groups), {"c": 0.5})
        assert fit.meta["collapsed"]
        assert fit.sigma2[1] == pytest.approx(1e-10)

    def test_group_keyed_mixing(self):
        rng = np.random.default_rng(57)
        data, _ = two_component_sample(rng, n=200, n_groups=2)
        mixing = {"g0": 0.45, "g1": 0.55}
        fit = fit_hier_gmm(data, mixing)
        assert fit.meta["mixing_keyed_by"] == "group"
        assert fit.beta[("c", 1)] == pytest.approx(-2.0, abs=0.06)

    def test_validation(self):
        rng = np.random.default_rng(58)
        data, _ = two_component_sample(rng, n=40)
        with pytest.raises(DataError, match="cover every condition"):
            fit_hier_gmm(data, {"other": 0.5})
        with pytest.raises(DataError, match="strictly in"):
            fit_hier_gmm(data, {"c": 1.0})
        with pytest.raises(DataError, match="one entry per record"):
            fit_hier_gmm(data, {"c": 0.5}, init=np.array([0.5]))
        with pytest.raises(DataError, match="lie in"):
            fit_hier_gmm(data, {"c": 0.5}, init=np.full(40, 1.5))
        with pytest.raises(DataError, match="restarts"):
            fit_hier_gmm(data, {"c": 0.5}, restarts=0)
        no_x = Dataset(np.zeros((2, 1)), ["c"] * 2, ["g", "g"], role="test")
        with pytest.raises(DataError, match="finite x"):
            fit_hier_gmm(no_x, {"c": 0.5})


class TestMixtureLoglik:
    def test_hand_value_single_record(self):
        """One record sitting on component 1's mean, two units from
        component 0, unit variances, even mixing."""
        data = make_x_data([0.0], ["c"], ["g"])
        fit = flat_fit(beta0=2.0, beta1=0.0)
        expected = math.log(
            0.5 * math.exp(0.0) / math.sqrt(2.0 * math.pi)
            + 0.5 * math.exp(-2.0) / math.sqrt(2.0 * math.pi))
        assert mixture_loglik(fit, data, {"c": 0.5}) == pytest.approx(
            expected, rel=1e-12)

    def test_duplication_doubles_unpenalized_loglik(self):
        rng = np.random.default_rng(59)
        x = rng.normal(0.5, 1.0, 6)
        groups = np.repeat(["g1", "g2"], 3)
        single = make_x_data(x, ["c"] * 6, groups)
        double = make_x_data(np.concatenate([x, x]), ["c"] * 12,
                             np.concatenate([groups, groups]))
        fit = flat_fit(beta0=-0.5, beta1=1.0, conds=("c",),
                       groups=("g1", "g2"))
        ll1 = mixture_loglik(fit, single, {"c": 0.35})
        ll2 = mixture_loglik(fit, double, {"c": 0.35})
        assert ll2 == pytest.approx(2.0 * ll1, rel=1e-12)

    def test_missing_fit_entries_rejected(self):
        data = make_x_data([0.0, 1.0], ["c"] * 2, ["g", "h"])
        fit = flat_fit(0.0, 1.0, conds=("c",), groups=("g",))
        with pytest.raises(DataError, match="does not cover"):
            mixture_loglik(fit, data, {"c": 0.5})


class TestComponentCurves:
    def test_export_shape(self):
        rng = np.random.default_rng(60)
        data, _ = two_component_sample(rng, n=80, n_groups=2)
        fit = fit_hier_gmm(data, {"c": 0.5})
        curves = component_curves(fit, data, n_points=50)
        assert set(curves.columns) == {"group", "cls", "x", "density"}
        assert len(curves) == 2 * 2 * 50
        assert (curves["density"] >= 0.0).all()
