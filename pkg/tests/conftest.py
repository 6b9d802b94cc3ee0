"""Shared fixtures: one simulated pair plus a fitted classifier, reused
across test modules to keep the suite fast on one core."""

import numpy as np
import pytest

from shiftboot.classifier import fit_classifier
from shiftboot.simulate import ScenarioSpec, generate_scenario


@pytest.fixture(scope="session")
def s1_pair():
    spec = ScenarioSpec(scenario="S1", normal=True, seed=101)
    train, test, truth = generate_scenario(spec)
    return train, test, truth


@pytest.fixture(scope="session")
def s1_model(s1_pair):
    train, _, _ = s1_pair
    return fit_classifier(train)


@pytest.fixture(scope="session")
def s3_pair():
    spec = ScenarioSpec(scenario="S3", normal=True, seed=202)
    train, test, truth = generate_scenario(spec)
    return train, test, truth


def _gaussian_oracle_probs(z, pi, mu1=3.0, mu0=0.0, sd=1.0):
    """True class-1 posterior for the two-Gaussian generative family."""
    z = np.asarray(z, dtype=np.float64)
    f1 = np.exp(-0.5 * ((z - mu1) / sd) ** 2)
    f0 = np.exp(-0.5 * ((z - mu0) / sd) ** 2)
    return pi * f1 / (pi * f1 + (1.0 - pi) * f0)


@pytest.fixture(scope="session")
def gaussian_oracle():
    return _gaussian_oracle_probs
