"""Cubic B-spline basis construction for additive logistic models.

Each feature gets its own spline block. The first basis column of every
block is dropped and an explicit intercept column added, which removes the
partition-of-unity collinearity between blocks; difference penalties are
built on each reduced block's own coefficients.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import DataError, FitError

KNOT_RULES = ("quantile", "uniform")


@dataclasses.dataclass(frozen=True)
class BasisSpec:
    """Shape of the per-feature spline basis.

    n_knots counts interior knots per feature; placement follows
    ``knot_rule`` over the training data. The difference penalty of order
    ``penalty_order`` leaves polynomial coefficient trends of that order
    unpenalized.
    """

    n_knots: int = 10
    degree: int = 3
    knot_rule: str = "quantile"
    penalty_order: int = 2

    def __post_init__(self):
        if self.degree < 1:
            raise DataError("degree must be >= 1")
        if self.n_knots < self.degree + 1:
            raise DataError("knot count must be >= degree + 1")
        if self.knot_rule not in KNOT_RULES:
            raise DataError(f"unknown knot rule {self.knot_rule!r}")
        if self.penalty_order < 1:
            raise DataError("penalty order must be >= 1")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def feature_knots(values, spec):
    """Full (boundary-padded) knot vector for one feature.

    Interior knots follow the placement rule; duplicates are collapsed so
    knots stay strictly increasing inside the range.
    """
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min())
    hi = float(values.max())
    if not lo < hi:
        raise FitError("feature has zero range; cannot place spline knots")
    probs = np.linspace(0.0, 1.0, spec.n_knots + 2)[1:-1]
    if spec.knot_rule == "quantile":
        interior = np.quantile(values, probs)
    else:
        interior = lo + probs * (hi - lo)
    interior = np.unique(interior)
    interior = interior[(interior > lo) & (interior < hi)]
    pad = spec.degree + 1
    return np.concatenate([np.full(pad, lo), interior, np.full(pad, hi)])


def design_block(values, knots, degree):
    """Dense B-spline design block for one feature; values must lie in
    [knots[0], knots[-1]] (clamp before calling)."""
    values = np.asarray(values, dtype=np.float64)
    return BSpline.design_matrix(values, knots, degree).toarray()


def block_sizes(knots_list, spec):
    """Columns contributed by each feature block (first basis fn dropped)."""
    return [len(t) - spec.degree - 2 for t in knots_list]


def build_design(z, knots_list, ranges, spec):
    """Intercept column plus reduced spline blocks for every feature.

    z is clamped feature-wise to the training ranges, so bootstrap draws
    outside the original support evaluate at the boundary.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    blocks = [np.ones((n, 1))]
    for j, knots in enumerate(knots_list):
        vals = np.clip(z[:, j], ranges[j, 0], ranges[j, 1])
        blocks.append(design_block(vals, knots, spec.degree)[:, 1:])
    return np.hstack(blocks)


def build_penalty(sizes, spec):
    """Block-diagonal difference penalty; the intercept is unpenalized."""
    p = 1 + sum(sizes)
    S = np.zeros((p, p))
    offset = 1
    for size in sizes:
        if size > spec.penalty_order:
            D = np.diff(np.eye(size), n=spec.penalty_order, axis=0)
            S[offset : offset + size, offset : offset + size] = D.T @ D
        offset += size
    return S
