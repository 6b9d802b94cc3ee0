"""Typed container, validation, and CSV ingestion for hierarchical datasets.

A dataset holds records (z, x, y, c, k): classifier features z, an optional
feature of interest x, an optional binary label y, a condition id c, and a
group id k. Groups are nested within conditions. Data are stored columnar
(numpy arrays) for speed; ``record(i)`` gives a per-row view when needed.
"""

from __future__ import annotations

import dataclasses
import re
from functools import cached_property

import numpy as np
import pandas as pd

from .exceptions import DataError

ROLES = ("training", "validation", "test")

_Z_PATTERN = re.compile(r"^z(\d+)$")


@dataclasses.dataclass(frozen=True)
class Record:
    """One observation: features, ids, and optional label/feature of interest."""

    z: np.ndarray
    c: str
    k: str
    x: float | None = None
    y: int | None = None


class Dataset:
    """Immutable columnar dataset.

    Parameters
    ----------
    z : (n, d) array
        Classifier features; must be finite.
    c, k : (n,) sequences of str
        Condition and group identifiers. Every group id must occur under
        exactly one condition.
    x : (n,) array or None
        Feature of interest; NaN marks a missing value.
    y : (n,) array of {0,1} or None
        Labels; either present for every record or absent entirely.
    role : {"training", "validation", "test"}

    Arrays are marked read-only after construction; instances are safe to
    share across parallel workers.
    """

    def __init__(self, z, c, k, x=None, y=None, role="test"):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.ndim != 2:
            raise DataError("z must be a 2-d array of classifier features")
        n = z.shape[0]
        if n == 0:
            raise DataError("empty dataset: no records")
        if z.shape[1] < 1:
            raise DataError("missing feature columns: need at least one z column")
        if not np.all(np.isfinite(z)):
            raise DataError("missing or non-finite classifier feature z")

        c = np.asarray([str(v) for v in np.asarray(c).ravel()], dtype=object)
        k = np.asarray([str(v) for v in np.asarray(k).ravel()], dtype=object)
        if c.shape[0] != n or k.shape[0] != n:
            raise DataError("c and k must have one entry per record")

        if x is not None:
            x = np.asarray(x, dtype=np.float64).ravel()
            if x.shape[0] != n:
                raise DataError("x must have one entry per record")
        if y is not None:
            y_arr = np.asarray(y).ravel()
            if y_arr.shape[0] != n:
                raise DataError("y must have one entry per record")
            y_float = y_arr.astype(np.float64)
            if np.any(np.isnan(y_float)):
                raise DataError("non-binary label: y present on some records only")
            if not np.all((y_float == 0.0) | (y_float == 1.0)):
                raise DataError("non-binary label: y values must be 0 or 1")
            y = y_float.astype(np.int8)

        if role not in ROLES:
            raise DataError(f"unknown role {role!r}; expected one of {ROLES}")
        if role == "training" and y is None:
            raise DataError("training role requires labels")

        # groups nested within conditions: each k under exactly one c
        seen: dict[str, str] = {}
        for ci, ki in zip(c, k):
            prev = seen.setdefault(ki, ci)
            if prev != ci:
                raise DataError(
                    f"group {ki!r} nested in two conditions ({prev!r}, {ci!r})"
                )

        for arr in (z, x, y):
            if arr is not None:
                arr.setflags(write=False)
        c.setflags(write=False)
        k.setflags(write=False)

        self.z = z
        self.x = x
        self.y = y
        self.c = c
        self.k = k
        self.role = role

    # -- basic shape ----------------------------------------------------

    def __len__(self):
        return self.z.shape[0]

    @property
    def n_records(self):
        return self.z.shape[0]

    @property
    def d(self):
        return self.z.shape[1]

    @property
    def labeled(self):
        return self.y is not None

    # -- derived indexes (computed once, cached) ------------------------

    @cached_property
    def conditions(self):
        """Sorted unique condition ids."""
        return tuple(sorted(set(self.c)))

    @cached_property
    def groups(self):
        """Sorted unique group ids."""
        return tuple(sorted(set(self.k)))

    @cached_property
    def cond_codes(self):
        lookup = {v: i for i, v in enumerate(self.conditions)}
        return np.fromiter((lookup[v] for v in self.c), dtype=np.int64, count=len(self))

    @cached_property
    def group_codes(self):
        lookup = {v: i for i, v in enumerate(self.groups)}
        return np.fromiter((lookup[v] for v in self.k), dtype=np.int64, count=len(self))

    @cached_property
    def group_condition_codes(self):
        """Condition code of each group (groups are nested, so unique)."""
        out = np.zeros(len(self.groups), dtype=np.int64)
        out[self.group_codes] = self.cond_codes
        return out

    # -- row access ------------------------------------------------------

    def record(self, i):
        return Record(
            z=self.z[i],
            c=self.c[i],
            k=self.k[i],
            x=None if self.x is None else float(self.x[i]),
            y=None if self.y is None else int(self.y[i]),
        )

    def records(self):
        return (self.record(i) for i in range(len(self)))

    def take(self, indices, role=None):
        """New Dataset from a row subset (indices or boolean mask)."""
        indices = np.asarray(indices)
        return Dataset(
            z=self.z[indices],
            c=self.c[indices],
            k=self.k[indices],
            x=None if self.x is None else self.x[indices],
            y=None if self.y is None else self.y[indices],
            role=self.role if role is None else role,
        )

    @classmethod
    def from_records(cls, records, role="test"):
        records = list(records)
        if not records:
            raise DataError("empty dataset: no records")
        y = [r.y for r in records]
        x = [r.x for r in records]
        return cls(
            z=np.vstack([np.atleast_1d(r.z) for r in records]),
            c=[r.c for r in records],
            k=[r.k for r in records],
            x=None if all(v is None for v in x) else [np.nan if v is None else v for v in x],
            y=None if all(v is None for v in y) else y,
            role=role,
        )


def _default_z_columns(columns):
    hits = []
    for name in columns:
        m = _Z_PATTERN.match(name)
        if m:
            hits.append((int(m.group(1)), name))
    return [name for _, name in sorted(hits)]


def load_dataset(path, schema=None, role="test"):
    """Read a CSV file into a validated Dataset.

    The schema maps logical fields to column names: keys "c", "k", "y",
    "x" (strings) and "z" (list of column names). Defaults: columns named
    c, k, y, x, and z1..zd. The y and x columns are optional unless the
    schema names them explicitly. Row order is preserved.
    """
    schema = dict(schema or {})
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DataError(f"empty file: {path}") from None
    if frame.shape[0] == 0:
        raise DataError(f"empty file: {path} has a header but no rows")

    def resolve(field, default, required):
        name = schema.get(field, default)
        explicit = field in schema
        if name in frame.columns:
            return name
        if required or explicit:
            raise DataError(f"missing column {name!r} for field {field!r}")
        return None

    c_col = resolve("c", "c", required=True)
    k_col = resolve("k", "k", required=True)
    y_col = resolve("y", "y", required=False)
    x_col = resolve("x", "x", required=False)

    z_cols = schema.get("z")
    if z_cols is None:
        z_cols = _default_z_columns(frame.columns)
        if not z_cols:
            raise DataError("missing feature columns: no z1..zd columns found")
    else:
        missing = [name for name in z_cols if name not in frame.columns]
        if missing:
            raise DataError(f"missing column(s) {missing} for field 'z'")

    try:
        z = frame[z_cols].to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as err:
        raise DataError(f"non-numeric value in feature columns: {err}") from None

    return Dataset(
        z=z,
        c=frame[c_col].to_numpy(),
        k=frame[k_col].to_numpy(),
        x=None if x_col is None else frame[x_col].to_numpy(dtype=np.float64),
        y=None if y_col is None else frame[y_col].to_numpy(),
        role=role,
    )


def save_dataset(data, path):
    """Write a Dataset back to CSV with the default column names."""
    cols = {"c": data.c, "k": data.k}
    if data.y is not None:
        cols["y"] = data.y
    if data.x is not None:
        cols["x"] = data.x
    for j in range(data.d):
        cols[f"z{j + 1}"] = data.z[:, j]
    pd.DataFrame(cols).to_csv(path, index=False)


def split_by_group(data, holdout_groups):
    """Partition records by group membership; no group straddles the split.

    Returns (rest, holdout). Raises on unknown ids or an empty side.
    """
    holdout = {str(g) for g in holdout_groups}
    unknown = holdout - set(data.groups)
    if unknown:
        raise DataError(f"unknown group id(s): {sorted(unknown)}")
    mask = np.fromiter((ki in holdout for ki in data.k), dtype=bool, count=len(data))
    if mask.all():
        raise DataError("empty training split: holdout contains every group")
    if not mask.any():
        raise DataError("empty holdout split: no groups selected")
    return data.take(~mask), data.take(mask)


def condition_prevalence(data, c):
    """Fraction of y=1 among records with condition c."""
    if not data.labeled:
        raise DataError("unlabeled dataset: prevalence needs labels")
    c = str(c)
    mask = data.c == c
    if not mask.any():
        raise DataError(f"unknown condition {c!r}")
    return float(np.mean(data.y[mask]))
