"""Datasets: synthetic Gaussian mixtures, CSV ingestion, min-max scaling, splits."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .rng import make_rng


class SchemaError(ValueError):
    pass


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    levels: tuple[str, ...] | None = None  # None for numeric columns

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None

    @property
    def width(self) -> int:
        return len(self.levels) if self.levels is not None else 1


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[Column, ...]
    label_column: str
    positive_label: str

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in {names}")
        if self.label_column in names:
            raise SchemaError(f"label column {self.label_column!r} listed among features")
        for c in self.columns:
            if c.levels is not None:
                if len(c.levels) == 0:
                    raise SchemaError(f"categorical column {c.name!r} has no levels")
                if len(set(c.levels)) != len(c.levels):
                    raise SchemaError(f"categorical column {c.name!r} has repeated levels")

    @property
    def feature_names(self) -> list[str]:
        out = []
        for c in self.columns:
            if c.levels is None:
                out.append(c.name)
            else:
                out.extend(f"{c.name}={lvl}" for lvl in c.levels)
        return out

    @property
    def n_features(self) -> int:
        return sum(c.width for c in self.columns)

    def one_hot_groups(self) -> list[slice]:
        """Column slices of the expanded matrix belonging to each categorical column."""
        groups, start = [], 0
        for c in self.columns:
            if c.levels is not None:
                groups.append(slice(start, start + c.width))
            start += c.width
        return groups

    @classmethod
    def numeric(cls, names, label_column="y", positive_label="1") -> "FeatureSchema":
        return cls(tuple(Column(n) for n in names), label_column, positive_label)

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            kind = "numeric" if c.levels is None else {"categorical": list(c.levels)}
            cols.append({"name": c.name, "kind": kind})
        return {"columns": cols, "label": self.label_column, "positive": self.positive_label}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        try:
            cols = []
            for entry in d["columns"]:
                kind = entry["kind"]
                if kind == "numeric":
                    cols.append(Column(str(entry["name"])))
                elif isinstance(kind, dict) and "categorical" in kind:
                    cols.append(Column(str(entry["name"]), tuple(str(v) for v in kind["categorical"])))
                else:
                    raise SchemaError(f"unknown column kind {kind!r} for {entry.get('name')!r}")
            return cls(tuple(cols), str(d["label"]), str(d["positive"]))
        except KeyError as e:
            raise SchemaError(f"schema document missing key {e}") from None

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    schema: FeatureSchema
    feature_min: np.ndarray
    feature_max: np.ndarray
    train_idx: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0, dtype=np.int64)))
    test_idx: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0, dtype=np.int64)))

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        y = np.asarray(self.y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError("y length must match the number of rows of X")
        if X.shape[1] != self.schema.n_features:
            raise ValueError("X width does not match the schema")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "feature_min", _frozen(np.asarray(self.feature_min, dtype=float)))
        object.__setattr__(self, "feature_max", _frozen(np.asarray(self.feature_max, dtype=float)))
        object.__setattr__(self, "train_idx", _frozen(np.asarray(self.train_idx, dtype=np.int64)))
        object.__setattr__(self, "test_idx", _frozen(np.asarray(self.test_idx, dtype=np.int64)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def has_split(self) -> bool:
        return len(self.train_idx) + len(self.test_idx) > 0

    @property
    def X_train(self) -> np.ndarray:
        return self.X[self.train_idx] if self.has_split else self.X

    @property
    def y_train(self) -> np.ndarray:
        return self.y[self.train_idx] if self.has_split else self.y

    @property
    def X_test(self) -> np.ndarray:
        return self.X[self.test_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.y[self.test_idx]

    def inverse_scale(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X * (self.feature_max - self.feature_min) + self.feature_min


def _identity_scaling(d: int):
    return np.zeros(d), np.ones(d)


def gen_gaussian_mixture(n: int, mu1, mu2, seed: int) -> Dataset:
    """Two unit-covariance Gaussians; rows from ``mu1`` get label 0, ``mu2`` label 1.

    Class sizes are ``ceil(n/2)`` and ``floor(n/2)``; rows are shuffled. No
    scaling is applied (the recorded min/max are the identity map).
    """
    mu1 = np.asarray(mu1, dtype=float).ravel()
    mu2 = np.asarray(mu2, dtype=float).ravel()
    if mu1.shape != mu2.shape or mu1.size < 1:
        raise ValueError("mu1 and mu2 must be non-empty vectors of equal length")
    if not (np.all(np.isfinite(mu1)) and np.all(np.isfinite(mu2))):
        raise ValueError("mixture means must be finite")
    if n < 2:
        raise ValueError("need at least two samples")
    d = mu1.size
    rng = make_rng(seed)
    n0 = (n + 1) // 2
    n1 = n - n0
    X = np.vstack([mu1 + rng.standard_normal((n0, d)), mu2 + rng.standard_normal((n1, d))])
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    perm = rng.permutation(n)
    lo, hi = _identity_scaling(d)
    schema = FeatureSchema.numeric([f"x{i}" for i in range(d)])
    return Dataset(X[perm], y[perm], schema, lo, hi)


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a headered CSV, one-hot expanding categorical columns in schema order.

    Row numbers in error messages count data rows from 1 (the header is row 0).
    Leading lines starting with ``#`` are provenance comments and are skipped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        lines = iter(fh)
        first = next(lines, "")
        while first.startswith("#"):
            first = next(lines, "")
        reader = csv.reader(itertools.chain([first] if first else [], lines))
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        header = [h.strip() for h in header]
        expected = [c.name for c in schema.columns] + [schema.label_column]
        if sorted(header) != sorted(expected) or len(set(header)) != len(header):
            raise SchemaError(f"{path}: header {header} does not match schema columns {expected}")
        pos = {name: i for i, name in enumerate(header)}
        rows, labels = [], []
        for r, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"row {r}: expected {len(header)} fields, got {len(rec)}")
            vals = []
            for c in schema.columns:
                tok = rec[pos[c.name]].strip()
                if tok == "":
                    raise ParseError(f"row {r}: missing value in column {c.name!r}")
                if c.levels is None:
                    try:
                        v = float(tok)
                    except ValueError:
                        raise ParseError(f"row {r}, column {c.name!r}: non-numeric token {tok!r}") from None
                    if not math.isfinite(v):
                        raise ParseError(f"row {r}, column {c.name!r}: non-finite value {tok!r}")
                    vals.append(v)
                else:
                    if tok not in c.levels:
                        raise SchemaError(f"row {r}, column {c.name!r}: unknown level {tok!r}")
                    vals.extend(1.0 if tok == lvl else 0.0 for lvl in c.levels)
            lab = rec[pos[schema.label_column]].strip()
            if lab == "":
                raise ParseError(f"row {r}: missing value in column {schema.label_column!r}")
            rows.append(vals)
            labels.append(1 if lab == schema.positive_label else 0)
    d = schema.n_features
    X = np.array(rows, dtype=float).reshape(len(rows), d)
    lo, hi = _identity_scaling(d)
    return Dataset(X, np.array(labels, dtype=np.int64), schema, lo, hi)


def write_csv(path, dataset: Dataset, comment: str | None = None) -> None:
    """Write a numeric-schema dataset (as produced by the synthetic generator).

    ``comment`` becomes a leading ``# ...`` line that :func:`load_csv` skips.
    """
    schema = dataset.schema
    if any(c.is_categorical for c in schema.columns):
        raise SchemaError("write_csv supports numeric schemas only")
    X = dataset.inverse_scale(dataset.X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in schema.columns] + [schema.label_column])
        for row, lab in zip(X, dataset.y):
            label = schema.positive_label if lab == 1 else ("0" if schema.positive_label != "0" else "1")
            w.writerow([repr(float(v)) for v in row] + [label])


def scale_minmax(dataset: Dataset) -> Dataset:
    """Map each feature to [0, 1]; constant features map to 0."""
    if dataset.n < 1:
        raise ValueError("cannot scale an empty dataset")
    raw = dataset.inverse_scale(dataset.X)
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    X = np.where(span > 0, (raw - lo) / safe, 0.0)
    return replace(dataset, X=X, feature_min=lo, feature_max=np.where(span > 0, hi, lo + 1.0))


def train_test_split(dataset: Dataset, test_fraction: float, seed: int) -> Dataset:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = dataset.n
    n_test = int(math.floor(n * test_fraction + 0.5))
    if n >= 2:
        n_test = min(max(n_test, 1), n - 1)
    else:
        n_test = min(n_test, n)
    perm = make_rng(seed).permutation(n)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return replace(dataset, train_idx=train, test_idx=test)
