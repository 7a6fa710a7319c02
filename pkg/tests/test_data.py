import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfadv.data import (Column, Dataset, FeatureSchema, ParseError, SchemaError, gen_gaussian_mixture, load_csv,
                        scale_minmax, train_test_split, write_csv)


def _numeric_ds(cols):
    X = np.asarray(cols, dtype=float).T
    return Dataset(X, np.zeros(X.shape[0], dtype=int), FeatureSchema.numeric([f"c{i}" for i in range(X.shape[1])]),
                   np.zeros(X.shape[1]), np.ones(X.shape[1]))


# ---- schema

def test_schema_rejects_duplicate_names():
    with pytest.raises(SchemaError):
        FeatureSchema((Column("a"), Column("a")), "y", "1")


def test_schema_rejects_empty_levels_and_label_as_feature():
    with pytest.raises(SchemaError):
        FeatureSchema((Column("a", ()),), "y", "1")
    with pytest.raises(SchemaError):
        FeatureSchema((Column("y"),), "y", "1")


def test_schema_json_round_trip(tmp_path):
    s = FeatureSchema((Column("age"), Column("color", ("red", "green"))), "label", "yes")
    p = tmp_path / "schema.json"
    p.write_text(json.dumps(s.to_dict()))
    assert FeatureSchema.load(p) == s
    assert s.feature_names == ["age", "color=red", "color=green"]


# ---- gaussian mixture

def test_mixture_default_size():
    ds = gen_gaussian_mixture(5000, [1, 1], [-1, -1], seed=7)
    assert ds.X.shape == (5000, 2)
    assert abs(int(ds.y.sum()) - 2500) <= 1


def test_mixture_two_samples_one_per_class():
    ds = gen_gaussian_mixture(2, [0], [0], seed=1)
    assert ds.n == 2 and sorted(ds.y.tolist()) == [0, 1]


def test_mixture_class_means_close():
    ds = gen_gaussian_mixture(1000, [1, 1], [-1, -1], seed=3)
    assert np.all(np.abs(ds.X[ds.y == 0].mean(axis=0) - 1) < 0.15)
    assert np.all(np.abs(ds.X[ds.y == 1].mean(axis=0) + 1) < 0.15)


def test_mixture_bitwise_reproducible_and_identity_scaling():
    a = gen_gaussian_mixture(500, [1, 1], [-1, -1], seed=11)
    b = gen_gaussian_mixture(500, [1, 1], [-1, -1], seed=11)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert np.array_equal(a.inverse_scale(a.X), a.X)


@pytest.mark.parametrize("mu1,mu2,n", [([np.nan], [0.0], 10), ([np.inf], [0.0], 10), ([0.0], [0.0], 1)])
def test_mixture_invalid_parameters(mu1, mu2, n):
    with pytest.raises(ValueError):
        gen_gaussian_mixture(n, mu1, mu2, seed=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 301))
def test_mixture_balanced_within_one(n):
    ds = gen_gaussian_mixture(n, [0.5], [-0.5], seed=n)
    assert abs(int(ds.y.sum()) * 2 - n) <= 1


# ---- csv

def test_csv_one_hot(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("age,color,label\n1.5,red,yes\n2,green,no\n3,red,no\n")
    s = FeatureSchema((Column("age"), Column("color", ("red", "green"))), "label", "yes")
    ds = load_csv(p, s)
    assert ds.X.shape == (3, 3)
    assert ds.X.tolist() == [[1.5, 1, 0], [2, 0, 1], [3, 1, 0]]
    assert ds.y.tolist() == [1, 0, 0]
    for g in s.one_hot_groups():
        assert np.all(ds.X[:, g].sum(axis=1) == 1)


def test_csv_unknown_level_cites_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("age,color,label\n1,red,yes\n2,blue,no\n")
    s = FeatureSchema((Column("age"), Column("color", ("red", "green"))), "label", "yes")
    with pytest.raises(SchemaError, match=r"row 2.*color.*blue"):
        load_csv(p, s)


def test_csv_header_only_gives_empty_dataset(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,y\n")
    ds = load_csv(p, FeatureSchema.numeric(["a"]))
    assert ds.n == 0 and ds.X.shape == (0, 1)


def test_csv_errors(tmp_path):
    s = FeatureSchema.numeric(["a"])
    p = tmp_path / "d.csv"
    p.write_text("a,y\n1,1\nxyz,0\n")
    with pytest.raises(ParseError, match=r"row 2.*'a'"):
        load_csv(p, s)
    p.write_text("a,y\n1,1\n,0\n")
    with pytest.raises(ParseError, match="missing"):
        load_csv(p, s)
    p.write_text("b,y\n1,1\n")
    with pytest.raises(SchemaError):
        load_csv(p, s)


def test_csv_round_trip_with_comment(tmp_path):
    ds = gen_gaussian_mixture(50, [1, 2], [-1, 0], seed=4)
    p = tmp_path / "d.csv"
    write_csv(p, ds, comment="config_hash=abc seed=4")
    assert p.read_text().startswith("# config_hash=abc seed=4\n")
    back = load_csv(p, ds.schema)
    assert back.X.tobytes() == ds.X.tobytes() and np.array_equal(back.y, ds.y)


# ---- scaling

def test_scale_examples():
    ds = scale_minmax(_numeric_ds([[0, 5, 10], [4, 4, 4], [0, 1, 1]]))
    assert ds.X[:, 0].tolist() == [0, 0.5, 1]
    assert ds.X[:, 1].tolist() == [0, 0, 0]
    assert ds.X[:, 2].tolist() == [0, 1, 1]
    np.testing.assert_allclose(ds.inverse_scale(ds.X)[:, [0, 2]], [[0, 0], [5, 1], [10, 1]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=2, max_size=30))
def test_scaled_columns_hit_zero_and_one(rows):
    X = np.asarray(rows).T
    ds = scale_minmax(_numeric_ds(X))
    assert np.all((ds.X >= 0) & (ds.X <= 1))
    for j in range(ds.d):
        if np.ptp(X[j]) > 0:
            assert ds.X[:, j].min() == 0.0 and ds.X[:, j].max() == 1.0


def test_dataset_arrays_are_read_only():
    ds = gen_gaussian_mixture(10, [0], [1], seed=0)
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


# ---- split

@pytest.mark.parametrize("n,frac,n_test", [(10, 0.2, 2), (5, 0.2, 1), (5000, 0.2, 1000)])
def test_split_sizes(n, frac, n_test):
    ds = train_test_split(gen_gaussian_mixture(n, [0], [1], seed=0), frac, seed=3)
    assert ds.test_idx.size == n_test and ds.train_idx.size == n - n_test


def test_split_deterministic_and_disjoint():
    base = gen_gaussian_mixture(100, [0], [1], seed=0)
    a, b = train_test_split(base, 0.3, seed=9), train_test_split(base, 0.3, seed=9)
    assert np.array_equal(a.test_idx, b.test_idx)
    assert set(a.test_idx).isdisjoint(a.train_idx)
    assert len(a.test_idx) + len(a.train_idx) == 100


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_outside_open_interval(frac):
    with pytest.raises(ValueError):
        train_test_split(gen_gaussian_mixture(10, [0], [1], seed=0), frac, seed=0)
