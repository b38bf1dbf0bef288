import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odrf.data import (
    DataError,
    Dataset,
    bootstrap,
    default_mtry,
    load_dataset,
    sample_feature_subset,
    save_dataset,
    train_test_split,
    tree_stream,
)
from odrf.fixtures import load_fixture


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_first_appearance_label_order(tmp_path):
    p = write(tmp_path, "x,y,label\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n")
    ds = load_dataset(p)
    assert (ds.n_samples, ds.n_features, ds.n_classes) == (4, 2, 2)
    assert ds.labels.tolist() == [0, 1, 0, 1]
    assert ds.class_names == ["a", "b"]
    assert ds.feature_names == ["x", "y"]


def test_nan_cell_is_rejected(tmp_path):
    p = write(tmp_path, "x,y,label\n1,2,a\n3,NaN,b\n")
    with pytest.raises(DataError, match="non-numeric feature cell at row 2, column 2"):
        load_dataset(p)


def test_text_cell_is_rejected(tmp_path):
    p = write(tmp_path, "x,y,label\nfoo,2,a\n")
    with pytest.raises(DataError, match="non-numeric feature cell at row 1, column 1"):
        load_dataset(p)


@pytest.mark.parametrize("text", ["", "x,label\n"])
def test_empty_inputs(tmp_path, text):
    with pytest.raises(DataError):
        load_dataset(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope.csv")


def test_ragged_row(tmp_path):
    with pytest.raises(DataError):
        load_dataset(write(tmp_path, "x,y,label\n1,2\n"))


def test_named_label_column(tmp_path):
    ds = load_dataset(write(tmp_path, "cls,x\nq,1\nr,2\n"), label_column="cls")
    assert ds.feature_names == ["x"] and ds.class_names == ["q", "r"]


def test_fixed_mapping_rejects_unknown_label(tmp_path):
    p = write(tmp_path, "x,label\n1,a\n2,z\n")
    with pytest.raises(DataError, match="unknown"):
        load_dataset(p, class_names=["a", "b"])


def test_iris_fixture_shape():
    ds = load_fixture("iris")
    assert (ds.n_samples, ds.n_features, ds.n_classes) == (150, 4, 3)


def test_round_trip_label_mapping(tmp_path):
    ds = load_fixture("wine")
    p = tmp_path / "w.csv"
    save_dataset(ds, p)
    back = load_dataset(p)
    assert back.class_names == ds.class_names
    np.testing.assert_array_equal(back.labels, ds.labels)
    np.testing.assert_array_equal(back.samples, ds.samples)


def test_dataset_is_read_only():
    ds = Dataset(np.zeros((2, 1)), [0, 1], 2)
    with pytest.raises(ValueError):
        ds.samples[0, 0] = 1.0


def test_bootstrap_singleton():
    assert bootstrap([7], np.random.default_rng(0)).tolist() == [7]


def test_bootstrap_distinct_fraction():
    # expected share of distinct indices in a size-N resample is 1 - (1 - 1/N)^N
    N = 1000
    expected = 1 - (1 - 1 / N) ** N
    rng = np.random.default_rng(1)
    frac = np.mean([np.unique(bootstrap(np.arange(N), rng)).size / N for _ in range(100)])
    assert abs(frac - expected) < 0.05
    assert abs(expected - (1 - np.exp(-1))) < 1e-3


def test_bootstrap_is_deterministic():
    a = bootstrap(np.arange(50), np.random.default_rng(5))
    b = bootstrap(np.arange(50), np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_bootstrap_empty():
    with pytest.raises(ValueError):
        bootstrap([], np.random.default_rng(0))


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=200), st.integers(0, 2**32 - 1))
def test_bootstrap_cardinality(src, seed):
    out = bootstrap(src, np.random.default_rng(seed))
    assert out.size == len(src)
    assert set(out.tolist()) <= set(src)


def test_feature_subset_examples():
    rng = np.random.default_rng(0)
    assert sorted(sample_feature_subset(4, 4, rng).tolist()) == [0, 1, 2, 3]
    s = sample_feature_subset(100, 10, rng)
    assert s.size == 10 and np.unique(s).size == 10 and s.min() >= 0 and s.max() < 100
    assert default_mtry(9) == 3
    assert np.unique(sample_feature_subset(9, default_mtry(9), rng)).size == 3


@given(st.integers(1, 40), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_feature_subset_never_repeats(n, mtry, seed):
    s = sample_feature_subset(n, mtry, np.random.default_rng(seed))
    assert s.size == min(n, mtry) == np.unique(s).size


def test_feature_subset_uniform():
    rng = np.random.default_rng(2)
    draws = np.array([sample_feature_subset(10, 1, rng)[0] for _ in range(10_000)])
    freq = np.bincount(draws, minlength=10) / draws.size
    sigma = np.sqrt(0.1 * 0.9 / draws.size)
    assert np.all(np.abs(freq - 0.1) <= 3 * sigma)


def test_tree_stream_matches_spawned_child():
    child = np.random.SeedSequence(42).spawn(4)[3]
    ref = np.random.Generator(np.random.PCG64(child)).integers(0, 1 << 30, 5)
    np.testing.assert_array_equal(tree_stream(42, 3).integers(0, 1 << 30, 5), ref)


@settings(max_examples=30)
@given(st.floats(0.05, 0.6), st.integers(0, 1000))
def test_split_is_a_stratified_partition(frac, seed):
    ds = load_fixture("iris")
    tr, te = train_test_split(ds, frac, seed)
    assert tr.n_samples + te.n_samples == ds.n_samples
    for k in range(ds.n_classes):
        assert np.sum(tr.labels == k) >= 1
