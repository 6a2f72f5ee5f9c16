import gzip

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chi2_contingency
from sklearn.linear_model import LogisticRegression

from fedmask.data import (
    DataError, Dataset, generate_blobs, load_csv, partition_iid, save_csv, train_test_split,
)


def test_blobs_deterministic():
    assert generate_blobs(100, 3, 2, seed=7) == generate_blobs(100, 3, 2, seed=7)
    assert generate_blobs(100, 3, 2, seed=7) != generate_blobs(100, 3, 2, seed=8)


def test_blobs_balanced():
    ds = generate_blobs(100, 3, 4, seed=1)
    assert np.bincount(ds.labels).tolist() == [25, 25, 25, 25]
    assert np.bincount(generate_blobs(10, 2, 3, seed=1).labels).tolist() == [4, 3, 3]


def test_blobs_too_few_rows():
    with pytest.raises(DataError):
        generate_blobs(3, 2, 4, seed=0)


@pytest.mark.parametrize("spread", [0.0, 1e-3])
def test_tight_blobs_are_linearly_separable(spread):
    ds = generate_blobs(400, 6, 5, spread=spread, seed=3)
    clf = LogisticRegression(max_iter=2000).fit(ds.features, ds.labels)
    assert clf.score(ds.features, ds.labels) == 1.0


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(2), 2)
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), np.array([0, 2]), 2)


def test_csv_round_trip(tmp_path):
    ds = Dataset(np.array([[0.1, 2.0], [1e-17, -3.5], [7.0, 8.25]]), np.array([1, 0, 2]), 3)
    for name in ("d.csv", "d.csv.gz"):
        path = tmp_path / name
        save_csv(ds, path)
        assert load_csv(path) == ds
    with gzip.open(tmp_path / "d.csv.gz", "rt") as fh:
        assert fh.readline().startswith("1,0.1,2.0")


@pytest.mark.parametrize("body, match", [
    ("0,1,2\n1,3\n", r":2: expected 3 fields"),
    ("0,1,2\n1,x,3\n", r":2: non-numeric"),
    ("0,1,2\n-1,1,3\n", r":2: negative label"),
    ("a,1,2\n", r":1: label"),
    ("", "empty dataset"),
    ("\n\n", "empty dataset"),
])
def test_csv_errors(tmp_path, body, match):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=match):
        load_csv(path)


def test_csv_infers_classes(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("0,1.0\n4,2.0\n")
    ds = load_csv(path)
    assert ds.num_classes == 5 and ds.dim == 1


def test_partition_sixty_thousand_rows():
    shards = partition_iid(60000, 10, seed=0)
    assert [len(s) for s in shards] == [6000] * 10
    assert np.array_equal(np.sort(np.concatenate(shards)), np.arange(60000))


def test_partition_identity_and_remainder():
    (only,) = partition_iid(7, 1, seed=3)
    assert sorted(only.tolist()) == list(range(7))
    assert [len(s) for s in partition_iid(10, 3, seed=0)] == [4, 3, 3]


def test_partition_errors():
    with pytest.raises(DataError):
        partition_iid(3, 4, seed=0)
    with pytest.raises(DataError):
        partition_iid(3, 0, seed=0)


@given(n=st.integers(1, 500), m=st.integers(1, 50), seed=st.integers(0, 2**32))
def test_partition_disjoint_and_covering(n, m, seed):
    if m > n:
        return
    shards = partition_iid(n, m, seed)
    allidx = np.concatenate(shards)
    assert allidx.size == n and np.array_equal(np.sort(allidx), np.arange(n))
    assert all(abs(len(s) - n / m) < 1 for s in shards)


def test_shard_histograms_match_global():
    ds = generate_blobs(10_000, 2, 5, seed=4)
    shards = partition_iid(ds, 10, seed=9)
    table = np.array([np.bincount(ds.labels[s], minlength=5) for s in shards])
    assert chi2_contingency(table).pvalue > 0.01


def test_train_test_split_disjoint(blobs):
    tr, te = train_test_split(blobs, 0.25, seed=0)
    assert len(te) == 50 and len(tr) == 150
    rows = {tuple(r) for r in tr.features} & {tuple(r) for r in te.features}
    assert not rows
