from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsc_hybrid.data import (
    Dataset,
    DatasetFormatError,
    batch_iter,
    find_split,
    load_ucr_dataset,
    load_ucr_split,
    write_ucr_split,
    znormalize,
)


def _ds(values, labels=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[:, :, None]
    labels = np.zeros(len(values), dtype=int) if labels is None else np.asarray(labels)
    return Dataset("x", "train", values, labels, int(labels.max()) + 1)


def test_two_line_file_remaps_sorted(fixtures_dir):
    ds = load_ucr_split(fixtures_dir / "two_lines.tsv")
    assert ds.num_classes == 2
    assert ds.series_length == 2
    assert ds.channels == 1
    assert ds.label_map == {2: 0, 5: 1}
    np.testing.assert_array_equal(ds.labels, [0, 1])
    np.testing.assert_array_equal(ds.values[:, :, 0], [[0.5, -0.5], [1.0, 2.0]])


def test_minus_one_plus_one_labels(fixtures_dir):
    train, test = load_ucr_dataset(fixtures_dir, "Tiny", normalize=False)
    assert train.label_map == {-1: 0, 1: 1}
    assert test.label_map == train.label_map
    np.testing.assert_array_equal(train.original_labels(), [-1, 1, 1, -1, 1, -1])
    assert (train.num_classes, train.series_length) == (2, 6)


def test_comma_split_without_suffix(fixtures_dir):
    train, test = load_ucr_dataset(fixtures_dir, "Comma")
    assert train.label_map == {3: 0, 4: 1, 5: 2}
    assert (train.num_classes, train.series_length, len(train), len(test)) == (3, 8, 7, 3)
    np.testing.assert_array_equal(test.original_labels(), [4, 3, 5])


def test_ragged_rows_report_line(fixtures_dir):
    with pytest.raises(DatasetFormatError, match=r"ragged.tsv:2"):
        load_ucr_split(fixtures_dir / "ragged.tsv")


def test_empty_and_unparsable(fixtures_dir):
    with pytest.raises(DatasetFormatError, match="empty"):
        load_ucr_split(fixtures_dir / "empty.tsv")
    with pytest.raises(DatasetFormatError, match="unparsable"):
        load_ucr_split(fixtures_dir / "bad_number.csv")


def test_unseen_test_label_is_an_error(fixtures_dir):
    train = load_ucr_split(fixtures_dir / "Comma" / "Comma_TRAIN")
    with pytest.raises(DatasetFormatError, match="7"):
        load_ucr_split(fixtures_dir / "Comma" / "UnseenLabel_TEST", label_map=train.label_map)


def test_missing_values_rejected(tmp_path):
    path = tmp_path / "nan.tsv"
    path.write_text("1\t0.1\tNaN\n")
    with pytest.raises(DatasetFormatError, match="non-finite"):
        load_ucr_split(path)


def test_find_split_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        find_split(tmp_path, "Nope", "train")


def test_write_then_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(5, 7))
    write_ucr_split(tmp_path / "R_TRAIN.tsv", values, [1, 2, 2, 1, 3])
    ds = load_ucr_split(tmp_path / "R_TRAIN.tsv")
    np.testing.assert_array_equal(ds.values[:, :, 0], values)
    np.testing.assert_array_equal(ds.original_labels(), [1, 2, 2, 1, 3])


def test_znormalize_known_values():
    out = znormalize(_ds([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])).values[:, :, 0]
    np.testing.assert_allclose(out[0], [-1.224744871, 0.0, 1.224744871], atol=1e-8)
    np.testing.assert_array_equal(out[1], [0.0, 0.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 50), st.floats(1e-3, 1e3))
def test_znormalize_moments(seed, T, scale):
    rng = np.random.default_rng(seed)
    values = rng.normal(loc=rng.normal() * scale, scale=scale, size=(4, T))
    out = znormalize(_ds(values)).values
    mu, sd = out.mean(axis=1), out.std(axis=1)
    assert np.abs(mu).max() < 1e-6
    assert np.abs(sd - 1).max() < 1e-5


def test_fixture_files_normalize(fixtures_dir):
    for name in ("Tiny", "Comma"):
        for ds in load_ucr_dataset(fixtures_dir, name):
            assert np.abs(ds.values.mean(axis=1)).max() < 1e-6
            assert np.abs(ds.values.std(axis=1) - 1).max() < 1e-5


def test_batch_sizes():
    ds = _ds(np.zeros((10, 4)))
    assert [len(y) for _, y in batch_iter(ds, 3)] == [3, 3, 3, 1]


def test_unshuffled_keeps_file_order():
    ds = _ds(np.arange(10.0)[:, None], labels=np.arange(10) % 2)
    xs = np.concatenate([x[:, 0, 0] for x, _ in batch_iter(ds, 4, shuffle=False)])
    np.testing.assert_array_equal(xs, np.arange(10.0))


def test_shuffle_is_seeded():
    ds = _ds(np.arange(50.0)[:, None])

    def order(seed):
        return np.concatenate([x[:, 0, 0] for x, _ in batch_iter(ds, 8, shuffle=True, seed=seed)])

    np.testing.assert_array_equal(order(1), order(1))
    distinct = {tuple(order(s)) for s in range(20)}
    assert len(distinct) == 20


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 12), st.booleans(), st.integers(0, 1000))
def test_epoch_label_multiset(n, batch, shuffle, seed):
    labels = np.random.default_rng(seed).integers(0, 3, size=n)
    labels[0] = 2
    ds = _ds(np.zeros((n, 2)), labels)
    seen = np.concatenate([y for _, y in batch_iter(ds, batch, shuffle=shuffle, seed=seed)])
    assert Counter(seen.tolist()) == Counter(labels.tolist())


def test_empty_dataset_batch_error():
    ds = Dataset("e", "train", np.zeros((0, 3, 1)), np.zeros(0, dtype=int), 1)
    with pytest.raises(ValueError, match="empty"):
        list(batch_iter(ds, 2))
