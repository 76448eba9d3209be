"""UCR-archive text splits: loading, label remapping, z-normalization, batching.

A split file holds one series per line: the original class label first, then
``T`` values, separated by tabs or commas.  Original labels are remapped to
``0..C-1`` in sorted order; the test split reuses the map built from the train
split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "TimeSeriesSample",
    "batch_iter",
    "find_split",
    "load_ucr_dataset",
    "load_ucr_split",
    "write_ucr_split",
    "znormalize",
]

ZNORM_MIN_STD = 1e-8


class DatasetFormatError(ValueError):
    """Malformed split file: empty, ragged, non-numeric, or an unknown label."""


@dataclass(frozen=True)
class TimeSeriesSample:
    values: np.ndarray  # T x d
    label: int


@dataclass(frozen=True)
class Dataset:
    """A labeled collection of equal-length series.

    ``values`` is ``N x T x d``; ``labels`` holds class indices in ``0..C-1``.
    """

    name: str
    split: str
    values: np.ndarray
    labels: np.ndarray
    num_classes: int
    label_map: Mapping[float, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError(f"values must be N x T x d, got shape {self.values.shape}")
        if len(self.labels) != len(self.values):
            raise ValueError("values and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in 0..{self.num_classes - 1}")

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> TimeSeriesSample:
        return TimeSeriesSample(self.values[i], int(self.labels[i]))

    @property
    def samples(self) -> list[TimeSeriesSample]:
        return [self[i] for i in range(len(self))]

    @property
    def series_length(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def original_labels(self) -> np.ndarray:
        inverse = {v: k for k, v in self.label_map.items()}
        return np.array([inverse[int(i)] for i in self.labels])

    def subset(self, index) -> Dataset:
        return replace(self, values=self.values[index], labels=self.labels[index])


def _parse_label(token: str) -> float | int:
    value = float(token)
    return int(value) if value.is_integer() else value


def load_ucr_split(path, label_map: Mapping | None = None, name: str | None = None,
                   split: str | None = None) -> Dataset:
    """Parse one UCR split file.

    If ``label_map`` is given (the train split's map) it is applied as is and a
    label missing from it is an error; otherwise a map is built from the sorted
    distinct labels in the file.
    """
    path = Path(path)
    lines = [(n, ln) for n, ln in enumerate(path.read_text().splitlines(), start=1) if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    delimiter = "\t" if "\t" in lines[0][1] else ","

    raw_labels, rows = [], []
    width = None
    for lineno, line in lines:
        fields = line.strip().split(delimiter)
        try:
            label = _parse_label(fields[0])
            values = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: unparsable number ({exc})") from None
        if width is None:
            width = len(values)
            if width == 0:
                raise DatasetFormatError(f"{path}:{lineno}: row has a label but no values")
        elif len(values) != width:
            raise DatasetFormatError(
                f"{path}:{lineno}: ragged row with {len(values)} values, expected {width}"
            )
        if not all(math.isfinite(v) for v in values):
            raise DatasetFormatError(f"{path}:{lineno}: missing or non-finite value")
        raw_labels.append(label)
        rows.append(values)

    if label_map is None:
        label_map = {lab: i for i, lab in enumerate(sorted(set(raw_labels)))}
    try:
        labels = np.array([label_map[lab] for lab in raw_labels], dtype=np.int64)
    except KeyError as exc:
        raise DatasetFormatError(f"{path}: label {exc.args[0]} not present in the train split") from None

    values = np.asarray(rows, dtype=np.float64)[:, :, None]
    if split is None:
        split = "test" if "TEST" in path.name.upper() else "train"
    if name is None:
        name = path.name.split("_TRAIN")[0].split("_TEST")[0]
    return Dataset(name=name, split=split, values=values, labels=labels,
                   num_classes=len(label_map), label_map=dict(label_map))


def write_ucr_split(path, values: np.ndarray, labels, delimiter: str = "\t") -> None:
    """Write series (N x T or N x T x 1) in the UCR text layout."""
    values = np.asarray(values)
    if values.ndim == 3:
        values = values[:, :, 0]
    with open(path, "w") as fh:
        for lab, row in zip(labels, values):
            fh.write(delimiter.join([str(lab)] + [repr(float(v)) for v in row]) + "\n")


def znormalize(ds: Dataset) -> Dataset:
    """Per-series, per-channel zero mean and unit (population) std.

    Series whose std is below ``ZNORM_MIN_STD`` become all zeros.
    """
    v = ds.values
    mu = v.mean(axis=1, keepdims=True)
    sd = v.std(axis=1, keepdims=True)
    flat = sd < ZNORM_MIN_STD
    out = (v - mu) / np.where(flat, 1.0, sd)
    out = np.where(flat, 0.0, out)
    return replace(ds, values=out)


def batch_iter(ds: Dataset, batch_size: int, shuffle: bool = False,
               seed: int = 0) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(values B x T x d, labels B)`` covering the dataset once.

    With ``shuffle`` the order is a seeded Fisher-Yates permutation
    (``Generator.permutation``); the last batch may be short.
    """
    if len(ds) == 0:
        raise ValueError(f"dataset {ds.name!r} ({ds.split}) is empty")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.random.default_rng(seed).permutation(len(ds)) if shuffle else np.arange(len(ds))
    for start in range(0, len(ds), batch_size):
        idx = order[start : start + batch_size]
        yield ds.values[idx], ds.labels[idx]


def find_split(data_dir, name: str, split: str) -> Path:
    """Locate ``<name>_<SPLIT>`` under ``data_dir`` or ``data_dir/<name>``,
    with or without a ``.tsv``/``.txt``/``.csv`` suffix."""
    data_dir = Path(data_dir)
    stem = f"{name}_{split.upper()}"
    for base in (data_dir / name, data_dir):
        for suffix in ("", ".tsv", ".txt", ".csv"):
            candidate = base / (stem + suffix)
            if candidate.is_file():
                return candidate
    raise FileNotFoundError(f"no {stem} split for dataset {name!r} under {data_dir}")


def load_ucr_dataset(data_dir, name: str, normalize: bool = True) -> tuple[Dataset, Dataset]:
    train = load_ucr_split(find_split(data_dir, name, "train"), name=name, split="train")
    test = load_ucr_split(find_split(data_dir, name, "test"), label_map=train.label_map,
                          name=name, split="test")
    if train.series_length != test.series_length:
        raise DatasetFormatError(
            f"{name}: train length {train.series_length} != test length {test.series_length}"
        )
    if normalize:
        train, test = znormalize(train), znormalize(test)
    return train, test
