"""Generated datasets for smoke tests and desk-scale experiments."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Dataset, write_ucr_split

__all__ = ["multiscale_task", "two_sines", "write_dataset"]


def _datasets(name, values, labels, n_train, num_classes):
    label_map = {c: c for c in range(num_classes)}
    values = values[:, :, None]
    return (
        Dataset(name, "train", values[:n_train], labels[:n_train], num_classes, label_map),
        Dataset(name, "test", values[n_train:], labels[n_train:], num_classes, label_map),
    )


def _balanced_labels(rng, n, num_classes):
    return np.resize(np.arange(num_classes), n)[rng.permutation(n)]


def two_sines(n_train: int = 200, n_test: int = 200, T: int = 64, noise: float = 0.1,
              periods=(32, 8), seed: int = 0) -> tuple[Dataset, Dataset]:
    """Class ``c`` is a random-phase sine of period ``periods[c]`` plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    labels = np.concatenate([_balanced_labels(rng, n_train, len(periods)),
                             _balanced_labels(rng, n_test, len(periods))])
    t = np.arange(T)
    phase = rng.uniform(0, 2 * np.pi, size=(n, 1))
    freq = 2 * np.pi / np.asarray(periods, dtype=float)[labels][:, None]
    values = np.sin(freq * t + phase) + noise * rng.normal(size=(n, T))
    return _datasets("TwoSines", values, labels, n_train, len(periods))


def multiscale_task(n_train: int = 150, n_test: int = 150, T: int = 128, noise: float = 0.3,
                    seed: int = 0) -> tuple[Dataset, Dataset]:
    """Three classes sharing a long-period (32) background wave.

    Class 0 has no burst, class 1 a short-period (4) burst and class 2 a
    medium-period (12) burst, each burst 24 steps long at a random offset.
    """
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    labels = np.concatenate([_balanced_labels(rng, n_train, 3), _balanced_labels(rng, n_test, 3)])
    t = np.arange(T)
    values = 0.8 * np.sin(2 * np.pi * t / 32 + rng.uniform(0, 2 * np.pi, size=(n, 1)))
    burst_len = 24
    for i, c in enumerate(labels):
        if c == 0:
            continue
        period = 4 if c == 1 else 12
        start = rng.integers(0, T - burst_len)
        seg = np.arange(burst_len)
        window = np.hanning(burst_len)
        values[i, start : start + burst_len] += window * np.sin(2 * np.pi * seg / period + rng.uniform(0, 2 * np.pi))
    values += noise * rng.normal(size=values.shape)
    return _datasets("MultiScale", values, labels, n_train, 3)


def write_dataset(directory, train: Dataset, test: Dataset, delimiter: str = "\t",
                  name: str | None = None) -> Path:
    """Write ``<dir>/<name>/<name>_TRAIN.tsv`` and ``_TEST.tsv`` in UCR layout (labels 1-based)."""
    name = name or train.name
    root = Path(directory) / name
    root.mkdir(parents=True, exist_ok=True)
    write_ucr_split(root / f"{name}_TRAIN.tsv", train.values, train.labels + 1, delimiter)
    write_ucr_split(root / f"{name}_TEST.tsv", test.values, test.labels + 1, delimiter)
    return root
