"""Training loop and the two per-run summary metrics.

``max_test_acc`` is the best test accuracy seen over all epochs;
``min_loss_acc`` is the test accuracy at the earliest epoch with the lowest
mean training loss.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, batch_iter
from .nn import Module
from .ops import softmax_cross_entropy
from .optim import Adam
from .tensor import Tensor, no_grad

__all__ = [
    "EpochRecord",
    "FrozenParameterError",
    "NonFiniteLossError",
    "RunResult",
    "TrainConfig",
    "compute_metrics",
    "evaluate",
    "predict",
    "train_run",
]


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class FrozenParameterError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    precision: str = "float32"
    eval_batch_size: int = 256

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.precision not in ("float32", "float64"):
            raise ValueError(f"precision must be float32 or float64, got {self.precision!r}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_acc: float


@dataclass
class RunResult:
    curve: list[EpochRecord]
    max_test_acc: float
    min_loss_acc: float
    wall_s: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(curve) -> tuple[float, float]:
    """Return ``(max_test_acc, min_loss_acc)`` for a sequence of epoch records.

    Entries may be :class:`EpochRecord` or ``(train_loss, test_acc)`` pairs.
    """
    pairs = [(r.train_loss, r.test_acc) if isinstance(r, EpochRecord) else tuple(r) for r in curve]
    if not pairs:
        raise ValueError("cannot compute metrics of an empty curve")
    max_acc = max(acc for _, acc in pairs)
    best = min(range(len(pairs)), key=lambda i: (pairs[i][0], i))
    return max_acc, pairs[best][1]


def predict(model: Module, values: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax class per series; ties go to the lowest class index."""
    dtype = _model_dtype(model)
    was_training = model.training
    model.eval()
    preds = []
    with no_grad():
        for start in range(0, len(values), batch_size):
            logits = model(Tensor(values[start : start + batch_size], dtype=dtype)).data
            preds.append(np.argmax(logits, axis=1))
    model.train(was_training)
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def evaluate(model: Module, ds: Dataset, batch_size: int = 256) -> float:
    """Fraction of ``ds`` classified correctly, with the model in eval mode."""
    if len(ds) == 0:
        return 0.0
    return float(np.mean(predict(model, ds.values, batch_size) == ds.labels))


def _model_dtype(model: Module):
    params = model.parameters()
    return params[0].data.dtype.type if params else np.float32


def train_run(model: Module, train: Dataset, test: Dataset, cfg: TrainConfig) -> RunResult:
    """Adam on cross-entropy for ``cfg.epochs`` epochs, testing after each epoch."""
    if (train.num_classes, train.series_length, train.channels) != (
        test.num_classes, test.series_length, test.channels
    ):
        raise ValueError("train and test splits disagree on classes, length or channels")
    dtype = np.dtype(cfg.precision).type
    if _model_dtype(model) is not dtype:
        raise TypeError(f"model parameters are {_model_dtype(model).__name__}, run precision is {cfg.precision}")

    frozen = [p for p in model.parameters() if not p.requires_grad]
    frozen_bytes = [p.data.tobytes() for p in frozen]

    opt = Adam(model.trainable_parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    curve: list[EpochRecord] = []
    start = time.perf_counter()
    for epoch in range(cfg.epochs):
        model.train()
        losses, sizes = [], []
        epoch_seed = int(rng.integers(2**63 - 1))
        for b, (xb, yb) in enumerate(batch_iter(train, cfg.batch_size, shuffle=True, seed=epoch_seed)):
            opt.zero_grad()
            loss = softmax_cross_entropy(model(Tensor(xb, dtype=dtype)), yb)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NonFiniteLossError(epoch, b, value)
            loss.backward()
            opt.step()
            losses.append(value)
            sizes.append(len(yb))
        train_loss = float(np.average(losses, weights=sizes))
        curve.append(EpochRecord(epoch, train_loss, evaluate(model, test, cfg.eval_batch_size)))
    wall = time.perf_counter() - start

    if frozen:
        if [p.data.tobytes() for p in frozen] != frozen_bytes:
            raise FrozenParameterError("a frozen parameter changed during training")
    max_acc, min_loss_acc = compute_metrics(curve)
    return RunResult(curve, max_acc, min_loss_acc, wall, asdict(cfg))
