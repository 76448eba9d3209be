"""Central finite-difference gradients for verifying backward rules.

Only forward evaluations are used here, so the check is independent of the
gradient tape it verifies.  Run under ``default_dtype(np.float64)``.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad

__all__ = ["analytic_grads", "max_relative_error", "numerical_grads", "relative_error"]

DENOM_FLOOR = 1e-6


def numerical_grads(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> list[np.ndarray]:
    """d f() / d p for each ``p`` by perturbing ``p.data`` in place, one entry at a time."""
    out = []
    with no_grad():
        for p in params:
            g = np.zeros_like(p.data, dtype=np.float64)
            flat = p.data.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = float(f().data)
                flat[i] = orig - h
                down = float(f().data)
                flat[i] = orig
                gflat[i] = (up - down) / (2 * h)
            out.append(g)
    return out


def analytic_grads(f: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.grad = None
    f().backward()
    return [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = DENOM_FLOOR) -> np.ndarray:
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a, n = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def max_relative_error(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
    analytic = analytic_grads(f, params)
    numeric = numerical_grads(f, params, h)
    return max(float(relative_error(a, n).max(initial=0.0)) for a, n in zip(analytic, numeric))
