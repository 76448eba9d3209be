"""Differentiable building blocks on top of :mod:`tsc_hybrid.tensor`.

Layouts follow the usual 1D-convolution convention: sequences are ``B x C x T``
for convolution, pooling and batch norm, and ``B x S x h`` for the
transformer parts.  Backward rules are fused where the composed version would
be slow (convolution, normalization, softmax).
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, as_tensor, matmul

__all__ = [
    "LabelError",
    "attention",
    "batchnorm1d",
    "conv1d",
    "gelu",
    "global_avg_pool",
    "layernorm",
    "linear",
    "log_softmax",
    "maxpool1d",
    "relu",
    "same_padding",
    "softmax",
    "softmax_cross_entropy",
]

NORM_EPS = 1e-5
BN_MOMENTUM = 0.1


class LabelError(ValueError):
    """A class label lies outside ``0..C-1``."""


def same_padding(kernel_size: int) -> tuple[int, int]:
    """Left/right zero padding that keeps the length; the extra zero goes right."""
    total = kernel_size - 1
    left = total // 2
    return left, total - left


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, padding: str = "valid") -> Tensor:
    """Stride-1 cross-correlation of ``x`` (B x C_in x T) with ``weight`` (C_out x C_in x K)."""
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d expects B x C x T input and O x C x K weight, got {x.shape}, {weight.shape}")
    B, C, T = x.shape
    O, Cw, K = weight.shape
    if Cw != C:
        raise ShapeError(f"conv1d channel mismatch: input {x.shape}, weight {weight.shape}")
    if padding == "same":
        left, right = same_padding(K)
    elif padding == "valid":
        left = right = 0
    else:
        raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
    if K > T + left + right:
        raise ShapeError(f"kernel of size {K} is longer than the padded input ({T + left + right})")

    xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if left or right else x.data
    T_out = xp.shape[2] - K + 1
    w = weight.data
    # one batched matmul per kernel tap; im2col only pays off for very few input channels
    if C < 8:
        cols = sliding_window_view(xp, K, axis=2)  # B x C x T' x K
        out = np.tensordot(cols, w, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    else:
        taps = np.ascontiguousarray(w.transpose(2, 0, 1))  # K x O x C
        out = np.matmul(taps[0], xp[:, :, :T_out])
        for k in range(1, K):
            out += np.matmul(taps[k], xp[:, :, k : k + T_out])
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = np.ascontiguousarray(out)

    def backward(g):
        gx = gw = gb = None
        if weight.requires_grad:
            g2 = g.transpose(1, 0, 2).reshape(O, B * T_out)
            gw = np.empty(w.shape, dtype=g.dtype)
            for k in range(K):
                gw[:, :, k] = g2 @ xp[:, :, k : k + T_out].transpose(1, 0, 2).reshape(C, B * T_out).T
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2))
        if x.requires_grad:
            taps_t = np.ascontiguousarray(w.transpose(2, 1, 0))  # K x C x O
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for k in range(K):
                gxp[:, :, k : k + T_out] += np.matmul(taps_t[k], g)
            gx = gxp[:, :, left : left + T]
        return (gx, gw) if bias is None else (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._result(out, parents, backward, "conv1d")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._result(x.data * mask, (x,), lambda g: (g * mask,), "relu")


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    v = x.data
    inner = _GELU_C * (v + 0.044715 * (v * v * v))
    t = np.tanh(inner)
    out = 0.5 * v * (1.0 + t)

    def backward(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * d_inner),)

    return Tensor._result(out, (x,), backward, "gelu")


def batchnorm1d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = NORM_EPS,
) -> Tensor:
    """Batch normalization over every axis except channels (axis 1).

    In training mode the batch statistics are used and the running buffers are
    updated in place (unbiased variance, as is customary); in eval mode the
    running buffers are used.
    """
    if x.ndim not in (2, 3):
        raise ShapeError(f"batchnorm1d expects B x C or B x C x T, got {x.shape}")
    axes = (0,) if x.ndim == 2 else (0, 2)
    bshape = (1, -1) if x.ndim == 2 else (1, -1, 1)
    v = x.data
    if training:
        n = v.size // v.shape[1]
        mu = v.mean(axis=axes)
        var = v.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (n / max(n - 1, 1))
    else:
        mu, var = running_mean.astype(v.dtype), running_var.astype(v.dtype)
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (v - mu.reshape(bshape)) * invstd.reshape(bshape)
    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)

    def backward(g):
        gg = (g * xhat).sum(axis=axes) if gamma.requires_grad else None
        gbeta = g.sum(axis=axes) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data.reshape(bshape)
            if training:
                m = v.size // v.shape[1]
                s1 = gxhat.sum(axis=axes).reshape(bshape)
                s2 = (gxhat * xhat).sum(axis=axes).reshape(bshape)
                gx = (invstd.reshape(bshape) / m) * (m * gxhat - s1 - xhat * s2)
            else:
                gx = gxhat * invstd.reshape(bshape)
        return gx, gg, gbeta

    return Tensor._result(out, (x, gamma, beta), backward, "batchnorm1d")


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = NORM_EPS) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    v = x.data
    h = v.shape[-1]
    mu = v.mean(axis=-1, keepdims=True)
    var = v.var(axis=-1, keepdims=True)
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (v - mu) * invstd
    out = xhat * gamma.data + beta.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        gg = (g * xhat).sum(axis=lead) if gamma.requires_grad else None
        gb = g.sum(axis=lead) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data
            s1 = gxhat.sum(axis=-1, keepdims=True)
            s2 = (gxhat * xhat).sum(axis=-1, keepdims=True)
            gx = (invstd / h) * (h * gxhat - s1 - xhat * s2)
        return gx, gg, gb

    return Tensor._result(out, (x, gamma, beta), backward, "layernorm")


def maxpool1d(x: Tensor, window: int, stride: int | None = None, padding: str = "valid") -> Tensor:
    """Max pooling along the last axis of ``B x C x T``.

    Ties route the gradient to the earliest position in the window.
    """
    stride = stride or window
    left = right = 0
    v = x.data
    if padding == "same":
        left, right = same_padding(window)
        v = np.pad(v, ((0, 0), (0, 0), (left, right)), constant_values=-np.inf)
    elif padding != "valid":
        raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
    if window > v.shape[-1]:
        raise ShapeError(f"pool window {window} longer than input length {v.shape[-1]}")
    T_out = (v.shape[-1] - window) // stride + 1
    span = stride * (T_out - 1) + 1
    out = v[:, :, 0:span:stride].copy()
    for k in range(1, window):
        np.maximum(out, v[:, :, k : k + span : stride], out=out)
    padded_shape = v.shape
    T = x.shape[-1]

    def backward(g):
        gp = np.zeros(padded_shape, dtype=g.dtype)
        taken = np.zeros(out.shape, dtype=bool)
        for k in range(window):
            hit = v[:, :, k : k + span : stride] == out
            hit &= ~taken  # earliest index wins ties
            taken |= hit
            gp[:, :, k : k + span : stride] += g * hit
        return (gp[:, :, left : left + T],)

    return Tensor._result(out, (x,), backward, "maxpool1d")


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over time: ``B x C x T -> B x C``."""
    return x.mean(axis=-1)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    v = x.data
    e = np.exp(v - v.max(axis=axis, keepdims=True))
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._result(y, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    v = x.data
    shifted = v - v.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return Tensor._result(out, (x,), backward, "log_softmax")


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    if logits.ndim != 2:
        raise ShapeError(f"logits must be B x C, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    B, C = logits.shape
    if labels.shape[0] != B:
        raise ShapeError(f"{labels.shape[0]} labels for a batch of {B}")
    bad = (labels < 0) | (labels >= C)
    if bad.any():
        raise LabelError(f"label {int(labels[bad][0])} outside 0..{C - 1}")
    v = logits.data
    shifted = v - v.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    z = e.sum(axis=1, keepdims=True)
    rows = np.arange(B)
    loss = (np.log(z[:, 0]) - shifted[rows, labels]).mean()
    probs = e / z

    def backward(g):
        d = probs.copy()
        d[rows, labels] -= 1.0
        return (d * (g / B),)

    return Tensor._result(np.asarray(loss, dtype=v.dtype), (logits,), backward, "cross_entropy")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` over the last axis of ``x``; weight is in x out."""
    lead = x.shape[:-1]
    y = matmul(x.reshape(-1, x.shape[-1]), weight)
    if bias is not None:
        y = y + bias
    return y.reshape(*lead, weight.shape[-1])


def attention(q: Tensor, k: Tensor, v: Tensor, causal_mask: bool = False) -> Tensor:
    """Scaled dot-product attention on ``B x H x S x d_h`` operands."""
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.ndim != 4 or q.shape != k.shape or k.shape != v.shape:
        raise ShapeError(f"attention needs equal B x H x S x d_h shapes, got {q.shape}, {k.shape}, {v.shape}")
    S, d_h = q.shape[-2], q.shape[-1]
    if d_h <= 0:
        raise ShapeError("attention head size must be positive")
    scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(d_h))
    if causal_mask:
        future = np.triu(np.ones((S, S), dtype=bool), k=1)
        scores = scores + np.where(future, -np.inf, 0.0).astype(q.dtype)
    return matmul(softmax(scores, axis=-1), v)
