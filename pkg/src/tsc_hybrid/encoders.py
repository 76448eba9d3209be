"""Time-series encoders mapping ``B x T x d`` series to ``B x L x h`` latent tokens.

Five families are available; token counts ``L`` are

========== ==================
mlp        1
cnn        T
resnet     T
inception  T
transformer ceil(T / patch_len)
========== ==================

An encoder followed by :class:`LinearHead` (mean over tokens, then affine) is
the plain, backbone-free classifier.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import ops
from .nn import BatchNorm1d, Conv1d, LayerNorm, Linear, Module, kaiming_uniform
from .tensor import ShapeError, Tensor, concat

__all__ = [
    "FAMILIES",
    "CNNEncoder",
    "Encoder",
    "EncoderConfig",
    "InceptionEncoder",
    "InvalidConfigError",
    "LinearHead",
    "MLPEncoder",
    "PlainModel",
    "ResNetEncoder",
    "TransformerEncoder",
    "build_encoder",
    "pool_and_classify",
    "sinusoidal_positions",
]

FAMILIES = ("mlp", "cnn", "resnet", "inception", "transformer")


class InvalidConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class EncoderConfig:
    family: str = "inception"
    hidden: int = 128
    # mlp
    mlp_widths: tuple = (256, 256)
    # cnn / resnet
    cnn_channels: tuple = (128, 256, 128)
    cnn_kernels: tuple = (8, 5, 3)
    resnet_channels: tuple = (128, 256, 128)
    resnet_kernels: tuple = (8, 5, 3)
    # inception
    n_kernels: int = 3
    kernel_size: int = 8
    depth: int = 6
    bottleneck: int = 32
    branch_filters: int = 32
    # transformer
    layers: int = 2
    heads: int = 4
    patch_len: int = 8

    def validate(self) -> EncoderConfig:
        if self.family not in FAMILIES:
            raise InvalidConfigError("family", f"{self.family!r} not in {FAMILIES}")
        if self.hidden <= 0:
            raise InvalidConfigError("hidden", "must be positive")
        if self.family == "inception":
            if not 1 <= self.n_kernels <= 8:
                raise InvalidConfigError("n_kernels", f"must be in 1..8, got {self.n_kernels}")
            if self.kernel_size < 2:
                raise InvalidConfigError("kernel_size", f"must be >= 2, got {self.kernel_size}")
            for name in ("depth", "bottleneck", "branch_filters"):
                if getattr(self, name) < 1:
                    raise InvalidConfigError(name, "must be >= 1")
        elif self.family == "transformer":
            if self.heads < 1 or self.hidden % self.heads:
                raise InvalidConfigError("heads", f"hidden={self.hidden} is not divisible by heads={self.heads}")
            if self.layers < 1 or self.patch_len < 1:
                raise InvalidConfigError("layers" if self.layers < 1 else "patch_len", "must be >= 1")
        elif self.family in ("cnn", "resnet"):
            prefix = self.family
            ch, ks = getattr(self, f"{prefix}_channels"), getattr(self, f"{prefix}_kernels")
            # cnn pairs one kernel with each width; resnet reuses the kernel list inside every block
            if not ch or not ks or (prefix == "cnn" and len(ch) != len(ks)):
                raise InvalidConfigError(f"{prefix}_kernels", "needs one kernel size per channel width")
            if min(ch) < 1 or min(ks) < 1:
                raise InvalidConfigError(f"{prefix}_channels", "widths and kernels must be positive")
        elif self.family == "mlp" and any(w < 1 for w in self.mlp_widths):
            raise InvalidConfigError("mlp_widths", "widths must be positive")
        return self

    def branch_kernel_sizes(self) -> list[int]:
        """Inception branch ``i`` (1-based) uses kernel size ``K * i``."""
        return [self.kernel_size * i for i in range(1, self.n_kernels + 1)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping) -> EncoderConfig:
        """Build from a mapping of strings or values; unknown keys are ignored."""
        kwargs = {}
        for f in fields(cls):
            if f.name not in mapping:
                continue
            value = mapping[f.name]
            default = f.default
            if isinstance(default, tuple):
                if isinstance(value, str):
                    value = tuple(int(v) for v in value.replace(" ", "").split(",") if v)
                value = tuple(value)
            elif isinstance(default, int):
                value = int(value)
            kwargs[f.name] = value
        return cls(**kwargs)


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


class Encoder(Module):
    """Common contract: ``encode(X: B x T x d) -> B x L x h``."""

    def __init__(self, cfg: EncoderConfig, T: int, d: int):
        self.config = cfg
        self.T = T
        self.d = d

    @property
    def hidden(self) -> int:
        return self.config.hidden

    @property
    def num_tokens(self) -> int:
        return self.T

    def encode(self, X: Tensor) -> Tensor:
        if not isinstance(X, Tensor):
            X = Tensor(X)
        if X.ndim != 3 or X.shape[1] != self.T or X.shape[2] != self.d:
            raise ShapeError(
                f"encoder built for B x {self.T} x {self.d} input, got {X.shape}"
            )
        return self._encode(X)

    forward = encode

    def _encode(self, X: Tensor) -> Tensor:
        raise NotImplementedError


class MLPEncoder(Encoder):
    def __init__(self, cfg, T, d, rng):
        super().__init__(cfg, T, d)
        widths = [T * d, *cfg.mlp_widths]
        self.layers = [Linear(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
        self.out = Linear(widths[-1], cfg.hidden, rng)

    @property
    def num_tokens(self) -> int:
        return 1

    def _encode(self, X):
        h = X.reshape(X.shape[0], -1)
        for layer in self.layers:
            h = ops.relu(layer(h))
        return self.out(h).reshape(X.shape[0], 1, self.hidden)


class ConvBlock(Module):
    """conv -> batchnorm -> relu (relu optional)."""

    def __init__(self, c_in, c_out, k, rng, act=True):
        self.conv = Conv1d(c_in, c_out, k, rng)
        self.bn = BatchNorm1d(c_out)
        self.act = act

    def forward(self, x):
        y = self.bn(self.conv(x))
        return ops.relu(y) if self.act else y


def _tokens(h: Tensor, proj: Linear) -> Tensor:
    """``B x C x T`` feature map -> ``B x T x hidden`` via a per-step projection."""
    return proj(h.transpose(0, 2, 1))


class CNNEncoder(Encoder):
    """Fully convolutional stack (128/256/128 channels, kernels 8/5/3 by default)."""

    def __init__(self, cfg, T, d, rng):
        super().__init__(cfg, T, d)
        chans = [d, *cfg.cnn_channels]
        self.blocks = [ConvBlock(a, b, k, rng) for a, b, k in zip(chans[:-1], chans[1:], cfg.cnn_kernels)]
        self.proj = Linear(chans[-1], cfg.hidden, rng)

    def _encode(self, X):
        h = X.transpose(0, 2, 1)
        for block in self.blocks:
            h = block(h)
        return _tokens(h, self.proj)


class ResidualBlock(Module):
    def __init__(self, c_in, c_out, kernels, rng):
        chans = [c_in] + [c_out] * len(kernels)
        n = len(kernels)
        self.convs = [
            ConvBlock(a, b, k, rng, act=(i < n - 1))
            for i, (a, b, k) in enumerate(zip(chans[:-1], chans[1:], kernels))
        ]
        # 1x1 projection when widths differ, identity otherwise
        self.shortcut = ConvBlock(c_in, c_out, 1, rng, act=False) if c_in != c_out else None

    def forward(self, x):
        y = x
        for conv in self.convs:
            y = conv(y)
        skip = self.shortcut(x) if self.shortcut is not None else x
        return ops.relu(y + skip)


class ResNetEncoder(Encoder):
    """Residual blocks of three conv layers each (kernels 8/5/3)."""

    def __init__(self, cfg, T, d, rng):
        super().__init__(cfg, T, d)
        chans = [d, *cfg.resnet_channels]
        self.blocks = [ResidualBlock(a, b, cfg.resnet_kernels, rng) for a, b in zip(chans[:-1], chans[1:])]
        self.proj = Linear(chans[-1], cfg.hidden, rng)

    def _encode(self, X):
        h = X.transpose(0, 2, 1)
        for block in self.blocks:
            h = block(h)
        return _tokens(h, self.proj)


class InceptionModule(Module):
    """Bottleneck, ``n_kernels`` parallel same-padded convs of sizes K, 2K, ...,
    plus a maxpool -> 1x1 branch; outputs are concatenated on channels."""

    def __init__(self, c_in, cfg: EncoderConfig, rng):
        nf = cfg.branch_filters
        self.bottleneck = Conv1d(c_in, cfg.bottleneck, 1, rng, bias=False) if c_in > 1 else None
        width = cfg.bottleneck if c_in > 1 else c_in
        self.branches = [Conv1d(width, nf, k, rng, bias=False) for k in cfg.branch_kernel_sizes()]
        self.pool_conv = Conv1d(c_in, nf, 1, rng, bias=False)
        self.bn = BatchNorm1d(nf * (cfg.n_kernels + 1))

    @property
    def out_channels(self) -> int:
        return self.bn.gamma.size

    def forward(self, x):
        z = self.bottleneck(x) if self.bottleneck is not None else x
        outs = [branch(z) for branch in self.branches]
        outs.append(self.pool_conv(ops.maxpool1d(x, 3, stride=1, padding="same")))
        return ops.relu(self.bn(concat(outs, axis=1)))


class InceptionEncoder(Encoder):
    """Stack of ``depth`` inception modules with a residual shortcut every 2."""

    residual_every = 2

    def __init__(self, cfg, T, d, rng):
        super().__init__(cfg, T, d)
        width = cfg.branch_filters * (cfg.n_kernels + 1)
        self.blocks = []
        self.shortcuts = []
        c_in = res_in = d
        for i in range(cfg.depth):
            self.blocks.append(InceptionModule(c_in, cfg, rng))
            c_in = width
            if (i + 1) % self.residual_every == 0:
                self.shortcuts.append(ConvBlock(res_in, width, 1, rng, act=False))
                res_in = width
        self.proj = Linear(width, cfg.hidden, rng)

    def _encode(self, X):
        h = res = X.transpose(0, 2, 1)
        shortcuts = iter(self.shortcuts)
        for i, module in enumerate(self.blocks):
            h = module(h)
            if (i + 1) % self.residual_every == 0:
                h = ops.relu(h + next(shortcuts)(res))
                res = h
        return _tokens(h, self.proj)


class SelfAttention(Module):
    def __init__(self, dim, heads, rng, causal=False, init=None):
        self.heads = heads
        self.causal = causal
        self.qkv = Linear(dim, 3 * dim, rng)
        self.out = Linear(dim, dim, rng)
        if init is not None:
            for layer in (self.qkv, self.out):
                layer.weight.data[...] = init(layer.weight.shape)

    def forward(self, x):
        B, S, D = x.shape
        H = self.heads
        qkv = self.qkv(x).reshape(B, S, 3, H, D // H).transpose(2, 0, 3, 1, 4)
        y = ops.attention(qkv[0], qkv[1], qkv[2], causal_mask=self.causal)
        return self.out(y.transpose(0, 2, 1, 3).reshape(B, S, D))


class TransformerLayer(Module):
    """Pre-norm block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, dim, heads, ffn, rng, causal=False, init=None):
        self.ln1 = LayerNorm(dim)
        self.attn = SelfAttention(dim, heads, rng, causal=causal, init=init)
        self.ln2 = LayerNorm(dim)
        self.fc1 = Linear(dim, ffn, rng)
        self.fc2 = Linear(ffn, dim, rng)
        if init is not None:
            for layer in (self.fc1, self.fc2):
                layer.weight.data[...] = init(layer.weight.shape)

    def forward(self, x):
        x = x + self.attn(self.ln1(x))
        return x + self.fc2(ops.gelu(self.fc1(self.ln2(x))))


class TransformerEncoder(Encoder):
    """Non-overlapping patches embedded to ``hidden``, sinusoidal positions,
    bidirectional pre-norm encoder layers."""

    def __init__(self, cfg, T, d, rng):
        super().__init__(cfg, T, d)
        self.patch = Linear(cfg.patch_len * d, cfg.hidden, rng)
        self.layers = [TransformerLayer(cfg.hidden, cfg.heads, 4 * cfg.hidden, rng) for _ in range(cfg.layers)]
        self.norm = LayerNorm(cfg.hidden)
        self._positions = sinusoidal_positions(self.num_tokens, cfg.hidden)

    @property
    def num_tokens(self) -> int:
        return math.ceil(self.T / self.config.patch_len)

    def _encode(self, X):
        B = X.shape[0]
        p, L = self.config.patch_len, self.num_tokens
        pad = L * p - self.T
        if pad:
            X = concat([X, np.zeros((B, pad, self.d), dtype=X.dtype)], axis=1)
        h = self.patch(X.reshape(B, L, p * self.d)) + self._positions.astype(X.dtype)
        for layer in self.layers:
            h = layer(h)
        return self.norm(h)


_BUILDERS = {
    "mlp": MLPEncoder,
    "cnn": CNNEncoder,
    "resnet": ResNetEncoder,
    "inception": InceptionEncoder,
    "transformer": TransformerEncoder,
}


def build_encoder(cfg: EncoderConfig, T: int, d: int = 1, seed: int = 0) -> Encoder:
    """Construct an encoder for length-``T``, ``d``-channel series.

    Weights are Kaiming-uniform, biases zero, norm scales one, drawn from a
    generator seeded with ``seed``.
    """
    cfg.validate()
    if T < 1 or d < 1:
        raise InvalidConfigError("T" if T < 1 else "d", "must be positive")
    rng = np.random.default_rng(seed)
    return _BUILDERS[cfg.family](cfg, T, d, rng)


class LinearHead(Module):
    """Affine map from ``hidden`` to ``num_classes`` logits (weight is h x C)."""

    def __init__(self, hidden: int, num_classes: int, rng: np.random.Generator | int = 0):
        rng = np.random.default_rng(rng) if isinstance(rng, (int, np.integer)) else rng
        self.weight = Tensor(kaiming_uniform(rng, (hidden, num_classes), hidden), requires_grad=True)
        self.bias = Tensor(np.zeros(num_classes), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


def pool_and_classify(enc_out: Tensor, head: LinearHead) -> Tensor:
    """Mean over the ``L`` tokens, then the linear head: ``B x L x h -> B x C``."""
    return head(enc_out.mean(axis=1))


class PlainModel(Module):
    """Encoder + linear prediction head, no backbone."""

    def __init__(self, encoder: Encoder, num_classes: int, seed: int = 0):
        self.encoder = encoder
        self.head = LinearHead(encoder.hidden, num_classes, seed)

    def forward(self, X) -> Tensor:
        return pool_and_classify(self.encoder.encode(X), self.head)
