"""Frozen decoder-only transformer backbone and the hybrid classifier.

The backbone input is assembled as ``[prompt (P) | latent tokens (L) | readout]``
where the readout slot carries the padding embedding.  The classification head
reads the final-layer hidden state at the readout slot.  Backbone parameters
never receive optimizer updates but gradients still propagate through them to
the encoder.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .encoders import Encoder, LinearHead, TransformerLayer
from .nn import LayerNorm, Module
from .tensor import ShapeError, Tensor, concat

__all__ = [
    "BackboneConfig",
    "ContextOverflowError",
    "FrozenBackbone",
    "HybridModel",
    "assemble_input",
    "build_backbone",
    "hybrid_forward",
]

INIT_STD = 0.02


class ContextOverflowError(ShapeError):
    pass


@dataclass
class BackboneConfig:
    layers: int = 4
    hidden: int = 128
    heads: int = 4
    ffn: int | None = None  # defaults to 4 * hidden
    max_len: int = 256
    prompt_len: int = 8
    seed: int = 0

    @property
    def ffn_width(self) -> int:
        return self.ffn or 4 * self.hidden

    def validate(self) -> BackboneConfig:
        from .encoders import InvalidConfigError

        if self.hidden < 1 or self.heads < 1 or self.hidden % self.heads:
            raise InvalidConfigError("heads", f"hidden={self.hidden} is not divisible by heads={self.heads}")
        if self.layers < 1:
            raise InvalidConfigError("layers", "must be >= 1")
        if self.prompt_len < 0:
            raise InvalidConfigError("prompt_len", "must be >= 0")
        if self.max_len < self.prompt_len + 2:
            raise InvalidConfigError("max_len", "no room for a latent token and the readout slot")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


class FrozenBackbone(Module):
    def __init__(self, cfg: BackboneConfig):
        self.config = cfg
        rng = np.random.default_rng(cfg.seed)

        def init(shape):
            return rng.normal(0.0, INIT_STD, size=shape)

        h = cfg.hidden
        self.prompt = Tensor(init((cfg.prompt_len, h)))
        self.padding = Tensor(init((h,)))
        self.positions = Tensor(init((cfg.max_len, h)))
        self.layers = [
            TransformerLayer(h, cfg.heads, cfg.ffn_width, rng, causal=True, init=init)
            for _ in range(cfg.layers)
        ]
        self.norm = LayerNorm(h)
        self.freeze()
        self.reference_checksum = self.checksum()

    @property
    def hidden(self) -> int:
        return self.config.hidden

    def sequence_length(self, num_latent: int) -> int:
        return self.config.prompt_len + num_latent + 1

    def forward(self, Zhat: Tensor) -> Tensor:
        """Final-layer hidden states ``B x S x h`` for an assembled input."""
        S = Zhat.shape[1]
        if S > self.config.max_len:
            raise ContextOverflowError(f"sequence of {S} exceeds max_len {self.config.max_len}")
        h = Zhat + self.positions.data[:S].astype(Zhat.dtype)
        for layer in self.layers:
            h = layer(h)
        return self.norm(h)

    def is_intact(self) -> bool:
        return self.checksum() == self.reference_checksum


def build_backbone(cfg: BackboneConfig | None = None) -> FrozenBackbone:
    """Seeded, fully frozen pre-norm causal transformer."""
    cfg = (cfg or BackboneConfig()).validate()
    return FrozenBackbone(cfg)


def assemble_input(Z: Tensor, bb: FrozenBackbone) -> Tensor:
    """``[prompt | Z | padding]`` along the sequence axis: ``B x (P+L+1) x h``."""
    B, L, h = Z.shape
    P, S_max = bb.config.prompt_len, bb.config.max_len
    if h != bb.hidden:
        raise ShapeError(f"latent width {h} does not match backbone hidden size {bb.hidden}")
    if P + L + 1 > S_max:
        raise ContextOverflowError(
            f"prompt ({P}) + latent tokens ({L}) + readout (1) exceeds max_len {S_max}"
        )
    dtype = Z.dtype
    prompt = np.broadcast_to(bb.prompt.data.astype(dtype), (B, P, h))
    pad = np.broadcast_to(bb.padding.data.astype(dtype), (B, 1, h))
    return concat([prompt, Z, pad], axis=1)


class HybridModel(Module):
    """Trainable encoder -> frozen backbone -> trainable head at the readout slot."""

    def __init__(self, encoder: Encoder, backbone: FrozenBackbone, num_classes: int, seed: int = 0):
        if encoder.hidden != backbone.hidden:
            raise ShapeError(
                f"encoder hidden size {encoder.hidden} != backbone hidden size {backbone.hidden}"
            )
        needed = backbone.sequence_length(encoder.num_tokens)
        if needed > backbone.config.max_len:
            raise ContextOverflowError(
                f"prompt ({backbone.config.prompt_len}) + latent tokens ({encoder.num_tokens}) + "
                f"readout (1) exceeds max_len {backbone.config.max_len}"
            )
        self.encoder = encoder
        self.backbone = backbone
        self.head = LinearHead(backbone.hidden, num_classes, seed)

    def hidden_states(self, X) -> Tensor:
        return self.backbone(assemble_input(self.encoder.encode(X), self.backbone))

    def forward(self, X) -> Tensor:
        return self.head(self.hidden_states(X)[:, -1, :])


def hybrid_forward(m: HybridModel, X) -> Tensor:
    return m(X)
