"""Reduced model sizes that train 100 epochs on a few hundred short series in minutes on one CPU core."""
from __future__ import annotations

from dataclasses import replace

from .backbone import BackboneConfig
from .encoders import EncoderConfig

DESK_ENCODERS = {
    "mlp": EncoderConfig(family="mlp"),
    "cnn": EncoderConfig(family="cnn", cnn_channels=(32, 64, 32)),
    "resnet": EncoderConfig(family="resnet", resnet_channels=(32, 64, 32)),
    "inception": EncoderConfig(family="inception", depth=3),
    "transformer": EncoderConfig(family="transformer"),
}

DESK_BACKBONE = BackboneConfig(layers=2, hidden=64, heads=4)


def desk_encoder(family: str, hidden: int | None = None) -> EncoderConfig:
    cfg = DESK_ENCODERS[family]
    return cfg if hidden is None else replace(cfg, hidden=hidden)
