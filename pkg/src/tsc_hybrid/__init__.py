"""Time-series classification with trainable encoders and a frozen transformer backbone."""
from .backbone import BackboneConfig, FrozenBackbone, HybridModel, assemble_input, build_backbone
from .data import Dataset, TimeSeriesSample, batch_iter, load_ucr_dataset, load_ucr_split, znormalize
from .encoders import EncoderConfig, LinearHead, PlainModel, build_encoder, pool_and_classify
from .tensor import Tensor, default_dtype, no_grad
from .trainer import RunResult, TrainConfig, compute_metrics, evaluate, train_run

__all__ = [
    "BackboneConfig", "Dataset", "EncoderConfig", "FrozenBackbone", "HybridModel", "LinearHead",
    "PlainModel", "RunResult", "Tensor", "TimeSeriesSample", "TrainConfig", "assemble_input",
    "batch_iter", "build_backbone", "build_encoder", "compute_metrics", "default_dtype", "evaluate",
    "load_ucr_dataset", "load_ucr_split", "no_grad", "pool_and_classify", "train_run", "znormalize",
]

__version__ = "0.1.0"
