"""Spectral-temporal graph network for aspect polarity classification."""

from .model import Model, ModelConfig, load_checkpoint, save_checkpoint
from .tensor import Tensor
from .training import TrainConfig, TrainReport, fit_two_pass

__all__ = [
    "Model",
    "ModelConfig",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "fit_two_pass",
    "load_checkpoint",
    "save_checkpoint",
]

__version__ = "0.1.0"
