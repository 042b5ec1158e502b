"""Conditional-GAN DTM predictor operating on .dtr raster stacks."""

from .config import GanConfig
from .errors import (BandOrderMismatch, DataError, DeepterraError,
                     DivergenceError, FormatError, ShapeMismatch)
from .losses import adversarial_losses, generator_objective, masked_l1
from .models import PatchDiscriminator, UNetGenerator
from .normalize import NormStats, compute_norm_stats
from .predict import load_checkpoint, predict
from .train import load_dataset, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "BandOrderMismatch", "DataError", "DeepterraError", "DivergenceError",
    "FormatError", "GanConfig", "NormStats", "PatchDiscriminator",
    "ShapeMismatch", "UNetGenerator", "adversarial_losses",
    "compute_norm_stats", "generator_objective", "load_checkpoint",
    "load_dataset", "masked_l1", "predict", "save_checkpoint", "train",
]
