"""Untrained-network trainer that exports scoring-ready trajectory bundles."""

from .bundle_io import BUNDLE_VERSION, write_bundle
from .corruption import FAMILIES, aux_pair, corrupt, sample_mask
from .errors import ConfigError, ShapeError, TrainerError
from .model import SkipUNet
from .train import MODES, TrainConfig, checkpoint_iterations, masked_loss, train_export

__version__ = "0.1.0"

__all__ = [
    "BUNDLE_VERSION",
    "ConfigError",
    "FAMILIES",
    "MODES",
    "ShapeError",
    "SkipUNet",
    "TrainConfig",
    "TrainerError",
    "aux_pair",
    "checkpoint_iterations",
    "corrupt",
    "masked_loss",
    "sample_mask",
    "train_export",
    "write_bundle",
]
