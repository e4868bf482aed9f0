"""Exception types shared across the trainer."""

from __future__ import annotations

__all__ = ["TrainerError", "ConfigError", "ShapeError"]


class TrainerError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TrainerError):
    """A configuration value is out of range or inconsistent."""


class ShapeError(TrainerError):
    """An array has a shape the pipeline cannot process."""
