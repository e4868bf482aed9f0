"""Image tensors, trajectories, and the fixed spectral conventions.

All pixel math runs on channel-major arrays of shape (C, H, W). Values
nominally live in [0, 1] but nothing clips: intermediate results may leave
that range and metrics must stay exact, so arithmetic is plain IEEE float.

The 2-D transform convention is fixed package-wide: unnormalized forward,
1/(H*W) inverse. Under it Parseval reads

    sum(x**2) == sum(|dft2(x)|**2) / (H * W)

and frequencies are the centered signed integers u in [-H/2, H/2),
v in [-W/2, W/2) with squared radius u**2 + v**2 (zero at DC).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError, ShapeError, ZeroResidualError

if TYPE_CHECKING:
    from .noise import HoldoutMask


def _as_float_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    return arr


@dataclass
class ImageTensor:
    """A C x H x W stack of real-valued planes.

    peak is the reference intensity used by PSNR (1.0 for unit-range
    images, 255.0 for 8-bit ones). float32 and float64 payloads are both
    accepted and preserved; everything else is promoted to float64.
    """

    data: np.ndarray
    peak: float = 1.0

    def __post_init__(self):
        self.data = _as_float_array(self.data)
        if self.data.ndim != 3:
            raise ShapeError(f"expected (C, H, W) data, got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise ShapeError(f"degenerate dimensions in shape {self.data.shape}")
        if not (self.peak > 0):
            raise DomainError(f"peak must be positive, got {self.peak}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def n(self) -> int:
        """Total number of scalar entries, C * H * W."""
        return self.data.size

    def like(self, data) -> "ImageTensor":
        """New tensor with the same peak and fresh data."""
        return ImageTensor(data, peak=self.peak)

    def copy(self) -> "ImageTensor":
        return ImageTensor(self.data.copy(), peak=self.peak)


@dataclass
class Trajectory:
    """Checkpointed reconstruction states of one iterative run.

    frames[k] is the reconstruction after iterations[k] steps; iteration
    labels are strictly increasing. divergence, when present, carries the
    normalized Jacobian trace per frame (needed by the unbiased-risk
    criterion). mode and mask record how the run consumed the observation
    so downstream curves can refuse mismatched references.
    """

    frames: list[ImageTensor]
    iterations: list[int]
    divergence: list[float] | None = None
    mode: str = "plain"
    mask: "HoldoutMask | None" = None

    def __post_init__(self):
        if not self.frames:
            raise ShapeError("trajectory needs at least one frame")
        shape = self.frames[0].data.shape
        for f in self.frames:
            if f.data.shape != shape:
                raise ShapeError("trajectory frames disagree in shape")
        if len(self.iterations) != len(self.frames):
            raise ShapeError("iteration labels and frames differ in length")
        it = list(self.iterations)
        if any(b <= a for a, b in zip(it, it[1:])):
            raise DomainError("iteration labels must be strictly increasing")
        if self.divergence is not None and len(self.divergence) != len(self.frames):
            raise ShapeError("divergence list and frames differ in length")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def channels(self) -> int:
        return self.frames[0].channels

    def stacked(self) -> np.ndarray:
        """Frames as one (T, C, H, W) array (copies)."""
        return np.stack([f.data for f in self.frames])


@lru_cache(maxsize=None)
def frequency_weights(height: int, width: int) -> np.ndarray:
    """Squared frequency radius u**2 + v**2 on the (height, width) grid.

    Centered signed integer frequencies; symmetric under negation and zero
    at DC. The returned array is cached and read-only.
    """
    if height < 1 or width < 1:
        raise DomainError("grid dimensions must be positive")
    u = np.fft.fftfreq(height) * height
    v = np.fft.fftfreq(width) * width
    w = u[:, None] ** 2 + v[None, :] ** 2
    w.flags.writeable = False
    return w


@dataclass(frozen=True)
class FrequencyGrid:
    """Frequency bookkeeping for an H x W plane."""

    height: int
    width: int

    @property
    def weights(self) -> np.ndarray:
        return frequency_weights(self.height, self.width)

    @property
    def max_weight(self) -> float:
        return float(self.weights.max())


def mean_square(arr) -> float:
    """Mean of squared entries, accumulated in float64.

    Every fidelity curve in the package funnels through this helper so that
    mathematically identical curves are also bitwise identical.
    """
    arr = np.asarray(arr, dtype=np.float64)
    return float(np.mean(np.square(arr)))


def mse(a: ImageTensor, b: ImageTensor) -> float:
    """Mean squared error over all C * H * W entries."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    return mean_square(a.data - b.data)


def psnr(mse_value: float, peak: float) -> float:
    """Peak signal-to-noise ratio in dB for a given mean squared error.

    A zero mse maps to +inf (documented sentinel); negative arguments are
    domain errors.
    """
    if not (peak > 0):
        raise DomainError(f"peak must be positive, got {peak}")
    if mse_value < 0:
        raise DomainError(f"mse must be nonnegative, got {mse_value}")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse_value)


def dft2(plane: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D transform of one real plane."""
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ShapeError(f"dft2 expects a 2-D plane, got shape {plane.shape}")
    return np.fft.fft2(plane.astype(np.float64, copy=False))


def idft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of dft2 (carries the full 1/(H*W) factor). Complex output;
    take .real for spectra of real planes."""
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 2:
        raise ShapeError(f"idft2 expects a 2-D spectrum, got shape {spectrum.shape}")
    return np.fft.ifft2(spectrum)


def spectral_mean_frequency(residual: ImageTensor) -> float:
    """Power-weighted mean squared frequency of a residual image.

    Per channel the residual is transformed, its power spectrum |.|**2 is
    weighted by the squared frequency radius, and numerator and denominator
    are summed across channels before the final ratio. The DC bin carries
    zero weight, so a constant residual scores exactly 0; a pure wave at
    frequency (1, 0) scores exactly 1. The score is invariant under scaling
    of the residual.
    """
    num = 0.0
    den = 0.0
    w = frequency_weights(residual.height, residual.width)
    for c in range(residual.channels):
        power = np.abs(dft2(residual.data[c])) ** 2
        num += float(np.sum(w * power))
        den += float(np.sum(power))
    if den == 0.0:
        raise ZeroResidualError("spectral score undefined for a zero residual")
    return num / den
