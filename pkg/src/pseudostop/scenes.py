"""Synthetic test scenes with controlled spectral content.

Gray scenes are Gaussian random fields with a power-law spectrum.  Color
scenes add a narrow high-frequency texture band on top of the power-law
base: the smooth part is what a low-pass-first reconstructor recovers
early, the texture band is what it recovers last before fitting noise,
so trajectories on these scenes show a pronounced rise-then-overfit arc
with an interior best checkpoint.  Channels share one structural field
with small channel-specific perturbations, giving the cross-channel
criteria a realistic amount of redundancy to exploit.
"""

from __future__ import annotations

import numpy as np

from .core import ImageTensor, frequency_weights
from .errors import DomainError


def power_law_field(
    height: int, width: int, rng: np.random.Generator, exponent: float = 1.1
) -> np.ndarray:
    """One zero-mean unit-power field with spectrum ~ (1 + |w|**2) ** -exponent."""
    if exponent <= 0:
        raise DomainError("exponent must be positive")
    white = rng.standard_normal((height, width))
    amp = (1.0 + frequency_weights(height, width)) ** (-exponent / 2.0)
    return _normalized(np.fft.ifft2(np.fft.fft2(white) * amp).real)


def textured_field(
    height: int,
    width: int,
    rng: np.random.Generator,
    exponent: float = 1.1,
    ring_radius_frac: float = 0.53,
    ring_width_frac: float = 0.094,
    base_weight: float = 0.4,
) -> np.ndarray:
    """Power-law base plus a narrow spectral ring of fine texture.

    The amplitude shape is base_weight * (1 + r) ** (-exponent / 2) plus a
    Gaussian bump centered at radius ring_radius_frac * min(height, width),
    with r the centered frequency radius.
    """
    if exponent <= 0:
        raise DomainError("exponent must be positive")
    side = min(height, width)
    radius = np.sqrt(frequency_weights(height, width))
    bump = np.exp(-(((radius - ring_radius_frac * side) / (ring_width_frac * side)) ** 2))
    amp = base_weight * (1.0 + radius) ** (-exponent / 2.0) + bump
    white = rng.standard_normal((height, width))
    return _normalized(np.fft.ifft2(np.fft.fft2(white) * amp).real)


def _normalized(field: np.ndarray) -> np.ndarray:
    field = field - field.mean()
    scale = float(np.sqrt(np.mean(field * field)))
    return field / scale if scale > 0 else field


def _to_unit(field: np.ndarray, lo: float = 0.1, hi: float = 0.9) -> np.ndarray:
    fmin, fmax = float(field.min()), float(field.max())
    if fmax == fmin:
        return np.full_like(field, 0.5 * (lo + hi))
    return lo + (hi - lo) * (field - fmin) / (fmax - fmin)


def synthetic_gray(height: int, width: int, seed: int, exponent: float = 1.1) -> ImageTensor:
    """One-channel power-law scene in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    return ImageTensor(_to_unit(power_law_field(height, width, rng, exponent))[None])


def synthetic_rgb(
    height: int,
    width: int,
    seed: int,
    exponent: float = 1.1,
    spread: float = 0.12,
) -> ImageTensor:
    """Three-channel textured scene whose channels share most structure.

    Each channel mixes the common structural field with its own field at
    weight `spread` and gets a mild gain/offset so channels are similar
    but never identical; the joint range maps to [0.1, 0.9].
    """
    if not (0 <= spread < 1):
        raise DomainError("spread must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    base = textured_field(height, width, rng, exponent)
    gains = (1.0, 0.93, 0.85)
    offsets = (0.0, 0.02, -0.02)
    planes = []
    for gain, offset in zip(gains, offsets):
        extra = textured_field(height, width, rng, exponent)
        planes.append(gain * base + spread * extra + offset)
    return ImageTensor(_to_unit(np.stack(planes)))
