"""Regularization-strength selection for one-shot variational denoisers.

The same cross-channel trick that stops iterative runs also picks a
penalty weight: denoise one channel along a grid of weights and score each
result against the closest *other* observed channel. The denoiser here is
quadratic smoothing,

    xhat_lam = argmin_x  0.5 * ||x - y||**2 + 0.5 * lam * ||grad x||**2

with a periodic forward-difference gradient, which diagonalizes in
frequency:

    xhat_lam(w) = yhat(w) / (1 + lam * ell(w)),
    ell(w) = 4 sin(pi u / H)**2 + 4 sin(pi v / W)**2.

The stationarity condition (x - y) + lam * grad' grad x = 0 holds exactly,
so an iterative solver must reproduce the spectral solution to solver
tolerance -- that equivalence is part of the test contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ImageTensor, idft2, dft2, mean_square
from .criteria import closest_channel_pair
from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly increasing penalty weights, optionally starting at zero."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise DomainError("empty grid")
        if vals[0] < 0:
            raise DomainError("penalty weights must be >= 0")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise DomainError("grid must be strictly increasing")
        if len(vals) > 1 and vals[1] <= 0:
            raise DomainError("only the leading weight may be zero")
        object.__setattr__(self, "values", vals)

    @classmethod
    def log_default(
        cls, count: int = 40, lo: float = 1e-3, hi: float = 1e2
    ) -> "LambdaGrid":
        if count < 2 or not (0 < lo < hi):
            raise DomainError("need count >= 2 and 0 < lo < hi")
        return cls(tuple(np.logspace(np.log10(lo), np.log10(hi), count)))

    def __len__(self) -> int:
        return len(self.values)


@lru_cache(maxsize=None)
def laplacian_spectrum(height: int, width: int) -> np.ndarray:
    """Eigenvalues of grad' grad for periodic forward differences."""
    if height < 1 or width < 1:
        raise DomainError("grid dimensions must be positive")
    lu = 4.0 * np.sin(np.pi * np.arange(height) / height) ** 2
    lv = 4.0 * np.sin(np.pi * np.arange(width) / width) ** 2
    ell = lu[:, None] + lv[None, :]
    ell.flags.writeable = False
    return ell


def tikhonov_denoise(plane: np.ndarray, lam: float) -> np.ndarray:
    """Spectral solution of the quadratic smoothing objective on one plane.

    lam = 0 returns the input unchanged; large lam contracts toward the
    plane mean (the zero-frequency component is never penalized).
    """
    if lam < 0:
        raise DomainError(f"penalty weight must be >= 0, got {lam}")
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ShapeError(f"expected a 2-D plane, got shape {plane.shape}")
    if lam == 0:
        return plane.copy()
    ell = laplacian_spectrum(*plane.shape)
    return idft2(dft2(plane) / (1.0 + lam * ell)).real


@dataclass
class LambdaCurve:
    """Scores along a penalty grid (pseudo-reference and, optionally, oracle)."""

    lambdas: list[float]
    pseudo: list[float]
    oracle: list[float] | None = None

    def __post_init__(self):
        if len(self.lambdas) != len(self.pseudo):
            raise ShapeError("grid and scores differ in length")
        if self.oracle is not None and len(self.oracle) != len(self.lambdas):
            raise ShapeError("grid and oracle scores differ in length")


def select_lambda(
    y: ImageTensor, grid: LambdaGrid
) -> tuple[tuple[int, int], float, LambdaCurve]:
    """Pick the penalty weight by cross-channel scoring.

    Denoises the first channel of the closest observed pair along the grid
    and scores each result against the second channel. Returns
    ((denoised_channel, reference_channel), selected_lambda, curve); score
    ties break toward the smaller weight.
    """
    i, j = closest_channel_pair(y)
    pseudo = [
        mean_square(tikhonov_denoise(y.data[i], lam) - y.data[j]) for lam in grid.values
    ]
    best = int(np.argmin(pseudo))
    curve = LambdaCurve(list(grid.values), pseudo)
    return (i, j), grid.values[best], curve


def oracle_lambda(
    y: ImageTensor, clean: ImageTensor, channel: int, grid: LambdaGrid
) -> tuple[float, list[float]]:
    """Best penalty weight against the clean channel (diagnostics only)."""
    if clean.data.shape != y.data.shape:
        raise ShapeError("observation and clean image disagree in shape")
    scores = [
        mean_square(tikhonov_denoise(y.data[channel], lam) - clean.data[channel])
        for lam in grid.values
    ]
    return grid.values[int(np.argmin(scores))], scores
