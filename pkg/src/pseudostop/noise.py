"""Synthetic corruption: noise draws, auxiliary references, held-out masks.

Three zero-mean noise families are supported:

* gaussian -- additive N(0, level**2) per entry;
* poisson  -- y = Poisson(level * x) / level, so E[y | x] = x for x >= 0
  (negative intensities get zero rate);
* impulse  -- with probability `level` a pixel receives an additive spike
  of amplitude +-1 with equal sign probability.

All draws consume a caller-supplied integer seed through
numpy.random.default_rng, so identical calls reproduce bit-identical
corruptions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ImageTensor, mean_square
from .errors import ConfigError, DomainError, SeedCollisionError, ShapeError

FAMILIES = ("gaussian", "poisson", "impulse")

# Auxiliary corruption level per family: scale * level + factor * offset.
# The multiplicative rate family takes the offset undamped.
_OFFSET_FACTOR = {"gaussian": 0.1, "poisson": 1.0, "impulse": 0.1}


@dataclass(frozen=True)
class NoiseSpec:
    """One corruption process plus the rule for its auxiliary level.

    level means: standard deviation (gaussian), rate multiplier (poisson),
    or spike probability (impulse). aux_scale/aux_offset parameterize the
    heavier level used when re-corrupting an observation to build
    auxiliary references; the default is 1.25x the primary level.
    """

    family: str
    level: float
    aux_scale: float = 1.25
    aux_offset: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown noise family {self.family!r}")
        if self.family == "gaussian" and self.level < 0:
            raise DomainError("gaussian level must be >= 0")
        if self.family == "poisson" and not (self.level > 0):
            raise DomainError("poisson level must be > 0")
        if self.family == "impulse" and not (0 <= self.level <= 1):
            raise DomainError("impulse level must lie in [0, 1]")
        if self.aux_scale < 0:
            raise DomainError("aux_scale must be >= 0")

    @property
    def aux_level(self) -> float:
        """Corruption level for auxiliary references under the family rule."""
        return self.aux_scale * self.level + _OFFSET_FACTOR[self.family] * self.aux_offset

    def at_level(self, level: float) -> "NoiseSpec":
        """Same family and aux rule at a different primary level."""
        return replace(self, level=level)


def corrupt(x: ImageTensor, spec: NoiseSpec, seed: int) -> ImageTensor:
    """Draw one corrupted copy of x. Deterministic in (x, spec, seed)."""
    rng = np.random.default_rng(seed)
    shape = x.data.shape
    if spec.family == "gaussian":
        y = x.data + spec.level * rng.standard_normal(shape)
    elif spec.family == "poisson":
        rate = spec.level * np.clip(x.data, 0.0, None)
        y = rng.poisson(rate).astype(np.float64) / spec.level
    else:
        hits = rng.random(shape) < spec.level
        signs = rng.integers(0, 2, shape) * 2 - 1
        y = x.data + hits * signs.astype(np.float64)
    return x.like(y)


def make_aux_pair(
    y: ImageTensor,
    spec: NoiseSpec,
    seeds: tuple[int, int],
    taus: tuple[float, float] | None = None,
) -> tuple[ImageTensor, ImageTensor]:
    """Re-corrupt an observation twice at the auxiliary level.

    Returns (y1, y2): two conditionally independent heavier corruptions of
    y, drawn from distinct seeds (equal seeds are refused, since the pair
    must carry independent noise). taus optionally overrides the per-copy
    auxiliary levels.
    """
    s1, s2 = seeds
    if s1 == s2:
        raise SeedCollisionError(f"auxiliary seeds must differ, got {s1} twice")
    t1, t2 = taus if taus is not None else (spec.aux_level, spec.aux_level)
    y1 = corrupt(y, spec.at_level(t1), s1)
    y2 = corrupt(y, spec.at_level(t2), s2)
    return y1, y2


@dataclass
class HoldoutMask:
    """Binary retention plane M plus its complement H = 1 - M.

    plane[i] == 1 marks a pixel visible to training; held-out pixels feed
    validation only. The held-out set must be non-empty.
    """

    plane: np.ndarray
    p_keep: float = 0.98

    def __post_init__(self):
        self.plane = np.asarray(self.plane)
        if self.plane.ndim != 2:
            raise ShapeError(f"mask plane must be 2-D, got shape {self.plane.shape}")
        vals = np.unique(self.plane)
        if not np.all(np.isin(vals, (0, 1))):
            raise DomainError("mask plane must be binary")
        self.plane = self.plane.astype(np.uint8)
        if int(self.plane.size - self.plane.sum()) < 1:
            raise ConfigError("held-out set is empty")

    @property
    def held_out(self) -> np.ndarray:
        """Complement plane H = 1 - M (uint8)."""
        return (1 - self.plane).astype(np.uint8)

    @property
    def held_out_bool(self) -> np.ndarray:
        return self.plane == 0

    @property
    def retained_count(self) -> int:
        return int(self.plane.sum())

    @property
    def held_out_count(self) -> int:
        return int(self.plane.size - self.plane.sum())


def sample_mask(height: int, width: int, p_keep: float, seed: int) -> HoldoutMask:
    """Draw an iid Bernoulli(p_keep) retention plane.

    p_keep is strictly inside (0, 1). If the draw happens to retain every
    pixel, one retained pixel (chosen from the same stream) is flipped so
    the held-out set is never empty.
    """
    if not (0 < p_keep < 1):
        raise DomainError(f"p_keep must lie strictly in (0, 1), got {p_keep}")
    rng = np.random.default_rng(seed)
    plane = (rng.random((height, width)) < p_keep).astype(np.uint8)
    if plane.all():
        plane[rng.integers(height), rng.integers(width)] = 0
    return HoldoutMask(plane, p_keep=p_keep)


@dataclass
class SharedNoiseScene:
    """Decomposed observation x + s + eta with a sibling copy x + s + eta~.

    s is a noise component shared by both observations (rescaled so its
    empirical energy ||s||**2 / n hits the requested value exactly); eta and
    eta~ are independent per-copy fields of standard deviation eta_std.
    """

    clean: ImageTensor
    shared: ImageTensor
    eta: ImageTensor
    eta_tilde: ImageTensor
    shared_energy: float
    eta_std: float

    @property
    def observation(self) -> ImageTensor:
        """y = x + s + eta (the copy a reconstructor trains on)."""
        return self.clean.like(self.clean.data + self.shared.data + self.eta.data)

    @property
    def sibling(self) -> ImageTensor:
        """y~ = x + s + eta~ (the copy used as a reference)."""
        return self.clean.like(self.clean.data + self.shared.data + self.eta_tilde.data)


def build_shared_scene(
    x: ImageTensor, shared_energy: float, eta_std: float, seed: int
) -> SharedNoiseScene:
    """Draw the shared and per-copy noise fields for a two-copy scene."""
    if shared_energy < 0:
        raise DomainError("shared_energy must be >= 0")
    if eta_std < 0:
        raise DomainError("eta_std must be >= 0")
    rng = np.random.default_rng(seed)
    shape = x.data.shape
    if shared_energy == 0:
        s = np.zeros(shape)
    else:
        g = rng.standard_normal(shape)
        norm = float(np.sqrt(np.sum(g * g)))
        s = g * (np.sqrt(shared_energy * x.n) / norm)
    eta = eta_std * rng.standard_normal(shape)
    eta_tilde = eta_std * rng.standard_normal(shape)
    return SharedNoiseScene(
        clean=x,
        shared=x.like(s),
        eta=x.like(eta),
        eta_tilde=x.like(eta_tilde),
        shared_energy=mean_square(s),
        eta_std=eta_std,
    )
