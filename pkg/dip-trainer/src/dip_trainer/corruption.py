"""Observation synthesis: noise draws, auxiliary copies, retention masks.

Same conventions as the scoring tool this trainer feeds:

* gaussian -- additive N(0, level**2) per entry;
* poisson  -- y = Poisson(level * x) / level (negative intensities get
  zero rate);
* impulse  -- with probability `level` a pixel receives an additive spike
  of amplitude +-1 with equal sign probability.

Every draw consumes a caller-supplied integer seed through
numpy.random.default_rng, so identical calls reproduce bit-identical
corruptions.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

__all__ = ["FAMILIES", "corrupt", "aux_pair", "sample_mask"]

FAMILIES = ("gaussian", "poisson", "impulse")


def _validate(family: str, level: float) -> None:
    if family not in FAMILIES:
        raise ConfigError(f"unknown noise family {family!r}")
    if family == "gaussian" and level < 0:
        raise ConfigError("gaussian level must be >= 0")
    if family == "poisson" and not (level > 0):
        raise ConfigError("poisson level must be > 0")
    if family == "impulse" and not (0 <= level <= 1):
        raise ConfigError("impulse level must lie in [0, 1]")


def corrupt(x: np.ndarray, family: str, level: float, seed: int) -> np.ndarray:
    """Draw one corrupted copy of x. Deterministic in (x, family, level, seed)."""
    _validate(family, level)
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    if family == "gaussian":
        return x + level * rng.standard_normal(x.shape)
    if family == "poisson":
        rate = level * np.clip(x, 0.0, None)
        return rng.poisson(rate).astype(np.float64) / level
    hits = rng.random(x.shape) < level
    signs = rng.integers(0, 2, x.shape) * 2 - 1
    return x + hits * signs.astype(np.float64)


def aux_pair(
    y: np.ndarray,
    family: str,
    level: float,
    seeds: tuple[int, int],
    taus: tuple[float, float] | None = None,
    aux_scale: float = 1.25,
) -> tuple[np.ndarray, np.ndarray]:
    """Re-corrupt an observation twice at a heavier level.

    Returns (y1, y2): two conditionally independent further corruptions of
    y, drawn from distinct seeds (equal seeds are refused, since the pair
    must carry independent noise). taus overrides the default per-copy
    level of aux_scale * level.
    """
    s1, s2 = seeds
    if s1 == s2:
        raise ConfigError(f"auxiliary seeds must differ, got {s1} twice")
    t1, t2 = taus if taus is not None else (aux_scale * level, aux_scale * level)
    return corrupt(y, family, t1, s1), corrupt(y, family, t2, s2)


def sample_mask(height: int, width: int, p_keep: float, seed: int) -> np.ndarray:
    """Draw an iid Bernoulli(p_keep) retention plane (uint8, 1 = retained).

    p_keep is strictly inside (0, 1). If the draw happens to retain every
    pixel, one retained pixel (chosen from the same stream) is flipped so
    the held-out set is never empty.
    """
    if not (0 < p_keep < 1):
        raise ConfigError(f"p_keep must lie strictly in (0, 1), got {p_keep}")
    rng = np.random.default_rng(seed)
    plane = (rng.random((height, width)) < p_keep).astype(np.uint8)
    if plane.all():
        plane[rng.integers(height), rng.integers(width)] = 0
    return plane
