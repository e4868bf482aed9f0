"""Corruption draws: reproducibility, family semantics, masks, aux pairs."""

import numpy as np
import pytest

from dip_trainer import ConfigError, aux_pair, corrupt, sample_mask

FAMILIES = ("gaussian", "poisson", "impulse")


def test_corrupt_is_deterministic_per_seed():
    rng = np.random.default_rng(0)
    for family in FAMILIES:
        for trial in range(4):
            x = rng.random((3, 6, 6))
            seed = 100 + trial
            a = corrupt(x, family, 0.3, seed)
            b = corrupt(x, family, 0.3, seed)
            other = corrupt(x, family, 0.3, seed + 1)
            assert np.array_equal(a, b)
            assert not np.array_equal(a, other)


def test_gaussian_level_zero_is_identity():
    rng = np.random.default_rng(1)
    x = rng.random((2, 5, 5))
    assert np.array_equal(corrupt(x, "gaussian", 0.0, 3), x)


def test_gaussian_matches_additive_formula():
    rng = np.random.default_rng(2)
    x = rng.random((3, 8, 8))
    noise = np.random.default_rng(17).standard_normal(x.shape)
    assert np.array_equal(corrupt(x, "gaussian", 0.26, 17), x + 0.26 * noise)


def test_impulse_spikes_are_exactly_unit():
    rng = np.random.default_rng(3)
    for trial in range(5):
        x = rng.random((3, 12, 12))
        y = corrupt(x, "impulse", 0.2, 50 + trial)
        same = y == x
        up = y == x + 1.0
        down = y == x - 1.0
        assert np.all(same | up | down)
        frac = 1.0 - same.mean()
        assert 0.05 < frac < 0.4


def test_poisson_is_nonnegative_and_unbiased_in_the_mean():
    rng = np.random.default_rng(4)
    x = np.full((3, 24, 24), 0.6) + 0.1 * rng.random((3, 24, 24))
    y = corrupt(x, "poisson", 400.0, 9)
    assert np.all(y >= 0)
    assert abs(y.mean() - x.mean()) < 0.01


def test_corrupt_rejects_bad_parameters():
    x = np.zeros((1, 4, 4))
    with pytest.raises(ConfigError, match="family"):
        corrupt(x, "salt", 0.1, 0)
    with pytest.raises(ConfigError, match="gaussian"):
        corrupt(x, "gaussian", -0.1, 0)
    with pytest.raises(ConfigError, match="poisson"):
        corrupt(x, "poisson", 0.0, 0)
    with pytest.raises(ConfigError, match="impulse"):
        corrupt(x, "impulse", 1.5, 0)


def test_aux_pair_defaults_to_heavier_level():
    rng = np.random.default_rng(5)
    y = rng.random((3, 8, 8))
    y1, y2 = aux_pair(y, "gaussian", 0.26, (4, 9))
    assert np.array_equal(y1, corrupt(y, "gaussian", 1.25 * 0.26, 4))
    assert np.array_equal(y2, corrupt(y, "gaussian", 1.25 * 0.26, 9))
    assert not np.array_equal(y1, y2)


def test_aux_pair_honors_explicit_levels():
    rng = np.random.default_rng(6)
    y = rng.random((2, 6, 6))
    y1, y2 = aux_pair(y, "gaussian", 0.26, (4, 9), taus=(0.0, 0.5))
    assert np.array_equal(y1, y)
    assert np.array_equal(y2, corrupt(y, "gaussian", 0.5, 9))


def test_aux_pair_rejects_equal_seeds():
    y = np.zeros((1, 4, 4))
    with pytest.raises(ConfigError, match="differ"):
        aux_pair(y, "gaussian", 0.26, (7, 7))


def test_sample_mask_is_binary_with_requested_density():
    rng = np.random.default_rng(7)
    for trial in range(6):
        p_keep = float(rng.uniform(0.5, 0.99))
        plane = sample_mask(32, 32, p_keep, 200 + trial)
        assert plane.dtype == np.uint8
        assert set(np.unique(plane)) <= {0, 1}
        assert abs(plane.mean() - p_keep) < 0.1
        assert plane.size - plane.sum() >= 1


def test_sample_mask_never_retains_everything():
    for seed in range(40):
        plane = sample_mask(4, 4, 0.999, seed)
        assert plane.size - plane.sum() >= 1


def test_sample_mask_rejects_degenerate_density():
    with pytest.raises(ConfigError, match="p_keep"):
        sample_mask(8, 8, 1.0, 0)
    with pytest.raises(ConfigError, match="p_keep"):
        sample_mask(8, 8, 0.0, 0)
