"""Bundle format: bitwise round trips, corruption detection, guards.

Every corruption case doctors a healthy on-disk bundle (truncation, bit
flip, manifest surgery) and asserts the read side refuses it, so the
checks cover the real failure paths rather than constructor shortcuts.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from pseudostop.bundle import (
    BUNDLE_VERSION,
    BundleMeta,
    bundle_image,
    read_bundle,
    read_observation,
    write_bundle,
    write_observation,
)
from pseudostop.core import ImageTensor, Trajectory
from pseudostop.errors import ConfigError, CorruptBundleError, VersionError
from pseudostop.noise import NoiseSpec, corrupt, make_aux_pair, sample_mask
from pseudostop.scenes import synthetic_rgb
from pseudostop.surrogate import SurrogateConfig, run_augmented, run_masked, run_plain

CFG = SurrogateConfig(iterations=60, stride=20)


def f32_image(seed, shape=(3, 8, 8)) -> ImageTensor:
    data = np.random.default_rng(seed).random(shape).astype(np.float32)
    return ImageTensor(data)


def f32_trajectory(seed, frames=4, shape=(3, 8, 8), **kw) -> Trajectory:
    rng = np.random.default_rng(seed)
    imgs = [ImageTensor(rng.random(shape).astype(np.float32)) for _ in range(frames)]
    return Trajectory(imgs, list(range(10, 10 * frames + 1, 10)), **kw)


def plain_meta(seed) -> BundleMeta:
    return BundleMeta(y=f32_image(seed + 1), noise_family="gaussian", noise_level=0.26)


def healthy_bundle(tmp_path, seed=0) -> Path:
    traj = f32_trajectory(seed, divergence=[0.1, 0.2, 0.3, 0.4])
    return write_bundle(traj, plain_meta(seed), tmp_path / "bundle")


# ---------------------------------------------------------------------------
# round trips


def test_round_trip_bitwise(tmp_path):
    traj = f32_trajectory(3, divergence=[0.1, 0.2, 0.3, 0.4])
    meta = BundleMeta(
        y=f32_image(4),
        noise_family="gaussian",
        noise_level=0.26,
        noise_seed=9,
        clean=f32_image(5),
    )
    path = write_bundle(traj, meta, tmp_path / "b")
    loaded, manifest = read_bundle(path)

    assert len(loaded) == len(traj)
    for a, b in zip(loaded.frames, traj.frames):
        assert a.data.dtype == np.float32
        assert np.array_equal(a.data, b.data)
    assert loaded.iterations == traj.iterations
    assert loaded.divergence == traj.divergence
    assert loaded.mode == "plain"
    assert manifest["version"] == BUNDLE_VERSION
    assert manifest["dtype"] == "f32le"
    assert manifest["noise"] == {"family": "gaussian", "level": 0.26, "seed": 9}
    assert np.array_equal(bundle_image(path, manifest, "y").data, meta.y.data)
    assert np.array_equal(bundle_image(path, manifest, "clean").data, meta.clean.data)


def test_round_trip_single_tiny_frame(tmp_path):
    frame = ImageTensor(np.asarray([[[0.25, 0.5], [0.75, 1.0]]], dtype=np.float32))
    traj = Trajectory([frame], [1])
    meta = BundleMeta(y=frame.copy(), noise_family="impulse", noise_level=0.1)
    loaded, manifest = read_bundle(write_bundle(traj, meta, tmp_path / "b"))
    assert np.array_equal(loaded.frames[0].data, frame.data)
    assert loaded.iterations == [1]
    assert loaded.divergence is None
    assert (manifest["height"], manifest["width"], manifest["channels"]) == (2, 2, 1)


def test_manifest_key_order_is_irrelevant(tmp_path):
    path = healthy_bundle(tmp_path)
    before, _ = read_bundle(path)
    manifest_path = path / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    shuffled = {k: manifest[k] for k in reversed(list(manifest))}
    manifest_path.write_text(json.dumps(shuffled))
    after, _ = read_bundle(path)
    for a, b in zip(after.frames, before.frames):
        assert np.array_equal(a.data, b.data)
    assert after.iterations == before.iterations


def test_written_bundle_is_deterministic(tmp_path):
    traj = f32_trajectory(6)
    meta = plain_meta(6)
    p1 = write_bundle(traj, meta, tmp_path / "one")
    p2 = write_bundle(traj, meta, tmp_path / "two")
    for name in ("manifest.json", "frames.bin", "y.bin"):
        assert (p1 / name).read_bytes() == (p2 / name).read_bytes(), name


# ---------------------------------------------------------------------------
# corruption detection


def test_truncated_frames_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    blob = (path / "frames.bin").read_bytes()
    (path / "frames.bin").write_bytes(blob[:-4])
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


def test_flipped_byte_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    blob = bytearray((path / "frames.bin").read_bytes())
    blob[17] ^= 0xFF
    (path / "frames.bin").write_bytes(bytes(blob))
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


def test_flipped_byte_in_image_payload_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    _, manifest = read_bundle(path)
    blob = bytearray((path / "y.bin").read_bytes())
    blob[0] ^= 0x01
    (path / "y.bin").write_bytes(bytes(blob))
    with pytest.raises(CorruptBundleError):
        bundle_image(path, manifest, "y")


def test_missing_frames_payload_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    (path / "frames.bin").unlink()
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


def test_missing_manifest_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    (path / "manifest.json").unlink()
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


def test_unknown_version_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["version"] = BUNDLE_VERSION + 1
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(VersionError):
        read_bundle(path)


def test_unknown_dtype_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["dtype"] = "f64le"
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


def test_manifest_missing_key_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    manifest = json.loads((path / "manifest.json").read_text())
    del manifest["iterations"]
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


def test_unknown_image_key_rejected(tmp_path):
    path = healthy_bundle(tmp_path)
    _, manifest = read_bundle(path)
    with pytest.raises(CorruptBundleError):
        bundle_image(path, manifest, "clean")


# ---------------------------------------------------------------------------
# write-side guards


def test_masked_trajectory_requires_mask():
    traj = f32_trajectory(7, mode="masked", mask=None)
    with pytest.raises(ConfigError):
        write_bundle(traj, plain_meta(7), "unused")


def test_augmented_bundle_requires_aux_copies():
    traj = f32_trajectory(8, shape=(6, 8, 8), mode="augmented")
    with pytest.raises(ConfigError):
        write_bundle(traj, plain_meta(8), "unused")


def test_augmented_bundle_requires_even_channels(tmp_path):
    traj = f32_trajectory(9, shape=(3, 8, 8), mode="augmented")
    meta = plain_meta(9)
    meta.y1 = f32_image(10)
    meta.y2 = f32_image(11)
    with pytest.raises(ConfigError):
        write_bundle(traj, meta, tmp_path / "b")


# ---------------------------------------------------------------------------
# masked bundles


def test_masked_round_trip_recovers_mask(tmp_path):
    clean = synthetic_rgb(16, 16, 12)
    y = corrupt(clean, NoiseSpec("gaussian", 0.26), 13)
    mask = sample_mask(16, 16, 0.9, 14)
    traj = run_masked(y, mask, CFG)
    meta = BundleMeta(y=y, noise_family="gaussian", noise_level=0.26, noise_seed=13)
    loaded, manifest = read_bundle(write_bundle(traj, meta, tmp_path / "b"))

    assert loaded.mode == "masked"
    assert np.array_equal(loaded.mask.plane, mask.plane)
    assert loaded.mask.p_keep == float(mask.plane.mean())
    assert manifest["mode"] == "masked"
    assert manifest["divergence"] is None


def test_masked_bundle_without_mask_payload_rejected(tmp_path):
    clean = synthetic_rgb(16, 16, 12)
    y = corrupt(clean, NoiseSpec("gaussian", 0.26), 13)
    mask = sample_mask(16, 16, 0.9, 14)
    traj = run_masked(y, mask, CFG)
    meta = BundleMeta(y=y, noise_family="gaussian", noise_level=0.26)
    path = write_bundle(traj, meta, tmp_path / "b")
    manifest = json.loads((path / "manifest.json").read_text())
    del manifest["payloads"]["mask"]
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


# ---------------------------------------------------------------------------
# augmented bundles


def test_augmented_round_trip_half_width_observations(tmp_path):
    clean = synthetic_rgb(16, 16, 20)
    spec = NoiseSpec("gaussian", 0.26)
    y = corrupt(clean, spec, 21)
    y1, y2 = make_aux_pair(y, spec, (22, 23), taus=(0.13, 0.325))
    traj = run_augmented(y, y1, CFG)
    meta = BundleMeta(
        y=y,
        noise_family="gaussian",
        noise_level=0.26,
        noise_seed=21,
        y1=y1,
        y2=y2,
        aux_taus=(0.13, 0.325),
        aux_seeds=(22, 23),
    )
    path = write_bundle(traj, meta, tmp_path / "b")
    loaded, manifest = read_bundle(path)

    assert loaded.mode == "augmented"
    assert manifest["channels"] == 6
    assert manifest["aux"] == {"tau1": 0.13, "tau2": 0.325, "seeds": [22, 23]}
    for key, ref in (("y", y), ("y1", y1), ("y2", y2)):
        img = bundle_image(path, manifest, key)
        assert img.channels == 3
        assert np.array_equal(img.data, ref.data.astype(np.float32))


def test_augmented_bundle_without_aux_payload_rejected(tmp_path):
    clean = synthetic_rgb(16, 16, 20)
    spec = NoiseSpec("gaussian", 0.26)
    y = corrupt(clean, spec, 21)
    y1, y2 = make_aux_pair(y, spec, (22, 23))
    traj = run_augmented(y, y1, CFG)
    meta = BundleMeta(y=y, noise_family="gaussian", noise_level=0.26, y1=y1, y2=y2)
    path = write_bundle(traj, meta, tmp_path / "b")
    manifest = json.loads((path / "manifest.json").read_text())
    del manifest["payloads"]["y2"]
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(CorruptBundleError):
        read_bundle(path)


def test_plain_run_round_trip_even_divergence(tmp_path):
    clean = synthetic_rgb(16, 16, 30)
    y = corrupt(clean, NoiseSpec("gaussian", 0.26), 31)
    traj = run_plain(y, CFG)
    meta = BundleMeta(y=y, noise_family="gaussian", noise_level=0.26, noise_seed=31)
    loaded, manifest = read_bundle(write_bundle(traj, meta, tmp_path / "b"))
    assert loaded.divergence == traj.divergence
    assert loaded.iterations == traj.iterations
    for a, b in zip(loaded.frames, traj.frames):
        assert np.array_equal(a.data, b.data.astype(np.float32))


# ---------------------------------------------------------------------------
# observation directories


def test_observation_round_trip(tmp_path):
    y = f32_image(40)
    clean = f32_image(41)
    path = write_observation(y, "poisson", 12.0, 5, tmp_path / "obs", clean=clean)
    got_y, got_clean, manifest = read_observation(path)
    assert np.array_equal(got_y.data, y.data)
    assert np.array_equal(got_clean.data, clean.data)
    assert manifest["noise"] == {"family": "poisson", "level": 12.0, "seed": 5}


def test_observation_without_clean(tmp_path):
    y = f32_image(42)
    path = write_observation(y, "gaussian", 0.1, None, tmp_path / "obs")
    got_y, got_clean, _ = read_observation(path)
    assert got_clean is None
    assert np.array_equal(got_y.data, y.data)


def test_observation_corruption_rejected(tmp_path):
    path = write_observation(f32_image(43), "gaussian", 0.1, None, tmp_path / "obs")
    blob = bytearray((path / "y.bin").read_bytes())
    blob[3] ^= 0x10
    (path / "y.bin").write_bytes(bytes(blob))
    with pytest.raises(CorruptBundleError):
        read_observation(path)


def test_observation_version_guard(tmp_path):
    path = write_observation(f32_image(44), "gaussian", 0.1, None, tmp_path / "obs")
    manifest = json.loads((path / "input.json").read_text())
    manifest["version"] = 99
    (path / "input.json").write_text(json.dumps(manifest))
    with pytest.raises(VersionError):
        read_observation(path)


# ---------------------------------------------------------------------------
# committed fixture from the external trainer


def test_trainer_fixture_reads_and_scores():
    """A bundle exported by the companion trainer loads and scores cleanly.

    The fixture is committed, so this side needs no training dependencies;
    the trainer's own suite regenerates the same bytes from its recipe.
    """
    fixture = Path(__file__).parent / "fixtures" / "dip-masked-16"
    traj, manifest = read_bundle(fixture)
    assert traj.mode == "masked"
    assert traj.iterations == [3, 6, 8]
    assert manifest["divergence"] is None
    assert manifest["noise"]["family"] == "gaussian"
    assert traj.mask is not None and traj.mask.held_out_count >= 1

    from pseudostop.criteria import mr_curve, oracle_report, select

    y = bundle_image(fixture, manifest, "y")
    clean = bundle_image(fixture, manifest, "clean")
    curve = mr_curve(traj, y, traj.mask)
    assert len(curve.values) == 3
    assert all(np.isfinite(v) for v in curve.values)
    assert select(curve) in traj.iterations
    report = oracle_report(traj, clean, curve, "mr")
    assert report.gap_db >= 0.0
