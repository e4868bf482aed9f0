"""On-disk trajectory bundles: one directory, one manifest, raw payloads.

A bundle holds everything needed to re-run every stopping rule offline:
checkpoint frames, the observation, optional auxiliary copies, mask,
clean image, and divergence metadata.  Payloads are raw little-endian
float32 (mask: uint8) so any tool can map them; manifest.json carries
shapes, provenance, and a CRC32 per payload file.  Reads verify length
and checksum before trusting anything.

Frames are stored at float32 precision: callers that need the bit-exact
round trip the format guarantees should hand in float32 trajectories
(the reader always returns float32 frames).

Observation directories are the lighter input format produced by the
``corrupt`` command: same conventions, ``input.json`` instead of
``manifest.json``, payloads limited to the observation and the optional
clean image.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ImageTensor, Trajectory
from .errors import ConfigError, CorruptBundleError, VersionError
from .noise import HoldoutMask

__all__ = [
    "BUNDLE_VERSION",
    "BundleMeta",
    "write_bundle",
    "read_bundle",
    "bundle_image",
    "write_observation",
    "read_observation",
]

BUNDLE_VERSION = 1
_MANIFEST = "manifest.json"
_INPUT = "input.json"


@dataclass
class BundleMeta:
    """Provenance stored alongside a trajectory.

    noise_* describe how the observation y was produced.  For augmented
    runs, y1/y2 are the two auxiliary corruptions with their levels and
    seeds; clean is optional and enables oracle reports downstream.
    """

    y: ImageTensor
    noise_family: str
    noise_level: float
    noise_seed: int | None = None
    y1: ImageTensor | None = None
    y2: ImageTensor | None = None
    clean: ImageTensor | None = None
    aux_taus: tuple[float, float] | None = None
    aux_seeds: tuple[int, int] | None = None


def _crc_hex(raw: bytes) -> str:
    return format(zlib.crc32(raw) & 0xFFFFFFFF, "08x")


def _write_payload(directory: Path, name: str, raw: bytes, checksums: dict) -> None:
    (directory / name).write_bytes(raw)
    checksums[name] = _crc_hex(raw)


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def write_bundle(traj: Trajectory, meta: BundleMeta, out_dir: str | Path) -> Path:
    """Serialize a trajectory with its provenance; returns the directory."""
    if traj.mode == "masked" and traj.mask is None:
        raise ConfigError("masked trajectory carries no mask")
    if traj.mode == "augmented":
        if meta.y1 is None or meta.y2 is None:
            raise ConfigError("augmented bundle needs both auxiliary copies")
        if traj.channels % 2 != 0:
            raise ConfigError("augmented trajectory must have an even channel count")

    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    first = traj.frames[0]
    checksums: dict[str, str] = {}
    payloads: dict[str, str] = {"frames": "frames.bin", "y": "y.bin"}

    stacked = np.stack([f.data for f in traj.frames])
    _write_payload(directory, "frames.bin", _f32_bytes(stacked), checksums)
    _write_payload(directory, "y.bin", _f32_bytes(meta.y.data), checksums)
    if meta.y1 is not None:
        payloads["y1"] = "y1.bin"
        _write_payload(directory, "y1.bin", _f32_bytes(meta.y1.data), checksums)
    if meta.y2 is not None:
        payloads["y2"] = "y2.bin"
        _write_payload(directory, "y2.bin", _f32_bytes(meta.y2.data), checksums)
    if traj.mask is not None:
        payloads["mask"] = "mask.bin"
        raw = np.ascontiguousarray(traj.mask.plane, dtype=np.uint8).tobytes()
        _write_payload(directory, "mask.bin", raw, checksums)
    if meta.clean is not None:
        payloads["clean"] = "clean.bin"
        _write_payload(directory, "clean.bin", _f32_bytes(meta.clean.data), checksums)

    aux = None
    if meta.aux_taus is not None or meta.aux_seeds is not None:
        aux = {
            "tau1": meta.aux_taus[0] if meta.aux_taus else None,
            "tau2": meta.aux_taus[1] if meta.aux_taus else None,
            "seeds": list(meta.aux_seeds) if meta.aux_seeds else None,
        }
    manifest = {
        "version": BUNDLE_VERSION,
        "height": first.height,
        "width": first.width,
        "channels": first.channels,
        "frame_count": len(traj.frames),
        "iterations": list(traj.iterations),
        "dtype": "f32le",
        "mode": traj.mode,
        "noise": {
            "family": meta.noise_family,
            "level": meta.noise_level,
            "seed": meta.noise_seed,
        },
        "aux": aux,
        "divergence": list(traj.divergence) if traj.divergence is not None else None,
        "payloads": payloads,
        "checksums": checksums,
    }
    _dump_json(directory / _MANIFEST, manifest)
    return directory


def _dump_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_json(path: Path) -> dict:
    if not path.is_file():
        raise CorruptBundleError(f"missing {path.name} in {path.parent}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CorruptBundleError(f"unreadable {path.name}: {exc}") from exc


def _checked_read(directory: Path, name: str, checksums: dict) -> bytes:
    path = directory / name
    if not path.is_file():
        raise CorruptBundleError(f"missing payload {name}")
    raw = path.read_bytes()
    recorded = checksums.get(name)
    if recorded is None:
        raise CorruptBundleError(f"no checksum recorded for {name}")
    if _crc_hex(raw) != recorded:
        raise CorruptBundleError(f"checksum mismatch for {name}")
    return raw


def _require(manifest: dict, key: str):
    if key not in manifest:
        raise CorruptBundleError(f"manifest missing key {key!r}")
    return manifest[key]


def _image_from(
    raw: bytes, allowed_channels: tuple[int, ...], height: int, width: int, name: str
) -> ImageTensor:
    plane_bytes = height * width * 4
    if plane_bytes == 0 or len(raw) % plane_bytes:
        raise CorruptBundleError(f"{name} holds {len(raw)} bytes, not a whole channel count")
    channels = len(raw) // plane_bytes
    if channels not in allowed_channels:
        raise CorruptBundleError(
            f"{name} holds {channels} channels, expected one of {allowed_channels}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(channels, height, width)
    return ImageTensor(data.astype(np.float32))


def read_bundle(path: str | Path) -> tuple[Trajectory, dict]:
    """Load a bundle directory; returns (trajectory, manifest dict)."""
    directory = Path(path)
    manifest = _load_json(directory / _MANIFEST)
    version = _require(manifest, "version")
    if version != BUNDLE_VERSION:
        raise VersionError(f"unsupported bundle version {version!r}")
    if _require(manifest, "dtype") != "f32le":
        raise CorruptBundleError(f"unsupported dtype {manifest['dtype']!r}")

    height = _require(manifest, "height")
    width = _require(manifest, "width")
    channels = _require(manifest, "channels")
    frame_count = _require(manifest, "frame_count")
    iterations = _require(manifest, "iterations")
    mode = _require(manifest, "mode")
    payloads = _require(manifest, "payloads")
    checksums = _require(manifest, "checksums")
    _require(manifest, "noise")

    raw = _checked_read(directory, payloads["frames"], checksums)
    expected = frame_count * channels * height * width * 4
    if len(raw) != expected:
        raise CorruptBundleError(f"frames hold {len(raw)} bytes, expected {expected}")
    stacked = np.frombuffer(raw, dtype="<f4").reshape(frame_count, channels, height, width)
    frames = [ImageTensor(plane.astype(np.float32)) for plane in stacked]

    mask = None
    if mode == "masked":
        if "mask" not in payloads:
            raise CorruptBundleError("masked bundle lacks a mask payload")
        raw = _checked_read(directory, payloads["mask"], checksums)
        if len(raw) != height * width:
            raise CorruptBundleError(f"mask holds {len(raw)} bytes, expected {height * width}")
        plane = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
        mask = HoldoutMask(plane.copy(), p_keep=float(plane.mean()))
    if mode == "augmented":
        if "y1" not in payloads or "y2" not in payloads:
            raise CorruptBundleError("augmented bundle lacks auxiliary payloads")
        if channels % 2 != 0:
            raise CorruptBundleError("augmented bundle has an odd channel count")

    divergence = manifest.get("divergence")
    traj = Trajectory(
        frames=frames,
        iterations=list(iterations),
        divergence=list(divergence) if divergence is not None else None,
        mode=mode,
        mask=mask,
    )
    return traj, manifest


def bundle_image(path: str | Path, manifest: dict, key: str) -> ImageTensor:
    """Load one image payload (y, y1, y2, clean) from a read bundle.

    Augmented bundles store observations at half the frame channel count,
    so both widths are accepted and the byte length decides.
    """
    directory = Path(path)
    payloads = manifest["payloads"]
    if key not in payloads:
        raise CorruptBundleError(f"bundle has no {key!r} payload")
    raw = _checked_read(directory, payloads[key], manifest["checksums"])
    channels = manifest["channels"]
    allowed = (channels,) if channels % 2 else (channels, channels // 2)
    return _image_from(raw, allowed, manifest["height"], manifest["width"], key)


def write_observation(
    y: ImageTensor,
    noise_family: str,
    noise_level: float,
    noise_seed: int | None,
    out_dir: str | Path,
    clean: ImageTensor | None = None,
) -> Path:
    """Write a corrupt-command output directory (observation plus provenance)."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    checksums: dict[str, str] = {}
    payloads = {"y": "y.bin"}
    _write_payload(directory, "y.bin", _f32_bytes(y.data), checksums)
    if clean is not None:
        payloads["clean"] = "clean.bin"
        _write_payload(directory, "clean.bin", _f32_bytes(clean.data), checksums)
    _dump_json(
        directory / _INPUT,
        {
            "version": BUNDLE_VERSION,
            "height": y.height,
            "width": y.width,
            "channels": y.channels,
            "dtype": "f32le",
            "noise": {"family": noise_family, "level": noise_level, "seed": noise_seed},
            "payloads": payloads,
            "checksums": checksums,
        },
    )
    return directory


def read_observation(path: str | Path) -> tuple[ImageTensor, ImageTensor | None, dict]:
    """Load an observation directory; returns (y, clean or None, manifest)."""
    directory = Path(path)
    manifest = _load_json(directory / _INPUT)
    if _require(manifest, "version") != BUNDLE_VERSION:
        raise VersionError(f"unsupported input version {manifest['version']!r}")
    height = _require(manifest, "height")
    width = _require(manifest, "width")
    channels = _require(manifest, "channels")
    payloads = _require(manifest, "payloads")
    checksums = _require(manifest, "checksums")
    raw = _checked_read(directory, payloads["y"], checksums)
    y = _image_from(raw, (channels,), height, width, "y")
    clean = None
    if "clean" in payloads:
        raw = _checked_read(directory, payloads["clean"], checksums)
        clean = _image_from(raw, (channels,), height, width, "clean")
    return y, clean, manifest
