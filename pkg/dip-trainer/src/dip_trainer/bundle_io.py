"""Trajectory bundle writer: one directory, one manifest, raw payloads.

The output is the interchange format consumed by downstream stopping
tools: checkpoint frames plus the observation, optional auxiliary copies,
retention mask, and clean image. Payloads are raw little-endian float32
(mask: uint8); manifest.json carries shapes, provenance, and a CRC32 per
payload file, serialized with sorted keys so identical content produces
identical bytes.

This trainer never exports a divergence trace, so the manifest's
divergence field is always null.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = ["BUNDLE_VERSION", "write_bundle"]

BUNDLE_VERSION = 1

_MODES = ("plain", "masked", "augmented")


def _crc_hex(raw: bytes) -> str:
    return format(zlib.crc32(raw) & 0xFFFFFFFF, "08x")


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _write_payload(directory: Path, name: str, raw: bytes, checksums: dict) -> None:
    (directory / name).write_bytes(raw)
    checksums[name] = _crc_hex(raw)


def _check_image(arr: np.ndarray, channels: int, height: int, width: int, name: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.shape != (channels, height, width):
        raise ShapeError(f"{name} has shape {arr.shape}, expected {(channels, height, width)}")
    return arr


def write_bundle(
    out_dir: str | Path,
    *,
    frames,
    iterations,
    mode: str,
    y: np.ndarray,
    noise_family: str,
    noise_level: float,
    noise_seed: int | None,
    mask: np.ndarray | None = None,
    y1: np.ndarray | None = None,
    y2: np.ndarray | None = None,
    clean: np.ndarray | None = None,
    aux_taus: tuple[float, float] | None = None,
    aux_seeds: tuple[int, int] | None = None,
) -> Path:
    """Serialize checkpoint frames with their provenance; returns the directory.

    frames is a (frame_count, channels, height, width) stack (or a sequence
    of (channels, height, width) arrays); iterations is the matching list of
    strictly increasing checkpoint indices. Observations are stored at the
    frame channel count, except in augmented mode where frames carry twice
    the observation channels.
    """
    stacked = np.asarray(frames)
    if stacked.ndim != 4:
        raise ShapeError(f"frames must stack to 4 dimensions, got shape {stacked.shape}")
    frame_count, channels, height, width = stacked.shape
    ticks = [int(i) for i in iterations]
    if len(ticks) != frame_count:
        raise ConfigError(f"{frame_count} frames but {len(ticks)} iteration indices")
    if any(b <= a for a, b in zip(ticks, ticks[1:])):
        raise ConfigError("iterations must be strictly increasing")
    if mode not in _MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "masked" and mask is None:
        raise ConfigError("masked bundle needs a retention mask")
    if mode == "augmented":
        if y1 is None or y2 is None:
            raise ConfigError("augmented bundle needs both auxiliary copies")
        if channels % 2 != 0:
            raise ConfigError("augmented frames must have an even channel count")

    obs_channels = channels // 2 if mode == "augmented" else channels
    y = _check_image(y, obs_channels, height, width, "y")

    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    checksums: dict[str, str] = {}
    payloads: dict[str, str] = {"frames": "frames.bin", "y": "y.bin"}
    _write_payload(directory, "frames.bin", _f32_bytes(stacked), checksums)
    _write_payload(directory, "y.bin", _f32_bytes(y), checksums)
    if y1 is not None:
        payloads["y1"] = "y1.bin"
        raw = _f32_bytes(_check_image(y1, obs_channels, height, width, "y1"))
        _write_payload(directory, "y1.bin", raw, checksums)
    if y2 is not None:
        payloads["y2"] = "y2.bin"
        raw = _f32_bytes(_check_image(y2, obs_channels, height, width, "y2"))
        _write_payload(directory, "y2.bin", raw, checksums)
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != (height, width):
            raise ShapeError(f"mask has shape {mask.shape}, expected {(height, width)}")
        if not np.all(np.isin(np.unique(mask), (0, 1))):
            raise ConfigError("mask plane must be binary")
        payloads["mask"] = "mask.bin"
        raw = np.ascontiguousarray(mask, dtype=np.uint8).tobytes()
        _write_payload(directory, "mask.bin", raw, checksums)
    if clean is not None:
        payloads["clean"] = "clean.bin"
        raw = _f32_bytes(_check_image(clean, obs_channels, height, width, "clean"))
        _write_payload(directory, "clean.bin", raw, checksums)

    aux = None
    if aux_taus is not None or aux_seeds is not None:
        aux = {
            "tau1": float(aux_taus[0]) if aux_taus else None,
            "tau2": float(aux_taus[1]) if aux_taus else None,
            "seeds": [int(s) for s in aux_seeds] if aux_seeds else None,
        }
    manifest = {
        "version": BUNDLE_VERSION,
        "height": height,
        "width": width,
        "channels": channels,
        "frame_count": frame_count,
        "iterations": ticks,
        "dtype": "f32le",
        "mode": mode,
        "noise": {
            "family": noise_family,
            "level": float(noise_level),
            "seed": int(noise_seed) if noise_seed is not None else None,
        },
        "aux": aux,
        "divergence": None,
        "payloads": payloads,
        "checksums": checksums,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (directory / "manifest.json").write_text(text)
    return directory
