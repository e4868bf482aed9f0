"""Command line: corrupt one image, train per mode, export a bundle.

Exit codes: 0 success, 2 usage error, 3 data error (unreadable inputs,
contract violations).

8-bit images (PNG and friends) are mapped to [0, 1] by dividing by 255;
.npy files are taken as-is with layout (H, W), (H, W, C), or (C, H, W).
All outputs are deterministic given the same inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .corruption import FAMILIES
from .errors import ConfigError, TrainerError
from .train import MODES, TrainConfig, train_export


def load_image(path: str | Path) -> np.ndarray:
    """Read a PNG (or any 8-bit raster) as [0, 1], or a .npy array."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such image: {path}")
    if path.suffix == ".npy":
        arr = np.load(path)
        if arr.ndim == 2:
            arr = arr[None]
        elif arr.ndim == 3 and arr.shape[-1] in (1, 3, 4) and arr.shape[0] not in (1, 3, 4):
            arr = np.moveaxis(arr, -1, 0)
        if arr.ndim != 3:
            raise ConfigError(f"unsupported array shape {arr.shape}")
        if arr.shape[0] == 4:
            arr = arr[:3]
        return np.ascontiguousarray(arr, dtype=np.float64)
    from PIL import Image

    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = np.moveaxis(arr, -1, 0)[:3]
    return np.ascontiguousarray(arr)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise ConfigError(f"no such config: {cfg_path}")
    return json.loads(cfg_path.read_text())


def cmd_train(args) -> int:
    image = load_image(args.infile)
    raw = _load_config(args.config)
    cfg = TrainConfig(
        iterations=args.iterations,
        stride=args.stride,
        lr=raw.get("lr", TrainConfig.lr),
        depth=raw.get("depth", TrainConfig.depth),
        width=raw.get("width", TrainConfig.width),
        input_channels=raw.get("input_channels", TrainConfig.input_channels),
        input_amplitude=raw.get("input_amplitude", TrainConfig.input_amplitude),
        p_keep=raw.get("p_keep", TrainConfig.p_keep),
        aux_scale=raw.get("aux_scale", TrainConfig.aux_scale),
        device=raw.get("device", TrainConfig.device),
    )
    aux_seeds = raw.get("aux_seeds")
    aux_taus = raw.get("aux_taus")
    train_export(
        image,
        args.family,
        args.level,
        args.mode,
        args.out,
        seed=args.seed,
        cfg=cfg,
        mask_seed=raw.get("mask_seed"),
        aux_seeds=tuple(aux_seeds) if aux_seeds is not None else None,
        aux_taus=tuple(aux_taus) if aux_taus is not None else None,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dip-trainer",
        description="Train an untrained network on one corrupted image "
        "and export the checkpoint trajectory as a bundle.",
    )
    parser.add_argument("--in", dest="infile", required=True)
    parser.add_argument("--family", choices=FAMILIES, required=True)
    parser.add_argument("--level", type=float, required=True)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--mode", choices=MODES, default="plain")
    parser.add_argument("--iterations", type=int, default=TrainConfig.iterations)
    parser.add_argument("--stride", type=int, default=TrainConfig.stride)
    parser.add_argument("--config", help="JSON file overriding training parameters")
    parser.add_argument("--out", required=True)
    parser.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
