"""Training loop: fit an untrained network to one observation, export frames.

Modes:

* plain     -- least squares against the observation y over all pixels;
* masked    -- least squares over retained pixels only: the residual is
               multiplied by the retention plane, so held-out pixels never
               enter the loss and the target is never zero-filled;
* augmented -- one network with a doubled final layer fits the channel
               stack (y, y1), where y1 is a heavier re-corruption of y;
               a second copy y2 is stored alongside for downstream scoring.

The network input is a fixed random code tensor drawn once from the run
seed; the same seed also initializes the weights, so a run is fully
determined by (image, noise parameters, mode, config, seed). Checkpoints
are taken every `stride` steps (plus the final step) and exported as a
trajectory bundle directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .bundle_io import write_bundle
from .corruption import aux_pair, corrupt, sample_mask
from .errors import ConfigError, ShapeError, TrainerError
from .model import SkipUNet

__all__ = ["TrainConfig", "checkpoint_iterations", "masked_loss", "train_export"]

MODES = ("plain", "masked", "augmented")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization and architecture parameters for one training run.

    Defaults follow the common single-image denoising setup: a depth-5,
    width-128 network fed a 32-channel random code of amplitude 0.1,
    optimized with Adam at learning rate 1e-4 for 5000 iterations. p_keep
    is the Bernoulli retention probability used by masked mode; aux_scale
    sets the default re-corruption level (aux_scale * level) for augmented
    mode.
    """

    iterations: int = 5000
    stride: int = 10
    lr: float = 1e-4
    depth: int = 5
    width: int = 128
    input_channels: int = 32
    input_amplitude: float = 0.1
    p_keep: float = 0.98
    aux_scale: float = 1.25
    device: str = "cpu"

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not (self.lr > 0):
            raise ConfigError("lr must be > 0")
        if min(self.depth, self.width, self.input_channels) < 1:
            raise ConfigError("depth, width, and input_channels must be >= 1")
        if not (self.input_amplitude > 0):
            raise ConfigError("input_amplitude must be > 0")
        if not (0 < self.p_keep < 1):
            raise ConfigError(f"p_keep must lie strictly in (0, 1), got {self.p_keep}")
        if self.aux_scale < 0:
            raise ConfigError("aux_scale must be >= 0")


def checkpoint_iterations(iterations: int, stride: int) -> list[int]:
    """Checkpoint schedule: every stride steps, plus the final iteration.

    The result is strictly increasing, ends at `iterations`, and has
    exactly ceil(iterations / stride) entries.
    """
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    ticks = list(range(stride, iterations + 1, stride))
    if not ticks or ticks[-1] != iterations:
        ticks.append(iterations)
    return ticks


def masked_loss(out: torch.Tensor, target: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean squared residual over retained pixels only.

    The residual (out - target) is multiplied by the retention plane, so
    held-out pixels contribute nothing to the value or the gradient; the
    target itself stays intact rather than being zero-filled.
    """
    resid = (out - target) * mask
    return resid.pow(2).sum() / (mask.sum() * out.shape[1])


def _as_image(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"image must be (channels, height, width), got shape {arr.shape}")
    return arr


def _to_tensor(arr: np.ndarray, device: torch.device) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))[None].to(device)


def train_export(
    image: np.ndarray,
    family: str,
    level: float,
    mode: str,
    out_dir: str | Path,
    seed: int,
    cfg: TrainConfig | None = None,
    mask_seed: int | None = None,
    aux_seeds: tuple[int, int] | None = None,
    aux_taus: tuple[float, float] | None = None,
) -> Path:
    """Corrupt an image, fit a network to it per mode, export the bundle.

    image is a clean (channels, height, width) array in [0, 1]. The
    observation is drawn with `seed`; masked mode draws its retention
    plane with mask_seed (default seed + 1); augmented mode draws its
    auxiliary pair with aux_seeds (default (seed + 1, seed + 2)) at
    levels aux_taus (default cfg.aux_scale * level for both copies).
    Returns the bundle directory. Raises TrainerError if the device runs
    out of memory mid-run.
    """
    cfg = cfg or TrainConfig()
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    clean = _as_image(image)
    channels, height, width = clean.shape
    factor = 2**cfg.depth
    if height % factor or width % factor:
        raise ShapeError(
            f"spatial size {height}x{width} must be divisible by {factor} (depth {cfg.depth})"
        )

    y = corrupt(clean, family, level, seed)
    mask = None
    y1 = y2 = None
    taus = seeds = None
    out_channels = channels
    device = torch.device(cfg.device)
    if mode == "masked":
        mask = sample_mask(height, width, cfg.p_keep, seed + 1 if mask_seed is None else mask_seed)
    if mode == "augmented":
        seeds = aux_seeds if aux_seeds is not None else (seed + 1, seed + 2)
        taus = aux_taus if aux_taus is not None else (cfg.aux_scale * level, cfg.aux_scale * level)
        y1, y2 = aux_pair(y, family, level, seeds, taus=taus)
        out_channels = 2 * channels
        target_t = _to_tensor(np.concatenate([y, y1]), device)
    else:
        target_t = _to_tensor(y, device)

    torch.manual_seed(seed)
    z = (cfg.input_amplitude * torch.rand(1, cfg.input_channels, height, width)).to(device)
    net = SkipUNet(cfg.input_channels, out_channels, depth=cfg.depth, width=cfg.width).to(device)
    if mode == "masked":
        mask_t = torch.from_numpy(mask.astype(np.float32))[None, None].to(device)

        def loss_of(out):
            return masked_loss(out, target_t, mask_t)

    else:

        def loss_of(out):
            return (out - target_t).pow(2).mean()

    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    ticks = checkpoint_iterations(cfg.iterations, cfg.stride)
    tick_set = set(ticks)
    frames = []
    try:
        for step in range(1, cfg.iterations + 1):
            optimizer.zero_grad()
            loss_of(net(z)).backward()
            optimizer.step()
            if step in tick_set:
                with torch.no_grad():
                    frames.append(net(z)[0].cpu().numpy().astype(np.float32))
    except RuntimeError as exc:
        if "memory" in str(exc).lower():
            raise TrainerError(f"training ran out of memory: {exc}") from exc
        raise

    return write_bundle(
        out_dir,
        frames=np.stack(frames),
        iterations=ticks,
        mode=mode,
        y=y,
        noise_family=family,
        noise_level=level,
        noise_seed=seed,
        mask=mask,
        y1=y1,
        y2=y2,
        clean=clean,
        aux_taus=taus,
        aux_seeds=seeds,
    )
