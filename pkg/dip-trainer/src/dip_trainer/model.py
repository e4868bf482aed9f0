"""Encoder-decoder with skip connections for single-image fitting.

The network maps a fixed random code tensor to an image. Each encoder
scale halves the spatial size with a strided convolution; each decoder
scale concatenates a thin skip projection and doubles the size with
bilinear upsampling. A 1x1 head with a sigmoid keeps outputs in [0, 1].

Spatial sizes must be divisible by 2**depth so every scale stays integral
and the output matches the input size exactly.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, ShapeError

__all__ = ["SkipUNet"]

_SLOPE = 0.2


def _down_block(cin: int, width: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, width, 3, stride=2, padding=1, padding_mode="reflect"),
        nn.BatchNorm2d(width),
        nn.LeakyReLU(_SLOPE, inplace=True),
        nn.Conv2d(width, width, 3, padding=1, padding_mode="reflect"),
        nn.BatchNorm2d(width),
        nn.LeakyReLU(_SLOPE, inplace=True),
    )


def _skip_block(width: int, skip_width: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(width, skip_width, 1),
        nn.BatchNorm2d(skip_width),
        nn.LeakyReLU(_SLOPE, inplace=True),
    )


def _up_block(cin: int, width: int) -> nn.Sequential:
    return nn.Sequential(
        nn.BatchNorm2d(cin),
        nn.Conv2d(cin, width, 3, padding=1, padding_mode="reflect"),
        nn.BatchNorm2d(width),
        nn.LeakyReLU(_SLOPE, inplace=True),
        nn.Conv2d(width, width, 1),
        nn.BatchNorm2d(width),
        nn.LeakyReLU(_SLOPE, inplace=True),
    )


class SkipUNet(nn.Module):
    """U-shaped code-to-image network with per-scale skip connections."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        depth: int = 5,
        width: int = 128,
        skip_width: int = 4,
    ):
        super().__init__()
        if min(in_channels, out_channels, depth, width, skip_width) < 1:
            raise ConfigError("channel counts, depth, and widths must be >= 1")
        self.depth = depth
        downs, skips, ups = [], [], []
        ch = in_channels
        for _ in range(depth):
            downs.append(_down_block(ch, width))
            skips.append(_skip_block(width, skip_width))
            ups.append(_up_block(width + skip_width, width))
            ch = width
        self.downs = nn.ModuleList(downs)
        self.skips = nn.ModuleList(skips)
        self.ups = nn.ModuleList(ups)
        self.head = nn.Sequential(nn.Conv2d(width, out_channels, 1), nn.Sigmoid())

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        height, width = z.shape[-2], z.shape[-1]
        factor = 2**self.depth
        if height % factor or width % factor:
            raise ShapeError(
                f"spatial size {height}x{width} must be divisible by {factor} "
                f"(depth {self.depth})"
            )
        feats = []
        h = z
        for down, skip in zip(self.downs, self.skips):
            h = down(h)
            feats.append(skip(h))
        for up, feat in zip(reversed(self.ups), reversed(feats)):
            h = up(torch.cat([h, feat], dim=1))
            h = F.interpolate(h, scale_factor=2, mode="bilinear", align_corners=False)
        return self.head(h)
