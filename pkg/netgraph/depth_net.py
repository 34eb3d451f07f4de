"""
DepthDerain - Depth Network
U-Net style monocular depth network. The VGG-style encoder exposes one feature
map per level for concatenation into the DerainAE; the decoder upsamples back
to full resolution and predicts sigmoid disparity maps at several scales.
"""

from typing import List, Tuple

import torch
import torch.nn as nn

from .config import DepthNetConfig
from .errors import ResolutionMismatchError
from .layers import ConvBlock, conv3x3

DISPARITY_EPS = 1e-6


def _upsample(in_channels: int, out_channels: int, mode: str) -> nn.Module:
    if mode == "transpose":
        return nn.ConvTranspose2d(in_channels, out_channels, kernel_size=2, stride=2)
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
        nn.Conv2d(in_channels, out_channels, kernel_size=1),
    )


class DepthEncoder(nn.Module):
    def __init__(self, widths: List[int]):
        super().__init__()
        self.levels = nn.ModuleList()
        in_channels = 3
        for width in widths:
            self.levels.append(ConvBlock(in_channels, width, leaky=False))
            in_channels = width
        self.pool = nn.MaxPool2d(2)

    def forward(self, x: torch.Tensor) -> Tuple[List[torch.Tensor], torch.Tensor]:
        """Per-level features at 1, 1/2, 1/4, ... resolution, and the pooled deepest map."""
        features = []
        for level in self.levels:
            x = level(x)
            features.append(x)
            x = self.pool(x)
        return features, x


class DepthDecoder(nn.Module):
    def __init__(self, widths: List[int], disparity_heads: int, upsample_mode: str):
        super().__init__()
        levels = len(widths)
        deep = widths[-1]
        self.bottleneck = ConvBlock(deep, deep)
        self.up = nn.ModuleList()
        self.fuse = nn.ModuleList()
        for k in reversed(range(levels)):
            in_channels = widths[k + 1] if k + 1 < levels else deep
            self.up.append(_upsample(in_channels, widths[k], upsample_mode))
            self.fuse.append(ConvBlock(widths[k] * 2, widths[k]))
        self.heads = nn.ModuleList(
            [conv3x3(widths[i], 1) for i in range(disparity_heads)]
        )

    def forward(
        self,
        features: List[torch.Tensor],
        pooled: torch.Tensor,
    ) -> Tuple[List[torch.Tensor], torch.Tensor]:
        x = self.bottleneck(pooled)
        # Depth latent: global average pool of the deepest (bottleneck) map
        latent = x.mean(dim=(2, 3))

        levels = len(features)
        by_level = {}
        for i, (up, fuse) in enumerate(zip(self.up, self.fuse)):
            k = levels - 1 - i
            x = fuse(torch.cat([up(x), features[k]], dim=1))
            by_level[k] = x

        disparities = [
            torch.sigmoid(head(by_level[i])).clamp(DISPARITY_EPS, 1.0 - DISPARITY_EPS)
            for i, head in enumerate(self.heads)
        ]
        return disparities, latent


class DepthNet(nn.Module):
    def __init__(self, config: DepthNetConfig):
        super().__init__()
        self.config = config
        self.encoder = DepthEncoder(config.widths)
        self.decoder = DepthDecoder(config.widths, config.disparity_heads, config.upsample_mode)

    @property
    def stride(self) -> int:
        return 2 ** self.config.levels

    def encode(self, x: torch.Tensor) -> Tuple[List[torch.Tensor], torch.Tensor]:
        height, width = x.shape[-2:]
        if height % self.stride or width % self.stride:
            raise ResolutionMismatchError(
                f"input {height}×{width} is not divisible by the DepthNet stride {self.stride}"
            )
        return self.encoder(x)

    def forward(self, x: torch.Tensor) -> Tuple[List[torch.Tensor], torch.Tensor, List[torch.Tensor]]:
        features, pooled = self.encode(x)
        disparities, latent = self.decoder(features, pooled)
        return disparities, latent, features
