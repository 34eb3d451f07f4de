"""
DepthDerain - Deraining AutoEncoder
Stride-2 encoder whose levels optionally take DepthNet encoder features
concatenated on the channel axis, a fully connected latent bottleneck, and a
mirrored decoder with skip connections predicting a residual.
"""

from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import DerainAEConfig
from .errors import IncompatibleConfigError, IncompatibleFeaturesError, ResolutionMismatchError
from .layers import ConvBlock, conv3x3

IMAGE_CHANNELS = 3


class DerainAE(nn.Module):
    def __init__(self, config: DerainAEConfig, depth_widths: Optional[Sequence[int]] = None):
        super().__init__()
        self.config = config
        widths = config.widths
        levels = config.levels

        if config.concatenate_depth:
            if depth_widths is None or len(depth_widths) != levels:
                raise IncompatibleConfigError(
                    f"concatenation needs {levels} DepthNet widths, got {depth_widths}"
                )
            self.depth_widths = [int(w) for w in depth_widths]
        else:
            self.depth_widths = [0] * levels

        self.level_input_channels: List[int] = []
        self.encoder = nn.ModuleList()
        in_channels = IMAGE_CHANNELS
        for k, width in enumerate(widths):
            level_in = in_channels + self.depth_widths[k]
            self.level_input_channels.append(level_in)
            self.encoder.append(ConvBlock(level_in, width, stride=2))
            in_channels = width

        deep = widths[-1]
        grid = config.latent_grid
        self.pool = nn.AdaptiveAvgPool2d(grid)
        self.to_latent = nn.Linear(deep * grid * grid, config.latent_length)
        self.from_latent = nn.Linear(config.latent_length, deep * grid * grid)

        # decoder[i] serves encoder level k = levels - 1 - i
        self.decoder = nn.ModuleList()
        for k in reversed(range(levels)):
            out_channels = widths[k - 1] if k > 0 else widths[0]
            self.decoder.append(nn.Sequential(
                conv3x3(widths[k] * 2, widths[k]),
                nn.LeakyReLU(0.2, inplace=True),
                nn.ConvTranspose2d(widths[k], out_channels, kernel_size=4, stride=2, padding=1),
                nn.LeakyReLU(0.2, inplace=True),
            ))
        self.head = conv3x3(widths[0], IMAGE_CHANNELS)

    def _check_features(self, k: int, x: torch.Tensor, feature: torch.Tensor) -> None:
        expected = (x.shape[0], self.depth_widths[k], x.shape[2], x.shape[3])
        if tuple(feature.shape) != expected:
            raise IncompatibleFeaturesError(
                f"depth features at level {k} have shape {tuple(feature.shape)}, expected {expected}"
            )

    def forward(
        self,
        rainy: torch.Tensor,
        depth_features: Optional[Sequence[torch.Tensor]] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        height, width = rainy.shape[-2:]
        if height % self.config.stride or width % self.config.stride:
            raise ResolutionMismatchError(
                f"input {height}×{width} is not divisible by the encoder stride {self.config.stride}"
            )
        if self.config.concatenate_depth:
            if depth_features is None or len(depth_features) < self.config.levels:
                raise IncompatibleFeaturesError(
                    f"DerainAE expects {self.config.levels} depth feature maps"
                )

        x = rainy
        skips = []
        for k, block in enumerate(self.encoder):
            if self.config.concatenate_depth:
                self._check_features(k, x, depth_features[k])
                x = torch.cat([x, depth_features[k]], dim=1)
            x = block(x)
            skips.append(x)

        latent = self.to_latent(torch.flatten(self.pool(x), 1))

        grid = self.config.latent_grid
        up = self.from_latent(latent).view(-1, self.config.widths[-1], grid, grid)
        if up.shape[-2:] != x.shape[-2:]:
            up = F.interpolate(up, size=x.shape[-2:], mode="bilinear", align_corners=False)
        for block, skip in zip(self.decoder, reversed(skips)):
            up = block(torch.cat([up, skip], dim=1))

        derained = torch.clamp(rainy + self.head(up), 0.0, 1.0)
        return derained, latent
