"""
DepthDerain - Shared Layer Blocks
"""

import torch.nn as nn


def conv3x3(in_channels: int, out_channels: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1)


class ConvBlock(nn.Module):
    """Two 3×3 convolutions, the first optionally strided."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1, leaky: bool = True):
        super().__init__()
        self.net = nn.Sequential(
            conv3x3(in_channels, out_channels, stride),
            nn.LeakyReLU(0.2, inplace=True) if leaky else nn.ReLU(inplace=True),
            conv3x3(out_channels, out_channels),
            nn.LeakyReLU(0.2, inplace=True) if leaky else nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.net(x)
