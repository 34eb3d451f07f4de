"""
DepthDerain - Frozen Supervisors
The perceptual feature network behind the perceptual loss and the small VAE
whose latent mean supervises the DerainAE bottleneck. The depth latent has no
supervisor here: it is pooled from the trainable DepthNet decoder bottleneck,
not the frozen encoder, which would pass no gradient to the consistency term.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import FeatureSupervisorConfig, LatentSupervisorConfig
from .errors import ResolutionMismatchError
from .layers import ConvBlock

logger = logging.getLogger(__name__)


class FeatureSupervisor(nn.Module):
    """VGG-style stack; each stage is conv-relu-conv-relu-maxpool and is tapped after pooling."""

    def __init__(self, config: FeatureSupervisorConfig):
        super().__init__()
        self.config = config
        self.stages = nn.ModuleList()
        in_channels = 3
        for width in config.widths:
            self.stages.append(nn.Sequential(
                ConvBlock(in_channels, width, leaky=False),
                nn.MaxPool2d(2),
            ))
            in_channels = width

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        height, width = x.shape[-2:]
        stride = self.config.stride
        if height < stride or width < stride or height % stride or width % stride:
            raise ResolutionMismatchError(
                f"input {height}×{width} cannot reach the deepest perceptual tap (stride {stride})"
            )
        taps = []
        for stage in self.stages:
            x = stage(x)
            taps.append(x)
        return taps


class LatentSupervisor(nn.Module):
    """
    Variational autoencoder with a pooled convolutional body.

    `head` is the latent mean projection: the one layer left trainable while
    the rest of the network stays frozen.
    """

    def __init__(self, config: LatentSupervisorConfig):
        super().__init__()
        self.config = config
        grid = config.latent_grid
        blocks = []
        in_channels = 3
        for width in config.widths:
            blocks.append(ConvBlock(in_channels, width, stride=2))
            in_channels = width
        blocks += [nn.AdaptiveAvgPool2d(grid), nn.Flatten()]
        self.body = nn.Sequential(*blocks)

        features = config.widths[-1] * grid * grid
        self.head = nn.Linear(features, config.latent_length)
        self.logvar = nn.Linear(features, config.latent_length)

        self.decoder_fc = nn.Linear(config.latent_length, config.decoder_channels * grid * grid)
        self.decoder_out = nn.Conv2d(config.decoder_channels, 3, kernel_size=1)

    def encode(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.body(x)
        return self.head(h), self.logvar(h)

    def encode_mean(self, x: torch.Tensor, track_body: bool = False) -> torch.Tensor:
        """Latent mean with the frozen body evaluated without autograd."""
        with torch.set_grad_enabled(track_body and torch.is_grad_enabled()):
            h = self.body(x)
        return self.head(h)

    def decode(self, z: torch.Tensor, size: Sequence[int]) -> torch.Tensor:
        grid = self.config.latent_grid
        y = F.leaky_relu(self.decoder_fc(z), 0.2).view(-1, self.config.decoder_channels, grid, grid)
        y = self.decoder_out(y)
        y = F.interpolate(y, size=tuple(size), mode="bilinear", align_corners=False)
        return torch.sigmoid(y)

    def forward(self, x: torch.Tensor, sample: bool = True,
                generator: Optional[torch.Generator] = None):
        mu, logvar = self.encode(x)
        if sample:
            noise = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
            z = mu + torch.exp(0.5 * logvar) * noise
        else:
            z = mu
        return self.decode(z, x.shape[-2:]), mu, logvar


def vae_loss(recon: torch.Tensor, target: torch.Tensor, mu: torch.Tensor,
             logvar: torch.Tensor, kl_weight: float) -> torch.Tensor:
    reconstruction = F.mse_loss(recon, target)
    kl = -0.5 * torch.mean(1.0 + logvar - mu.pow(2) - logvar.exp())
    return reconstruction + kl_weight * kl


def fit_latent_supervisor(
    supervisor: LatentSupervisor,
    images: torch.Tensor,
    steps: int = 500,
    lr: float = 5e-3,
    kl_weight: float = 1e-4,
    sample: bool = True,
    seed: int = 0,
) -> List[float]:
    """
    Train the VAE offline on clear images (reconstruction MSE + weighted KL).

    Every parameter is unfrozen for the fit and the previous requires_grad
    flags are restored afterwards. Returns the per-step loss history.
    """
    flags = [p.requires_grad for p in supervisor.parameters()]
    supervisor.requires_grad_(True)
    generator = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.Adam(supervisor.parameters(), lr=lr)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=max(steps, 1))

    history = []
    try:
        for step in range(steps):
            optimizer.zero_grad()
            recon, mu, logvar = supervisor(images, sample=sample, generator=generator)
            loss = vae_loss(recon, images, mu, logvar, kl_weight)
            loss.backward()
            optimizer.step()
            scheduler.step()
            history.append(float(loss.detach()))
            if step % 100 == 0:
                logger.debug("latent supervisor step %d loss %.6f", step, history[-1])
    finally:
        for p, flag in zip(supervisor.parameters(), flags):
            p.requires_grad_(flag)
    logger.info("Fitted latent supervisor for %d steps, final loss %.6f",
                steps, history[-1] if history else float("nan"))
    return history
