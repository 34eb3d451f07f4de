"""
DepthDerain - Network Configurations
Architecture settings for the four networks of a model bundle.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from .errors import IncompatibleConfigError

DEFAULT_LATENT_LENGTH = 150
UPSAMPLE_MODES = ("transpose", "bilinear")


def _check_widths(name: str, widths: List[int]) -> None:
    if not widths or any(int(w) <= 0 for w in widths):
        raise IncompatibleConfigError(f"{name} widths must be a non-empty list of positive ints, got {widths}")


@dataclass
class DerainAEConfig:
    """DerainAE: stride-2 encoder levels, FC latent bottleneck, mirrored decoder with skips."""

    widths: List[int] = field(default_factory=lambda: [32, 64, 128, 256])
    latent_length: int = DEFAULT_LATENT_LENGTH
    latent_grid: int = 4
    concatenate_depth: bool = True

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        _check_widths("DerainAE", self.widths)
        if self.latent_length <= 0 or self.latent_grid <= 0:
            raise IncompatibleConfigError("latent length and grid must be positive")

    @property
    def levels(self) -> int:
        return len(self.widths)

    @property
    def stride(self) -> int:
        return 2 ** self.levels


@dataclass
class DepthNetConfig:
    """DepthNet: VGG-style encoder (two 3×3 convs per level, max-pool) and U-Net decoder."""

    widths: List[int] = field(default_factory=lambda: [16, 32, 64, 128])
    disparity_heads: int = 2
    upsample_mode: str = "transpose"
    encoder_weights: Optional[str] = None

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        _check_widths("DepthNet", self.widths)
        if self.disparity_heads < 2:
            raise IncompatibleConfigError(f"DepthNet needs at least 2 disparity heads, got {self.disparity_heads}")
        if self.disparity_heads > len(self.widths):
            raise IncompatibleConfigError(
                f"{self.disparity_heads} disparity heads need at least as many decoder levels"
            )
        if self.upsample_mode not in UPSAMPLE_MODES:
            raise IncompatibleConfigError(f"upsample_mode must be one of {UPSAMPLE_MODES}")

    @property
    def levels(self) -> int:
        return len(self.widths)


@dataclass
class FeatureSupervisorConfig:
    """Frozen perceptual network; one tap after each pooled stage."""

    widths: List[int] = field(default_factory=lambda: [16, 32, 64])
    layer_weights: List[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    weights_path: Optional[str] = None

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        self.layer_weights = [float(w) for w in self.layer_weights]
        _check_widths("feature supervisor", self.widths)
        if len(self.layer_weights) != len(self.widths):
            raise IncompatibleConfigError(
                f"{len(self.widths)} perceptual taps but {len(self.layer_weights)} layer weights"
            )
        if any(w < 0 for w in self.layer_weights):
            raise IncompatibleConfigError("perceptual layer weights must be non-negative")

    @property
    def stride(self) -> int:
        return 2 ** len(self.widths)


@dataclass
class LatentSupervisorConfig:
    """Small VAE standing in for a pretrained image VAE."""

    widths: List[int] = field(default_factory=lambda: [16, 32, 64, 64])
    latent_length: int = DEFAULT_LATENT_LENGTH
    latent_grid: int = 4
    decoder_channels: int = 16
    weights_path: Optional[str] = None

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        _check_widths("latent supervisor", self.widths)
        if self.latent_length <= 0 or self.latent_grid <= 0 or self.decoder_channels <= 0:
            raise IncompatibleConfigError("latent supervisor sizes must be positive")


@dataclass
class BundleConfig:
    derain: DerainAEConfig = field(default_factory=DerainAEConfig)
    depth: DepthNetConfig = field(default_factory=DepthNetConfig)
    feature: FeatureSupervisorConfig = field(default_factory=FeatureSupervisorConfig)
    latent: LatentSupervisorConfig = field(default_factory=LatentSupervisorConfig)

    def __post_init__(self):
        if self.derain.concatenate_depth and self.derain.levels != self.depth.levels:
            raise IncompatibleConfigError(
                f"feature concatenation needs matching levels: DerainAE has {self.derain.levels}, "
                f"DepthNet has {self.depth.levels}"
            )
        if self.derain.latent_length != self.latent.latent_length:
            raise IncompatibleConfigError(
                f"DerainAE latent ({self.derain.latent_length}) and latent supervisor "
                f"({self.latent.latent_length}) must have the same length"
            )

    @property
    def stride(self) -> int:
        """Side lengths must be multiples of this for every network in the bundle."""
        return max(self.derain.stride, 2 ** self.depth.levels, self.feature.stride)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "derain": asdict(self.derain),
            "depth": asdict(self.depth),
            "feature": asdict(self.feature),
            "latent": asdict(self.latent),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BundleConfig":
        return cls(
            derain=DerainAEConfig(**data["derain"]),
            depth=DepthNetConfig(**data["depth"]),
            feature=FeatureSupervisorConfig(**data["feature"]),
            latent=LatentSupervisorConfig(**data["latent"]),
        )
