"""
DepthDerain - Model Bundle
Builds the four networks, applies the freeze policy, runs the forward paths
used in training and inference, and reads/writes checkpoint archives.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from imagecore import DepthMap, Image
from .ablation import AblationConfig
from .config import (
    BundleConfig,
    DepthNetConfig,
    DerainAEConfig,
    FeatureSupervisorConfig,
    LatentSupervisorConfig,
)
from .depth_net import DepthNet
from .derain_ae import DerainAE
from .errors import (
    CheckpointIOError,
    CheckpointMismatchError,
    IncompatibleFeaturesError,
)
from .supervisors import FeatureSupervisor, LatentSupervisor
from .tensors import image_to_tensor, tensor_to_depth, tensor_to_image

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "depthderain-bundle/1"

# Longest prefix first; maps parameter names to freeze-policy groups
_GROUP_PREFIXES = (
    ("depth_net.encoder.", "depth_net.encoder"),
    ("depth_net.decoder.", "depth_net.decoder"),
    ("latent_supervisor.head.", "latent_supervisor.head"),
    ("latent_supervisor.", "latent_supervisor.body"),
    ("feature_supervisor.", "feature_supervisor"),
    ("derain_ae.", "derain_ae"),
)
TRAINABLE_GROUPS = frozenset({"derain_ae", "depth_net.decoder", "latent_supervisor.head"})

TensorOrImage = Union[torch.Tensor, Image]


@dataclass
class FeaturePyramid:
    """Activation maps ordered shallow to deep."""

    maps: List[torch.Tensor]

    def __post_init__(self):
        sizes = [tuple(m.shape[-2:]) for m in self.maps]
        for shallow, deep in zip(sizes, sizes[1:]):
            if deep[0] > shallow[0] or deep[1] > shallow[1]:
                raise IncompatibleFeaturesError(f"feature pyramid sizes must not increase: {sizes}")

    def __len__(self) -> int:
        return len(self.maps)

    def __iter__(self) -> Iterator[torch.Tensor]:
        return iter(self.maps)

    def __getitem__(self, index: int) -> torch.Tensor:
        return self.maps[index]

    def shapes(self) -> List[Tuple[int, ...]]:
        return [tuple(m.shape) for m in self.maps]

    def detach(self) -> "FeaturePyramid":
        return FeaturePyramid([m.detach() for m in self.maps])


@dataclass
class LatentPair:
    """Latents compared by the consistency terms; a side is None when its term is off."""

    rainy_latent: Optional[torch.Tensor] = None
    clear_latent: Optional[torch.Tensor] = None
    rainy_depth_latent: Optional[torch.Tensor] = None
    clear_depth_latent: Optional[torch.Tensor] = None

    def __post_init__(self):
        _check_pair("derain", self.rainy_latent, self.clear_latent)
        _check_pair("depth", self.rainy_depth_latent, self.clear_depth_latent)

    @property
    def has_derain(self) -> bool:
        return self.rainy_latent is not None

    @property
    def has_depth(self) -> bool:
        return self.rainy_depth_latent is not None


def _check_pair(label: str, rainy: Optional[torch.Tensor], clear: Optional[torch.Tensor]) -> None:
    if (rainy is None) != (clear is None):
        raise IncompatibleFeaturesError(f"{label} latent pair is missing one side")
    if rainy is not None and rainy.shape[-1] != clear.shape[-1]:
        raise IncompatibleFeaturesError(
            f"rainy and clear {label} latents differ in length: {rainy.shape[-1]} vs {clear.shape[-1]}"
        )


class DepthOutput(NamedTuple):
    disparities: List[torch.Tensor]
    depth_latent: torch.Tensor
    encoder_features: FeaturePyramid


class ModelBundle(nn.Module):
    """DerainAE, DepthNet and the two supervisors, with the freeze policy applied."""

    def __init__(
        self,
        configs: BundleConfig,
        derain_ae: DerainAE,
        depth_net: DepthNet,
        feature_supervisor: FeatureSupervisor,
        latent_supervisor: LatentSupervisor,
    ):
        super().__init__()
        self.configs = configs
        self.derain_ae = derain_ae
        self.depth_net = depth_net
        self.feature_supervisor = feature_supervisor
        self.latent_supervisor = latent_supervisor

    @staticmethod
    def group_of(name: str) -> str:
        for prefix, group in _GROUP_PREFIXES:
            if name.startswith(prefix):
                return group
        raise KeyError(f"parameter {name} belongs to no group")

    def parameter_groups(self) -> Dict[str, List[Tuple[str, nn.Parameter]]]:
        groups: Dict[str, List[Tuple[str, nn.Parameter]]] = {}
        for name, param in self.named_parameters():
            groups.setdefault(self.group_of(name), []).append((name, param))
        return groups

    def apply_freeze_policy(self) -> None:
        for name, param in self.named_parameters():
            param.requires_grad_(self.group_of(name) in TRAINABLE_GROUPS)

    def trainable_parameters(self) -> List[nn.Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    @property
    def concatenates_depth(self) -> bool:
        return self.configs.derain.concatenate_depth

    @property
    def inference_stride(self) -> int:
        stride = self.configs.derain.stride
        if self.concatenates_depth:
            stride = max(stride, self.depth_net.stride)
        return stride


def _load_external(module: nn.Module, path: Optional[str], label: str) -> None:
    if not path:
        return
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except OSError as e:
        raise CheckpointIOError(f"cannot read {label} weights from {path}: {e}") from e
    try:
        module.load_state_dict(state)
    except RuntimeError as e:
        raise CheckpointMismatchError(f"{label} weights in {path} do not fit: {e}") from e
    logger.info("Loaded %s weights from %s", label, path)


def build_models(
    derain_cfg: Optional[DerainAEConfig] = None,
    depth_cfg: Optional[DepthNetConfig] = None,
    seed: int = 0,
    feature_cfg: Optional[FeatureSupervisorConfig] = None,
    latent_cfg: Optional[LatentSupervisorConfig] = None,
    load_external_weights: bool = True,
) -> ModelBundle:
    """
    Construct a bundle with deterministic initialization for the given seed.

    The global torch RNG is left untouched.
    """
    configs = BundleConfig(
        derain=derain_cfg or DerainAEConfig(),
        depth=depth_cfg or DepthNetConfig(),
        feature=feature_cfg or FeatureSupervisorConfig(),
        latent=latent_cfg or LatentSupervisorConfig(),
    )
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        depth_net = DepthNet(configs.depth)
        derain_ae = DerainAE(configs.derain, configs.depth.widths)
        feature_supervisor = FeatureSupervisor(configs.feature)
        latent_supervisor = LatentSupervisor(configs.latent)

    if load_external_weights:
        _load_external(depth_net.encoder, configs.depth.encoder_weights, "DepthNet encoder")
        _load_external(feature_supervisor, configs.feature.weights_path, "feature supervisor")
        _load_external(latent_supervisor, configs.latent.weights_path, "latent supervisor")

    bundle = ModelBundle(configs, derain_ae, depth_net, feature_supervisor, latent_supervisor)
    bundle.apply_freeze_policy()
    return bundle


def _as_batch(img: TensorOrImage) -> torch.Tensor:
    if isinstance(img, Image):
        return image_to_tensor(img)
    if img.dim() == 3:
        return img[None]
    return img


def depth_forward(img: TensorOrImage, bundle: ModelBundle) -> DepthOutput:
    """
    Disparity maps (finest first), the depth latent and the encoder feature pyramid.

    The depth latent is pooled from the decoder bottleneck, not the frozen encoder,
    so the depth consistency term reaches trainable weights.
    """
    disparities, latent, features = bundle.depth_net(_as_batch(img))
    return DepthOutput(disparities, latent, FeaturePyramid(features))


def derain_forward(
    rainy: TensorOrImage,
    depth_features: Optional[FeaturePyramid],
    bundle: ModelBundle,
    ablation: AblationConfig,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Derained batch clamped to [0, 1] and the DerainAE latent."""
    if ablation.concatenation_on != bundle.concatenates_depth:
        raise IncompatibleFeaturesError(
            f"ablation has concatenation {'on' if ablation.concatenation_on else 'off'} but the "
            f"bundle was built {'with' if bundle.concatenates_depth else 'without'} it"
        )
    features = list(depth_features) if (ablation.concatenation_on and depth_features is not None) else None
    return bundle.derain_ae(_as_batch(rainy), features)


def extract_perceptual_features(img: TensorOrImage, bundle: ModelBundle) -> FeaturePyramid:
    return FeaturePyramid(bundle.feature_supervisor(_as_batch(img)))


def encode_clear_latent(clear: TensorOrImage, bundle: ModelBundle) -> torch.Tensor:
    """Deterministic latent (distribution mean, no sampling) of clear images."""
    return bundle.latent_supervisor.encode_mean(_as_batch(clear))


def _pad_to(x: torch.Tensor, stride: int) -> Tuple[torch.Tensor, int, int]:
    height, width = x.shape[-2:]
    pad_h = (-height) % stride
    pad_w = (-width) % stride
    if pad_h or pad_w:
        x = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
    return x, height, width


def infer_tensor(rainy: torch.Tensor, bundle: ModelBundle, pad_to_stride: bool = False) -> torch.Tensor:
    """
    Rainy-only inference: DepthNet encoder (when concatenating) then DerainAE.

    Never touches the DepthNet decoder or either supervisor.
    """
    x = _as_batch(rainy)
    height, width = x.shape[-2:]
    if pad_to_stride:
        x, height, width = _pad_to(x, bundle.inference_stride)
    with torch.no_grad():
        features = bundle.depth_net.encode(x)[0] if bundle.concatenates_depth else None
        derained, _ = bundle.derain_ae(x, features)
    return derained[..., :height, :width]


def infer(rainy: TensorOrImage, bundle: ModelBundle, pad_to_stride: bool = False) -> TensorOrImage:
    derained = infer_tensor(_as_batch(rainy), bundle, pad_to_stride)
    if isinstance(rainy, Image):
        return tensor_to_image(derained)
    return derained


def predict_depth(rainy: TensorOrImage, bundle: ModelBundle, pad_to_stride: bool = False) -> Union[DepthMap, torch.Tensor]:
    """Disp0, the full-resolution DepthNet prediction, for a rainy input."""
    x = _as_batch(rainy)
    height, width = x.shape[-2:]
    if pad_to_stride:
        x, height, width = _pad_to(x, bundle.depth_net.stride)
    with torch.no_grad():
        disparities, _, _ = bundle.depth_net(x)
    disp0 = disparities[0][..., :height, :width]
    if isinstance(rainy, Image):
        return tensor_to_depth(disp0)
    return disp0


def save_bundle(
    bundle: ModelBundle,
    path: Union[str, Path],
    ablation: Optional[AblationConfig] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> None:
    """Single archive: parameters keyed by hierarchical name, configs and ablation flags."""
    archive: Dict[str, Any] = {
        "format": BUNDLE_FORMAT,
        "configs": bundle.configs.to_dict(),
        "ablation": ablation.to_dict() if ablation else None,
        "state_dict": bundle.state_dict(),
    }
    archive.update(extra or {})
    try:
        torch.save(archive, str(path))
    except OSError as e:
        raise CheckpointIOError(f"cannot write checkpoint {path}: {e}") from e


def read_archive(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointIOError(f"no checkpoint at {path}")
    try:
        archive = torch.load(str(path), map_location="cpu", weights_only=True)
    except (OSError, RuntimeError) as e:
        raise CheckpointIOError(f"cannot read checkpoint {path}: {e}") from e
    if not isinstance(archive, dict) or archive.get("format") != BUNDLE_FORMAT:
        raise CheckpointMismatchError(f"{path} is not a {BUNDLE_FORMAT} archive")
    return archive


def load_bundle(
    path: Union[str, Path],
    expected: Optional[BundleConfig] = None,
) -> Tuple[ModelBundle, Dict[str, Any]]:
    """
    Rebuild a bundle from a checkpoint archive.

    When `expected` is given, any difference from the stored configuration is
    a CheckpointMismatchError.
    """
    archive = read_archive(path)
    try:
        configs = BundleConfig.from_dict(archive["configs"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointMismatchError(f"checkpoint {path} has an unreadable config: {e}") from e

    if expected is not None and expected.to_dict() != configs.to_dict():
        stored = configs.to_dict()
        wanted = expected.to_dict()
        differing = sorted(
            f"{section}.{key}"
            for section in stored
            for key in stored[section]
            if stored[section][key] != wanted.get(section, {}).get(key)
        )
        raise CheckpointMismatchError(
            f"checkpoint {path} was built with a different model config ({', '.join(differing)})"
        )

    bundle = build_models(configs.derain, configs.depth, seed=0,
                          feature_cfg=configs.feature, latent_cfg=configs.latent,
                          load_external_weights=False)
    try:
        bundle.load_state_dict(archive["state_dict"], strict=True)
    except (KeyError, RuntimeError) as e:
        raise CheckpointMismatchError(f"checkpoint {path} parameters do not fit its config: {e}") from e
    return bundle, archive


def ablation_of(archive: Dict[str, Any]) -> Optional[AblationConfig]:
    data = archive.get("ablation")
    return AblationConfig.from_dict(data) if data else None


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())

