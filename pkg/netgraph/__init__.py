"""
DepthDerain - Network Graph
DerainAE, DepthNet, the frozen supervisors and the forward paths that tie them together.
"""

from .ablation import AblationConfig
from .bundle import (
    BUNDLE_FORMAT,
    TRAINABLE_GROUPS,
    DepthOutput,
    FeaturePyramid,
    LatentPair,
    ModelBundle,
    ablation_of,
    build_models,
    count_parameters,
    depth_forward,
    derain_forward,
    encode_clear_latent,
    extract_perceptual_features,
    infer,
    infer_tensor,
    load_bundle,
    predict_depth,
    read_archive,
    save_bundle,
)
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
    IncompatibleConfigError,
    IncompatibleFeaturesError,
    NetGraphError,
    ResolutionMismatchError,
)
from .supervisors import FeatureSupervisor, LatentSupervisor, fit_latent_supervisor, vae_loss
from .tensors import depth_to_tensor, image_to_tensor, images_to_batch, tensor_to_depth, tensor_to_image

__all__ = [
    'AblationConfig', 'BundleConfig', 'DerainAEConfig', 'DepthNetConfig',
    'FeatureSupervisorConfig', 'LatentSupervisorConfig',
    'DerainAE', 'DepthNet', 'FeatureSupervisor', 'LatentSupervisor',
    'ModelBundle', 'FeaturePyramid', 'LatentPair', 'DepthOutput',
    'build_models', 'depth_forward', 'derain_forward', 'extract_perceptual_features',
    'encode_clear_latent', 'infer', 'infer_tensor', 'predict_depth',
    'save_bundle', 'load_bundle', 'read_archive', 'ablation_of', 'count_parameters',
    'fit_latent_supervisor', 'vae_loss',
    'image_to_tensor', 'images_to_batch', 'tensor_to_image', 'depth_to_tensor', 'tensor_to_depth',
    'BUNDLE_FORMAT', 'TRAINABLE_GROUPS',
    'NetGraphError', 'IncompatibleConfigError', 'ResolutionMismatchError',
    'IncompatibleFeaturesError', 'CheckpointMismatchError', 'CheckpointIOError',
]
