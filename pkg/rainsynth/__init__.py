"""
DepthDerain - Rain Synthesis
Streak/fog layers, the three rain formation models and toy dataset generation.
"""

from .errors import (
    RainSynthError,
    InvalidParameterError,
    EmptyCanvasError,
    NonBinaryMaskError,
    DatasetError,
    DatasetWriteError,
)
from .streaks import StreakParams, generate_streak_layer
from .fog import FogParams, fog_from_depth
from .composer import (
    RainSceneComponents,
    compose_linear,
    compose_region,
    compose_physical,
)
from .dataset import (
    DatasetManifest,
    ManifestEntry,
    load_manifest,
    make_toy_dataset,
    render_clear_scene,
    synthesize_scene,
)

__all__ = [
    'StreakParams',
    'generate_streak_layer',
    'FogParams',
    'fog_from_depth',
    'RainSceneComponents',
    'compose_linear',
    'compose_region',
    'compose_physical',
    'DatasetManifest',
    'ManifestEntry',
    'load_manifest',
    'make_toy_dataset',
    'render_clear_scene',
    'synthesize_scene',
    'RainSynthError',
    'InvalidParameterError',
    'EmptyCanvasError',
    'NonBinaryMaskError',
    'DatasetError',
    'DatasetWriteError',
]
