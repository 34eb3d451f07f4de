"""
DepthDerain - Training Pipeline
Run configuration, ablation presets, paired data loading and the joint trainer.
"""

from netgraph import AblationConfig
from .config import (
    CONFIG_ENV_VAR,
    RESOLVED_CONFIG_NAME,
    ModelConfig,
    RunConfig,
    TrainConfig,
    load_run_config,
    parse_overrides,
    render_flat,
    run_config_fields,
    write_resolved_config,
)
from .data import EpochShuffleSampler, PairedRainDataset, make_loader
from .errors import ConfigError, ResumeError, TrainingDivergedError, TrainPipeError, UnknownPresetError
from .presets import (
    ABLATION_PRESETS,
    FULL_PRESET,
    PRESET_DESCRIPTIONS,
    active_graph_edges,
    apply_ablation,
    canonical_preset,
    preset_names,
)
from .trainer import (
    AblationOutcome,
    Trainer,
    TrainResult,
    build_optimizer,
    build_scheduler,
    gradient_groups,
    run_ablation,
    train,
    train_step,
)

__all__ = [
    'AblationConfig',
    'TrainConfig',
    'ModelConfig',
    'RunConfig',
    'load_run_config',
    'parse_overrides',
    'render_flat',
    'run_config_fields',
    'write_resolved_config',
    'CONFIG_ENV_VAR',
    'RESOLVED_CONFIG_NAME',
    'ABLATION_PRESETS',
    'FULL_PRESET',
    'PRESET_DESCRIPTIONS',
    'apply_ablation',
    'canonical_preset',
    'preset_names',
    'active_graph_edges',
    'PairedRainDataset',
    'EpochShuffleSampler',
    'make_loader',
    'Trainer',
    'TrainResult',
    'AblationOutcome',
    'train_step',
    'train',
    'run_ablation',
    'gradient_groups',
    'build_optimizer',
    'build_scheduler',
    'TrainPipeError',
    'ConfigError',
    'UnknownPresetError',
    'TrainingDivergedError',
    'ResumeError',
]
