"""
DepthDerain - Run Configuration
Validated training and model settings read from flat key=value files.
"""

import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from losses import LossError, LossWeights
from netgraph import (
    AblationConfig,
    BundleConfig,
    DepthNetConfig,
    DerainAEConfig,
    FeatureSupervisorConfig,
    IncompatibleConfigError,
    LatentSupervisorConfig,
)
from .errors import ConfigError, UnknownPresetError
from .presets import FULL_PRESET, apply_ablation, canonical_preset

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "DEPTHDERAIN_CONFIG"
RESOLVED_CONFIG_NAME = "config.resolved"

WEIGHT_KEYS = {
    "lambda_perceptual": "perceptual",
    "lambda_depth_consist": "depth_consist",
    "lambda_derain_consist": "derain_consist",
    "lambda_derain": "derain_mse",
    "lambda_depth": "depth_mse",
}
ABLATION_KEYS = ("depth_latent_on", "derain_latent_on", "gt_depth_on", "concatenation_on")


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _blank_to_none(value: Any) -> Any:
    if isinstance(value, str) and not value.strip():
        return None
    return value


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(4, ge=1)
    learning_rate: float = Field(5e-3, gt=0)
    # Per-epoch multiplicative lr decay ("schedule") or Adam L2 coefficient ("l2")
    lr_decay: float = Field(0.9, gt=0, le=1)
    decay_mode: Literal["schedule", "l2"] = "schedule"
    epochs: int = Field(20, ge=1)
    max_steps: Optional[int] = Field(None, ge=1)
    seed: int = 0
    dataset_root: str = "data/toy"
    run_dir: str = "runs/default"
    checkpoint_interval: int = Field(100, ge=1)
    log_every: int = Field(10, ge=1)
    max_grad_norm: Optional[float] = Field(None, gt=0)
    latent_fit_steps: int = Field(0, ge=0)
    num_workers: int = Field(0, ge=0)

    blank_to_none = field_validator("max_steps", "max_grad_norm", mode="before")(_blank_to_none)


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    derain_widths: List[int] = Field(default_factory=lambda: [32, 64, 128, 256])
    latent_length: int = Field(150, ge=1)
    latent_grid: int = Field(4, ge=1)
    depth_widths: List[int] = Field(default_factory=lambda: [16, 32, 64, 128])
    disparity_heads: int = Field(2, ge=2)
    upsample_mode: Literal["transpose", "bilinear"] = "transpose"
    depth_encoder_weights: Optional[str] = None
    feature_widths: List[int] = Field(default_factory=lambda: [16, 32, 64])
    perceptual_layer_weights: List[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])
    feature_weights: Optional[str] = None
    latent_widths: List[int] = Field(default_factory=lambda: [16, 32, 64, 64])
    latent_decoder_channels: int = Field(16, ge=1)
    latent_weights: Optional[str] = None

    split_lists = field_validator(
        "derain_widths", "depth_widths", "feature_widths", "perceptual_layer_weights",
        "latent_widths", mode="before",
    )(_split_list)
    blank_to_none = field_validator(
        "depth_encoder_weights", "feature_weights", "latent_weights", mode="before",
    )(_blank_to_none)

    def bundle_config(self, concatenate_depth: bool = True) -> BundleConfig:
        """Network configs for a bundle; raises ConfigError on incompatible sizes."""
        try:
            return BundleConfig(
                derain=DerainAEConfig(
                    widths=self.derain_widths,
                    latent_length=self.latent_length,
                    latent_grid=self.latent_grid,
                    concatenate_depth=concatenate_depth,
                ),
                depth=DepthNetConfig(
                    widths=self.depth_widths,
                    disparity_heads=self.disparity_heads,
                    upsample_mode=self.upsample_mode,
                    encoder_weights=self.depth_encoder_weights,
                ),
                feature=FeatureSupervisorConfig(
                    widths=self.feature_widths,
                    layer_weights=self.perceptual_layer_weights,
                    weights_path=self.feature_weights,
                ),
                latent=LatentSupervisorConfig(
                    widths=self.latent_widths,
                    latent_length=self.latent_length,
                    latent_grid=self.latent_grid,
                    decoder_channels=self.latent_decoder_channels,
                    weights_path=self.latent_weights,
                ),
            )
        except IncompatibleConfigError as e:
            raise ConfigError(str(e)) from e


@dataclass
class RunConfig:
    """Everything one training run needs, resolved from file, overrides and defaults."""

    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    preset: str = FULL_PRESET

    @classmethod
    def from_flat(cls, values: Mapping[str, Optional[str]]) -> "RunConfig":
        train_keys = set(TrainConfig.model_fields)
        model_keys = set(ModelConfig.model_fields)

        train_values: Dict[str, Any] = {}
        model_values: Dict[str, Any] = {}
        weight_values: Dict[str, float] = {}
        flag_values: Dict[str, bool] = {}
        preset = FULL_PRESET
        unknown = []

        for key, raw in values.items():
            key = key.strip()
            if raw is None:
                raise ConfigError(f"config key {key} has no value")
            value = raw.strip()
            if key in train_keys:
                train_values[key] = value
            elif key in model_keys:
                model_values[key] = value
            elif key in WEIGHT_KEYS:
                weight_values[WEIGHT_KEYS[key]] = _parse_float(key, value)
            elif key == "preset":
                preset = value
            elif key in ABLATION_KEYS:
                flag_values[key] = _parse_bool(key, value)
            else:
                unknown.append(key)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")

        try:
            train = TrainConfig(**train_values)
            model = ModelConfig(**model_values)
        except ValidationError as e:
            raise ConfigError(_describe_validation(e)) from e
        try:
            weights = LossWeights(**weight_values)
        except LossError as e:
            raise ConfigError(str(e)) from e
        try:
            ablation = apply_ablation(preset)
            preset = canonical_preset(preset)
        except UnknownPresetError as e:
            raise ConfigError(str(e)) from e
        if flag_values:
            ablation = replace(ablation, **flag_values)

        config = cls(train=train, model=model, weights=weights, ablation=ablation, preset=preset)
        config.bundle_config()
        return config

    def bundle_config(self) -> BundleConfig:
        return self.model.bundle_config(self.ablation.concatenation_on)

    def to_flat(self) -> Dict[str, str]:
        flat: Dict[str, str] = {}
        for section in (self.train, self.model):
            for key, value in section.model_dump().items():
                flat[key] = _format_value(value)
        for key, attr in WEIGHT_KEYS.items():
            flat[key] = repr(getattr(self.weights, attr))
        flat["preset"] = self.preset
        for key in ABLATION_KEYS:
            flat[key] = "true" if getattr(self.ablation, key) else "false"
        return flat

    def with_overrides(self, overrides: Mapping[str, str]) -> "RunConfig":
        merged = self.to_flat()
        if "preset" in overrides:
            for key in ABLATION_KEYS:
                merged.pop(key, None)
        merged.update(overrides)
        return RunConfig.from_flat(merged)


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as e:
        raise ConfigError(f"{key} must be a number, got {value!r}") from e


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _describe_validation(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        problems.append(f"{location}: {item['msg']}")
    return "invalid config: " + "; ".join(problems)


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """`key=value` strings from the command line."""
    overrides: Dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {pair!r} is not key=value")
        overrides[key.strip()] = value.strip()
    return overrides


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Union[Mapping[str, str], Iterable[str]]] = None,
    preset: Optional[str] = None,
) -> RunConfig:
    """
    Resolve a RunConfig: file, then preset, then overrides.

    Without an explicit path, $DEPTHDERAIN_CONFIG names the file; with
    neither, defaults apply. A preset replaces any ablation flags the file
    sets; overrides still win over both.
    """
    if path is None:
        path = os.getenv(CONFIG_ENV_VAR) or None

    values: Dict[str, Optional[str]] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values.update(dotenv_values(path))
        logger.debug("Read %d key(s) from %s", len(values), path)

    if preset is not None:
        for key in ABLATION_KEYS:
            values.pop(key, None)
        values["preset"] = preset

    config = RunConfig.from_flat(values)
    if overrides:
        if not isinstance(overrides, Mapping):
            overrides = parse_overrides(overrides)
        config = config.with_overrides(overrides)
    return config


def render_flat(config: RunConfig) -> str:
    lines = []
    for key, value in config.to_flat().items():
        if any(ch.isspace() for ch in value) or "#" in value:
            value = '"' + value.replace('"', '\\"') + '"'
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_resolved_config(config: RunConfig, run_dir: Union[str, Path]) -> Path:
    path = Path(run_dir) / RESOLVED_CONFIG_NAME
    path.write_text(render_flat(config), encoding="utf-8")
    return path


def run_config_fields() -> List[str]:
    """Every key the flat config accepts."""
    return [
        *TrainConfig.model_fields,
        *ModelConfig.model_fields,
        *WEIGHT_KEYS,
        "preset",
        *ABLATION_KEYS,
    ]
