"""
DepthDerain - Ablation Presets
Named component-removal settings and the graph edges each one keeps.
"""

from typing import Dict, FrozenSet, List

from netgraph import AblationConfig
from .errors import UnknownPresetError

FULL_PRESET = "Full"

ABLATION_PRESETS: Dict[str, AblationConfig] = {
    "A": AblationConfig(depth_latent_on=False),
    "B": AblationConfig(derain_latent_on=False),
    "C": AblationConfig(gt_depth_on=False),
    "D": AblationConfig(concatenation_on=False),
    "E": AblationConfig(gt_depth_on=False, concatenation_on=False),
    FULL_PRESET: AblationConfig(),
}

PRESET_DESCRIPTIONS = {
    "A": "without depth-latent consistency",
    "B": "without derain-latent consistency",
    "C": "without ground-truth depth supervision",
    "D": "without depth feature concatenation",
    "E": "without ground-truth depth and concatenation",
    FULL_PRESET: "all components",
}

ALWAYS_ON_EDGES = frozenset({"loss:perceptual", "loss:derain_mse"})


def preset_names() -> List[str]:
    return list(ABLATION_PRESETS)


def apply_ablation(preset: str) -> AblationConfig:
    """Ablation switches for a preset name (A-E or Full, case-insensitive)."""
    wanted = preset.strip().lower()
    for name, ablation in ABLATION_PRESETS.items():
        if name.lower() == wanted:
            return ablation
    raise UnknownPresetError(
        f"unknown ablation preset {preset!r}; choose one of {', '.join(ABLATION_PRESETS)}"
    )


def canonical_preset(preset: str) -> str:
    wanted = preset.strip().lower()
    for name in ABLATION_PRESETS:
        if name.lower() == wanted:
            return name
    raise UnknownPresetError(f"unknown ablation preset {preset!r}")


def active_graph_edges(ablation: AblationConfig) -> FrozenSet[str]:
    """
    Loss and graph edges a run keeps.

    Every switch removes exactly one edge: its loss term, or for
    concatenation the DepthNet-encoder to DerainAE feature path.
    """
    edges = set(ALWAYS_ON_EDGES)
    if ablation.depth_latent_on:
        edges.add("loss:depth_consist")
    if ablation.derain_latent_on:
        edges.add("loss:derain_consist")
    if ablation.gt_depth_on:
        edges.add("loss:depth_mse")
    if ablation.concatenation_on:
        edges.add("graph:depth_features->derain_ae")
    return frozenset(edges)
