"""
DepthDerain - Composite Loss
Weighted combination of the five terms with a per-term breakdown for logging.
"""

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Optional

import torch

from netgraph import AblationConfig
from .errors import LossError, MissingLossTermError, NonFiniteLossError

TERM_NAMES = ("perceptual", "depth_consist", "derain_consist", "derain_mse", "depth_mse")
LOSS_LOG_COLUMNS = ["step", *TERM_NAMES, "total"]

# Ablation flag that gates each optional term
_TERM_SWITCHES = {
    "depth_consist": "depth_latent_on",
    "derain_consist": "derain_latent_on",
    "depth_mse": "gt_depth_on",
}


@dataclass
class LossWeights:
    perceptual: float = 1.0
    depth_consist: float = 0.5
    derain_consist: float = 0.5
    derain_mse: float = 10.0
    depth_mse: float = 2.0

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not math.isfinite(value) or value < 0:
                raise LossError(f"loss weight {f.name} must be finite and non-negative, got {value}")
            setattr(self, f.name, value)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class LossTerms:
    """Unweighted terms; None marks a term that was not computed."""

    perceptual: Optional[torch.Tensor] = None
    depth_consist: Optional[torch.Tensor] = None
    derain_consist: Optional[torch.Tensor] = None
    derain_mse: Optional[torch.Tensor] = None
    depth_mse: Optional[torch.Tensor] = None


@dataclass
class LossBreakdown:
    perceptual: float
    depth_consist: float
    derain_consist: float
    derain_mse: float
    depth_mse: float
    total: float
    weights: LossWeights = field(default_factory=LossWeights)
    total_tensor: Optional[torch.Tensor] = field(default=None, repr=False, compare=False)

    def terms(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in TERM_NAMES}

    def contributions(self) -> Dict[str, float]:
        """λᵢ · termᵢ for each term."""
        return {name: getattr(self.weights, name) * getattr(self, name) for name in TERM_NAMES}

    def to_row(self, step: int) -> Dict[str, str]:
        row = {"step": str(step)}
        row.update({name: repr(value) for name, value in self.terms().items()})
        row["total"] = repr(self.total)
        return row


def enabled_terms(ablation: AblationConfig) -> Dict[str, bool]:
    return {
        name: getattr(ablation, _TERM_SWITCHES[name]) if name in _TERM_SWITCHES else True
        for name in TERM_NAMES
    }


def composite_loss(terms: LossTerms, weights: LossWeights, ablation: AblationConfig) -> LossBreakdown:
    """
    Σ λᵢ · termᵢ over the terms the ablation keeps.

    Disabled terms are recorded as 0 and never enter the graph. Raises
    NonFiniteLossError when any enabled term is NaN or infinite.
    """
    enabled = enabled_terms(ablation)
    values: Dict[str, float] = {}
    total_tensor = None

    for name in TERM_NAMES:
        if not enabled[name]:
            values[name] = 0.0
            continue
        term = getattr(terms, name)
        if term is None:
            raise MissingLossTermError(f"loss term {name} is enabled but was not computed")
        values[name] = float(term.detach())
        weighted = getattr(weights, name) * term
        total_tensor = weighted if total_tensor is None else total_tensor + weighted

    bad = {name: v for name, v in values.items() if not math.isfinite(v)}
    if bad:
        raise NonFiniteLossError(
            "non-finite loss term(s): " + ", ".join(f"{k}={v}" for k, v in bad.items()),
            terms=values,
        )
    total = float(total_tensor.detach())
    if not math.isfinite(total):
        raise NonFiniteLossError(f"non-finite total loss {total}", terms=values)

    return LossBreakdown(total=total, weights=weights, total_tensor=total_tensor, **values)
