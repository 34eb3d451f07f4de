"""
DepthDerain - Ablation Switches
Which loss edges and graph edges a run keeps.
"""

from dataclasses import asdict, dataclass
from typing import Dict


@dataclass(frozen=True)
class AblationConfig:
    depth_latent_on: bool = True
    derain_latent_on: bool = True
    gt_depth_on: bool = True
    concatenation_on: bool = True

    def to_dict(self) -> Dict[str, bool]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, bool]) -> "AblationConfig":
        return cls(**{key: bool(data[key]) for key in asdict(cls()).keys() if key in data})

    def describe(self) -> str:
        return ", ".join(f"{key}={'on' if value else 'off'}" for key, value in asdict(self).items())
