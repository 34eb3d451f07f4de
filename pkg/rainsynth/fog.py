"""
DepthDerain - Depth-Driven Fog
Fog layer F(d) = 1 - exp(-β·d) with a global atmospheric light f₀.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from imagecore import DepthMap
from .errors import InvalidParameterError


@dataclass
class FogParams:
    beta: float = 1.0
    atmospheric_light: float = 0.8

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not math.isfinite(self.beta) or self.beta < 0:
            raise InvalidParameterError(f"fog beta must be finite and non-negative, got {self.beta}")
        if not 0.0 <= self.atmospheric_light <= 1.0:
            raise InvalidParameterError(
                f"atmospheric light must lie in [0, 1], got {self.atmospheric_light}"
            )


def fog_from_depth(depth: Union[DepthMap, np.ndarray], params: FogParams) -> np.ndarray:
    """Fog density per pixel; zero wherever depth is zero and monotone in depth."""
    params.validate()
    values = depth.values if isinstance(depth, DepthMap) else np.asarray(depth)
    values = values.astype(np.float64)
    if np.any(values < 0):
        raise InvalidParameterError("depth values must be non-negative")
    return -np.expm1(-params.beta * values)
