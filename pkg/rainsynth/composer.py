"""
DepthDerain - Rain Formation Models
Composes rainy observations O from a clear background B and rain/fog layers.

    linear:   O = B + R
    region:   O = B + R·R̃
    physical: O = B(1 - R - F) + R + f₀·F

All outputs are clamped to [0, 1].
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from imagecore import Image, ShapeMismatchError
from .errors import InvalidParameterError, NonBinaryMaskError

ImageLike = Union[Image, np.ndarray]

FORMATION_MODELS = ("linear", "region", "physical")


def _background(background: ImageLike) -> np.ndarray:
    if isinstance(background, Image):
        return background.pixels.astype(np.float64)
    return np.asarray(background, dtype=np.float64)


def _layer(name: str, layer: np.ndarray, background: np.ndarray) -> np.ndarray:
    layer = np.asarray(layer, dtype=np.float64)
    if layer.shape != background.shape[:2]:
        raise ShapeMismatchError(
            f"{name} layer {layer.shape} does not match background {background.shape[:2]}"
        )
    return layer


def _unit_range(name: str, layer: np.ndarray) -> None:
    if layer.size and (layer.min() < 0.0 or layer.max() > 1.0):
        raise InvalidParameterError(f"{name} layer values must lie in [0, 1]")


def _check_binary(mask: np.ndarray) -> None:
    if not np.all((mask == 0) | (mask == 1)):
        raise NonBinaryMaskError("streak mask must contain only 0 and 1")


def _finish(observed: np.ndarray) -> Image:
    return Image(np.clip(observed, 0.0, 1.0))


def compose_linear(background: ImageLike, streaks: np.ndarray) -> Image:
    b = _background(background)
    r = _layer("streak", streaks, b)
    return _finish(b + r[:, :, None])


def compose_region(background: ImageLike, streaks: np.ndarray, mask: np.ndarray) -> Image:
    b = _background(background)
    r = _layer("streak", streaks, b)
    m = _layer("mask", mask, b)
    _check_binary(m)
    return _finish(b + (r * m)[:, :, None])


def compose_physical(
    background: ImageLike,
    streaks: np.ndarray,
    fog: np.ndarray,
    atmospheric_light: float,
) -> Image:
    if not 0.0 <= atmospheric_light <= 1.0:
        raise InvalidParameterError(
            f"atmospheric light must lie in [0, 1], got {atmospheric_light}"
        )
    b = _background(background)
    r = _layer("streak", streaks, b)
    f = _layer("fog", fog, b)
    _unit_range("streak", r)
    _unit_range("fog", f)
    observed = b * (1.0 - r - f)[:, :, None] + r[:, :, None] + atmospheric_light * f[:, :, None]
    return _finish(observed)


@dataclass
class RainSceneComponents:
    """The formation-model symbols B, R, R̃, F and f₀ for one scene."""

    background: Image
    streaks: np.ndarray
    mask: np.ndarray
    fog: np.ndarray
    atmospheric_light: float

    def __post_init__(self):
        b = _background(self.background)
        self.streaks = _layer("streak", self.streaks, b)
        self.fog = _layer("fog", self.fog, b)
        mask = _layer("mask", self.mask, b)
        _check_binary(mask)
        self.mask = mask.astype(np.uint8)
        _unit_range("streak", self.streaks)
        _unit_range("fog", self.fog)
        if np.any((self.streaks > 0) & (self.mask == 0)):
            raise InvalidParameterError("streak layer is non-zero outside its mask")
        if not 0.0 <= self.atmospheric_light <= 1.0:
            raise InvalidParameterError("atmospheric light must lie in [0, 1]")

    def render(self, model: str = "physical") -> Image:
        if model == "linear":
            return compose_linear(self.background, self.streaks)
        if model == "region":
            return compose_region(self.background, self.streaks, self.mask)
        if model == "physical":
            return compose_physical(self.background, self.streaks, self.fog, self.atmospheric_light)
        raise InvalidParameterError(
            f"unknown formation model {model!r}; expected one of {', '.join(FORMATION_MODELS)}"
        )
