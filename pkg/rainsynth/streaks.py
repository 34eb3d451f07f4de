"""
DepthDerain - Procedural Rain Streaks
Renders anti-aliased streak layers R and their binary support R̃.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import EmptyCanvasError, InvalidParameterError

PIXELS_PER_MEGAPIXEL = 1_000_000.0


@dataclass
class StreakParams:
    """
    Streak layer parameters.

    density is in streaks per megapixel, length in pixels, angle in degrees
    from vertical. The same seed always renders the same layer.
    """

    density: float = 150.0
    length: float = 12.0
    angle: float = 10.0
    intensity: float = 0.6
    seed: int = 0
    angle_jitter: float = 3.0
    length_jitter: float = 0.25

    def __post_init__(self):
        for name in ("density", "length", "intensity", "angle_jitter"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{name} must be finite and non-negative, got {value}")
        if not math.isfinite(self.angle):
            raise InvalidParameterError(f"angle must be finite, got {self.angle}")
        if self.intensity > 1.0:
            raise InvalidParameterError(f"intensity must lie in [0, 1], got {self.intensity}")
        if not 0.0 <= self.length_jitter < 1.0:
            raise InvalidParameterError(f"length_jitter must lie in [0, 1), got {self.length_jitter}")

    def expected_count(self, height: int, width: int) -> float:
        return self.density * height * width / PIXELS_PER_MEGAPIXEL


def _draw_streak(
    layer: np.ndarray,
    y0: float,
    x0: float,
    theta: float,
    length: float,
    intensity: float,
) -> None:
    height, width = layer.shape
    samples = max(2, int(math.ceil(length * 2.0)) + 1)
    t = np.linspace(0.0, 1.0, samples)
    ys = y0 + t * length * math.cos(theta)
    xs = x0 + t * length * math.sin(theta)
    # Brightest mid-streak, half intensity at the tips
    values = intensity * (1.0 - 0.5 * np.abs(2.0 * t - 1.0))

    iy = np.floor(ys).astype(np.int64)
    ix = np.floor(xs).astype(np.int64)
    fy = ys - iy
    fx = xs - ix
    corners = (
        (0, 0, (1.0 - fy) * (1.0 - fx)),
        (0, 1, (1.0 - fy) * fx),
        (1, 0, fy * (1.0 - fx)),
        (1, 1, fy * fx),
    )
    for dy, dx, weight in corners:
        yy = iy + dy
        xx = ix + dx
        splat = values * weight
        inside = (yy >= 0) & (yy < height) & (xx >= 0) & (xx < width) & (splat > 0)
        np.maximum.at(layer, (yy[inside], xx[inside]), splat[inside])


def generate_streak_layer(height: int, width: int, params: StreakParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Render a streak layer R (float64, [0, 1]) and its mask R̃ (uint8, {0, 1}).

    The streak count is the expected count density·area rounded stochastically,
    so the realized count never strays more than one from the expectation.
    """
    if height <= 0 or width <= 0:
        raise EmptyCanvasError(f"cannot draw streaks on a {height}×{width} canvas")

    rng = np.random.default_rng(params.seed)
    expected = params.expected_count(height, width)
    whole = math.floor(expected)
    count = int(whole) + int(rng.random() < expected - whole)

    layer = np.zeros((height, width), dtype=np.float64)
    for _ in range(count):
        y0 = rng.uniform(0.0, height)
        x0 = rng.uniform(0.0, width)
        theta = math.radians(params.angle + rng.uniform(-params.angle_jitter, params.angle_jitter))
        length = params.length * (1.0 + rng.uniform(-params.length_jitter, params.length_jitter))
        _draw_streak(layer, y0, x0, theta, length, params.intensity)

    layer = np.clip(layer, 0.0, 1.0)
    mask = (layer > 0).astype(np.uint8)
    return layer, mask
