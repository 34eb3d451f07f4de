"""
DepthDerain - Image Quality Metrics
Full-reference PSNR and SSIM plus the Ave/Max/Min aggregation used in reports.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

from .errors import (
    DuplicateImageIdError,
    EmptyMetricsError,
    ImageTooSmallError,
    NonFiniteMetricError,
    ShapeMismatchError,
)
from .image_io import Image

logger = logging.getLogger(__name__)

ImageLike = Union[Image, np.ndarray]

SSIM_WINDOW_SIZE = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricSummary:
    ave: float
    max: float
    min: float


@dataclass
class ImageScore:
    image_id: str
    psnr: float
    ssim: float


@dataclass
class MetricsReport:
    """Per-image scores sorted by image id, with aggregates for each metric."""

    records: List[ImageScore]
    psnr: MetricSummary
    ssim: MetricSummary
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.records)

    def summary(self) -> Dict[str, float]:
        return {
            "psnr_ave": self.psnr.ave,
            "psnr_max": self.psnr.max,
            "psnr_min": self.psnr.min,
            "ssim_ave": self.ssim.ave,
            "ssim_max": self.ssim.max,
            "ssim_min": self.ssim.min,
        }

    def to_rows(self) -> List[Tuple[str, float, float]]:
        return [(r.image_id, r.psnr, r.ssim) for r in self.records]


def _as_float64(value: ImageLike) -> np.ndarray:
    if isinstance(value, Image):
        return value.pixels.astype(np.float64)
    return np.asarray(value, dtype=np.float64)


def _paired_arrays(pred: ImageLike, target: ImageLike) -> Tuple[np.ndarray, np.ndarray]:
    a = _as_float64(pred)
    b = _as_float64(target)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"prediction {a.shape} and target {b.shape} differ in shape")
    return a, b


def psnr(pred: ImageLike, target: ImageLike, data_range: float = 1.0) -> float:
    """
    Peak signal-to-noise ratio in dB, 10·log10(MAX²/MSE).

    Returns math.inf when the images are identical.
    """
    a, b = _paired_arrays(pred, target)
    if np.array_equal(a, b):
        return math.inf
    return float(peak_signal_noise_ratio(b, a, data_range=data_range))


def ssim(pred: ImageLike, target: ImageLike, data_range: float = 1.0) -> float:
    """
    Structural similarity with an 11×11 Gaussian window (σ = 1.5).

    Computed per channel over all valid window positions, then averaged.
    """
    a, b = _paired_arrays(pred, target)
    height, width = a.shape[:2]
    if height < SSIM_WINDOW_SIZE or width < SSIM_WINDOW_SIZE:
        raise ImageTooSmallError(
            f"SSIM needs at least {SSIM_WINDOW_SIZE}×{SSIM_WINDOW_SIZE} pixels, got {height}×{width}"
        )
    # sigma 1.5 with the default truncation gives the 11×11 window
    value = structural_similarity(
        a,
        b,
        data_range=data_range,
        channel_axis=-1 if a.ndim == 3 else None,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
    )
    return float(value)


def _summarize(name: str, values: Sequence[float]) -> MetricSummary:
    if any(math.isnan(v) for v in values):
        raise NonFiniteMetricError(f"{name} values contain NaN")
    finite = [v for v in values if math.isfinite(v)]
    if len(finite) < len(values):
        logger.warning(
            "%d %s value(s) are infinite and excluded from the average",
            len(values) - len(finite), name,
        )
    ave = math.fsum(finite) / len(finite) if finite else math.inf
    return MetricSummary(ave=ave, max=max(values), min=min(values))


def aggregate_metrics(
    per_image: Sequence[Union[ImageScore, Tuple[float, float], Tuple[str, float, float]]]
) -> MetricsReport:
    """
    Aggregate per-image (psnr, ssim) scores into Ave/Max/Min.

    Entries may be ImageScore records, (psnr, ssim) pairs, or
    (image_id, psnr, ssim) triples. Pairs get positional ids.
    """
    if not per_image:
        raise EmptyMetricsError("cannot aggregate an empty list of scores")

    records: List[ImageScore] = []
    for index, entry in enumerate(per_image):
        if isinstance(entry, ImageScore):
            records.append(entry)
        elif len(entry) == 2:
            records.append(ImageScore(f"{index:04d}", float(entry[0]), float(entry[1])))
        else:
            records.append(ImageScore(str(entry[0]), float(entry[1]), float(entry[2])))

    ids = [r.image_id for r in records]
    if len(set(ids)) != len(ids):
        raise DuplicateImageIdError("duplicate image ids in metric records")
    records.sort(key=lambda r: r.image_id)

    return MetricsReport(
        records=records,
        psnr=_summarize("psnr", [r.psnr for r in records]),
        ssim=_summarize("ssim", [r.ssim for r in records]),
    )
