"""
DepthDerain - Image Core
Image/depth containers, lossless raster I/O and PSNR/SSIM metrics.
"""

from .errors import (
    ImageCoreError,
    InvalidImageError,
    ImageNotFoundError,
    UnsupportedFormatError,
    CorruptImageError,
    ImageWriteError,
    ShapeMismatchError,
    ImageTooSmallError,
    EmptyMetricsError,
    DuplicateImageIdError,
    NonFiniteMetricError,
)
from .image_io import Image, DepthMap, load_image, save_image, load_depth, save_depth
from .metrics import (
    ImageScore,
    MetricSummary,
    MetricsReport,
    psnr,
    ssim,
    aggregate_metrics,
)

__all__ = [
    'Image',
    'DepthMap',
    'load_image',
    'save_image',
    'load_depth',
    'save_depth',
    'ImageScore',
    'MetricSummary',
    'MetricsReport',
    'psnr',
    'ssim',
    'aggregate_metrics',
    'ImageCoreError',
    'InvalidImageError',
    'ImageNotFoundError',
    'UnsupportedFormatError',
    'CorruptImageError',
    'ImageWriteError',
    'ShapeMismatchError',
    'ImageTooSmallError',
    'EmptyMetricsError',
    'DuplicateImageIdError',
    'NonFiniteMetricError',
]
