"""
DepthDerain - Image Core Errors
Exception hierarchy for image containers, raster I/O and metrics.
"""


class ImageCoreError(Exception):
    """Base class for all imagecore failures."""


class InvalidImageError(ImageCoreError, ValueError):
    """Pixel data violates the Image or DepthMap invariants."""


class ImageNotFoundError(ImageCoreError, FileNotFoundError):
    pass


class UnsupportedFormatError(ImageCoreError, ValueError):
    pass


class CorruptImageError(ImageCoreError, ValueError):
    pass


class ImageWriteError(ImageCoreError, OSError):
    pass


class ShapeMismatchError(ImageCoreError, ValueError):
    pass


class ImageTooSmallError(ImageCoreError, ValueError):
    pass


class EmptyMetricsError(ImageCoreError, ValueError):
    pass


class DuplicateImageIdError(ImageCoreError, ValueError):
    pass


class NonFiniteMetricError(ImageCoreError, ValueError):
    """A per-image score is NaN."""
