"""
DepthDerain - Image Containers and Raster I/O
Image and DepthMap records plus lossless file reading and writing.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import cv2
import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import (
    CorruptImageError,
    ImageNotFoundError,
    ImageWriteError,
    InvalidImageError,
    UnsupportedFormatError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Smallest side that survives the SSIM window and four stride-2 encoder levels
MIN_IMAGE_SIDE = 16
DEPTH_PNG_SCALE = 65535.0

LOSSLESS_FORMATS = {"PNG", "TIFF", "BMP", "PPM"}
_SUFFIX_FORMATS = {
    ".png": "PNG",
    ".png16": "PNG",
    ".tif": "TIFF",
    ".tiff": "TIFF",
    ".bmp": "BMP",
    ".ppm": "PPM",
}


@dataclass
class Image:
    """An H×W×3 float32 image with every value finite and in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float32, copy=True)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise InvalidImageError(f"expected H×W×3 pixels, got shape {pixels.shape}")
        if pixels.shape[0] < MIN_IMAGE_SIDE or pixels.shape[1] < MIN_IMAGE_SIDE:
            raise InvalidImageError(
                f"image {pixels.shape[0]}×{pixels.shape[1]} is smaller than "
                f"{MIN_IMAGE_SIDE}×{MIN_IMAGE_SIDE}"
            )
        if not np.all(np.isfinite(pixels)):
            raise InvalidImageError("image contains non-finite values")
        if pixels.min() < 0.0 or pixels.max() > 1.0:
            raise InvalidImageError("image values must lie in [0, 1]")
        pixels.setflags(write=False)
        self.pixels = pixels

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self):
        return self.pixels.shape

    @classmethod
    def from_array(cls, array: np.ndarray, clamp: bool = True) -> "Image":
        """Build an Image from any float array, clamping into [0, 1] by default."""
        array = np.asarray(array, dtype=np.float32)
        if clamp:
            array = np.clip(np.nan_to_num(array, nan=0.0), 0.0, 1.0)
        return cls(array)

    @classmethod
    def random(cls, height: int, width: int, seed: int = 0) -> "Image":
        rng = np.random.default_rng(seed)
        return cls(rng.random((height, width, 3), dtype=np.float32))


@dataclass
class DepthMap:
    """Normalized relative depth, H×W float32 in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float32, copy=True)
        if values.ndim != 2:
            raise InvalidImageError(f"expected H×W depth values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidImageError("depth map contains non-finite values")
        if values.min() < 0.0 or values.max() > 1.0:
            raise InvalidImageError("depth values must lie in [0, 1]")
        values.setflags(write=False)
        self.values = values

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self):
        return self.values.shape

    def matches(self, image: Image) -> bool:
        return self.values.shape == image.pixels.shape[:2]


def _check_raster(path: Path) -> None:
    if not path.is_file():
        raise ImageNotFoundError(f"no such image file: {path}")
    try:
        raster = PILImage.open(path)
    except UnidentifiedImageError as e:
        raise UnsupportedFormatError(f"unrecognized raster format: {path}") from e
    except OSError as e:
        raise CorruptImageError(f"cannot read {path}: {e}") from e

    if raster.format not in LOSSLESS_FORMATS:
        raster.close()
        raise UnsupportedFormatError(
            f"{path} is {raster.format}; only lossless formats are supported "
            f"({', '.join(sorted(LOSSLESS_FORMATS))})"
        )
    try:
        raster.load()
    except (OSError, SyntaxError, ValueError) as e:
        raise CorruptImageError(f"corrupt raster data in {path}: {e}") from e
    finally:
        raster.close()


def _read_raster(path: Path) -> np.ndarray:
    """
    Pixel data at its stored bit depth, scaled by the dtype maximum.

    Returns H×W for single-channel rasters, otherwise H×W×3 in RGB order
    with any alpha channel dropped.
    """
    _check_raster(path)
    encoded = np.fromfile(path, dtype=np.uint8)
    data = cv2.imdecode(encoded, cv2.IMREAD_UNCHANGED)
    if data is None:
        raise CorruptImageError(f"cannot decode raster data in {path}")
    if data.dtype not in (np.uint8, np.uint16):
        raise UnsupportedFormatError(f"{path} stores {data.dtype} samples; only 8- and 16-bit are supported")
    scaled = data.astype(np.float64) / np.iinfo(data.dtype).max

    if scaled.ndim == 2:
        return scaled
    channels = scaled.shape[2]
    if channels in (1, 2):
        return scaled[:, :, 0]
    if channels in (3, 4):
        return scaled[:, :, 2::-1]
    raise UnsupportedFormatError(f"{path} has {channels} channels")


def load_image(path: PathLike) -> Image:
    """
    Load an 8-bit or 16-bit lossless raster as an Image scaled to [0, 1].

    Grayscale rasters are replicated to three channels; alpha is dropped.
    """
    pixels = _read_raster(Path(path))
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[:, :, None], 3, axis=2)
    return Image(pixels)


def _format_for(path: Path, default: str = "PNG") -> str:
    return _SUFFIX_FORMATS.get(path.suffix.lower(), default)


def save_image(img: Image, path: PathLike) -> None:
    """Quantize to 8 bits per channel and write a lossless raster."""
    path = Path(path)
    quantized = np.round(img.pixels.astype(np.float64) * 255.0).astype(np.uint8)
    try:
        PILImage.fromarray(quantized).save(path, format=_format_for(path))
    except OSError as e:
        raise ImageWriteError(f"cannot write image to {path}: {e}") from e


def _read_float_map(path: Path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise UnsupportedFormatError(f"{path} is not a single-channel float map")
        try:
            dims = f.readline().decode("ascii").split()
            width, height = int(dims[0]), int(dims[1])
            scale = float(f.readline().decode("ascii").strip())
        except (UnicodeDecodeError, IndexError, ValueError) as e:
            raise CorruptImageError(f"malformed float-map header in {path}") from e
        endian = "<" if scale < 0 else ">"
        data = np.frombuffer(f.read(), dtype=f"{endian}f4")

    if data.size != width * height:
        raise CorruptImageError(
            f"{path}: expected {width * height} floats, found {data.size}"
        )
    # Float maps store rows bottom-to-top
    return np.flipud(data.reshape(height, width)).astype(np.float32)


def load_depth(path: PathLike) -> DepthMap:
    """Load a depth map from a 16-bit grayscale PNG or a float-map file."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFoundError(f"no such depth file: {path}")
    if path.suffix.lower() == ".pfm":
        return DepthMap(_read_float_map(path))

    values = _read_raster(path)
    if values.ndim != 2:
        raise UnsupportedFormatError(f"depth maps must be single-channel, {path} has {values.shape[2]} channels")
    return DepthMap(values)


def save_depth(depth: DepthMap, path: PathLike) -> None:
    """Write a depth map as 16-bit PNG (value/65535) or, for .pfm, as a float map."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".pfm":
            header = f"Pf\n{depth.width} {depth.height}\n-1.0\n".encode("ascii")
            body = np.ascontiguousarray(np.flipud(depth.values), dtype="<f4").tobytes()
            with open(path, "wb") as f:
                f.write(header)
                f.write(body)
        else:
            quantized = np.round(depth.values.astype(np.float64) * DEPTH_PNG_SCALE)
            PILImage.fromarray(quantized.astype(np.uint16)).save(path, format="PNG")
    except OSError as e:
        raise ImageWriteError(f"cannot write depth map to {path}: {e}") from e


def quantize_like_storage(pixels: np.ndarray, levels: float = 255.0) -> np.ndarray:
    """Values exactly as they read back after a save/load round trip."""
    return np.round(np.asarray(pixels, dtype=np.float64) * levels) / levels

