"""
DepthDerain - Tensor Conversion
Moves Image/DepthMap records in and out of NCHW float tensors.
"""

from typing import Sequence

import numpy as np
import torch

from imagecore import DepthMap, Image


def image_to_tensor(img: Image) -> torch.Tensor:
    """(1, 3, H, W) float32 tensor."""
    return torch.tensor(np.ascontiguousarray(img.pixels.transpose(2, 0, 1)))[None]


def images_to_batch(images: Sequence[Image]) -> torch.Tensor:
    return torch.cat([image_to_tensor(img) for img in images], dim=0)


def tensor_to_image(tensor: torch.Tensor, index: int = 0) -> Image:
    if tensor.dim() == 4:
        tensor = tensor[index]
    array = tensor.detach().cpu().float().numpy().transpose(1, 2, 0)
    return Image.from_array(array, clamp=True)


def depth_to_tensor(depth: DepthMap) -> torch.Tensor:
    """(1, 1, H, W) float32 tensor."""
    return torch.tensor(np.ascontiguousarray(depth.values))[None, None]


def tensor_to_depth(tensor: torch.Tensor, index: int = 0) -> DepthMap:
    if tensor.dim() == 4:
        tensor = tensor[index]
    if tensor.dim() == 3:
        tensor = tensor[0]
    return DepthMap(tensor.detach().cpu().float().clamp(0.0, 1.0).numpy())
