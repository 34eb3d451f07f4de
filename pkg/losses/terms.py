"""
DepthDerain - Loss Terms
Perceptual, latent consistency and pixel/depth regression losses.
All reductions are means so magnitudes do not depend on resolution.
"""

import logging
from typing import Optional, Sequence

import torch
import torch.nn.functional as F

from .errors import LossShapeError

logger = logging.getLogger(__name__)

COSINE_EPS = 1e-8


def perceptual_loss(
    target_feats: Sequence[torch.Tensor],
    pred_feats: Sequence[torch.Tensor],
    layer_weights: Optional[Sequence[float]] = None,
) -> torch.Tensor:
    """
    Weighted sum over taps of the mean squared activation difference.

    Args:
        target_feats: Feature maps of the clear image, shallow to deep
        pred_feats: Feature maps of the derained image, same taps
        layer_weights: One weight per tap (default all 1)
    """
    target_feats = list(target_feats)
    pred_feats = list(pred_feats)
    if len(target_feats) != len(pred_feats):
        raise LossShapeError(
            f"feature pyramids differ in depth: {len(target_feats)} vs {len(pred_feats)}"
        )
    if not target_feats:
        raise LossShapeError("feature pyramids are empty")
    if layer_weights is None:
        layer_weights = [1.0] * len(target_feats)
    if len(layer_weights) != len(target_feats):
        raise LossShapeError(f"{len(target_feats)} taps but {len(layer_weights)} layer weights")

    total = None
    for tap, (target, pred, weight) in enumerate(zip(target_feats, pred_feats, layer_weights)):
        if target.shape != pred.shape:
            raise LossShapeError(
                f"tap {tap}: target {tuple(target.shape)} and prediction {tuple(pred.shape)} differ"
            )
        term = float(weight) * F.mse_loss(pred, target)
        total = term if total is None else total + term
    return total


def consistency_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """
    1 − cos(a, b), averaged over the batch when given (N, L) latents.

    A zero vector on either side scores 1 and logs a warning.
    """
    if a.shape[-1] != b.shape[-1]:
        raise LossShapeError(f"latent lengths differ: {a.shape[-1]} vs {b.shape[-1]}")
    if a.shape != b.shape:
        raise LossShapeError(f"latent batches differ: {tuple(a.shape)} vs {tuple(b.shape)}")

    degenerate = (a.detach().norm(dim=-1) == 0) | (b.detach().norm(dim=-1) == 0)
    if bool(degenerate.any()):
        logger.warning("cosine consistency on %d zero latent(s); scored as 1",
                       int(degenerate.sum()))

    cos = F.cosine_similarity(a, b, dim=-1, eps=COSINE_EPS)
    return (1.0 - cos).clamp_min(0.0).mean()


def mse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    if pred.shape != target.shape:
        raise LossShapeError(f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")
    return F.mse_loss(pred, target)


def multiscale_depth_loss(disparities: Sequence[torch.Tensor], depth: torch.Tensor) -> torch.Tensor:
    """
    Disp_k against the ground truth area-averaged by 2^k, equally weighted.

    `depth` is (N, 1, H, W); Disp_k is (N, 1, H/2^k, W/2^k).
    """
    if not disparities:
        raise LossShapeError("no disparity maps to supervise")
    total = None
    for k, disp in enumerate(disparities):
        target = depth if k == 0 else F.avg_pool2d(depth, kernel_size=2 ** k)
        term = mse_loss(disp, target)
        total = term if total is None else total + term
    return total / len(disparities)
