"""
DepthDerain - Losses
The five training losses and their weighted combination.
"""

from .composite import (
    LOSS_LOG_COLUMNS,
    TERM_NAMES,
    LossBreakdown,
    LossTerms,
    LossWeights,
    composite_loss,
    enabled_terms,
)
from .errors import LossError, LossShapeError, MissingLossTermError, NonFiniteLossError
from .terms import consistency_loss, mse_loss, multiscale_depth_loss, perceptual_loss

__all__ = [
    'perceptual_loss', 'consistency_loss', 'mse_loss', 'multiscale_depth_loss',
    'LossWeights', 'LossTerms', 'LossBreakdown', 'composite_loss', 'enabled_terms',
    'LOSS_LOG_COLUMNS', 'TERM_NAMES',
    'LossError', 'LossShapeError', 'MissingLossTermError', 'NonFiniteLossError',
]
