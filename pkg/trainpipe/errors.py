"""
DepthDerain - Training Pipeline Errors
"""

from typing import Dict, Optional


class TrainPipeError(Exception):
    """Base class for training pipeline failures."""


class ConfigError(TrainPipeError, ValueError):
    """Unreadable config file, unknown key or invalid value."""


class UnknownPresetError(TrainPipeError, ValueError):
    pass


class TrainingDivergedError(TrainPipeError, ArithmeticError):
    """Training produced a non-finite loss or gradient and was halted."""

    def __init__(
        self,
        message: str,
        last_checkpoint: Optional[str] = None,
        step: Optional[int] = None,
        terms: Optional[Dict[str, float]] = None,
    ):
        if last_checkpoint:
            message = f"{message} (last good checkpoint: {last_checkpoint})"
        else:
            message = f"{message} (no checkpoint written yet)"
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
        self.step = step
        self.terms = dict(terms or {})


class ResumeError(TrainPipeError, ValueError):
    """A checkpoint cannot continue the requested run."""
