"""
DepthDerain - Loss Errors
"""


class LossError(Exception):
    """Base class for loss evaluation failures."""


class LossShapeError(LossError, ValueError):
    pass


class MissingLossTermError(LossError, ValueError):
    pass


class NonFiniteLossError(LossError, ArithmeticError):
    """A loss term evaluated to NaN or ±inf."""

    def __init__(self, message: str, terms=None):
        super().__init__(message)
        self.terms = dict(terms or {})
