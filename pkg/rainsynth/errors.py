"""
DepthDerain - Rain Synthesis Errors
"""


class RainSynthError(Exception):
    """Base class for rain/fog synthesis and dataset failures."""


class InvalidParameterError(RainSynthError, ValueError):
    pass


class EmptyCanvasError(RainSynthError, ValueError):
    pass


class NonBinaryMaskError(RainSynthError, ValueError):
    pass


class DatasetError(RainSynthError, ValueError):
    """A dataset directory is missing, incomplete or inconsistent."""


class DatasetWriteError(RainSynthError, OSError):
    pass
