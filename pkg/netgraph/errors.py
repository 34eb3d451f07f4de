"""
DepthDerain - Network Graph Errors
"""


class NetGraphError(Exception):
    """Base class for model construction, forward and checkpoint failures."""


class IncompatibleConfigError(NetGraphError, ValueError):
    pass


class ResolutionMismatchError(NetGraphError, ValueError):
    pass


class IncompatibleFeaturesError(NetGraphError, ValueError):
    pass


class CheckpointMismatchError(NetGraphError, ValueError):
    pass


class CheckpointIOError(NetGraphError, OSError):
    pass
