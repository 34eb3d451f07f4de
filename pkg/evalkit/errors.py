"""
DepthDerain - Evaluation Errors
"""


class EvalKitError(Exception):
    """Base class for evaluation, comparison and benchmarking failures."""


class MissingPairsError(EvalKitError, ValueError):
    pass


class MismatchedRunsError(EvalKitError, ValueError):
    pass


class ReportFormatError(EvalKitError, ValueError):
    pass


class BenchmarkError(EvalKitError, ValueError):
    pass
