"""
DepthDerain - Evaluation Kit
PSNR/SSIM dataset reports, run comparison tables and inference timing.
"""

from .compare import ComparisonRow, ComparisonTable, compare_runs
from .errors import (
    BenchmarkError,
    EvalKitError,
    MismatchedRunsError,
    MissingPairsError,
    ReportFormatError,
)
from .evaluate import (
    EvalRun,
    bundle_digest,
    evaluate_dataset,
    evaluate_pairs,
    file_digest,
    read_report,
    render_report_csv,
    render_report_text,
    write_report,
)
from .timing import TimingReport, benchmark_inference, hardware_descriptor

__all__ = [
    'EvalRun',
    'evaluate_pairs',
    'evaluate_dataset',
    'write_report',
    'read_report',
    'render_report_csv',
    'render_report_text',
    'file_digest',
    'bundle_digest',
    'ComparisonRow',
    'ComparisonTable',
    'compare_runs',
    'TimingReport',
    'benchmark_inference',
    'hardware_descriptor',
    'EvalKitError',
    'MissingPairsError',
    'MismatchedRunsError',
    'ReportFormatError',
    'BenchmarkError',
]
