"""
DepthDerain - Inference Timing
Forward-pass wall-clock benchmark on a fixed random input.
"""

import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Union

import torch

from netgraph import ModelBundle, ResolutionMismatchError, infer_tensor, load_bundle
from .errors import BenchmarkError

logger = logging.getLogger(__name__)

MIN_TIMED_ITERS = 10


@dataclass
class TimingReport:
    image_size: int
    warmup: int
    iters: int
    samples: List[float] = field(default_factory=list)
    hardware: str = ""

    @property
    def mean_seconds(self) -> float:
        return math.fsum(self.samples) / len(self.samples)

    @property
    def min_seconds(self) -> float:
        return min(self.samples)

    @property
    def max_seconds(self) -> float:
        return max(self.samples)

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["mean_seconds"] = self.mean_seconds
        return data

    def to_text(self) -> str:
        return (
            f"image size      {self.image_size}x{self.image_size}\n"
            f"warmup / timed  {self.warmup} / {self.iters}\n"
            f"mean s/image    {self.mean_seconds:.5f}\n"
            f"min / max       {self.min_seconds:.5f} / {self.max_seconds:.5f}\n"
            f"hardware        {self.hardware}\n"
        )


def hardware_descriptor() -> str:
    cpu = platform.processor() or platform.machine()
    device = torch.cuda.get_device_name(0) if torch.cuda.is_available() else "cpu"
    return (f"{platform.system()} {platform.release()} | {cpu} | {device} | "
            f"torch {torch.__version__} | {torch.get_num_threads()} thread(s)")


def benchmark_inference(
    checkpoint: Union[str, Path, ModelBundle],
    image_size: int = 512,
    warmup: int = 3,
    iters: int = MIN_TIMED_ITERS,
    seed: int = 0,
) -> TimingReport:
    """
    Time rainy-only inference on one square image.

    Only the forward pass is timed; no file I/O. Warmup runs are discarded.
    """
    if iters < MIN_TIMED_ITERS:
        raise BenchmarkError(f"need at least {MIN_TIMED_ITERS} timed iterations, got {iters}")
    if warmup < 0:
        raise BenchmarkError(f"warmup must be non-negative, got {warmup}")
    bundle = checkpoint if isinstance(checkpoint, ModelBundle) else load_bundle(checkpoint)[0]
    stride = bundle.inference_stride
    if image_size <= 0 or image_size % stride:
        raise ResolutionMismatchError(f"image size {image_size} is not a positive multiple of the model stride {stride}")

    generator = torch.Generator().manual_seed(seed)
    rainy = torch.rand((1, 3, image_size, image_size), generator=generator)
    bundle.eval()

    for _ in range(warmup):
        infer_tensor(rainy, bundle)
    samples = []
    for _ in range(iters):
        start = time.perf_counter()
        infer_tensor(rainy, bundle)
        samples.append(time.perf_counter() - start)

    report = TimingReport(image_size=image_size, warmup=warmup, iters=iters, samples=samples,
                          hardware=hardware_descriptor())
    logger.info("Inference at %dx%d: %.5f s/image over %d run(s)",
                image_size, image_size, report.mean_seconds, iters)
    return report
