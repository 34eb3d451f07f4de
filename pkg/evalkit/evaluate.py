"""
DepthDerain - Dataset Evaluation
Per-image PSNR/SSIM over a manifest with Ave/Max/Min aggregates, written as a
CSV report, an aligned text rendering and a JSON sidecar.
"""

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

from imagecore import (
    Image,
    ImageCoreError,
    ImageScore,
    MetricsReport,
    aggregate_metrics,
    load_image,
    psnr,
    ssim,
)
from netgraph import ModelBundle, ResolutionMismatchError, infer, load_bundle
from rainsynth import DatasetError, load_manifest
from .errors import MissingPairsError, ReportFormatError

logger = logging.getLogger(__name__)

Predictor = Callable[[Image], Image]
CheckpointLike = Union[str, Path, ModelBundle, None]

REPORT_COLUMNS = ["id", "psnr", "ssim"]
SUMMARY_KEYS = ["psnr_ave", "psnr_max", "psnr_min", "ssim_ave", "ssim_max", "ssim_min"]


@dataclass
class EvalRun:
    """One evaluation of one model over one dataset."""

    name: str
    report: MetricsReport
    dataset_root: Optional[str] = None
    checkpoint: Optional[str] = None
    checkpoint_hash: Optional[str] = None
    report_path: Optional[Path] = None

    @property
    def records(self) -> List[ImageScore]:
        return self.report.records

    @property
    def ids(self) -> List[str]:
        return [r.image_id for r in self.report.records]

    def summary(self) -> Dict[str, float]:
        return self.report.summary()


def file_digest(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def bundle_digest(bundle: ModelBundle) -> str:
    """sha256 over parameter names and raw values, in state_dict order."""
    digest = hashlib.sha256()
    for name, tensor in bundle.state_dict().items():
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def _score(record: Tuple[str, Image, Image]) -> ImageScore:
    image_id, pred, target = record
    return ImageScore(image_id, psnr(pred, target), ssim(pred, target))


def evaluate_pairs(
    records: Iterable[Tuple[str, Image, Image]],
    name: str = "run",
    workers: int = 1,
) -> EvalRun:
    """Score in-memory (image_id, prediction, target) triples."""
    records = list(records)
    if not records:
        raise MissingPairsError("no image pairs to evaluate")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(_score, records))
    else:
        scores = [_score(r) for r in records]
    return EvalRun(name=name, report=aggregate_metrics(scores))


def _resolve_model(checkpoint: CheckpointLike) -> Tuple[Optional[ModelBundle], Optional[str], Optional[str]]:
    if checkpoint is None:
        return None, None, None
    if isinstance(checkpoint, ModelBundle):
        return checkpoint, None, bundle_digest(checkpoint)
    bundle, _ = load_bundle(checkpoint)
    return bundle, str(checkpoint), file_digest(checkpoint)


def evaluate_dataset(
    checkpoint: CheckpointLike,
    dataset_root: Union[str, Path],
    predictor: Optional[Predictor] = None,
    run_name: Optional[str] = None,
    pad_to_stride: bool = False,
    workers: int = 1,
) -> EvalRun:
    """
    Derain every rainy image of a dataset and score it against its clear image.

    `checkpoint` is a checkpoint path or an in-memory bundle; alternatively
    `predictor` maps a rainy Image to a derained Image (the checkpoint is then
    only used for provenance). With neither, the rainy input itself is scored.
    """
    root = Path(dataset_root)
    try:
        manifest = load_manifest(root)
        manifest.validate()
    except DatasetError as e:
        raise MissingPairsError(str(e)) from e

    bundle, checkpoint_path, checkpoint_hash = _resolve_model(checkpoint)
    if predictor is None and bundle is not None:
        height, width = manifest.resolution()
        stride = bundle.inference_stride
        if not pad_to_stride and (height % stride or width % stride):
            raise ResolutionMismatchError(
                f"dataset resolution {height}×{width} is not a multiple of the model stride {stride}"
            )

        def predictor(img: Image) -> Image:
            return infer(img, bundle, pad_to_stride=pad_to_stride)
    elif predictor is None:
        logger.warning("No model given; scoring the rainy inputs themselves")

        def predictor(img: Image) -> Image:
            return img

    pairs = []
    for entry in manifest.entries:
        rainy = load_image(manifest.rainy_path(entry))
        clear = load_image(manifest.clear_path(entry))
        pairs.append((entry.id, predictor(rainy), clear))

    run = evaluate_pairs(pairs, name=run_name or (Path(checkpoint_path).stem if checkpoint_path else "run"),
                         workers=workers)
    run.dataset_root = str(root)
    run.checkpoint = checkpoint_path
    run.checkpoint_hash = checkpoint_hash
    if run.report.count != len(manifest):
        raise MissingPairsError(f"scored {run.report.count} of {len(manifest)} images")
    logger.info("Evaluated %s on %d image(s): PSNR ave %.5f, SSIM ave %.5f",
                run.name, run.report.count, run.report.psnr.ave, run.report.ssim.ave)
    return run


def _header(run: EvalRun) -> List[Tuple[str, str]]:
    header = [
        ("name", run.name),
        ("dataset", run.dataset_root or ""),
        ("checkpoint", run.checkpoint or ""),
        ("checkpoint_sha256", run.checkpoint_hash or ""),
        ("images", str(run.report.count)),
    ]
    header += [(key, repr(value)) for key, value in run.summary().items()]
    return header


def render_report_csv(run: EvalRun) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for key, value in _header(run):
        writer.writerow([f"#{key}", value])
    writer.writerow(REPORT_COLUMNS)
    for image_id, psnr_value, ssim_value in run.report.to_rows():
        writer.writerow([image_id, repr(psnr_value), repr(ssim_value)])
    return buffer.getvalue()


def render_report_text(run: EvalRun) -> str:
    """Aligned table with 5 decimal places."""
    lines = [
        f"Run:        {run.name}",
        f"Dataset:    {run.dataset_root or '-'}",
        f"Checkpoint: {run.checkpoint or '-'}",
        f"SHA-256:    {run.checkpoint_hash or '-'}",
        "",
        f"{'':<6}{'Ave':>12}{'Max':>12}{'Min':>12}",
    ]
    for metric, summary in (("PSNR", run.report.psnr), ("SSIM", run.report.ssim)):
        lines.append(f"{metric:<6}{summary.ave:>12.5f}{summary.max:>12.5f}{summary.min:>12.5f}")
    lines += ["", f"{'id':<10}{'PSNR':>12}{'SSIM':>12}"]
    for record in run.records:
        lines.append(f"{record.image_id:<10}{record.psnr:>12.5f}{record.ssim:>12.5f}")
    return "\n".join(lines) + "\n"


def write_report(run: EvalRun, path: Union[str, Path]) -> Path:
    """Write <path> (CSV), <path>.txt and <path>.json side by side."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report_csv(run), encoding="utf-8")
    path.with_suffix(".txt").write_text(render_report_text(run), encoding="utf-8")
    sidecar = {
        "name": run.name,
        "dataset": run.dataset_root,
        "checkpoint": run.checkpoint,
        "checkpoint_sha256": run.checkpoint_hash,
        "summary": run.summary(),
        "records": [{"id": i, "psnr": p, "ssim": s} for i, p, s in run.report.to_rows()],
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    run.report_path = path
    return path


def read_report(path: Union[str, Path]) -> EvalRun:
    """
    Parse a CSV report. Aggregates are recomputed from the per-image rows
    and must equal the header block exactly.
    """
    path = Path(path)
    if not path.is_file():
        raise ReportFormatError(f"no report at {path}")
    header: Dict[str, str] = {}
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        columns = None
        for row in reader:
            if not row:
                continue
            if columns is None and row[0].startswith("#"):
                header[row[0][1:]] = row[1] if len(row) > 1 else ""
            elif columns is None:
                columns = row
                if columns != REPORT_COLUMNS:
                    raise ReportFormatError(f"{path}: unexpected columns {columns}")
            else:
                rows.append(row)

    try:
        scores = [ImageScore(r[0], float(r[1]), float(r[2])) for r in rows]
    except (IndexError, ValueError) as e:
        raise ReportFormatError(f"{path}: malformed per-image row: {e}") from e
    if not scores:
        raise ReportFormatError(f"{path}: report has no per-image rows")

    try:
        report = aggregate_metrics(scores)
    except ImageCoreError as e:
        raise ReportFormatError(f"{path}: {e}") from e
    recomputed = report.summary()
    for key in SUMMARY_KEYS:
        if key not in header:
            continue
        try:
            stated = float(header[key])
        except ValueError as e:
            raise ReportFormatError(f"{path}: header {key}={header[key]!r} is not a number") from e
        if stated != recomputed[key]:
            raise ReportFormatError(
                f"{path}: header {key}={header[key]} disagrees with rows ({recomputed[key]!r})"
            )
    report.metadata = dict(header)
    return EvalRun(
        name=header.get("name") or path.stem,
        report=report,
        dataset_root=header.get("dataset") or None,
        checkpoint=header.get("checkpoint") or None,
        checkpoint_hash=header.get("checkpoint_sha256") or None,
        report_path=path,
    )
