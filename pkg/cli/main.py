"""
DepthDerain - Command Line
synthesize → train → infer → evaluate, plus ablate and bench.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from evalkit import (
    EvalKitError,
    benchmark_inference,
    compare_runs,
    evaluate_dataset,
    write_report,
)
from imagecore import ImageCoreError, load_image, save_depth, save_image
from losses import LossError
from netgraph import NetGraphError, build_models, infer, load_bundle, predict_depth
from rainsynth import FogParams, RainSynthError, StreakParams, make_toy_dataset
from trainpipe import (
    ConfigError,
    TrainPipeError,
    UnknownPresetError,
    canonical_preset,
    load_run_config,
    preset_names,
    run_ablation,
    train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

LOG_FORMAT = "[DepthDerain] %(levelname)s %(name)s: %(message)s"
IMAGE_SUFFIXES = {".png", ".tif", ".tiff", ".bmp", ".ppm"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file (default: $DEPTHDERAIN_CONFIG)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depthderain", description="Depth-guided single-image deraining")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthesize", help="write a toy rainy/clear/depth dataset")
    p.add_argument("--n", type=_positive_int, required=True, help="number of scenes")
    p.add_argument("--size", type=_positive_int, help="square side length")
    p.add_argument("--height", type=_positive_int)
    p.add_argument("--width", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data/toy")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--density", type=float, default=StreakParams.density, help="streaks per megapixel")
    p.add_argument("--length", type=float, default=StreakParams.length)
    p.add_argument("--angle", type=float, default=StreakParams.angle)
    p.add_argument("--intensity", type=float, default=StreakParams.intensity)
    p.add_argument("--beta", type=float, default=FogParams.beta)
    p.add_argument("--atmospheric-light", type=float, default=FogParams.atmospheric_light)

    p = sub.add_parser("train", help="train a model bundle")
    _add_config_args(p)
    p.add_argument("--preset", help=f"ablation preset ({', '.join(preset_names())})")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--run-dir", help="output directory (overrides run_dir)")

    p = sub.add_parser("infer", help="derain images with a trained checkpoint")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="rainy image file or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pad", action="store_true", help="pad inputs to the model stride, then crop")
    p.add_argument("--depth-out", help="also write predicted depth maps here")

    p = sub.add_parser("evaluate", help="PSNR/SSIM report for a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--pad", action="store_true")
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("ablate", help="train and compare ablation presets")
    _add_config_args(p)
    p.add_argument("--presets", default=",".join(preset_names()))
    p.add_argument("--run-dir", default="runs/ablation")
    p.add_argument("--eval-dataset", help="dataset to evaluate on (default: training dataset)")

    p = sub.add_parser("bench", help="time rainy-only inference")
    _add_config_args(p)
    p.add_argument("--checkpoint", help="checkpoint to time (default: freshly initialized bundle)")
    p.add_argument("--size", type=_positive_int, default=512)
    p.add_argument("--warmup", type=_non_negative_int, default=3)
    p.add_argument("--iters", type=_positive_int, default=10)
    p.add_argument("--out", help="write the timing report as JSON")
    return parser


def cmd_synthesize(args) -> int:
    height = args.height or args.size
    width = args.width or args.size
    if not height or not width:
        raise UsageError("give --size or both --height and --width")
    streak = StreakParams(density=args.density, length=args.length, angle=args.angle,
                          intensity=args.intensity, seed=args.seed)
    fog = FogParams(beta=args.beta, atmospheric_light=args.atmospheric_light)
    logger.info("synthesize n=%d size=%dx%d seed=%d out=%s %s %s",
                args.n, height, width, args.seed, args.out, streak, fog)
    manifest = make_toy_dataset(args.n, height, width, streak=streak, fog=fog, seed=args.seed,
                                out_dir=args.out, workers=args.workers)
    print(f"Wrote {len(manifest)} scene(s) to {manifest.root}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_run_config(args.config, args.overrides, preset=args.preset)
    result = train(config, resume=args.resume, run_dir=args.run_dir)
    if result.final is not None:
        print(f"Trained {result.steps} step(s); final total loss {result.final.total!r}")
    print(f"Checkpoint: {result.checkpoint}")
    print(f"Log: {result.log_path}")
    return EXIT_OK


def _input_images(path: Path) -> List[Path]:
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise UsageError(f"no images found in {path}")
        return files
    return [path]


def cmd_infer(args) -> int:
    expected = None
    if args.config or args.overrides:
        expected = load_run_config(args.config, args.overrides).bundle_config()
    bundle, _ = load_bundle(args.checkpoint, expected=expected)
    bundle.eval()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    depth_dir = Path(args.depth_out) if args.depth_out else None
    if depth_dir:
        depth_dir.mkdir(parents=True, exist_ok=True)

    inputs = _input_images(Path(args.input))
    for path in inputs:
        rainy = load_image(path)
        save_image(infer(rainy, bundle, pad_to_stride=args.pad), out_dir / path.name)
        if depth_dir:
            save_depth(predict_depth(rainy, bundle, pad_to_stride=args.pad), depth_dir / f"{path.stem}.png16")
        logger.debug("Derained %s", path)
    print(f"Derained {len(inputs)} image(s) into {out_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run = evaluate_dataset(args.checkpoint, args.dataset, pad_to_stride=args.pad, workers=args.workers)
    path = write_report(run, args.out)
    print(path.with_suffix(".txt").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_ablate(args) -> int:
    try:
        presets = [canonical_preset(p) for p in args.presets.split(",") if p.strip()]
    except UnknownPresetError as e:
        raise UsageError(str(e)) from e
    if not presets:
        raise UsageError("no presets given")
    config = load_run_config(args.config, args.overrides)
    run_dir = Path(args.run_dir)
    outcomes = run_ablation(presets, config, run_dir, eval_root=args.eval_dataset)
    if len(outcomes) < 2:
        print(f"Single preset {outcomes[0].preset}: PSNR ave {outcomes[0].evaluation.report.psnr.ave:.5f}")
        return EXIT_OK
    table = compare_runs([o.evaluation for o in outcomes], labels=[o.preset for o in outcomes])
    table.to_csv(run_dir / "comparison.csv")
    text = table.to_text()
    (run_dir / "comparison.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.checkpoint:
        target = args.checkpoint
    else:
        config = load_run_config(args.config, args.overrides)
        bundle_cfg = config.bundle_config()
        target = build_models(bundle_cfg.derain, bundle_cfg.depth, seed=config.train.seed,
                              feature_cfg=bundle_cfg.feature, latent_cfg=bundle_cfg.latent,
                              load_external_weights=False)
    report = benchmark_inference(target, image_size=args.size, warmup=args.warmup, iters=args.iters)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(report.to_text(), end="")
    return EXIT_OK


COMMANDS = {
    "synthesize": cmd_synthesize,
    "train": cmd_train,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
}

RUNTIME_ERRORS = (ImageCoreError, RainSynthError, NetGraphError, LossError, TrainPipeError,
                  EvalKitError, OSError)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    setup_logging(args.verbose, args.quiet)

    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, UnknownPresetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RUNTIME_ERRORS as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
