"""
DepthDerain - Joint Trainer
Trains DerainAE and the DepthNet decoder together under the freeze policy,
with per-step CSV logging, periodic checkpoints and exact resume.
"""

import csv
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Set, Union

import torch

from evalkit import EvalRun, evaluate_dataset, write_report
from losses import (
    LOSS_LOG_COLUMNS,
    LossBreakdown,
    LossTerms,
    LossWeights,
    NonFiniteLossError,
    composite_loss,
    consistency_loss,
    mse_loss,
    multiscale_depth_loss,
    perceptual_loss,
)
from netgraph import (
    AblationConfig,
    LatentPair,
    ModelBundle,
    ablation_of,
    build_models,
    depth_forward,
    derain_forward,
    encode_clear_latent,
    extract_perceptual_features,
    fit_latent_supervisor,
    load_bundle,
    save_bundle,
)
from .config import RunConfig, TrainConfig, write_resolved_config
from .data import EpochShuffleSampler, PairedRainDataset, make_loader, split_batch
from .errors import ConfigError, ResumeError, TrainingDivergedError
from .presets import active_graph_edges, apply_ablation, canonical_preset

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.csv"
CHECKPOINT_DIR = "checkpoints"
FINAL_CHECKPOINT = "final.pt"

# Settings that shape the optimization trajectory; a resumed run must share them
_TRAJECTORY_KEYS = ("batch_size", "learning_rate", "lr_decay", "decay_mode", "seed", "max_grad_norm")


def build_optimizer(bundle: ModelBundle, config: TrainConfig) -> torch.optim.Optimizer:
    weight_decay = config.lr_decay if config.decay_mode == "l2" else 0.0
    return torch.optim.Adam(bundle.trainable_parameters(), lr=config.learning_rate,
                            weight_decay=weight_decay)


def build_scheduler(optimizer: torch.optim.Optimizer, config: TrainConfig):
    gamma = config.lr_decay if config.decay_mode == "schedule" else 1.0
    return torch.optim.lr_scheduler.ExponentialLR(optimizer, gamma=gamma)


def gradient_groups(bundle: ModelBundle) -> Set[str]:
    """Parameter groups that received a nonzero gradient in the last backward pass."""
    active = set()
    for group, params in bundle.parameter_groups().items():
        for _, param in params:
            if param.grad is not None and bool(param.grad.detach().abs().sum() > 0):
                active.add(group)
                break
    return active


@dataclass
class TrainResult:
    bundle: ModelBundle
    steps: int
    final: Optional[LossBreakdown]
    checkpoint: Optional[Path] = None
    log_path: Optional[Path] = None
    history: List[LossBreakdown] = field(default_factory=list)


class Trainer:
    """
    Owns the bundle, optimizer, lr schedule, log writer and checkpoint cadence.

    Args:
        bundle: Models with the freeze policy applied
        config: Training settings
        weights: Loss weights (defaults to the standard weighting)
        ablation: Active components; must agree with how the bundle was built
        run_dir: Where logs and checkpoints go (None keeps everything in memory)
        optimizer: Use this optimizer instead of building Adam from the config
    """

    def __init__(
        self,
        bundle: ModelBundle,
        config: Optional[TrainConfig] = None,
        weights: Optional[LossWeights] = None,
        ablation: Optional[AblationConfig] = None,
        run_dir: Optional[Union[str, Path]] = None,
        optimizer: Optional[torch.optim.Optimizer] = None,
        resolved: Optional[Dict[str, str]] = None,
    ):
        self.bundle = bundle
        self.config = config or TrainConfig()
        self.weights = weights or LossWeights()
        self.ablation = ablation or AblationConfig()
        if self.ablation.concatenation_on != bundle.concatenates_depth:
            raise ConfigError("ablation concatenation flag does not match the bundle architecture")
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.resolved = resolved
        self.optimizer = optimizer or build_optimizer(bundle, self.config)
        self.scheduler = build_scheduler(self.optimizer, self.config)
        self.step = 0
        self.last_checkpoint: Optional[Path] = None
        self.history: List[LossBreakdown] = []

    @property
    def log_path(self) -> Optional[Path]:
        return self.run_dir / LOG_NAME if self.run_dir else None

    def compute_terms(self, rainy: torch.Tensor, clear: torch.Tensor, depth: torch.Tensor) -> LossTerms:
        """Forward every path the ablation keeps; clear-image passes carry no graph."""
        bundle, ablation = self.bundle, self.ablation
        needs_decoder = ablation.depth_latent_on or ablation.gt_depth_on

        rainy_depth = depth_forward(rainy, bundle) if needs_decoder else None
        if ablation.concatenation_on:
            features = rainy_depth.encoder_features if rainy_depth else bundle.depth_net.encode(rainy)[0]
        else:
            features = None
        derained, derain_latent = derain_forward(rainy, features, bundle, ablation)

        with torch.no_grad():
            clear_feats = extract_perceptual_features(clear, bundle)
        pred_feats = extract_perceptual_features(derained, bundle)

        terms = LossTerms(
            perceptual=perceptual_loss(clear_feats, pred_feats, bundle.configs.feature.layer_weights),
            derain_mse=mse_loss(derained, clear),
        )
        pair: Dict[str, torch.Tensor] = {}
        if ablation.depth_latent_on:
            with torch.no_grad():
                pair["clear_depth_latent"] = depth_forward(clear, bundle).depth_latent
            pair["rainy_depth_latent"] = rainy_depth.depth_latent
        if ablation.derain_latent_on:
            # Frozen body under no_grad; the mean head stays in the graph
            pair["rainy_latent"] = derain_latent
            pair["clear_latent"] = encode_clear_latent(clear, bundle)
        latents = LatentPair(**pair)
        if latents.has_depth:
            terms.depth_consist = consistency_loss(latents.rainy_depth_latent, latents.clear_depth_latent)
        if latents.has_derain:
            terms.derain_consist = consistency_loss(latents.rainy_latent, latents.clear_latent)
        if ablation.gt_depth_on:
            terms.depth_mse = multiscale_depth_loss(rainy_depth.disparities, depth)
        return terms

    def _diverged(self, message: str, terms=None) -> TrainingDivergedError:
        last = str(self.last_checkpoint) if self.last_checkpoint else None
        return TrainingDivergedError(f"step {self.step + 1}: {message}", last_checkpoint=last,
                                     step=self.step + 1, terms=terms)

    def train_step(self, batch) -> LossBreakdown:
        """One optimizer update; returns the pre-update loss breakdown."""
        rainy, clear, depth = split_batch(batch)
        self.optimizer.zero_grad(set_to_none=True)
        try:
            breakdown = composite_loss(self.compute_terms(rainy, clear, depth), self.weights, self.ablation)
        except NonFiniteLossError as e:
            raise self._diverged(str(e), e.terms) from e

        breakdown.total_tensor.backward()
        max_norm = self.config.max_grad_norm or math.inf
        grad_norm = torch.nn.utils.clip_grad_norm_(self.bundle.trainable_parameters(), max_norm)
        if not math.isfinite(float(grad_norm)):
            raise self._diverged(f"non-finite gradient norm {float(grad_norm)}", breakdown.terms())
        self.optimizer.step()
        self.step += 1

        breakdown.total_tensor = None
        return breakdown

    def state(self) -> Dict[str, object]:
        return {
            "optimizer": self.optimizer.state_dict(),
            "scheduler": self.scheduler.state_dict(),
            "step": self.step,
            "train_config": self.config.model_dump(),
            "weights": self.weights.to_dict(),
            "rng_state": torch.get_rng_state(),
            "resolved": self.resolved,
        }

    def restore(self, archive: Dict[str, object]) -> None:
        """Continue from a checkpoint archive whose parameters are already in the bundle."""
        stored_ablation = ablation_of(archive)
        if stored_ablation is not None and stored_ablation != self.ablation:
            raise ResumeError(
                f"checkpoint was trained with {stored_ablation.describe()}, "
                f"this run uses {self.ablation.describe()}"
            )
        stored = archive.get("train_config") or {}
        current = self.config.model_dump()
        differing = [key for key in _TRAJECTORY_KEYS if stored.get(key) != current.get(key)]
        if differing:
            raise ResumeError(f"checkpoint disagrees with this run on: {', '.join(differing)}")
        try:
            self.optimizer.load_state_dict(archive["optimizer"])
            self.scheduler.load_state_dict(archive["scheduler"])
            self.step = int(archive["step"])
        except (KeyError, ValueError) as e:
            raise ResumeError(f"checkpoint lacks training state: {e}") from e
        if archive.get("rng_state") is not None:
            torch.set_rng_state(archive["rng_state"])
        logger.info("Resumed at step %d", self.step)

    def save_checkpoint(self, name: Optional[str] = None) -> Optional[Path]:
        if self.run_dir is None:
            return None
        directory = self.run_dir / CHECKPOINT_DIR
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / (name or f"step_{self.step:06d}.pt")
        save_bundle(self.bundle, path, self.ablation, extra=self.state())
        self.last_checkpoint = path
        logger.debug("Checkpoint written to %s", path)
        return path

    @contextmanager
    def _log_writer(self) -> Iterator[Optional[csv.DictWriter]]:
        if self.log_path is None:
            yield None
            return
        kept = []
        if self.step > 0 and self.log_path.is_file():
            # Drop rows written after the checkpoint being resumed
            with open(self.log_path, newline="", encoding="utf-8") as f:
                kept = [row for row in csv.DictReader(f) if int(row["step"]) <= self.step]
        with open(self.log_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=LOSS_LOG_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(kept)
            yield writer

    def fit(self, dataset: PairedRainDataset) -> TrainResult:
        cfg = self.config
        sampler = EpochShuffleSampler(len(dataset), cfg.batch_size, cfg.seed)
        per_epoch = sampler.batches_per_epoch
        total = cfg.max_steps or cfg.epochs * per_epoch
        loader = make_loader(dataset, sampler, cfg.num_workers)
        logger.info("Training %d step(s), %d batch(es) per epoch, from step %d",
                    total, per_epoch, self.step)

        final = None
        with self._log_writer() as log:
            while self.step < total:
                epoch, start = divmod(self.step, per_epoch)
                sampler.set_epoch(epoch, start)
                for batch in loader:
                    final = self.train_step(batch)
                    self.history.append(final)
                    if log is not None:
                        log.writerow(final.to_row(self.step))
                    if self.step % per_epoch == 0:
                        self.scheduler.step()
                    if self.step % cfg.log_every == 0:
                        logger.info("step %d epoch %d lr %.3g total %.6f", self.step, epoch,
                                    self.optimizer.param_groups[0]["lr"], final.total)
                    if self.step % cfg.checkpoint_interval == 0:
                        self.save_checkpoint()
                    if self.step >= total:
                        break

        checkpoint = self.save_checkpoint(FINAL_CHECKPOINT)
        return TrainResult(bundle=self.bundle, steps=self.step, final=final, checkpoint=checkpoint,
                           log_path=self.log_path, history=list(self.history))


def train_step(
    batch,
    bundle: ModelBundle,
    weights: Optional[LossWeights] = None,
    ablation: Optional[AblationConfig] = None,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> LossBreakdown:
    """
    Single update outside a run. Pass the same optimizer across calls to keep
    its moment estimates; without one a fresh Adam takes the step.
    """
    trainer = Trainer(bundle, TrainConfig(), weights, ablation, optimizer=optimizer)
    return trainer.train_step(batch)


def train(
    config: Optional[RunConfig] = None,
    ablation: Optional[AblationConfig] = None,
    weights: Optional[LossWeights] = None,
    resume: Optional[Union[str, Path]] = None,
    run_dir: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """
    Full training run: dataset, bundle, log, checkpoints.

    Deterministic for a given config and seed; `resume` continues from a
    checkpoint exactly where an uninterrupted run would be.
    """
    config = config or RunConfig()
    ablation = ablation or config.ablation
    weights = weights or config.weights
    cfg = config.train
    run_dir = Path(run_dir or cfg.run_dir)
    resolved = replace(config, ablation=ablation, weights=weights,
                       train=cfg.model_copy(update={"run_dir": str(run_dir)}))

    dataset = PairedRainDataset(cfg.dataset_root)
    bundle_cfg = config.model.bundle_config(ablation.concatenation_on)
    dataset.check_stride(bundle_cfg.stride)

    torch.manual_seed(cfg.seed)
    archive = None
    if resume is not None:
        bundle, archive = load_bundle(resume, expected=bundle_cfg)
    else:
        bundle = build_models(bundle_cfg.derain, bundle_cfg.depth, seed=cfg.seed,
                              feature_cfg=bundle_cfg.feature, latent_cfg=bundle_cfg.latent)
        if cfg.latent_fit_steps:
            fit_latent_supervisor(bundle.latent_supervisor, dataset.clear_batch(),
                                  steps=cfg.latent_fit_steps, seed=cfg.seed)

    run_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(resolved, run_dir)
    logger.info("Resolved config: %s", " ".join(f"{k}={v}" for k, v in resolved.to_flat().items()))
    logger.info("Ablation %s: %s", resolved.preset, ablation.describe())
    logger.info("Active graph edges: %s", ", ".join(sorted(active_graph_edges(ablation))))

    trainer = Trainer(bundle, cfg, weights, ablation, run_dir=run_dir, resolved=resolved.to_flat())
    if archive is not None:
        trainer.restore(archive)
    return trainer.fit(dataset)


@dataclass
class AblationOutcome:
    preset: str
    run_dir: Path
    result: TrainResult
    evaluation: EvalRun


def run_ablation(
    presets: Sequence[str],
    base_config: RunConfig,
    run_dir: Union[str, Path],
    eval_root: Optional[Union[str, Path]] = None,
) -> List[AblationOutcome]:
    """Train and evaluate each preset with the same budget, data and seed."""
    run_dir = Path(run_dir)
    eval_root = eval_root or base_config.train.dataset_root
    outcomes = []
    for preset in presets:
        name = canonical_preset(preset)
        config = replace(base_config, preset=name, ablation=apply_ablation(name))
        preset_dir = run_dir / name
        logger.info("Ablation preset %s", name)
        result = train(config, run_dir=preset_dir)
        evaluation = evaluate_dataset(result.checkpoint or result.bundle, eval_root, run_name=name)
        write_report(evaluation, preset_dir / "eval.csv")
        outcomes.append(AblationOutcome(preset=name, run_dir=preset_dir, result=result,
                                        evaluation=evaluation))
    return outcomes
