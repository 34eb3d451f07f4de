"""
DepthDerain - Training Pipeline Tests
Config resolution, presets, data order, the joint update, determinism and resume.
"""

import logging
import shutil
import sys
import tempfile
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent.parent))

from evalkit import evaluate_dataset
from losses import LossWeights
from netgraph import TRAINABLE_GROUPS, build_models, load_bundle
from rainsynth import DatasetError, StreakParams, make_toy_dataset
from trainpipe import (
    ABLATION_PRESETS,
    CONFIG_ENV_VAR,
    FULL_PRESET,
    AblationConfig,
    ConfigError,
    EpochShuffleSampler,
    PairedRainDataset,
    ResumeError,
    RunConfig,
    Trainer,
    TrainingDivergedError,
    UnknownPresetError,
    active_graph_edges,
    apply_ablation,
    gradient_groups,
    load_run_config,
    make_loader,
    parse_overrides,
    run_ablation,
    run_config_fields,
    train,
    train_step,
    write_resolved_config,
)

TINY_MODEL = {
    "derain_widths": "8,16,16,16",
    "depth_widths": "8,8,16,16",
    "feature_widths": "8,16,16",
    "latent_widths": "8,16,16,16",
    "latent_length": "32",
    "latent_grid": "2",
    "latent_decoder_channels": "8",
}


def tiny_config(dataset_root, run_dir, **extra) -> RunConfig:
    values = dict(TINY_MODEL, dataset_root=str(dataset_root), run_dir=str(run_dir))
    values.update({key: str(value) for key, value in extra.items()})
    return RunConfig.from_flat(values)


def tiny_bundle(config: RunConfig, seed: int = 0):
    cfg = config.bundle_config()
    return build_models(cfg.derain, cfg.depth, seed=seed, feature_cfg=cfg.feature, latent_cfg=cfg.latent)


def random_batch(seed: int = 0, size: int = 32):
    generator = torch.Generator().manual_seed(seed)
    return {
        "rainy": torch.rand(4, 3, size, size, generator=generator),
        "clear": torch.rand(4, 3, size, size, generator=generator),
        "depth": torch.rand(4, 1, size, size, generator=generator),
    }


class TestRunConfig:
    """Tests for flat-file config resolution."""

    def setup_method(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def teardown_method(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def write(self, text: str) -> Path:
        path = self.temp_dir / "run.env"
        path.write_text(text, encoding="utf-8")
        return path

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
        config = load_run_config()
        assert config.train.batch_size == 4
        assert config.train.learning_rate == 5e-3
        assert config.train.lr_decay == 0.9
        assert config.weights == LossWeights()
        assert config.ablation == AblationConfig()
        assert config.preset == FULL_PRESET

    def test_file_values(self):
        path = self.write(
            "# toy run\n"
            "batch_size=2\n"
            "derain_widths=8,16,16,16\n"
            "lambda_derain=4.5\n"
            "gt_depth_on=false\n"
        )
        config = load_run_config(path)
        assert config.train.batch_size == 2
        assert config.model.derain_widths == [8, 16, 16, 16]
        assert config.weights.derain_mse == 4.5
        assert not config.ablation.gt_depth_on

    def test_env_var_names_file(self, monkeypatch):
        monkeypatch.setenv(CONFIG_ENV_VAR, str(self.write("epochs=3\n")))
        assert load_run_config().train.epochs == 3

    def test_preset_then_overrides(self):
        path = self.write("depth_latent_on=false\n")
        config = load_run_config(path, ["concatenation_on=false"], preset="c")
        assert config.preset == "C"
        assert config.ablation == AblationConfig(gt_depth_on=False, concatenation_on=False)

    def test_shipped_toy_config(self):
        config = load_run_config(Path(__file__).parent.parent / "configs" / "toy.env")
        assert config.model.latent_length == 64
        assert config.bundle_config().stride == 16

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="learning_rat"):
            load_run_config(self.write("learning_rat=0.1\n"))

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={"batch_size": "0"})
        with pytest.raises(ConfigError):
            load_run_config(overrides={"lr_decay": "1.5"})
        with pytest.raises(ConfigError):
            load_run_config(overrides={"lambda_depth": "-1"})
        with pytest.raises(ConfigError):
            load_run_config(overrides={"gt_depth_on": "maybe"})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_run_config(preset="Z")

    def test_incompatible_architecture(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={"derain_widths": "8,16,32"})
        # Without concatenation the level counts are independent
        config = load_run_config(overrides={"derain_widths": "8,16,32", "concatenation_on": "false"})
        assert config.bundle_config().derain.levels == 3

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_run_config(self.temp_dir / "absent.env")

    def test_resolved_config_round_trip(self):
        config = load_run_config(overrides={"run_dir": "runs/with space", "seed": "7"}, preset="B")
        path = write_resolved_config(config, self.temp_dir)
        again = load_run_config(path)
        assert again.to_flat() == config.to_flat()

    def test_with_overrides_keeps_unrelated_keys(self):
        base = load_run_config(self.write("batch_size=2\nlambda_derain=4.5\n"), preset="A")
        config = base.with_overrides({"epochs": "7", "preset": "C"})
        assert config.train.batch_size == 2
        assert config.weights.derain_mse == 4.5
        assert config.train.epochs == 7
        # A new preset replaces the ablation flags of the old one
        assert config.ablation == AblationConfig(gt_depth_on=False)

    def test_overrides_parsing(self):
        assert parse_overrides(["a=1", " b = x=y "]) == {"a": "1", "b": "x=y"}
        with pytest.raises(ConfigError):
            parse_overrides(["novalue"])

    def test_every_field_listed(self):
        fields = run_config_fields()
        assert "lambda_perceptual" in fields
        assert "concatenation_on" in fields
        assert len(fields) == len(set(fields))


class TestPresets:
    """Tests for ablation presets and graph edges."""

    def test_mapping(self):
        assert apply_ablation("A") == AblationConfig(depth_latent_on=False)
        assert apply_ablation("b") == AblationConfig(derain_latent_on=False)
        assert apply_ablation("C") == AblationConfig(gt_depth_on=False)
        assert apply_ablation("D") == AblationConfig(concatenation_on=False)
        assert apply_ablation("E") == AblationConfig(gt_depth_on=False, concatenation_on=False)
        assert apply_ablation("full") == AblationConfig()

    def test_unknown(self):
        with pytest.raises(UnknownPresetError):
            apply_ablation("F")

    def test_full_edges(self):
        assert active_graph_edges(AblationConfig()) == {
            "loss:perceptual", "loss:derain_mse", "loss:depth_consist", "loss:derain_consist",
            "loss:depth_mse", "graph:depth_features->derain_ae",
        }

    def test_each_switch_removes_its_edges(self):
        full = active_graph_edges(AblationConfig())
        removed = {name: full - active_graph_edges(ablation) for name, ablation in ABLATION_PRESETS.items()}
        assert removed["A"] == {"loss:depth_consist"}
        assert removed["B"] == {"loss:derain_consist"}
        assert removed["C"] == {"loss:depth_mse"}
        assert removed["D"] == {"graph:depth_features->derain_ae"}
        assert removed["E"] == {"loss:depth_mse", "graph:depth_features->derain_ae"}
        assert removed[FULL_PRESET] == set()


class TestData:
    """Tests for the paired dataset and batch order."""

    def setup_method(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        make_toy_dataset(6, 32, 32, seed=3, out_dir=self.temp_dir / "toy")

    def teardown_method(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_items(self):
        dataset = PairedRainDataset(self.temp_dir / "toy")
        item = dataset[2]
        assert len(dataset) == 6
        assert item["id"] == "0002"
        assert item["rainy"].shape == (3, 32, 32)
        assert item["depth"].shape == (1, 32, 32)

    def test_order_depends_on_seed_and_epoch(self):
        sampler = EpochShuffleSampler(6, 4, seed=1)
        assert sampler.batches(0) == EpochShuffleSampler(6, 4, seed=1).batches(0)
        assert sampler.batches(0) != sampler.batches(1)
        assert sorted(i for batch in sampler.batches(0) for i in batch) == list(range(6))
        assert [len(b) for b in sampler.batches(0)] == [4, 2]

    def test_set_epoch_skips_batches(self):
        sampler = EpochShuffleSampler(6, 2, seed=0)
        sampler.set_epoch(2, start_batch=1)
        assert list(sampler) == sampler.batches(2)[1:]
        assert len(sampler) == 2

    def test_loader_follows_sampler(self):
        dataset = PairedRainDataset(self.temp_dir / "toy")
        sampler = EpochShuffleSampler(len(dataset), 4, seed=5)
        ids = [list(batch["id"]) for batch in make_loader(dataset, sampler)]
        expected = [[f"{i:04d}" for i in batch] for batch in sampler.batches(0)]
        assert ids == expected

    def test_stride_check(self):
        dataset = PairedRainDataset(self.temp_dir / "toy")
        dataset.check_stride(16)
        with pytest.raises(DatasetError):
            dataset.check_stride(64)


class TestJointUpdate:
    """Tests for a single training step."""

    def setup_method(self):
        self.config = tiny_config("unused", "unused")

    def test_frozen_parameters_unchanged(self):
        bundle = tiny_bundle(self.config)
        before = {name: p.detach().clone() for name, p in bundle.named_parameters()}
        train_step(random_batch(), bundle, ablation=AblationConfig())

        changed = set()
        for name, param in bundle.named_parameters():
            group = bundle.group_of(name)
            if group in TRAINABLE_GROUPS:
                if not torch.equal(param, before[name]):
                    changed.add(group)
            else:
                assert torch.equal(param, before[name]), name
        assert "derain_ae" in changed

    @pytest.mark.parametrize("preset, expected", [
        ("Full", TRAINABLE_GROUPS),
        ("A", TRAINABLE_GROUPS),
        ("B", {"derain_ae", "depth_net.decoder"}),
        ("C", TRAINABLE_GROUPS),
        ("D", TRAINABLE_GROUPS),
        ("E", TRAINABLE_GROUPS),
    ])
    def test_gradient_reaches_exactly(self, preset, expected):
        ablation = apply_ablation(preset)
        bundle = tiny_bundle(tiny_config("unused", "unused", preset=preset))
        train_step(random_batch(), bundle, ablation=ablation)
        assert gradient_groups(bundle) == set(expected)

    def test_disabled_terms_report_zero(self):
        ablation = apply_ablation("E")
        bundle = tiny_bundle(tiny_config("unused", "unused", preset="E"))
        breakdown = train_step(random_batch(), bundle, ablation=ablation)
        assert breakdown.depth_mse == 0.0
        assert breakdown.depth_consist > 0.0

    def test_mismatched_architecture(self):
        bundle = tiny_bundle(self.config)
        with pytest.raises(ConfigError):
            Trainer(bundle, ablation=AblationConfig(concatenation_on=False))

    def test_divergence_halts(self):
        bundle = tiny_bundle(self.config)
        batch = random_batch()
        batch["rainy"][0, 0, 0, 0] = float("nan")
        trainer = Trainer(bundle, self.config.train)
        with pytest.raises(TrainingDivergedError, match="no checkpoint written yet") as excinfo:
            trainer.train_step(batch)
        assert excinfo.value.step == 1
        assert trainer.step == 0

    def test_loss_decreases_with_persistent_optimizer(self):
        torch.manual_seed(0)
        bundle = tiny_bundle(self.config)
        frozen = {name: p.detach().clone() for name, p in bundle.named_parameters()
                  if bundle.group_of(name) not in TRAINABLE_GROUPS}
        optimizer = torch.optim.Adam(bundle.trainable_parameters(), lr=5e-3)
        batch = random_batch(seed=1)
        totals = [train_step(batch, bundle, optimizer=optimizer).total for _ in range(50)]
        assert sum(totals[-10:]) / 10 < sum(totals[:10]) / 10
        for name, param in bundle.named_parameters():
            if name in frozen:
                assert torch.equal(param, frozen[name]), name


class TestTrainingRuns:
    """Tests for full runs on a toy dataset."""

    def setup_method(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.data = self.temp_dir / "toy"
        make_toy_dataset(8, 32, 32, streak=StreakParams(density=2000), seed=0, out_dir=self.data)

    def teardown_method(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_run_outputs(self):
        run_dir = self.temp_dir / "run"
        config = tiny_config(self.data, run_dir, max_steps=4, checkpoint_interval=2)
        result = train(config)
        assert result.steps == 4
        assert result.checkpoint == run_dir / "checkpoints" / "final.pt"
        assert (run_dir / "checkpoints" / "step_000002.pt").is_file()
        assert (run_dir / "config.resolved").is_file()
        lines = result.log_path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "step,perceptual,depth_consist,derain_consist,derain_mse,depth_mse,total"
        assert [line.split(",")[0] for line in lines[1:]] == ["1", "2", "3", "4"]

    def test_same_seed_same_run(self):
        a = train(tiny_config(self.data, self.temp_dir / "a", max_steps=3))
        b = train(tiny_config(self.data, self.temp_dir / "b", max_steps=3))
        assert [h.total for h in a.history] == [h.total for h in b.history]
        state_a, state_b = a.bundle.state_dict(), b.bundle.state_dict()
        assert all(torch.equal(state_a[key], state_b[key]) for key in state_a)

    def test_resume_matches_uninterrupted_run(self):
        straight_dir = self.temp_dir / "straight"
        train(tiny_config(self.data, straight_dir, max_steps=6, checkpoint_interval=3))

        split_dir = self.temp_dir / "split"
        train(tiny_config(self.data, split_dir, max_steps=3, checkpoint_interval=3))
        resumed = train(tiny_config(self.data, split_dir, max_steps=6, checkpoint_interval=3),
                        resume=split_dir / "checkpoints" / "step_000003.pt")
        assert resumed.steps == 6

        straight, _ = load_bundle(straight_dir / "checkpoints" / "final.pt")
        state_a, state_b = straight.state_dict(), resumed.bundle.state_dict()
        assert all(torch.equal(state_a[key], state_b[key]) for key in state_a)
        assert (straight_dir / "train_log.csv").read_text() == (split_dir / "train_log.csv").read_text()

    def test_resume_rejects_other_ablation(self):
        run_dir = self.temp_dir / "run"
        train(tiny_config(self.data, run_dir, max_steps=2, checkpoint_interval=2))
        with pytest.raises(ResumeError):
            train(tiny_config(self.data, run_dir, max_steps=4, preset="C"),
                  resume=run_dir / "checkpoints" / "step_000002.pt")

    def test_resume_rejects_other_learning_rate(self):
        run_dir = self.temp_dir / "run"
        train(tiny_config(self.data, run_dir, max_steps=2, checkpoint_interval=2))
        with pytest.raises(ResumeError, match="learning_rate"):
            train(tiny_config(self.data, run_dir, max_steps=4, learning_rate=1e-4),
                  resume=run_dir / "checkpoints" / "step_000002.pt")

    @pytest.mark.slow
    def test_overfits_toy_dataset(self):
        config = tiny_config(self.data, self.temp_dir / "overfit", max_steps=300,
                             learning_rate=2e-3, lr_decay=0.99, checkpoint_interval=300, log_every=50)
        result = train(config)
        assert result.history[-1].total < 0.5 * result.history[0].total
        derained = evaluate_dataset(result.bundle, self.data).report.psnr.ave
        rainy = evaluate_dataset(None, self.data).report.psnr.ave
        assert derained >= rainy + 2.0

    @pytest.mark.slow
    def test_shipped_toy_config_overfits_default_toy_set(self):
        data = self.temp_dir / "toy64"
        make_toy_dataset(8, 64, 64, seed=0, out_dir=data)
        config = load_run_config(
            Path(__file__).parent.parent / "configs" / "toy.env",
            {"dataset_root": str(data), "run_dir": str(self.temp_dir / "toy64_run"),
             "max_steps": "300", "checkpoint_interval": "300"},
        )
        result = train(config)
        assert result.steps == 300
        assert result.history[-1].total < 0.5 * result.history[0].total
        derained = evaluate_dataset(result.bundle, data).report.psnr.ave
        rainy = evaluate_dataset(None, data).report.psnr.ave
        assert derained >= rainy + 2.0

    @pytest.mark.slow
    def test_ablation_runs(self):
        base = tiny_config(self.data, self.temp_dir / "unused", max_steps=2)
        outcomes = run_ablation(["Full", "d"], base, self.temp_dir / "ablation")
        assert [o.preset for o in outcomes] == ["Full", "D"]
        for outcome in outcomes:
            assert (outcome.run_dir / "eval.csv").is_file()
            assert outcome.evaluation.report.count == 8
        assert not outcomes[1].result.bundle.concatenates_depth

    def test_preset_d_logs_without_concatenation(self, caplog):
        with caplog.at_level(logging.INFO, logger="trainpipe.trainer"):
            train(tiny_config(self.data, self.temp_dir / "d", max_steps=1, preset="D"))
        edges = [r.getMessage() for r in caplog.records if r.getMessage().startswith("Active graph edges")]
        assert len(edges) == 1
        assert "graph:depth_features->derain_ae" not in edges[0]
        assert "loss:depth_mse" in edges[0]

    @pytest.mark.slow
    def test_full_keeps_pace_with_preset_e(self):
        base = tiny_config(self.data, self.temp_dir / "unused", max_steps=200,
                           learning_rate=2e-3, checkpoint_interval=200, log_every=50)
        full, preset_e = run_ablation(["Full", "E"], base, self.temp_dir / "ablation")
        assert full.evaluation.report.psnr.ave >= preset_e.evaluation.report.psnr.ave - 0.5


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
