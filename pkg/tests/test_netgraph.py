"""
DepthDerain - Network Graph Tests
Shapes, channel arithmetic, the freeze policy, rainy-only inference and checkpoints.
"""

import shutil
import sys
import tempfile
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent.parent))

from imagecore import DepthMap, Image
from netgraph import (
    TRAINABLE_GROUPS,
    AblationConfig,
    CheckpointIOError,
    CheckpointMismatchError,
    DepthNetConfig,
    DerainAEConfig,
    FeaturePyramid,
    IncompatibleConfigError,
    IncompatibleFeaturesError,
    LatentPair,
    LatentSupervisor,
    LatentSupervisorConfig,
    ResolutionMismatchError,
    ablation_of,
    build_models,
    count_parameters,
    depth_forward,
    derain_forward,
    encode_clear_latent,
    extract_perceptual_features,
    fit_latent_supervisor,
    infer,
    infer_tensor,
    load_bundle,
    predict_depth,
    save_bundle,
)


def small_bundle(concatenate=True, seed=0):
    return build_models(
        DerainAEConfig(widths=[8, 16, 32, 32], latent_length=150, concatenate_depth=concatenate),
        DepthNetConfig(widths=[8, 16, 16, 32]),
        seed=seed,
    )


def count_calls(module):
    calls = []
    handle = module.register_forward_pre_hook(lambda mod, inputs: calls.append(1))
    return calls, handle


class TestShapes:
    """Tests for the forward paths of the default bundle."""

    def setup_method(self):
        self.bundle = build_models(seed=0)
        self.rainy = torch.rand(2, 3, 64, 64, generator=torch.Generator().manual_seed(1))

    def test_depth_forward_shapes(self):
        out = depth_forward(self.rainy, self.bundle)
        assert [tuple(d.shape) for d in out.disparities] == [(2, 1, 64, 64), (2, 1, 32, 32)]
        assert [s[-1] for s in out.encoder_features.shapes()] == [64, 32, 16, 8]
        assert out.depth_latent.shape == (2, 128)

    def test_disparities_strictly_inside_unit_interval(self):
        out = depth_forward(self.rainy, self.bundle)
        for disparity in out.disparities:
            assert disparity.min() > 0.0 and disparity.max() < 1.0

    def test_derain_forward_shapes(self):
        features = depth_forward(self.rainy, self.bundle).encoder_features
        derained, latent = derain_forward(self.rainy, features, self.bundle, AblationConfig())
        assert derained.shape == (2, 3, 64, 64)
        assert latent.shape == (2, 150)

    def test_derained_output_is_clamped(self):
        extreme = torch.zeros(1, 3, 64, 64)
        extreme[..., ::2, :] = 1.0
        derained = infer_tensor(extreme, self.bundle)
        assert derained.min() >= 0.0 and derained.max() <= 1.0

    def test_perceptual_taps(self):
        taps = extract_perceptual_features(self.rainy, self.bundle)
        assert [tuple(t.shape[-2:]) for t in taps] == [(32, 32), (16, 16), (8, 8)]

    def test_clear_latent_is_deterministic(self):
        a = encode_clear_latent(self.rainy, self.bundle)
        b = encode_clear_latent(self.rainy, self.bundle)
        assert a.shape == (2, 150)
        assert torch.equal(a, b)

    def test_image_input(self):
        img = Image.random(64, 64, seed=4)
        out = infer(img, self.bundle)
        assert isinstance(out, Image)
        assert out.shape == (64, 64, 3)
        depth = predict_depth(img, self.bundle)
        assert isinstance(depth, DepthMap)
        assert depth.shape == (64, 64)

    @pytest.mark.parametrize("size", [32, 64, 96])
    def test_output_matches_input_size(self, size):
        out = infer_tensor(torch.rand(1, 3, size, size), self.bundle)
        assert out.shape == (1, 3, size, size)

    def test_indivisible_resolution(self):
        with pytest.raises(ResolutionMismatchError):
            infer_tensor(torch.rand(1, 3, 60, 64), self.bundle)

    def test_padding_restores_size(self):
        out = infer_tensor(torch.rand(1, 3, 70, 50), self.bundle, pad_to_stride=True)
        assert out.shape == (1, 3, 70, 50)
        depth = predict_depth(torch.rand(1, 3, 70, 50), self.bundle, pad_to_stride=True)
        assert depth.shape == (1, 1, 70, 50)

    def test_feature_pyramid_rejects_growing_maps(self):
        with pytest.raises(IncompatibleFeaturesError):
            FeaturePyramid([torch.zeros(1, 1, 8, 8), torch.zeros(1, 1, 16, 16)])

    def test_latent_pair_lengths_must_match(self):
        pair = LatentPair(rainy_latent=torch.zeros(2, 16), clear_latent=torch.zeros(2, 16))
        assert pair.has_derain and not pair.has_depth
        with pytest.raises(IncompatibleFeaturesError, match="derain"):
            LatentPair(rainy_latent=torch.zeros(2, 16), clear_latent=torch.zeros(2, 15))
        with pytest.raises(IncompatibleFeaturesError, match="depth"):
            LatentPair(rainy_depth_latent=torch.zeros(2, 8), clear_depth_latent=torch.zeros(2, 4))
        with pytest.raises(IncompatibleFeaturesError, match="missing"):
            LatentPair(rainy_latent=torch.zeros(2, 16))


class TestChannelArithmetic:
    """Tests for depth-feature concatenation in the DerainAE encoder."""

    def test_concatenated_level_inputs(self):
        bundle = build_models(seed=0)
        assert bundle.derain_ae.level_input_channels == [3 + 16, 32 + 32, 64 + 64, 128 + 128]
        assert tuple(bundle.derain_ae.encoder[0].net[0].weight.shape) == (32, 19, 3, 3)

    def test_plain_level_inputs(self):
        bundle = build_models(DerainAEConfig(concatenate_depth=False), seed=0)
        assert bundle.derain_ae.level_input_channels == [3, 32, 64, 128]

    def test_concatenation_adds_exact_parameter_count(self):
        with_depth = build_models(seed=0)
        without = build_models(DerainAEConfig(concatenate_depth=False), seed=0)
        # Only the first conv of each encoder level sees the extra channels
        extra = sum(width * depth_width * 9 for width, depth_width in zip([32, 64, 128, 256], [16, 32, 64, 128]))
        assert count_parameters(with_depth.derain_ae) - count_parameters(without.derain_ae) == extra

    def test_level_mismatch_rejected(self):
        with pytest.raises(IncompatibleConfigError):
            build_models(DerainAEConfig(widths=[8, 16, 32]), DepthNetConfig(widths=[8, 16, 16, 32]))

    def test_plain_bundle_accepts_any_depth_levels(self):
        bundle = build_models(DerainAEConfig(widths=[8, 16, 32], concatenate_depth=False),
                              DepthNetConfig(widths=[8, 16, 16, 32]))
        assert bundle.inference_stride == 8

    def test_ablation_must_match_bundle(self):
        bundle = small_bundle(concatenate=False)
        rainy = torch.rand(1, 3, 32, 32)
        with pytest.raises(IncompatibleFeaturesError):
            derain_forward(rainy, None, bundle, AblationConfig())
        derained, _ = derain_forward(rainy, None, bundle, AblationConfig(concatenation_on=False))
        assert derained.shape == rainy.shape

    def test_missing_depth_features(self):
        with pytest.raises(IncompatibleFeaturesError):
            derain_forward(torch.rand(1, 3, 32, 32), None, small_bundle(), AblationConfig())


class TestFreezePolicy:
    """Tests for which parameter groups train."""

    def setup_method(self):
        self.bundle = small_bundle()

    def test_groups(self):
        groups = self.bundle.parameter_groups()
        assert set(groups) == {"derain_ae", "depth_net.encoder", "depth_net.decoder",
                               "feature_supervisor", "latent_supervisor.head", "latent_supervisor.body"}
        for name, params in groups.items():
            for _, param in params:
                assert param.requires_grad == (name in TRAINABLE_GROUPS)

    def test_trainable_parameters(self):
        trainable = {id(p) for p in self.bundle.trainable_parameters()}
        expected = {id(p) for group in TRAINABLE_GROUPS for _, p in self.bundle.parameter_groups()[group]}
        assert trainable == expected

    def test_clear_latent_gradient_reaches_only_head(self):
        latent = encode_clear_latent(torch.rand(1, 3, 32, 32), self.bundle)
        latent.sum().backward()
        for name, param in self.bundle.latent_supervisor.named_parameters():
            if name.startswith("head."):
                assert param.grad is not None
            else:
                assert param.grad is None


class TestRainyOnlyInference:
    """Inference uses the rainy image and nothing else."""

    def test_concatenating_bundle(self):
        bundle = small_bundle()
        hooks = {}
        for name, module in (("encoder", bundle.depth_net.encoder), ("decoder", bundle.depth_net.decoder),
                             ("feature", bundle.feature_supervisor), ("latent", bundle.latent_supervisor)):
            hooks[name] = count_calls(module)
        infer_tensor(torch.rand(1, 3, 32, 32), bundle)
        assert len(hooks["encoder"][0]) == 1
        assert len(hooks["decoder"][0]) == 0
        assert len(hooks["feature"][0]) == 0
        assert len(hooks["latent"][0]) == 0
        for _, handle in hooks.values():
            handle.remove()

    def test_plain_bundle_skips_depth_net(self):
        bundle = small_bundle(concatenate=False)
        calls, handle = count_calls(bundle.depth_net.encoder)
        infer_tensor(torch.rand(1, 3, 32, 32), bundle)
        handle.remove()
        assert calls == []

    def test_no_autograd_graph(self):
        out = infer_tensor(torch.rand(1, 3, 32, 32), small_bundle())
        assert not out.requires_grad


class TestBuildAndCheckpoint:
    """Tests for deterministic construction and archives."""

    def setup_method(self):
        self.temp_dir = Path(tempfile.mkdtemp())

    def teardown_method(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_same_seed_same_weights(self):
        a = small_bundle(seed=5).state_dict()
        b = small_bundle(seed=5).state_dict()
        assert all(torch.equal(a[key], b[key]) for key in a)

    def test_different_seed_differs(self):
        a = small_bundle(seed=5).state_dict()
        b = small_bundle(seed=6).state_dict()
        assert any(not torch.equal(a[key], b[key]) for key in a if a[key].is_floating_point())

    def test_global_rng_untouched(self):
        torch.manual_seed(123)
        expected = torch.rand(3)
        torch.manual_seed(123)
        small_bundle(seed=9)
        assert torch.equal(torch.rand(3), expected)

    def test_round_trip(self):
        bundle = small_bundle(seed=2)
        path = self.temp_dir / "bundle.pt"
        ablation = AblationConfig(gt_depth_on=False)
        save_bundle(bundle, path, ablation=ablation, extra={"step": 7})

        loaded, archive = load_bundle(path)
        assert archive["step"] == 7
        assert ablation_of(archive) == ablation
        rainy = torch.rand(1, 3, 32, 32)
        assert torch.equal(infer_tensor(rainy, bundle), infer_tensor(rainy, loaded))
        assert all(p.requires_grad for p in loaded.derain_ae.parameters())
        assert not any(p.requires_grad for p in loaded.feature_supervisor.parameters())

    def test_expected_config_mismatch(self):
        path = self.temp_dir / "bundle.pt"
        save_bundle(small_bundle(), path)
        other = small_bundle(concatenate=False).configs
        with pytest.raises(CheckpointMismatchError, match="concatenate_depth"):
            load_bundle(path, expected=other)

    def test_missing_checkpoint(self):
        with pytest.raises(CheckpointIOError):
            load_bundle(self.temp_dir / "absent.pt")

    def test_foreign_archive(self):
        path = self.temp_dir / "foreign.pt"
        torch.save({"weights": torch.zeros(1)}, str(path))
        with pytest.raises(CheckpointMismatchError):
            load_bundle(path)

    def test_external_encoder_weights(self):
        source = small_bundle(seed=11)
        weights = self.temp_dir / "encoder.pt"
        torch.save(source.depth_net.encoder.state_dict(), str(weights))
        bundle = build_models(
            DerainAEConfig(widths=[8, 16, 32, 32]),
            DepthNetConfig(widths=[8, 16, 16, 32], encoder_weights=str(weights)),
            seed=0,
        )
        for key, value in source.depth_net.encoder.state_dict().items():
            assert torch.equal(bundle.depth_net.encoder.state_dict()[key], value)


class TestLatentSupervisor:
    """Tests for the VAE latent supervisor."""

    def test_sampling_is_reproducible(self):
        vae = LatentSupervisor(LatentSupervisorConfig())
        x = torch.rand(1, 3, 32, 32)
        a, _, _ = vae(x, generator=torch.Generator().manual_seed(0))
        b, _, _ = vae(x, generator=torch.Generator().manual_seed(0))
        assert torch.equal(a, b)
        assert a.shape == x.shape

    def test_fit_restores_freeze_flags(self):
        bundle = small_bundle()
        history = fit_latent_supervisor(bundle.latent_supervisor, torch.rand(2, 3, 32, 32), steps=3)
        assert len(history) == 3
        assert all(p.requires_grad for p in bundle.latent_supervisor.head.parameters())
        assert not any(p.requires_grad for p in bundle.latent_supervisor.body.parameters())

    @pytest.mark.slow
    def test_overfits_single_image(self):
        torch.manual_seed(0)
        vae = LatentSupervisor(LatentSupervisorConfig())
        colour = torch.tensor([0.3, 0.6, 0.9]).view(1, 3, 1, 1)
        target = colour.expand(1, 3, 32, 32).clone()
        history = fit_latent_supervisor(vae, target, steps=800, kl_weight=0.0, sample=False)
        assert history[-1] < 1e-3
        recon, _, _ = vae(target, sample=False)
        assert torch.allclose(recon.mean(dim=(2, 3)), colour.view(1, 3), atol=2e-2)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
