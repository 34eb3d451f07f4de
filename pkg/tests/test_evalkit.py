"""
DepthDerain - Evaluation Kit Tests
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from evalkit import (
    BenchmarkError,
    MismatchedRunsError,
    MissingPairsError,
    ReportFormatError,
    benchmark_inference,
    compare_runs,
    evaluate_dataset,
    evaluate_pairs,
    file_digest,
    read_report,
    write_report,
)
from imagecore import Image
from netgraph import DepthNetConfig, DerainAEConfig, ResolutionMismatchError, build_models, save_bundle
from rainsynth import make_toy_dataset


def small_bundle():
    return build_models(DerainAEConfig(widths=[8, 16, 32, 32]), DepthNetConfig(widths=[8, 16, 16, 32]), seed=0)


def planted_pairs(targets):
    """Uniform offsets with MSE = 10^(-p/10), so each pair scores exactly p dB."""
    clear = Image(np.full((16, 16, 3), 0.5))
    pairs = []
    for index, target in enumerate(targets):
        shift = math.sqrt(10 ** (-target / 10))
        pairs.append((f"{index:04d}", Image(np.full((16, 16, 3), 0.5 + shift)), clear))
    return pairs


class TestEvaluatePairs:
    """Tests for in-memory scoring."""

    def test_identity(self):
        img = Image.random(32, 32, seed=1)
        run = evaluate_pairs([("0000", img, img)])
        assert run.report.ssim.ave == pytest.approx(1.0)
        assert run.report.psnr.max == math.inf

    def test_planted_psnr(self):
        run = evaluate_pairs(planted_pairs([20.0, 25.0, 30.0]), workers=2)
        assert run.report.psnr.ave == pytest.approx(25.0, abs=1e-4)
        assert run.report.psnr.max == pytest.approx(30.0, abs=1e-4)
        assert run.report.psnr.min == pytest.approx(20.0, abs=1e-4)
        assert run.ids == ["0000", "0001", "0002"]

    def test_workers_do_not_change_scores(self):
        pairs = [(f"{i:04d}", Image.random(16, 16, seed=i), Image.random(16, 16, seed=i + 10)) for i in range(6)]
        assert evaluate_pairs(pairs).summary() == evaluate_pairs(pairs, workers=3).summary()

    def test_empty(self):
        with pytest.raises(MissingPairsError):
            evaluate_pairs([])


class TestEvaluateDataset:
    """Tests for dataset evaluation and reports."""

    def setup_method(self):
        self.temp_dir = Path(tempfile.mkdtemp())
        self.data = self.temp_dir / "toy"
        make_toy_dataset(3, 32, 32, seed=4, out_dir=self.data)

    def teardown_method(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_checkpoint_provenance(self):
        path = self.temp_dir / "bundle.pt"
        save_bundle(small_bundle(), path)
        run = evaluate_dataset(path, self.data)
        assert run.report.count == 3
        assert run.name == "bundle"
        assert run.checkpoint_hash == file_digest(path)
        assert run.dataset_root == str(self.data)
        assert run.report.psnr.min <= run.report.psnr.ave <= run.report.psnr.max

    def test_in_memory_bundle(self):
        bundle = small_bundle()
        run = evaluate_dataset(bundle, self.data, run_name="mem")
        assert run.checkpoint is None
        assert len(run.checkpoint_hash) == 64

    def test_rainy_baseline(self):
        run = evaluate_dataset(None, self.data)
        assert run.report.count == 3
        assert run.report.psnr.ave < math.inf

    def test_custom_predictor(self):
        run = evaluate_dataset(None, self.data, predictor=lambda img: img, run_name="identity")
        assert run.summary() == evaluate_dataset(None, self.data).summary()

    def test_missing_dataset(self):
        with pytest.raises(MissingPairsError):
            evaluate_dataset(None, self.temp_dir / "absent")

    def test_resolution_mismatch_and_padding(self):
        odd = self.temp_dir / "odd"
        make_toy_dataset(2, 40, 40, out_dir=odd)
        bundle = small_bundle()
        with pytest.raises(ResolutionMismatchError):
            evaluate_dataset(bundle, odd)
        assert evaluate_dataset(bundle, odd, pad_to_stride=True).report.count == 2

    def test_report_files(self):
        run = evaluate_dataset(None, self.data, run_name="rainy")
        path = write_report(run, self.temp_dir / "reports" / "rainy.csv")
        text = path.read_text(encoding="utf-8")
        assert text.startswith("#name,rainy\n")
        assert "id,psnr,ssim\n" in text
        assert "Ave" in path.with_suffix(".txt").read_text(encoding="utf-8")
        sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        assert sidecar["summary"] == run.summary()

    def test_reports_are_byte_identical(self):
        first = write_report(evaluate_dataset(None, self.data, run_name="r"), self.temp_dir / "a.csv")
        second = write_report(evaluate_dataset(None, self.data, run_name="r"), self.temp_dir / "b.csv")
        assert first.read_bytes() == second.read_bytes()

    def test_read_back(self):
        run = evaluate_dataset(None, self.data, run_name="rainy")
        loaded = read_report(write_report(run, self.temp_dir / "rainy.csv"))
        assert loaded.summary() == run.summary()
        assert loaded.ids == run.ids
        assert loaded.name == "rainy"

    def test_tampered_header(self):
        run = evaluate_dataset(None, self.data, run_name="rainy")
        path = write_report(run, self.temp_dir / "rainy.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        lines = [("#psnr_ave,99.0" if line.startswith("#psnr_ave,") else line) for line in lines]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(ReportFormatError):
            read_report(path)


    def test_malformed_rows_are_format_errors(self):
        run = evaluate_dataset(None, self.data, run_name="rainy")
        path = write_report(run, self.temp_dir / "rainy.csv")
        text = path.read_text(encoding="utf-8")
        path.write_text(text.replace("\n0001,", "\n0000,"), encoding="utf-8")
        with pytest.raises(ReportFormatError, match="duplicate"):
            read_report(path)

        lines = text.splitlines()
        lines[-1] = lines[-1].split(",")[0] + ",nan,0.5"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(ReportFormatError, match="NaN"):
            read_report(path)

    def test_rows_follow_report_records(self):
        run = evaluate_dataset(None, self.data, run_name="rainy")
        path = write_report(run, self.temp_dir / "rainy.csv")
        body = path.read_text(encoding="utf-8").split("id,psnr,ssim\n", 1)[1]
        expected = "".join(f"{i},{p!r},{s!r}\n" for i, p, s in run.report.to_rows())
        assert body == expected


class TestCompareRuns:
    """Tests for comparison tables."""

    def setup_method(self):
        self.base = evaluate_pairs(planted_pairs([20.0, 25.0, 30.0]), name="base")
        self.better = evaluate_pairs(planted_pairs([22.0, 26.0, 31.0]), name="better")

    def test_deltas_and_best(self):
        table = compare_runs([self.base, self.better])
        assert table.labels() == ["base", "better"]
        better = table.row("better")
        assert better.deltas["psnr_ave"] == pytest.approx(4.0 / 3.0, abs=1e-4)
        assert "psnr_ave" in better.best
        assert "psnr_ave" not in table.row("base").best
        assert table.row("base").deltas["psnr_ave"] == 0.0

    def test_self_comparison_ties(self):
        table = compare_runs([self.base, self.base], labels=["one", "two"])
        for row in table.rows:
            assert row.best == set(table.columns)
            assert all(delta == 0.0 for delta in row.deltas.values())

    def test_outputs(self):
        table = compare_runs([self.base, self.better])
        csv_text = table.to_csv()
        assert csv_text.splitlines()[0].startswith("run,psnr_ave,psnr_max")
        text = table.to_text()
        assert "*" in text
        assert "delta vs base" in text

    def test_rejections(self):
        with pytest.raises(MismatchedRunsError):
            compare_runs([self.base, self.better], labels=[])
        with pytest.raises(MismatchedRunsError):
            compare_runs([self.base])
        with pytest.raises(MismatchedRunsError):
            compare_runs([self.base, self.better], labels=["x", "x"])
        with pytest.raises(MismatchedRunsError):
            compare_runs([self.base, self.better], labels=["only"])
        shorter = evaluate_pairs(planted_pairs([20.0, 25.0]), name="short")
        with pytest.raises(MismatchedRunsError):
            compare_runs([self.base, shorter])


class TestBenchmark:
    """Tests for inference timing."""

    def test_samples(self):
        report = benchmark_inference(small_bundle(), image_size=32, warmup=1, iters=10)
        assert len(report.samples) == 10
        assert report.min_seconds <= report.mean_seconds <= report.max_seconds
        assert report.to_dict()["mean_seconds"] == report.mean_seconds
        assert "32x32" in report.to_text()

    def test_too_few_iterations(self):
        with pytest.raises(BenchmarkError):
            benchmark_inference(small_bundle(), image_size=32, iters=5)

    def test_size_must_fit_stride(self):
        with pytest.raises(ResolutionMismatchError):
            benchmark_inference(small_bundle(), image_size=40)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
