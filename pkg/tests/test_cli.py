"""Command-line surface: subcommands, outputs, and exit codes."""

import json

import numpy as np
import pytest

from targetacc import SynthConfig, run_synth, write_predictions
from targetacc.cli import main


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def synth_files(tmp_path):
    # Margin-drop shift: target confidence falls below source confidence,
    # so the signed and unsigned DOC variants genuinely differ.
    return run_synth(SynthConfig(n_source=200, n_target=150, seed=5,
                                 margin_target=0.3), tmp_path / "data")


class TestSynthCommand:
    def test_writes_files(self, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code, out, err = run_cli(
            ["synth", "--out-dir", str(out_dir), "--n-source", "40",
             "--n-target", "30", "--seed", "3"], capsys)
        assert code == 0
        assert (out_dir / "source.csv").exists()
        assert (out_dir / "target.csv").exists()
        assert "true target accuracy" in out

    def test_byte_identical_reruns(self, tmp_path, capsys):
        args = ["synth", "--n-source", "25", "--n-target", "25", "--seed", "9"]
        code1, _, _ = run_cli(args + ["--out-dir", str(tmp_path / "a")], capsys)
        code2, _, _ = run_cli(args + ["--out-dir", str(tmp_path / "b")], capsys)
        assert code1 == code2 == 0
        for name in ("source.csv", "target.csv", "truth.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_invalid_config_is_exit_2(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["synth", "--out-dir", str(tmp_path), "--n-source", "0"], capsys)
        assert code == 2
        assert "error" in err


class TestEstimateCommand:
    def test_table_output(self, synth_files, capsys):
        code, out, _ = run_cli(
            ["estimate", synth_files["source"], synth_files["target"]], capsys)
        assert code == 0
        for name in ("atc-mc", "atc-ne", "ac", "doc", "cpc-acc", "cpc-ac"):
            assert name in out

    def test_json_output(self, synth_files, capsys):
        code, out, _ = run_cli(
            ["estimate", synth_files["source"], synth_files["target"],
             "--output", "json"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert len(payload["methods"]) == 6
        assert payload["true_target_accuracy"] is not None

    def test_csv_output_single_method(self, synth_files, capsys):
        code, out, _ = run_cli(
            ["estimate", synth_files["source"], synth_files["target"],
             "--method", "ac", "--output", "csv"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 2 and lines[1].startswith("ac,")

    def test_temperature_scale_flag(self, synth_files, capsys):
        code, out, _ = run_cli(
            ["estimate", synth_files["source"], synth_files["target"],
             "--temperature-scale", "--output", "json"], capsys)
        assert code == 0
        assert json.loads(out)["temperature"] is not None

    def test_temperature_scale_on_probabilities(self, tmp_path, capsys):
        rng = np.random.default_rng(17)
        src = rng.dirichlet(np.ones(3), size=50)
        tgt = rng.dirichlet(np.ones(3), size=40)
        src_path, tgt_path = tmp_path / "s.csv", tmp_path / "t.csv"
        write_predictions(src_path, src, rng.integers(0, 3, size=50))
        write_predictions(tgt_path, tgt)
        code, out, _ = run_cli(
            ["estimate", str(src_path), str(tgt_path), "--temperature-scale",
             "--output", "json"], capsys)
        assert code == 0
        assert json.loads(out)["temperature"] is not None

    def test_missing_target_is_exit_1(self, synth_files, capsys):
        code, _, err = run_cli(
            ["estimate", synth_files["source"], "/nonexistent/t.csv"], capsys)
        assert code == 1
        assert err.startswith("error:")

    def test_runs_without_synth_is_exit_2(self, synth_files, capsys):
        code, _, err = run_cli(
            ["estimate", synth_files["source"], synth_files["target"],
             "--runs", "3"], capsys)
        assert code == 2
        assert "--synth" in err

    def test_synth_mode_single_run(self, capsys):
        code, out, _ = run_cli(
            ["estimate", "--synth", "--n-source", "300", "--n-target", "200",
             "--seed", "4", "--output", "json"], capsys)
        assert code == 0
        assert json.loads(out)["true_target_accuracy"] is not None

    def test_synth_mode_multi_run_reports_mean_std(self, capsys):
        code, out, _ = run_cli(
            ["estimate", "--synth", "--runs", "3", "--n-source", "200",
             "--n-target", "200", "--seed", "4"], capsys)
        assert code == 0
        assert "±" in out and "3 runs" in out

    def test_synth_mode_multi_run_csv(self, capsys):
        code, out, _ = run_cli(
            ["estimate", "--synth", "--runs", "2", "--n-source", "150",
             "--n-target", "150", "--output", "csv"], capsys)
        assert code == 0
        header = out.strip().splitlines()[0]
        assert header == "method,mean_absolute_error,std_absolute_error,runs"

    def test_synth_with_paths_is_exit_2(self, synth_files, capsys):
        code, _, _ = run_cli(
            ["estimate", synth_files["source"], synth_files["target"],
             "--synth"], capsys)
        assert code == 2

    def test_doc_signed_changes_estimate(self, synth_files, capsys):
        _, out_plain, _ = run_cli(
            ["estimate", synth_files["source"], synth_files["target"],
             "--method", "doc", "--output", "csv"], capsys)
        _, out_signed, _ = run_cli(
            ["estimate", synth_files["source"], synth_files["target"],
             "--method", "doc", "--doc-signed", "--output", "csv"], capsys)
        assert out_plain != out_signed


class TestCalibrateCommand:
    def test_prints_fit_on_logits(self, synth_files, capsys):
        code, out, _ = run_cli(["calibrate", synth_files["source"]], capsys)
        assert code == 0
        assert out.startswith("temperature:")
        assert "nll:" in out and "grid_best:" in out

    def test_probabilities_need_recovery_flag(self, tmp_path, capsys):
        rng = np.random.default_rng(18)
        path = tmp_path / "p.csv"
        write_predictions(path, rng.dirichlet(np.ones(3), size=30),
                          rng.integers(0, 3, size=30))
        code, _, err = run_cli(["calibrate", str(path)], capsys)
        assert code == 2
        assert "recover-logits" in err
        code, out, _ = run_cli(["calibrate", str(path), "--recover-logits"],
                               capsys)
        assert code == 0
        assert out.startswith("temperature:")

    def test_degenerate_logits_warn_and_return_one(self, tmp_path, capsys):
        path = tmp_path / "flat.csv"
        write_predictions(path, np.zeros((5, 3)), np.zeros(5, dtype=int),
                          logits=True)
        code, out, err = run_cli(["calibrate", str(path)], capsys)
        assert code == 0
        assert "temperature: 1.000000" in out
        assert "warning:" in err

    def test_unlabeled_is_exit_1(self, tmp_path, capsys):
        path = tmp_path / "l.csv"
        write_predictions(path, np.random.default_rng(19).normal(size=(5, 3)),
                          logits=True)
        code, _, err = run_cli(["calibrate", str(path)], capsys)
        assert code == 1
        assert "label" in err
