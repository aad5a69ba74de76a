"""Tests for the molscale command line."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from molscale.cli import COMMANDS
from molscale.cli.commands import read_numbers
from molscale.errors import ParseError
from molscale.main import main
from molscale.model import init_state, save_checkpoint
from molscale.molgraph import write_dataset
from molscale.scaling import PUBLISHED_FIT
from molscale.trainer import LOG_COLUMNS, VALIDATION_LOG_NAME, read_loss_log


def write_scaffolds(path: Path) -> Path:
    path.write_text("benzene\t3\ta,b,c\npyridine\t1\td\n", encoding="utf-8")
    return path


def write_loss_log(path: Path, params_millions: float) -> Path:
    steps = np.arange(200_000, 800_001, 10_000)
    loss = PUBLISHED_FIT.predict(params_millions, steps)
    frame = pd.DataFrame(
        {
            "step": steps,
            "loss_total": loss,
            "loss_atom": loss / 2,
            "loss_coor": loss / 4,
            "loss_distance": loss / 4,
            "lr": 1e-4,
            "params_millions": params_millions,
            "wall_ms": 10.0,
        },
        columns=LOG_COLUMNS,
    )
    frame.to_csv(path, index=False)
    return path


def write_config(path: Path, **values) -> Path:
    values = {"preset": "tiny", "total_steps": 4, "warmup_steps": 1, "checkpoint_every": 2, **values}
    lines = [f"{key} = {value}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def last_json(capsys) -> dict:
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


class TestSample:
    """Tests for the sample command."""

    def test_writes_ids(self, tmp_path: Path):
        """Test that the requested number of ids is written."""
        out = tmp_path / "ids.txt"
        code = main(
            ["sample", "--scaffolds", str(write_scaffolds(tmp_path / "s.tsv")), "--count", "5",
             "--out", str(out)]
        )
        assert code == 0
        ids = out.read_text(encoding="utf-8").split()
        assert len(ids) == 5
        assert set(ids) <= {"a", "b", "c", "d"}

    def test_zero_count(self, tmp_path: Path):
        """Test that a count of zero writes an empty file."""
        out = tmp_path / "ids.txt"
        code = main(
            ["sample", "--scaffolds", str(write_scaffolds(tmp_path / "s.tsv")), "--count", "0",
             "--out", str(out)]
        )
        assert code == 0
        assert out.read_text(encoding="utf-8") == ""

    def test_same_seed_same_ids(self, tmp_path: Path):
        """Test that two runs with one seed write identical files."""
        scaffolds = str(write_scaffolds(tmp_path / "s.tsv"))
        for name in ("a.txt", "b.txt"):
            args = ["--seed", "7", "sample", "--scaffolds", scaffolds, "--tau", "1.0"]
            assert main(args + ["--count", "50", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.txt").read_text() == (tmp_path / "b.txt").read_text()

    def test_missing_scaffolds(self, tmp_path: Path):
        """Test that a missing table exits with code 2."""
        code = main(
            ["sample", "--scaffolds", str(tmp_path / "none.tsv"), "--count", "1",
             "--out", str(tmp_path / "ids.txt")]
        )
        assert code == 2

    def test_writes_manifest(self, tmp_path: Path):
        """Test that every run leaves a manifest in its run directory."""
        run_dir = tmp_path / "run"
        main(
            ["--run-dir", str(run_dir), "sample", "--scaffolds",
             str(write_scaffolds(tmp_path / "s.tsv")), "--count", "2",
             "--out", str(tmp_path / "ids.txt")]
        )
        manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "sample"
        assert manifest["exit_code"] == 0
        assert manifest["outputs"] == [str(tmp_path / "ids.txt")]
        assert manifest["config"]["count"] == 2

    def test_writes_frequency_summary(self, tmp_path: Path):
        """Test that --stats-out writes the top-k scaffolds, most common first."""
        stats = tmp_path / "stats.csv"
        code = main(
            ["--run-dir", str(tmp_path / "run"), "sample", "--scaffolds",
             str(write_scaffolds(tmp_path / "s.tsv")), "--count", "3", "--out",
             str(tmp_path / "ids.txt"), "--stats-out", str(stats), "--top-k", "1"]
        )
        assert code == 0
        frame = pd.read_csv(stats)
        assert frame["scaffold_id"].tolist() == ["benzene"]
        assert frame["frequency"].tolist() == pytest.approx([0.75])
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text(encoding="utf-8"))
        assert str(stats) in manifest["outputs"]


class TestPretrainAndValidate:
    """Tests for the pretrain and validate commands."""

    def test_pretrain_then_resume(self, tmp_path: Path, dataset_file: Path, capsys):
        """Test a short run, then that resuming the finished run does nothing."""
        config = write_config(tmp_path / "run.cfg")
        out = tmp_path / "out"
        args = ["pretrain", "--config", str(config), "--data", str(dataset_file), "--out", str(out)]

        assert main(args) == 0
        summary = last_json(capsys)
        assert summary["final_step"] == 4
        assert summary["steps_run"] == 4
        assert (out / "loss_log.csv").exists()
        assert (out / "step_4.ckpt").exists()
        assert (out / "manifest.json").exists()

        assert main(args + ["--resume", "latest"]) == 0
        assert last_json(capsys) == {"final_step": 4, "steps_run": 0}

    def test_unknown_config_key(self, tmp_path: Path, dataset_file: Path):
        """Test that an unknown key in the run config exits with code 2."""
        config = write_config(tmp_path / "run.cfg", learning_speed=3)
        code = main(
            ["pretrain", "--config", str(config), "--data", str(dataset_file),
             "--out", str(tmp_path / "out")]
        )
        assert code == 2

    def test_validate_is_deterministic(self, tmp_path: Path, dataset_file: Path, tiny_config, capsys):
        """Test that validating twice prints the same sorted JSON."""
        checkpoint = tmp_path / "model.ckpt"
        save_checkpoint(checkpoint, init_state(tiny_config, seed=1))
        args = ["validate", "--checkpoint", str(checkpoint), "--data", str(dataset_file)]

        assert main(args) == 0
        first = capsys.readouterr().out.strip().splitlines()[-1]
        assert main(args) == 0
        second = capsys.readouterr().out.strip().splitlines()[-1]
        assert first == second
        report = json.loads(first)
        assert list(report) == sorted(report)
        assert report["loss_total"] == pytest.approx(
            report["loss_atom"] + report["loss_coor"] + report["loss_distance"]
        )

    def test_validate_bad_checkpoint(self, tmp_path: Path, dataset_file: Path):
        """Test that an unreadable checkpoint exits with code 2."""
        checkpoint = tmp_path / "model.ckpt"
        checkpoint.write_bytes(b"not a checkpoint")
        code = main(["validate", "--checkpoint", str(checkpoint), "--data", str(dataset_file)])
        assert code == 2

    def test_resume_from_weights_only_checkpoint(
        self, tmp_path: Path, dataset_file: Path, tiny_config
    ):
        """Test that resuming needs optimizer moments and still leaves a manifest."""
        plain = tmp_path / "plain.ckpt"
        save_checkpoint(plain, init_state(tiny_config, seed=0))
        out = tmp_path / "out"
        code = main(
            ["pretrain", "--config", str(write_config(tmp_path / "run.cfg")), "--data",
             str(dataset_file), "--out", str(out), "--resume", str(plain)]
        )
        assert code == 2
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["exit_code"] == 2

    def test_pretrain_with_validation_split(self, tmp_path: Path, dataset_file: Path, capsys):
        """Test that a held-out fraction writes the validation log and reports its last loss."""
        config = write_config(tmp_path / "run.cfg", validation_fraction=0.25, eval_every=2)
        out = tmp_path / "out"
        args = ["pretrain", "--config", str(config), "--data", str(dataset_file), "--out", str(out)]
        assert main(args) == 0
        summary = last_json(capsys)
        frame = read_loss_log(out / VALIDATION_LOG_NAME)
        assert frame["step"].tolist() == [2, 4]
        assert summary["val_loss_total"] == pytest.approx(frame["loss_total"].iloc[-1])
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert str(out / VALIDATION_LOG_NAME) in manifest["outputs"]

    @pytest.mark.slow
    def test_two_hundred_steps_log_twenty_rows(self, tmp_path: Path, dataset_file: Path):
        """Test that a 200-step tiny run logs at least 20 rows."""
        config = write_config(
            tmp_path / "run.cfg", peak_lr=3e-3, warmup_steps=20, total_steps=200, checkpoint_every=200
        )
        out = tmp_path / "out"
        args = ["pretrain", "--config", str(config), "--data", str(dataset_file), "--out", str(out)]
        assert main(args) == 0
        assert len(read_loss_log(out / "loss_log.csv")) >= 20

    def test_validate_memorised_molecule(self, tmp_path: Path, molecules, tiny_config, capsys):
        """Test that a head predicting no displacement scores zero coordinate loss without noise."""
        data = tmp_path / "one.jsonl"
        write_dataset(molecules[:1], data)
        state = init_state(tiny_config, seed=1)
        for name, tensor in state:
            if name.startswith("pos_head."):
                tensor.data[...] = 0.0
        checkpoint = tmp_path / "model.ckpt"
        save_checkpoint(checkpoint, state)
        code = main(
            ["validate", "--checkpoint", str(checkpoint), "--data", str(data), "--noise-sigma", "0"]
        )
        assert code == 0
        report = last_json(capsys)
        assert report["loss_coor"] == pytest.approx(0.0, abs=1e-4)
        assert report["loss_distance"] == pytest.approx(0.0, abs=1e-4)


class TestScalingCommands:
    """Tests for fit-scaling, predict-loss and metrics."""

    def test_fit_scaling(self, tmp_path: Path, capsys):
        """Test fitting four planted loss logs and writing predictions."""
        sizes = ["42", "84", "164", "310"]
        logs = [str(write_loss_log(tmp_path / f"{m}.csv", float(m))) for m in sizes]
        out, predictions = tmp_path / "fit.json", tmp_path / "pred.csv"
        code = main(
            ["fit-scaling", "--logs", *logs, "--params-millions", *sizes, "--out", str(out),
             "--predictions", str(predictions)]
        )
        assert code == 0
        fitted = json.loads(out.read_text(encoding="utf-8"))
        assert fitted["residual"] < 1e-6
        assert last_json(capsys)["alpha_m"] == fitted["alpha_m"]
        frame = pd.read_csv(predictions)
        assert list(frame.columns) == ["step", "actual", "predicted", "params_millions"]
        assert np.allclose(frame["predicted"], frame["actual"], atol=1e-5)

    def test_fit_needs_two_sizes(self, tmp_path: Path):
        """Test that one log is insufficient data, exit code 3."""
        log = str(write_loss_log(tmp_path / "42.csv", 42.0))
        code = main(
            ["fit-scaling", "--logs", log, "--params-millions", "42",
             "--out", str(tmp_path / "fit.json")]
        )
        assert code == 3

    def test_fit_count_mismatch(self, tmp_path: Path):
        """Test that logs and sizes must pair up."""
        log = str(write_loss_log(tmp_path / "42.csv", 42.0))
        code = main(
            ["fit-scaling", "--logs", log, "--params-millions", "42", "84",
             "--out", str(tmp_path / "fit.json")]
        )
        assert code == 2

    def test_predict_published_anchor(self, capsys):
        """Test the published law at 1.1B parameters and 810k steps."""
        assert main(["predict-loss", "--params-millions", "1100", "--steps", "810000"]) == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(0.0871, abs=1e-3)

    def test_predict_zero_steps(self):
        """Test that zero steps exit with code 2."""
        assert main(["predict-loss", "--params-millions", "42", "--steps", "0"]) == 2

    def test_predict_from_fit_file(self, tmp_path: Path, capsys):
        """Test that a saved fit file is used when given."""
        path = tmp_path / "fit.json"
        path.write_text(PUBLISHED_FIT.model_dump_json(), encoding="utf-8")
        code = main(
            ["predict-loss", "--fit", str(path), "--params-millions", "570", "--steps", "810000"]
        )
        assert code == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(0.088, abs=1e-3)

    def test_metrics_identical_files(self, tmp_path: Path, capsys):
        """Test that identical files give zero error and unit R squared."""
        path = tmp_path / "values.txt"
        path.write_text("0.3\n0.2\n\n0.1\n", encoding="utf-8")
        assert main(["metrics", "--pred", str(path), "--actual", str(path)]) == 0
        report = last_json(capsys)
        assert report["mae"] == 0.0
        assert report["r_squared"] == 1.0
        assert report["points"] == 3

    def test_metrics_window(self, tmp_path: Path, capsys):
        """Test that the window keeps only the trailing points."""
        pred, actual = tmp_path / "pred.txt", tmp_path / "actual.txt"
        pred.write_text("9\n2\n4\n", encoding="utf-8")
        actual.write_text("1\n1\n2\n", encoding="utf-8")
        assert main(["metrics", "--pred", str(pred), "--actual", str(actual), "--window", "2"]) == 0
        report = last_json(capsys)
        assert report["points"] == 2
        assert report["rmae"] == pytest.approx(1.0)

    def test_metrics_length_mismatch(self, tmp_path: Path):
        """Test that files of different lengths exit with code 2."""
        pred, actual = tmp_path / "pred.txt", tmp_path / "actual.txt"
        pred.write_text("1\n2\n", encoding="utf-8")
        actual.write_text("1\n", encoding="utf-8")
        assert main(["metrics", "--pred", str(pred), "--actual", str(actual)]) == 2

    def test_metrics_mismatch_inside_window(self, tmp_path: Path):
        """Test that unequal files are rejected even when the window would equalise them."""
        pred, actual = tmp_path / "pred.txt", tmp_path / "actual.txt"
        pred.write_text("".join(f"{i}\n" for i in range(1, 11)), encoding="utf-8")
        actual.write_text("".join(f"{i}\n" for i in range(1, 13)), encoding="utf-8")
        args = ["metrics", "--pred", str(pred), "--actual", str(actual), "--window", "5"]
        assert main(args) == 2

    def test_metrics_bad_number_names_line(self, tmp_path: Path):
        """Test that a non-numeric entry is reported with its line, counting blank lines."""
        path = tmp_path / "values.txt"
        path.write_text("0.1\n\n0.2\nabc\n", encoding="utf-8")
        assert main(["metrics", "--pred", str(path), "--actual", str(path)]) == 2
        with pytest.raises(ParseError, match="abc") as excinfo:
            read_numbers(path)
        assert excinfo.value.line == 4

    def test_number_file_reading(self, tmp_path: Path):
        """Test that blank and padded lines are tolerated and an empty file has no values."""
        path = tmp_path / "values.txt"
        path.write_text(" 1.5\n\n-2e-3 \n", encoding="utf-8")
        assert read_numbers(path) == pytest.approx([1.5, -0.002])
        empty = tmp_path / "empty.txt"
        empty.write_text("", encoding="utf-8")
        assert read_numbers(empty) == []


class TestGradcheck:
    """Tests for the gradcheck command."""

    def test_tiny_passes(self, tmp_path: Path, capsys):
        """Test that every check passes on the tiny preset."""
        run_dir = tmp_path / "run"
        assert main(["--run-dir", str(run_dir), "gradcheck", "--preset", "tiny"]) == 0
        assert last_json(capsys) == {"passed": True, "failed": []}
        report = json.loads((run_dir / "gradcheck.json").read_text(encoding="utf-8"))
        assert report["model"]["checked"] == 50

    def test_corrupted_op_fails(self, capsys):
        """Test that a corrupted primitive gradient exits with code 4 and is named."""
        assert main(["gradcheck", "--corrupt-op", "softmax"]) == 4
        assert last_json(capsys)["failed"] == ["softmax"]

    def test_zero_samples(self):
        """Test that at least one sampled entry is required."""
        assert main(["gradcheck", "--samples", "0"]) == 2


class TestManifest:
    """Tests for the run manifest on failure paths."""

    def test_crash_still_writes_manifest(self, tmp_path: Path, monkeypatch):
        """Test that an unexpected exception propagates after the manifest records exit code 1."""

        def explode(args, ctx):
            raise KeyError("boom")

        monkeypatch.setitem(COMMANDS, "predict-loss", explode)
        run_dir = tmp_path / "run"
        with pytest.raises(KeyError):
            main(["--run-dir", str(run_dir), "predict-loss", "--params-millions", "42", "--steps", "1"])
        manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["exit_code"] == 1
