"""Tests for the optimizer, schedule, loss log, checkpoints and training loop."""

from pathlib import Path

import numpy as np
import pytest

from molscale.diffcore import Tensor
from molscale.errors import (
    CheckpointIOError,
    ConfigError,
    DomainError,
    EmptyTableError,
    NanGradientError,
    ParseError,
)
from molscale.model import init_state
from molscale.molgraph import synthetic_dataset
from molscale.trainer import (
    LOSS_LOG_NAME,
    VALIDATION_LOG_NAME,
    AdamW,
    CheckpointManager,
    LossLog,
    LossLogRow,
    TrainConfig,
    adamw_step,
    clip_gradients,
    evaluate_dataset,
    lr_at,
    read_loss_log,
    split_dataset,
    train,
)


def row(step: int, loss: float = 1.0) -> LossLogRow:
    return LossLogRow(step, loss, loss / 2, loss / 4, loss / 4, 1e-4, 0.01, 5.0)


@pytest.fixture
def schedule() -> TrainConfig:
    return TrainConfig.model_validate({"warmup_steps": 100_000, "total_steps": 1_000_000})


class TestSchedule:
    """Tests for warmup and linear decay."""

    def test_start_is_zero(self, schedule):
        """Test that the rate is zero before the first update."""
        assert lr_at(0, schedule) == 0.0

    def test_peak_at_end_of_warmup(self, schedule):
        """Test that warmup reaches the peak rate."""
        assert lr_at(100_000, schedule) == pytest.approx(1e-4)
        assert lr_at(50_000, schedule) == pytest.approx(5e-5)

    def test_midway_through_decay(self, schedule):
        """Test that the rate halves midway between warmup and the end."""
        assert lr_at(550_000, schedule) == pytest.approx(5e-5)

    def test_zero_after_end(self, schedule):
        """Test that the rate is zero at and past the last step."""
        assert lr_at(1_000_000, schedule) == 0.0
        assert lr_at(2_000_000, schedule) == 0.0

    def test_negative_step(self, schedule):
        """Test that negative steps are rejected."""
        with pytest.raises(DomainError):
            lr_at(-1, schedule)

    def test_warmup_must_precede_end(self):
        """Test that warmup longer than the run is a config error."""
        with pytest.raises(ValueError):
            TrainConfig(warmup_steps=100, total_steps=50)


class TestAdamW:
    """Tests for the update rule and the optimizer wrapper."""

    def test_single_step_matches_closed_form(self):
        """Test one update against the hand-written AdamW formula."""
        param = np.array([1.0, -2.0, 0.5])
        grad = np.array([0.1, -0.3, 0.0])
        m, v = np.zeros(3), np.zeros(3)
        lr, wd, eps, (b1, b2) = 1e-2, 1e-4, 1e-8, (0.9, 0.99)

        expected = param * (1 - lr * wd)
        m_hat = (1 - b1) * grad / (1 - b1)
        v_hat = (1 - b2) * grad**2 / (1 - b2)
        expected = expected - lr * m_hat / (np.sqrt(v_hat) + eps)

        adamw_step(param, grad, m, v, 1, lr, (b1, b2), eps, wd)
        assert np.allclose(param, expected, rtol=0, atol=1e-12)
        assert np.allclose(m, 0.1 * grad, atol=1e-15)

    def test_zero_gradient_only_decays(self):
        """Test that a zero gradient leaves only the weight decay."""
        param = np.array([2.0, -4.0])
        adamw_step(param, np.zeros(2), np.zeros(2), np.zeros(2), 1, lr=0.1, weight_decay=0.5)
        assert param.tolist() == pytest.approx([1.9, -3.8])

    def test_nan_gradient_aborts_step(self):
        """Test that a non-finite gradient raises and leaves every parameter untouched."""
        a = Tensor(np.ones(3), requires_grad=True)
        b = Tensor(np.ones(2), requires_grad=True)
        a.grad = np.array([0.1, 0.2, 0.3], dtype=np.float32)
        b.grad = np.array([np.nan, 0.0], dtype=np.float32)
        optimizer = AdamW([("a", a), ("b", b)])
        with pytest.raises(NanGradientError, match="b"):
            optimizer.step(1e-3)
        assert a.data.tolist() == [1.0, 1.0, 1.0]
        assert b.data.tolist() == [1.0, 1.0]
        assert optimizer.t == 0

    def test_constant_gradient_over_many_steps(self):
        """Test that a constant gradient moves a scalar by lr * sign(g) per step after decay."""
        lr, wd, eps, g = 1e-2, 1e-4, 1e-8, 0.3
        param, m, v = np.array([1.0]), np.zeros(1), np.zeros(1)
        expected = 1.0
        for t in range(1, 26):
            adamw_step(param, np.array([g]), m, v, t, lr, (0.9, 0.99), eps, wd)
            expected = expected * (1 - lr * wd) - lr * g / (abs(g) + eps)
            assert param[0] == pytest.approx(expected, abs=1e-12)

    def test_checkpoint_without_moments(self, tiny_config):
        """Test that restoring from arrays lacking optimizer moments names the missing key."""
        optimizer = AdamW(init_state(tiny_config, seed=0))
        with pytest.raises(CheckpointIOError, match="opt.m."):
            optimizer.load_state_arrays({}, 10)
        assert optimizer.t == 0


class TestClipping:
    """Tests for global-norm clipping."""

    def test_small_norm_unchanged(self):
        """Test that gradients under the limit are not scaled."""
        w = Tensor(np.zeros(2), requires_grad=True)
        w.grad = np.array([0.3, 0.4])
        assert clip_gradients([w], 1.0) == pytest.approx(0.5)
        assert w.grad.tolist() == pytest.approx([0.3, 0.4])

    def test_large_norm_scaled(self):
        """Test that a global norm of five is scaled down to one."""
        a, b = Tensor([0.0], requires_grad=True), Tensor([0.0], requires_grad=True)
        a.grad, b.grad = np.array([3.0]), np.array([4.0])
        assert clip_gradients([a, b], 1.0) == pytest.approx(5.0)
        assert a.grad.tolist() == pytest.approx([0.6])
        assert b.grad.tolist() == pytest.approx([0.8])


class TestLossLog:
    """Tests for the loss log and its CSV file."""

    def test_steps_must_increase(self):
        """Test that a repeated step is rejected."""
        log = LossLog([row(10)])
        with pytest.raises(ValueError):
            log.append(row(10))

    def test_truncate_after(self):
        """Test dropping rows a resumed run will recompute."""
        log = LossLog([row(s) for s in (10, 20, 30, 40)]).truncate_after(20)
        assert [r.step for r in log.rows] == [10, 20]
        assert log.last_step == 20

    def test_write_then_read(self, tmp_path: Path):
        """Test that a written log reads back unchanged."""
        path = tmp_path / LOSS_LOG_NAME
        LossLog([row(1, 3.0), row(2, 2.5)]).write(path)
        loaded = LossLog.read(path)
        assert loaded.rows == [row(1, 3.0), row(2, 2.5)]

    def test_missing_columns(self, tmp_path: Path):
        """Test that a CSV without the log header is rejected."""
        path = tmp_path / "other.csv"
        path.write_text("step,loss\n1,2.0\n", encoding="utf-8")
        with pytest.raises(ParseError, match="loss_total"):
            read_loss_log(path)

    def test_repeated_step_in_file(self, tmp_path: Path):
        """Test that a file with the same step twice is rejected."""
        path = tmp_path / LOSS_LOG_NAME
        LossLog([row(1), row(2)]).write(path)
        frame = read_loss_log(path)
        frame.loc[1, "step"] = 1
        frame.to_csv(path, index=False)
        with pytest.raises(ParseError, match="strictly increasing"):
            read_loss_log(path)


class TestCheckpointManager:
    """Tests for checkpoint rotation."""

    def test_keeps_newest(self, tmp_path: Path, tiny_config):
        """Test that saving every 10 steps to 100 with keep=3 leaves 80, 90 and 100."""
        state = init_state(tiny_config, seed=0)
        manager = CheckpointManager(tmp_path, keep=3)
        for step in range(10, 101, 10):
            manager.save(step, state, AdamW(state))
        manager.close()
        assert [step for step, _ in manager.checkpoints()] == [80, 90, 100]
        assert manager.latest() == tmp_path / "step_100.ckpt"

    def test_background_writes(self, tmp_path: Path, tiny_config):
        """Test that asynchronous saves complete and rotate on close."""
        state = init_state(tiny_config, seed=0)
        manager = CheckpointManager(tmp_path, keep=2, async_writes=True)
        for step in (1, 2, 3):
            manager.save(step, state, AdamW(state))
        manager.close()
        assert [step for step, _ in manager.checkpoints()] == [2, 3]

    def test_empty_directory(self, tmp_path: Path):
        """Test that a fresh directory has no latest checkpoint."""
        assert CheckpointManager(tmp_path / "none").latest() is None


class TestValidationSplit:
    """Tests for the held-out validation split."""

    def test_zero_fraction_holds_out_nothing(self, molecules):
        """Test that the default trains on every molecule."""
        train_graphs, val_graphs = split_dataset(molecules, 0.0, seed=3)
        assert train_graphs == molecules
        assert val_graphs == []

    def test_split_partitions_dataset(self, molecules):
        """Test that a quarter of sixteen molecules is held out, disjoint from training."""
        train_graphs, val_graphs = split_dataset(molecules, 0.25, seed=3)
        assert len(val_graphs) == 4
        assert len(train_graphs) == 12
        ids = [g.mol_id for g in train_graphs + val_graphs]
        assert sorted(ids) == sorted(g.mol_id for g in molecules)

    def test_same_seed_same_split(self, molecules):
        """Test that the split depends only on the seed."""
        first = [g.mol_id for g in split_dataset(molecules, 0.3, seed=9)[1]]
        second = [g.mol_id for g in split_dataset(molecules, 0.3, seed=9)[1]]
        assert first == second

    def test_at_least_one_held_out(self, molecules):
        """Test that a tiny positive fraction still holds out one molecule."""
        assert len(split_dataset(molecules, 1e-6)[1]) == 1

    def test_nothing_left_to_train_on(self, molecules):
        """Test that holding out every molecule is a config error."""
        with pytest.raises(ConfigError):
            split_dataset(molecules[:1], 0.5)

    def test_fraction_must_be_below_one(self):
        """Test that the config rejects a fraction of one."""
        with pytest.raises(ValueError):
            TrainConfig(validation_fraction=1.0)


class TestTraining:
    """Tests for the training loop."""

    def test_empty_dataset(self, tiny_config):
        """Test that training needs molecules."""
        with pytest.raises(EmptyTableError):
            train(tiny_config, TrainConfig(), [])

    def test_short_run_writes_log_and_checkpoint(self, tmp_path: Path, tiny_config, molecules):
        """Test that a short run logs every step and checkpoints at the end."""
        cfg = TrainConfig(total_steps=6, warmup_steps=2, log_every=1, checkpoint_every=4)
        result = train(tiny_config, cfg, molecules, run_dir=tmp_path)
        assert result.final_step == 6
        assert result.steps_run == 6
        assert [r.step for r in read_loss_log(tmp_path / LOSS_LOG_NAME).itertuples()] == list(
            range(1, 7)
        )
        assert [step for step, _ in CheckpointManager(tmp_path).checkpoints()] == [4, 6]
        assert all(np.isfinite(r.loss_total) for r in result.history)

    def test_finished_run_resumes_to_nothing(self, tmp_path: Path, tiny_config, molecules):
        """Test that resuming a completed run performs no steps."""
        cfg = TrainConfig(total_steps=4, warmup_steps=1, checkpoint_every=2)
        train(tiny_config, cfg, molecules, run_dir=tmp_path)
        result = train(
            tiny_config, cfg, molecules, run_dir=tmp_path, resume=CheckpointManager(tmp_path).latest()
        )
        assert result.steps_run == 0
        assert result.final_step == 4

    def test_validation_log_written(self, tmp_path: Path, tiny_config, molecules):
        """Test that held-out losses are logged every eval interval and at the last step."""
        cfg = TrainConfig(
            total_steps=5, warmup_steps=1, checkpoint_every=5, validation_fraction=0.25, eval_every=2
        )
        result = train(tiny_config, cfg, molecules, run_dir=tmp_path)
        assert [r.step for r in result.validation] == [2, 4, 5]
        frame = read_loss_log(tmp_path / VALIDATION_LOG_NAME)
        assert frame["step"].tolist() == [2, 4, 5]
        assert np.all(np.isfinite(frame["loss_total"]))

    def test_no_validation_log_without_split(self, tmp_path: Path, tiny_config, molecules):
        """Test that a zero fraction writes no validation log."""
        cfg = TrainConfig(total_steps=2, warmup_steps=1, checkpoint_every=2)
        result = train(tiny_config, cfg, molecules, run_dir=tmp_path)
        assert result.validation == []
        assert not (tmp_path / VALIDATION_LOG_NAME).exists()

    def test_evaluation_is_deterministic(self, tiny_config, molecules):
        """Test that evaluating twice with one seed gives identical losses."""
        state = init_state(tiny_config, seed=5)
        first = evaluate_dataset(state, molecules, seed=2)
        second = evaluate_dataset(state, molecules, seed=2)
        assert first.as_dict() == second.as_dict()
        assert first.loss_total == pytest.approx(
            first.loss_atom + first.loss_coor + first.loss_distance
        )

    @pytest.mark.slow
    def test_loss_decreases(self, tmp_path: Path, tiny_config):
        """Test that 200 steps on synthetic molecules cut the loss by at least 30%."""
        dataset = synthetic_dataset(64, seed=0, min_atoms=3, max_atoms=10)
        cfg = TrainConfig(peak_lr=3e-3, warmup_steps=20, total_steps=200, checkpoint_every=200)
        result = train(tiny_config, cfg, dataset, run_dir=tmp_path)
        losses = np.array([r.loss_total for r in result.history])
        atom = np.array([r.loss_atom for r in result.history])
        assert len(losses) == 200
        assert losses[-10:].mean() <= 0.7 * losses[:10].mean()
        assert atom[-10:].mean() < atom[:10].mean()

    @pytest.mark.slow
    def test_resume_reproduces_uninterrupted_run(self, tmp_path: Path, tiny_config):
        """Test that stopping at step 50 and resuming matches the straight-through run."""
        dataset = synthetic_dataset(32, seed=1, min_atoms=3, max_atoms=8)
        cfg = TrainConfig(
            peak_lr=1e-3, warmup_steps=10, total_steps=100, checkpoint_every=50, log_every=1
        )
        straight = train(tiny_config, cfg, dataset, run_dir=tmp_path / "a")
        resumed = train(
            tiny_config, cfg, dataset, run_dir=tmp_path / "b", resume=tmp_path / "a" / "step_50.ckpt"
        )
        assert resumed.start_step == 50
        expected = [r.loss_total for r in straight.history[50:]]
        actual = [r.loss_total for r in resumed.history]
        assert actual == pytest.approx(expected, abs=1e-6)
