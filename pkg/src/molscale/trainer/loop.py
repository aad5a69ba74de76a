"""The pretraining loop and dataset evaluation."""

import logging
import time
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from molscale.diffcore import backward, no_grad
from molscale.errors import ConfigError, EmptyTableError, MoleculeTooLargeError
from molscale.model import (
    LossBundle,
    ModelConfig,
    ModelState,
    batch_losses,
    collate,
    init_state,
    load_checkpoint,
    make_noised_sample,
    sample_rng,
)
from molscale.molgraph import MolecularGraph, compute_spd
from molscale.sampler import ScaffoldSampler, ScaffoldTable, build_plan, plan_batches
from molscale.trainer.checkpoints import CheckpointManager
from molscale.trainer.config import TrainConfig
from molscale.trainer.logbook import LossLog, LossLogRow
from molscale.trainer.optim import AdamW, clip_gradients
from molscale.trainer.schedule import lr_at

logger = logging.getLogger(__name__)

LOSS_LOG_NAME = "loss_log.csv"
VALIDATION_LOG_NAME = "validation_log.csv"


@dataclass
class TrainResult:
    state: ModelState
    log: LossLog
    history: list[LossLogRow] = field(default_factory=list)
    validation: list[LossLogRow] = field(default_factory=list)
    start_step: int = 0
    final_step: int = 0

    @property
    def steps_run(self) -> int:
        return self.final_step - self.start_step


def _derived_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def split_dataset(
    dataset: Sequence[MolecularGraph], fraction: float, seed: int = 0
) -> tuple[list[MolecularGraph], list[MolecularGraph]]:
    """Hold out a random ``fraction`` of molecules, at least one when the fraction is positive.

    The split depends only on ``seed``; both halves keep dataset order.
    """
    graphs = list(dataset)
    if fraction <= 0:
        return graphs, []
    n_val = max(1, round(fraction * len(graphs)))
    if n_val >= len(graphs):
        raise ConfigError(
            f"validation_fraction {fraction} leaves no training molecules out of {len(graphs)}"
        )
    held_out = np.zeros(len(graphs), dtype=bool)
    held_out[np.random.default_rng(seed).permutation(len(graphs))[:n_val]] = True
    train_graphs = [g for g, held in zip(graphs, held_out) if not held]
    val_graphs = [g for g, held in zip(graphs, held_out) if held]
    return train_graphs, val_graphs


def batch_stream(
    dataset: Sequence[MolecularGraph], cfg: TrainConfig
) -> Iterator[tuple[int, list[MolecularGraph]]]:
    """Endless (epoch, molecules) batches.

    Each epoch draws ``len(dataset)`` molecules through the scaffold plan and
    packs them into token-budget batches; both depend only on (seed, epoch).
    """
    by_id = {graph.mol_id: graph for graph in dataset}
    table = ScaffoldTable.from_molecules(dataset)
    epoch = 0
    while True:
        epoch_seed = _derived_seed(cfg.seed, epoch)
        plan = build_plan(table, cfg.tau, seed=epoch_seed)
        graphs = [by_id[mol_id] for mol_id in ScaffoldSampler(plan, table).draw(len(dataset))]
        batches = plan_batches([g.n for g in graphs], cfg.token_budget, epoch_seed, cfg.bucket_width)
        for indices in batches.batches:
            yield epoch, [graphs[i] for i in indices]
        epoch += 1


class Trainer:
    """Owns the model state, optimizer and run-directory bookkeeping."""

    def __init__(
        self,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        dataset: Sequence[MolecularGraph],
        run_dir: Optional[Path] = None,
    ):
        if not dataset:
            raise EmptyTableError("training dataset is empty")
        largest = max(dataset, key=lambda g: g.n)
        if largest.n > model_cfg.max_atoms:
            raise MoleculeTooLargeError(
                f"molecule {largest.mol_id} has {largest.n} atoms, limit is {model_cfg.max_atoms}"
            )
        self.model_cfg = model_cfg
        self.cfg = train_cfg
        self.dataset, self.validation = split_dataset(
            dataset, train_cfg.validation_fraction, train_cfg.seed
        )
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.spd = {graph.mol_id: compute_spd(graph) for graph in self.dataset}

        self.state = init_state(model_cfg, train_cfg.seed)
        self.optimizer = self._make_optimizer()
        self.log = LossLog()
        self.val_log = LossLog()
        self.step = 0
        self.checkpoints = (
            CheckpointManager(self.run_dir, train_cfg.checkpoint_keep, train_cfg.async_checkpoints)
            if self.run_dir is not None
            else None
        )

    def _make_optimizer(self) -> AdamW:
        return AdamW(self.state, self.cfg.betas, self.cfg.eps, self.cfg.weight_decay)

    @property
    def log_path(self) -> Optional[Path]:
        return self.run_dir / LOSS_LOG_NAME if self.run_dir is not None else None

    @property
    def validation_log_path(self) -> Optional[Path]:
        return self.run_dir / VALIDATION_LOG_NAME if self.run_dir is not None else None

    def resume(self, path: Path) -> None:
        """Restore parameters, optimizer moments and the loss log up to the checkpoint step."""
        checkpoint = load_checkpoint(path)
        if checkpoint.state.config != self.model_cfg:
            raise ConfigError(f"checkpoint {path} was trained with a different model config")
        self.state = checkpoint.state
        self.optimizer = self._make_optimizer()
        self.step = int(checkpoint.meta.get("step", 0))
        self.optimizer.load_state_arrays(checkpoint.arrays, self.step)
        if self.log_path is not None and self.log_path.exists():
            self.log = LossLog.read(self.log_path).truncate_after(self.step)
        if self.validation_log_path is not None and self.validation_log_path.exists():
            self.val_log = LossLog.read(self.validation_log_path).truncate_after(self.step)
        logger.info(f"Resumed from {path} at step {self.step}")

    def _prepare(self, epoch: int, graphs: list[MolecularGraph]):
        cfg = self.cfg
        samples = [
            make_noised_sample(
                graph,
                sample_rng(cfg.seed, epoch, graph.mol_id),
                cfg.mask_rate,
                cfg.noise_sigma,
                cfg.feature_mask_p,
                spd=self.spd[graph.mol_id],
            )
            for graph in graphs
        ]
        return collate(samples, self.model_cfg.max_atoms)

    def train_step(self, step: int, epoch: int, graphs: list[MolecularGraph]) -> LossLogRow:
        started = time.perf_counter()
        batch = self._prepare(epoch, graphs)
        self.state.zero_grad()
        losses = batch_losses(self.state, batch)
        backward(losses.tensor)
        clip_gradients(self.state.params.values(), self.cfg.clip_norm)
        lr = lr_at(step, self.cfg)
        self.optimizer.step(lr)
        return LossLogRow(
            step=step,
            loss_total=losses.loss_total,
            loss_atom=losses.loss_atom,
            loss_coor=losses.loss_coor,
            loss_distance=losses.loss_distance,
            lr=lr,
            params_millions=self.state.size / 1e6,
            wall_ms=(time.perf_counter() - started) * 1000.0,
        )

    def evaluate(self, step: int) -> LossLogRow:
        """Losses on the held-out molecules, appended to the validation log."""
        started = time.perf_counter()
        cfg = self.cfg
        bundle = evaluate_dataset(
            self.state, self.validation, cfg.seed, cfg.noise_sigma, cfg.mask_rate
        )
        row = LossLogRow(
            step=step,
            loss_total=bundle.loss_total,
            loss_atom=bundle.loss_atom,
            loss_coor=bundle.loss_coor,
            loss_distance=bundle.loss_distance,
            lr=lr_at(step, cfg),
            params_millions=self.state.size / 1e6,
            wall_ms=(time.perf_counter() - started) * 1000.0,
        )
        self.val_log.append(row)
        if self.validation_log_path is not None:
            self.val_log.write(self.validation_log_path)
        logger.info(f"step {step}: validation loss {row.loss_total:.4f}")
        return row

    def run(self) -> TrainResult:
        cfg = self.cfg
        start = self.step
        result = TrainResult(self.state, self.log, start_step=start, final_step=start)
        if start >= cfg.total_steps:
            logger.info(f"Run already finished at step {start}; nothing to do")
            return result

        logger.info(
            f"Training {self.model_cfg.name} for steps {start + 1}..{cfg.total_steps} "
            f"on {len(self.dataset)} molecules ({len(self.validation)} held out)"
        )
        step = 0
        try:
            for epoch, graphs in batch_stream(self.dataset, cfg):
                step += 1
                if step <= start:
                    continue
                row = self.train_step(step, epoch, graphs)
                result.history.append(row)
                self.step = result.final_step = step
                if step % cfg.log_every == 0 or step == cfg.total_steps:
                    self.log.append(row)
                    if self.log_path is not None:
                        self.log.write(self.log_path)
                    logger.info(f"step {step}: loss {row.loss_total:.4f} lr {row.lr:.2e}")
                if self.validation and (step % cfg.eval_every == 0 or step == cfg.total_steps):
                    result.validation.append(self.evaluate(step))
                if self.checkpoints is not None and (
                    step % cfg.checkpoint_every == 0 or step == cfg.total_steps
                ):
                    self.checkpoints.save(step, self.state, self.optimizer, {"model": self.model_cfg.name})
                if step >= cfg.total_steps:
                    break
        finally:
            if self.checkpoints is not None:
                self.checkpoints.close()
        result.state = self.state
        return result


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    dataset: Sequence[MolecularGraph],
    run_dir: Optional[Path] = None,
    resume: Optional[Path] = None,
) -> TrainResult:
    """Pretrain from scratch, or continue from ``resume``."""
    trainer = Trainer(model_cfg, train_cfg, dataset, run_dir)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run()


def evaluate_dataset(
    state: ModelState,
    graphs: Sequence[MolecularGraph],
    seed: int = 0,
    noise_sigma: float = 0.2,
    mask_rate: float = 0.15,
    feature_mask_p: float = 0.0,
) -> LossBundle:
    """Per-molecule losses averaged over ``graphs``, without recording gradients."""
    if not graphs:
        raise EmptyTableError("validation dataset is empty")
    totals = np.zeros(3)
    with no_grad():
        for graph in graphs:
            sample = make_noised_sample(
                graph, sample_rng(seed, 0, graph.mol_id), mask_rate, noise_sigma, feature_mask_p
            )
            bundle = batch_losses(state, collate([sample], state.config.max_atoms))
            totals += (bundle.loss_atom, bundle.loss_coor, bundle.loss_distance)
    mean = totals / len(graphs)
    logger.info(f"Evaluated {len(graphs)} molecules: loss {mean.sum():.4f}")
    return LossBundle.from_components(float(mean[0]), float(mean[1]), float(mean[2]))
