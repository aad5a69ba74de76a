"""Command handlers. Each fills in its RunContext and prints its result to stdout."""

import json
import logging
from argparse import Namespace
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import pandas as pd

from molscale.cli.schemas import GradcheckEntry, GradcheckReport, MetricsReport, ValidationReport
from molscale.config import load_run_config
from molscale.diffcore.gradcheck import GradCheckResult, run_primitive_checks
from molscale.errors import (
    ConfigError,
    DatasetIOError,
    EmptyTableError,
    GradientCheckError,
    MoleculeTooLargeError,
    ParseError,
    ShapeMismatchError,
)
from molscale.model import get_preset, load_checkpoint
from molscale.model.verify import model_gradient_check
from molscale.molgraph import MolecularGraph, MoleculeDatasetReader
from molscale.sampler import (
    build_plan,
    read_scaffold_table,
    sample_molecules,
    scaffold_frequency_summary,
    write_sampling_plan,
)
from molscale.scaling import PUBLISHED_FIT, fit, fit_metrics, load_fit, observations_from_log, save_fit
from molscale.trainer import (
    LOSS_LOG_NAME,
    VALIDATION_LOG_NAME,
    CheckpointManager,
    evaluate_dataset,
    read_loss_log,
    train,
)

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """Per-invocation state that ends up in the run manifest."""

    seed: int
    run_dir: Path
    config: dict[str, Any] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def output(self, path: Path) -> Path:
        self.outputs.append(str(path))
        return path


def load_molecules(path: Path) -> list[MolecularGraph]:
    reader = MoleculeDatasetReader(path)
    graphs = list(reader)
    if not graphs:
        raise EmptyTableError(f"dataset {path} has no molecules")
    return graphs


def read_numbers(path: Path) -> list[float]:
    """One number per line; blank lines are skipped."""
    try:
        frame = pd.read_csv(
            path, header=None, names=["value"], dtype=str, index_col=False, skip_blank_lines=False
        )
    except pd.errors.EmptyDataError:
        return []
    except OSError as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"cannot parse {path}: {e}") from e

    text = frame["value"].fillna("").str.strip()
    text = text[text != ""]
    values = pd.to_numeric(text, errors="coerce")
    bad = values.index[values.isna()]
    if len(bad):
        # blank rows are kept, so a row label is its line number minus one
        raise ParseError(f"'{text[bad[0]]}' in {path} is not a number", line=int(bad[0]) + 1)
    return values.astype(float).tolist()


def cmd_sample(args: Namespace, ctx: RunContext) -> None:
    ctx.config = {"scaffolds": str(args.scaffolds), "tau": args.tau, "count": args.count}
    table = read_scaffold_table(args.scaffolds)
    plan = build_plan(table, args.tau, ctx.seed)
    mol_ids = sample_molecules(plan, table, args.count)

    out = ctx.output(Path(args.out))
    try:
        out.write_text("".join(f"{mol_id}\n" for mol_id in mol_ids), encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot write {out}: {e}") from e
    if args.plan_out:
        write_sampling_plan(plan, table, ctx.output(Path(args.plan_out)))
    if args.stats_out:
        summary = scaffold_frequency_summary(table, plan, top_k=args.top_k)
        stats = ctx.output(Path(args.stats_out))
        try:
            summary.to_csv(stats, index=False)
        except OSError as e:
            raise DatasetIOError(f"cannot write {stats}: {e}") from e
        top = summary.iloc[-1]["cumulative_frequency"]
        logger.info(f"Top {len(summary)} scaffolds cover {top:.1%} of {table.total} molecules")
    logger.info(f"Sampled {len(mol_ids)} molecules at tau={args.tau} into {out}")


def cmd_pretrain(args: Namespace, ctx: RunContext) -> None:
    model_cfg, train_cfg = load_run_config(Path(args.config))
    if args.seed is not None:
        train_cfg = train_cfg.model_copy(update={"seed": args.seed})
    ctx.seed = train_cfg.seed
    ctx.config = {"model": model_cfg.model_dump(), "train": train_cfg.model_dump(mode="json")}

    out = Path(args.out_dir)
    resume = None
    if args.resume == "latest":
        resume = CheckpointManager(out).latest()
        if resume is None:
            logger.info(f"No checkpoint in {out}; starting from scratch")
    elif args.resume:
        resume = Path(args.resume)

    graphs = load_molecules(args.data)
    result = train(model_cfg, train_cfg, graphs, run_dir=out, resume=resume)
    ctx.output(out / LOSS_LOG_NAME)
    if (out / VALIDATION_LOG_NAME).exists():
        ctx.output(out / VALIDATION_LOG_NAME)
    for _, path in CheckpointManager(out).checkpoints():
        ctx.output(path)

    last = result.history[-1] if result.history else None
    summary = {"final_step": result.final_step, "steps_run": result.steps_run}
    if last is not None:
        summary["loss_total"] = last.loss_total
    if result.validation:
        summary["val_loss_total"] = result.validation[-1].loss_total
    print(json.dumps(summary, sort_keys=True))


def cmd_validate(args: Namespace, ctx: RunContext) -> None:
    ctx.config = {
        "checkpoint": str(args.checkpoint),
        "data": str(args.data),
        "noise_sigma": args.noise_sigma,
    }
    checkpoint = load_checkpoint(args.checkpoint)
    graphs = load_molecules(args.data)
    limit = checkpoint.state.config.max_atoms
    for graph in graphs:
        if graph.n > limit:
            raise MoleculeTooLargeError(f"molecule {graph.mol_id} has {graph.n} atoms, limit is {limit}")

    bundle = evaluate_dataset(checkpoint.state, graphs, seed=ctx.seed, noise_sigma=args.noise_sigma)
    report = ValidationReport(**bundle.as_dict())
    text = json.dumps(report.model_dump(), sort_keys=True)
    (ctx.run_dir / "validation.json").write_text(text + "\n", encoding="utf-8")
    ctx.output(ctx.run_dir / "validation.json")
    print(text)


def cmd_fit_scaling(args: Namespace, ctx: RunContext) -> None:
    if len(args.logs) != len(args.params_millions):
        raise ConfigError(
            f"got {len(args.logs)} --logs but {len(args.params_millions)} --params-millions"
        )
    stride = args.stride or None
    ctx.config = {
        "logs": [str(p) for p in args.logs],
        "params_millions": args.params_millions,
        "min_step": args.min_step,
        "stride": stride,
    }

    observations = []
    for path, size in zip(args.logs, args.params_millions):
        observations.extend(observations_from_log(read_loss_log(path), size, args.min_step, stride))
    fitted = fit(observations, args.min_step, stride)
    save_fit(fitted, ctx.output(Path(args.out)))

    if args.predictions:
        frame = pd.DataFrame(
            {
                "step": [int(obs.s) for obs in observations],
                "actual": [obs.loss for obs in observations],
                "predicted": [fitted.predict(obs.m, obs.s) for obs in observations],
                "params_millions": [obs.m for obs in observations],
            }
        )
        frame.to_csv(ctx.output(Path(args.predictions)), index=False)
    print(fitted.model_dump_json(exclude={"iterations"}))


def cmd_predict_loss(args: Namespace, ctx: RunContext) -> None:
    ctx.config = {
        "fit": str(args.fit) if args.fit else None,
        "params_millions": args.params_millions,
        "steps": args.steps,
    }
    law = load_fit(args.fit) if args.fit else PUBLISHED_FIT
    loss = law.predict(args.params_millions, args.steps)
    print(f"{loss:.6f}")


def cmd_metrics(args: Namespace, ctx: RunContext) -> None:
    ctx.config = {"pred": str(args.pred), "actual": str(args.actual), "window": args.window}
    predicted, actual = read_numbers(args.pred), read_numbers(args.actual)
    if len(predicted) != len(actual):
        raise ShapeMismatchError(
            f"{args.pred} has {len(predicted)} values but {args.actual} has {len(actual)}"
        )
    if args.window is not None:
        if args.window < 1:
            raise ConfigError(f"--window must be at least 1, got {args.window}")
        predicted, actual = predicted[-args.window:], actual[-args.window:]
    metrics = fit_metrics(predicted, actual)
    report = MetricsReport(points=len(actual), **metrics.as_dict())
    print(json.dumps(report.model_dump(), sort_keys=True))


def _entry(result: GradCheckResult) -> GradcheckEntry:
    return GradcheckEntry(
        name=result.name, rel_error=result.rel_error, checked=result.checked, passed=result.passed
    )


def cmd_gradcheck(args: Namespace, ctx: RunContext) -> None:
    if args.samples < 1:
        raise ConfigError(f"--samples must be at least 1, got {args.samples}")
    ctx.config = {"preset": args.preset, "samples": args.samples}
    cfg = get_preset(args.preset)

    primitives = run_primitive_checks(corrupt=args.corrupt_op, seed=ctx.seed)
    model = model_gradient_check(cfg, samples=args.samples, seed=ctx.seed)
    report = GradcheckReport(
        preset=cfg.name, primitives=[_entry(r) for r in primitives], model=_entry(model)
    )
    path = ctx.output(ctx.run_dir / "gradcheck.json")
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    print(json.dumps({"passed": not report.failed, "failed": report.failed}, sort_keys=True))
    if report.failed:
        raise GradientCheckError(f"gradient check failed for: {', '.join(report.failed)}")


COMMANDS: dict[str, Callable[[Namespace, RunContext], None]] = {
    "sample": cmd_sample,
    "pretrain": cmd_pretrain,
    "validate": cmd_validate,
    "fit-scaling": cmd_fit_scaling,
    "predict-loss": cmd_predict_loss,
    "metrics": cmd_metrics,
    "gradcheck": cmd_gradcheck,
}
