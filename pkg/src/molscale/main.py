"""Main entry point for the molscale command line."""

import argparse
import logging
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from molscale import __version__
from molscale.cli import COMMANDS, RunContext, RunManifest, write_manifest
from molscale.cli.schemas import git_describe
from molscale.config import settings
from molscale.errors import MolscaleError

logger = logging.getLogger(__name__)


def setup_logging(level: Optional[str] = None) -> None:
    """Configure application logging."""
    settings.ensure_directories()

    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(settings.log_path / "molscale.log"),
        ],
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molscale", description="Desk-scale molecular pretraining and scaling-law toolkit"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="Random seed (default from settings)")
    parser.add_argument("--run-dir", type=Path, default=None, help="Where the run manifest goes")
    parser.add_argument("--log-level", default=None, help="Override MOLSCALE_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="Draw molecule ids by temperature-scaled scaffold frequency")
    p.add_argument("--scaffolds", type=Path, required=True)
    p.add_argument("--tau", type=float, default=0.005)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--plan-out", type=Path, default=None, help="Also write the sampling plan JSON")
    p.add_argument(
        "--stats-out", type=Path, default=None, help="Also write a top-k scaffold frequency CSV"
    )
    p.add_argument("--top-k", type=int, default=40)

    p = sub.add_parser("pretrain", help="Pretrain a model on a dataset file")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", dest="out_dir", type=Path, required=True)
    p.add_argument("--resume", default=None, help="Checkpoint path, or 'latest'")

    p = sub.add_parser("validate", help="Validation losses of a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--noise-sigma", type=float, default=0.2)

    p = sub.add_parser("fit-scaling", help="Fit the three-term scaling law to loss logs")
    p.add_argument("--logs", type=Path, nargs="+", required=True)
    p.add_argument("--params-millions", type=float, nargs="+", required=True)
    p.add_argument("--min-step", type=int, default=200_000)
    p.add_argument("--stride", type=int, default=10_000, help="0 keeps every logged step")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--predictions", type=Path, default=None, help="CSV of actual vs predicted")

    p = sub.add_parser("predict-loss", help="Extrapolate validation loss from a fitted law")
    p.add_argument("--fit", type=Path, default=None, help="Fit JSON (default: published fit)")
    p.add_argument("--params-millions", type=float, required=True)
    p.add_argument("--steps", type=float, required=True)

    p = sub.add_parser("metrics", help="Fit-quality metrics between two number files")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--actual", type=Path, required=True)
    p.add_argument("--window", type=int, default=None, help="Only the last N points")

    p = sub.add_parser("gradcheck", help="Finite-difference checks of every primitive and a model")
    p.add_argument("--preset", default="tiny")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--corrupt-op", default=None, help=argparse.SUPPRESS)

    return parser


def resolve_run_dir(args: argparse.Namespace) -> Path:
    if args.run_dir is not None:
        return args.run_dir
    if args.command == "pretrain":
        return args.out_dir
    return settings.runs_path / f"{args.command}-{uuid.uuid4().hex[:12]}"


def main(argv: Optional[list[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    ctx = RunContext(
        seed=args.seed if args.seed is not None else settings.default_seed,
        run_dir=resolve_run_dir(args),
    )
    ctx.run_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=args.command,
        seed=ctx.seed,
        started_at=datetime.now(timezone.utc),
        git_describe=git_describe(),
    )
    logger.info(f"Running {args.command} (seed {ctx.seed}, run dir {ctx.run_dir})")

    exit_code = 1
    try:
        COMMANDS[args.command](args, ctx)
        exit_code = 0
    except MolscaleError as e:
        logger.error(f"{args.command} failed [{e.code}]: {e}")
        exit_code = e.exit_code
    except Exception:
        logger.exception(f"{args.command} crashed")
        raise
    finally:
        manifest = manifest.model_copy(
            update={
                "config": ctx.config,
                "seed": ctx.seed,
                "outputs": ctx.outputs,
                "finished_at": datetime.now(timezone.utc),
                "exit_code": exit_code,
            }
        )
        write_manifest(ctx.run_dir, manifest)
    return exit_code


if __name__ == "__main__":
    raise SystemExit(main())
