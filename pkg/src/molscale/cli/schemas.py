"""Pydantic schemas for command reports and the per-run manifest."""

import logging
import subprocess
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class RunManifest(BaseModel):
    """What ran, with which settings, and what it produced."""

    command: str
    config: dict[str, Any] = Field(default_factory=dict)
    seed: int
    started_at: datetime
    finished_at: Optional[datetime] = None
    git_describe: Optional[str] = None
    outputs: list[str] = Field(default_factory=list)
    exit_code: int = 0


class ValidationReport(BaseModel):
    """Validation losses averaged over a dataset."""

    loss_atom: float
    loss_coor: float
    loss_distance: float
    loss_total: float


class MetricsReport(BaseModel):
    """Fit-quality metrics; ``None`` marks a metric undefined for the inputs."""

    points: int
    mae: float
    rmae: Optional[float] = None
    mse: float
    r_squared: Optional[float] = None
    pearson: Optional[float] = None


class GradcheckEntry(BaseModel):
    name: str
    rel_error: float
    checked: int
    passed: bool


class GradcheckReport(BaseModel):
    preset: str
    primitives: list[GradcheckEntry]
    model: GradcheckEntry

    @property
    def failed(self) -> list[str]:
        return [e.name for e in [*self.primitives, self.model] if not e.passed]


def git_describe() -> Optional[str]:
    """``git describe`` of the source tree, or None outside a checkout."""
    try:
        completed = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    if completed.returncode != 0:
        return None
    return completed.stdout.strip() or None


def write_manifest(run_dir: Path, manifest: RunManifest) -> Path:
    """Write ``manifest.json`` via a temporary file so readers never see a partial one."""
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / MANIFEST_NAME
    tmp = run_dir / f".{MANIFEST_NAME}.tmp"
    tmp.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    tmp.replace(path)
    logger.debug(f"Wrote run manifest {path}")
    return path
