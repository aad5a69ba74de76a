"""Loss log rows and their CSV file."""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import pandas as pd

from molscale.errors import DatasetIOError, ParseError

logger = logging.getLogger(__name__)

LOG_COLUMNS = [
    "step",
    "loss_total",
    "loss_atom",
    "loss_coor",
    "loss_distance",
    "lr",
    "params_millions",
    "wall_ms",
]


@dataclass(frozen=True)
class LossLogRow:
    step: int
    loss_total: float
    loss_atom: float
    loss_coor: float
    loss_distance: float
    lr: float
    params_millions: float
    wall_ms: float


class LossLog:
    """Rows with strictly increasing steps, persisted as CSV."""

    def __init__(self, rows: Optional[list[LossLogRow]] = None):
        self.rows: list[LossLogRow] = []
        for row in rows or []:
            self.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def last_step(self) -> int:
        return self.rows[-1].step if self.rows else 0

    def append(self, row: LossLogRow) -> None:
        if self.rows and row.step <= self.last_step:
            raise ValueError(f"log step {row.step} does not follow step {self.last_step}")
        self.rows.append(row)

    def truncate_after(self, step: int) -> "LossLog":
        """Drop rows past ``step``, e.g. those a resumed run will recompute."""
        self.rows = [row for row in self.rows if row.step <= step]
        return self

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=LOG_COLUMNS)

    def write(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def read(cls, path: Path) -> "LossLog":
        frame = read_loss_log(path)
        rows = [
            LossLogRow(int(r.step), *(float(getattr(r, c)) for c in LOG_COLUMNS[1:]))
            for r in frame.itertuples(index=False)
        ]
        return cls(rows)


def read_loss_log(path: Path) -> pd.DataFrame:
    """Read a loss-log CSV, checking its header."""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as e:
        raise DatasetIOError(f"loss log not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"loss log {path} is empty") from e
    except (OSError, pd.errors.ParserError) as e:
        raise DatasetIOError(f"cannot read loss log {path}: {e}") from e

    missing = [c for c in LOG_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"loss log {path} lacks columns {', '.join(missing)}", line=1)
    steps = frame["step"]
    if steps.isna().any() or not steps.is_monotonic_increasing or not steps.is_unique:
        raise ParseError(f"loss log {path} steps are not strictly increasing")
    logger.info(f"Read {len(frame)} loss-log rows from {path.name}")
    return frame
