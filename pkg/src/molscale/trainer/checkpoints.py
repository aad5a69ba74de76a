"""Checkpoint rotation in a run directory."""

import logging
import re
from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional

from molscale.errors import CheckpointIOError
from molscale.model.checkpoint import encode_checkpoint, write_atomic
from molscale.model.params import ModelState
from molscale.trainer.optim import AdamW

logger = logging.getLogger(__name__)

CHECKPOINT_PATTERN = re.compile(r"^step_(\d+)\.ckpt$")


class CheckpointManager:
    """Writes ``step_<N>.ckpt`` files and keeps only the newest ``keep`` of them.

    With ``async_writes`` the parameters are snapshotted synchronously and the
    file is written by a single background worker.
    """

    def __init__(self, directory: Path, keep: int = 10, async_writes: bool = False):
        self.directory = Path(directory)
        self.keep = keep
        self._executor = ThreadPoolExecutor(max_workers=1) if async_writes else None
        self._pending: list[Future] = []

    def path_for(self, step: int) -> Path:
        return self.directory / f"step_{step}.ckpt"

    def checkpoints(self) -> list[tuple[int, Path]]:
        """Existing checkpoints, oldest first."""
        if not self.directory.exists():
            return []
        found = []
        for path in self.directory.iterdir():
            match = CHECKPOINT_PATTERN.match(path.name)
            if match:
                found.append((int(match.group(1)), path))
        return sorted(found)

    def latest(self) -> Optional[Path]:
        existing = self.checkpoints()
        return existing[-1][1] if existing else None

    def save(
        self, step: int, state: ModelState, optimizer: AdamW, meta: Optional[dict[str, Any]] = None
    ) -> Path:
        blob = encode_checkpoint(state, optimizer.state_arrays(), {"step": step, **(meta or {})})
        path = self.path_for(step)
        if self._executor is None:
            self._write(path, blob)
        else:
            self._pending.append(self._executor.submit(self._write, path, blob))
        return path

    def _write(self, path: Path, blob: bytes) -> None:
        write_atomic(path, blob)
        logger.info(f"Saved checkpoint {path.name}")
        self.rotate()

    def rotate(self) -> list[Path]:
        """Delete the oldest checkpoints beyond ``keep``."""
        existing = self.checkpoints()
        removed = []
        for _, path in existing[: max(0, len(existing) - self.keep)]:
            try:
                path.unlink()
            except OSError as e:
                raise CheckpointIOError(f"cannot remove old checkpoint {path}: {e}") from e
            removed.append(path)
            logger.debug(f"Removed old checkpoint {path.name}")
        return removed

    def wait(self) -> None:
        """Block until background writes finish, re-raising their errors."""
        pending, self._pending = self._pending, []
        for future in pending:
            future.result()

    def close(self) -> None:
        self.wait()
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None
