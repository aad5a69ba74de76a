"""Temperature-based scaffold sampling."""

import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import softmax

from molscale.errors import DatasetIOError, DomainError, EmptyTableError, ParseError
from molscale.molgraph.models import MolecularGraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaffoldEntry:
    """A scaffold and the molecules that share it."""

    scaffold_id: str
    member_mol_ids: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.member_mol_ids)


@dataclass
class ScaffoldTable:
    """Scaffold IDs with their member molecules; counts are member-list lengths."""

    entries: list[ScaffoldEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [entry.scaffold_id for entry in self.entries]
        if len(set(ids)) != len(ids):
            raise ParseError("scaffold table has duplicate scaffold ids")
        for entry in self.entries:
            if entry.count < 1:
                raise ParseError(f"scaffold {entry.scaffold_id} has no member molecules")

    @property
    def counts(self) -> np.ndarray:
        return np.array([entry.count for entry in self.entries], dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) if self.entries else 0

    @classmethod
    def from_molecules(cls, graphs: Iterable[MolecularGraph]) -> "ScaffoldTable":
        """Group molecules by their (input) scaffold id, in first-seen order."""
        members: dict[str, list[str]] = {}
        for graph in graphs:
            members.setdefault(graph.scaffold_id, []).append(graph.mol_id)
        return cls([ScaffoldEntry(sid, tuple(mols)) for sid, mols in members.items()])


@dataclass(frozen=True)
class SamplingPlan:
    """Per-scaffold sampling probabilities for a temperature and seed."""

    probs: np.ndarray
    tau: float
    seed: int

    def to_json(self, table: ScaffoldTable) -> dict:
        return {
            "tau": self.tau,
            "seed": self.seed,
            "probabilities": {
                entry.scaffold_id: float(p) for entry, p in zip(table.entries, self.probs)
            },
        }


def build_plan(table: ScaffoldTable, tau: float, seed: int = 0) -> SamplingPlan:
    """Scaffold probabilities softmax(P_i / tau) with P_i = count_i / sum(counts)."""
    if not table.entries:
        raise EmptyTableError("scaffold table is empty")
    if not tau > 0:
        raise DomainError(f"temperature must be positive, got {tau}")

    counts = table.counts.astype(np.float64)
    frequency = counts / counts.sum()
    probs = softmax(frequency / tau)
    return SamplingPlan(probs=probs, tau=float(tau), seed=int(seed))


class ScaffoldSampler:
    """Seeded sampler: a scaffold by plan probability, then a uniform member molecule.

    Owns its generator, so one instance must not be shared between threads.
    """

    def __init__(self, plan: SamplingPlan, table: ScaffoldTable):
        if not table.entries:
            raise EmptyTableError("scaffold table is empty")
        if len(plan.probs) != len(table.entries):
            raise ValueError(
                f"plan has {len(plan.probs)} probabilities for {len(table.entries)} scaffolds"
            )
        self.plan = plan
        self.table = table
        self.rng = np.random.default_rng(plan.seed)

    def draw(self, k: int) -> list[str]:
        if k < 0:
            raise DomainError(f"sample count must be non-negative, got {k}")
        if k == 0:
            return []
        scaffolds = self.rng.choice(len(self.table.entries), size=k, p=self.plan.probs)
        counts = self.table.counts[scaffolds]
        members = np.minimum((self.rng.random(k) * counts).astype(np.int64), counts - 1)
        return [
            self.table.entries[s].member_mol_ids[m] for s, m in zip(scaffolds, members)
        ]


def sample_molecules(plan: SamplingPlan, table: ScaffoldTable, k: int) -> list[str]:
    """Draw ``k`` molecule ids with replacement; identical for identical seeds."""
    return ScaffoldSampler(plan, table).draw(k)


def read_scaffold_table(path: Path) -> ScaffoldTable:
    """Read ``scaffold_id<TAB>count<TAB>comma-joined mol_ids`` rows."""
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            sep="\t",
            header=None,
            names=["scaffold_id", "declared", "mol_ids"],
            dtype=str,
            keep_default_na=False,
        )
    except FileNotFoundError as e:
        raise DatasetIOError(f"scaffold table not found: {path}") from e
    except pd.errors.EmptyDataError:
        raise EmptyTableError(f"scaffold table {path} is empty")
    except (OSError, pd.errors.ParserError) as e:
        raise DatasetIOError(f"cannot read scaffold table {path}: {e}") from e

    entries = []
    for line_num, row in enumerate(frame.itertuples(index=False), start=1):
        members = tuple(m.strip() for m in row.mol_ids.split(",") if m.strip())
        try:
            count = int(row.declared)
        except ValueError as e:
            raise ParseError(f"count '{row.declared}' is not an integer", line=line_num) from e
        if count != len(members):
            raise ParseError(
                f"scaffold {row.scaffold_id} declares {count} molecules but lists {len(members)}",
                line=line_num,
            )
        entries.append(ScaffoldEntry(row.scaffold_id, members))

    table = ScaffoldTable(entries)
    logger.info(f"Read {len(entries)} scaffolds ({table.total} molecules) from {path.name}")
    return table


def write_sampling_plan(plan: SamplingPlan, table: ScaffoldTable, path: Path) -> None:
    Path(path).write_text(json.dumps(plan.to_json(table), indent=2), encoding="utf-8")


def write_scaffold_table(table: ScaffoldTable, path: Path) -> None:
    """Write the tab-separated form :func:`read_scaffold_table` reads."""
    frame = pd.DataFrame(
        {
            "scaffold_id": [entry.scaffold_id for entry in table.entries],
            "count": table.counts,
            "mol_ids": [",".join(entry.member_mol_ids) for entry in table.entries],
        }
    )
    try:
        frame.to_csv(path, sep="\t", header=False, index=False)
    except OSError as e:
        raise DatasetIOError(f"cannot write scaffold table {path}: {e}") from e
    logger.info(f"Wrote {len(table.entries)} scaffolds to {Path(path).name}")


SUMMARY_COLUMNS = ["rank", "scaffold_id", "count", "frequency", "cumulative_frequency"]


def scaffold_frequency_summary(
    table: ScaffoldTable, plan: Optional[SamplingPlan] = None, top_k: int = 40
) -> pd.DataFrame:
    """The ``top_k`` most common scaffolds, most common first.

    ``frequency`` is each scaffold's share of all molecules and ``cumulative_frequency``
    the share covered down to that rank, which shows how long the tail is. With a plan,
    a ``probability`` column gives the tempered sampling probability next to it.
    Ties keep table order.
    """
    if not table.entries:
        raise EmptyTableError("scaffold table is empty")
    if top_k < 1:
        raise DomainError(f"top_k must be at least 1, got {top_k}")

    frame = pd.DataFrame(
        {"scaffold_id": [entry.scaffold_id for entry in table.entries], "count": table.counts}
    )
    frame["frequency"] = frame["count"] / table.total
    columns = list(SUMMARY_COLUMNS)
    if plan is not None:
        if len(plan.probs) != len(table.entries):
            raise ValueError(
                f"plan has {len(plan.probs)} probabilities for {len(table.entries)} scaffolds"
            )
        frame["probability"] = plan.probs
        columns.append("probability")

    frame = frame.sort_values("count", ascending=False, kind="stable").reset_index(drop=True)
    frame["cumulative_frequency"] = frame["frequency"].cumsum()
    frame["rank"] = np.arange(1, len(frame) + 1)
    return frame.head(top_k)[columns]
