"""Line-delimited JSON dataset reader and writer."""

import json
import logging
from collections.abc import Iterable, Iterator
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, StrictInt, StrictStr, ValidationError

from molscale.errors import DatasetIOError, MolscaleError, ParseError, RangeError
from molscale.molgraph.models import ATOM_FIELDS, MolecularGraph

logger = logging.getLogger(__name__)


class MoleculeRecord(BaseModel):
    """One dataset line. Keys are exactly the dataset file format."""

    model_config = ConfigDict(extra="forbid")

    mol_id: StrictStr
    scaffold_id: StrictStr
    atom_token: list[StrictInt]
    chirality: list[StrictInt]
    degree: list[StrictInt]
    formal_charge: list[StrictInt]
    num_h: list[StrictInt]
    radical_e: list[StrictInt]
    hybridization: list[StrictInt]
    aromatic: list[StrictInt]
    in_ring: list[StrictInt]
    bonds: list[tuple[StrictInt, StrictInt, StrictInt, StrictInt, StrictInt]]
    coords: list[tuple[float, float, float]]


class MoleculeDatasetReader:
    """Stream MolecularGraphs from a dataset file.

    Single-consumer: create one reader per thread.
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self.records_read = 0

    def __iter__(self) -> Iterator[MolecularGraph]:
        try:
            handle = self.path.open("r", encoding="utf-8")
        except OSError as e:
            raise DatasetIOError(f"cannot open dataset {self.path}: {e}") from e

        with handle:
            try:
                for line_num, line in enumerate(handle, start=1):
                    if not line.strip():
                        continue
                    yield self.parse_line(line, line_num)
                    self.records_read += 1
            except UnicodeDecodeError as e:
                raise DatasetIOError(f"{self.path} is not valid UTF-8: {e}") from e

        logger.info(f"Read {self.records_read} molecules from {self.path.name}")

    def parse_line(self, line: str, line_num: int) -> MolecularGraph:
        """Parse and validate one record, attaching the line number to any failure."""
        try:
            record = MoleculeRecord.model_validate_json(line)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(part) for part in first["loc"])
            raise ParseError(f"{where}: {first['msg']}" if where else first["msg"], line=line_num) from e

        try:
            graph = record_to_graph(record)
            graph.validate()
        except MolscaleError as e:
            raise type(e)(str(e), line=line_num) from e
        return graph


def record_to_graph(record: MoleculeRecord) -> MolecularGraph:
    """Build a graph from a record, reconstructing the symmetric bond matrices."""
    n = len(record.atom_token)
    for name in ATOM_FIELDS:
        if len(getattr(record, name)) != n:
            raise ParseError(f"{record.mol_id}: {name} has {len(getattr(record, name))} entries, expected {n}")
    if len(record.coords) != n:
        raise ParseError(f"{record.mol_id}: coords has {len(record.coords)} entries, expected {n}")

    bond_type = np.zeros((n, n), dtype=np.int64)
    bond_stereo = np.zeros((n, n), dtype=np.int64)
    bond_conj = np.zeros((n, n), dtype=np.int64)
    seen: set[tuple[int, int]] = set()
    for i, j, kind, stereo, conj in record.bonds:
        if not 0 <= i < j < n:
            raise RangeError(f"{record.mol_id}: bond ({i}, {j}) needs 0 <= i < j < {n}")
        if (i, j) in seen:
            raise ParseError(f"{record.mol_id}: bond ({i}, {j}) listed twice")
        if kind == 0:
            raise RangeError(f"{record.mol_id}: bond ({i}, {j}) has bond_type 0")
        seen.add((i, j))
        bond_type[i, j] = bond_type[j, i] = kind
        bond_stereo[i, j] = bond_stereo[j, i] = stereo
        bond_conj[i, j] = bond_conj[j, i] = conj

    atom_arrays = {name: np.asarray(getattr(record, name), dtype=np.int64) for name in ATOM_FIELDS}
    return MolecularGraph(
        mol_id=record.mol_id,
        scaffold_id=record.scaffold_id,
        bond_type=bond_type,
        bond_stereo=bond_stereo,
        bond_conj=bond_conj,
        coords=np.asarray(record.coords, dtype=np.float64).reshape(n, 3),
        **atom_arrays,
    )


def graph_to_record(graph: MolecularGraph) -> dict:
    """Serialise a graph to the dataset's JSON object layout."""
    rows, cols = np.nonzero(np.triu(graph.bond_type, k=1))
    bonds = [
        [int(i), int(j), int(graph.bond_type[i, j]), int(graph.bond_stereo[i, j]), int(graph.bond_conj[i, j])]
        for i, j in zip(rows, cols)
    ]
    record: dict = {"mol_id": graph.mol_id, "scaffold_id": graph.scaffold_id}
    for name in ATOM_FIELDS:
        record[name] = [int(v) for v in getattr(graph, name)]
    record["bonds"] = bonds
    record["coords"] = [[float(x) for x in row] for row in graph.coords]
    return record


def read_dataset(path: Path) -> Iterator[MolecularGraph]:
    """Stream molecules from a dataset file. An empty file yields nothing."""
    return iter(MoleculeDatasetReader(path))


def write_dataset(graphs: Iterable[MolecularGraph], path: Path) -> int:
    """Write molecules one JSON object per line. Returns the number written."""
    path = Path(path)
    count = 0
    try:
        with path.open("w", encoding="utf-8") as handle:
            for graph in graphs:
                handle.write(json.dumps(graph_to_record(graph), separators=(",", ":")))
                handle.write("\n")
                count += 1
    except OSError as e:
        raise DatasetIOError(f"cannot write dataset {path}: {e}") from e

    logger.info(f"Wrote {count} molecules to {path.name}")
    return count
