#!/usr/bin/env python3
"""Write a synthetic molecule dataset and its scaffold table for smoke runs."""

import argparse
from pathlib import Path

from molscale.molgraph import synthetic_dataset, write_dataset
from molscale.sampler import ScaffoldTable, write_scaffold_table


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True, help="Output directory")
    parser.add_argument("--molecules", type=int, default=256)
    parser.add_argument("--min-atoms", type=int, default=4)
    parser.add_argument("--max-atoms", type=int, default=16)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    graphs = synthetic_dataset(args.molecules, args.seed, args.min_atoms, args.max_atoms)
    count = write_dataset(graphs, args.out / "molecules.jsonl")
    table = ScaffoldTable.from_molecules(graphs)
    write_scaffold_table(table, args.out / "scaffolds.tsv")
    print(f"Wrote {count} molecules in {len(table.entries)} scaffolds to {args.out}")


if __name__ == "__main__":
    main()
