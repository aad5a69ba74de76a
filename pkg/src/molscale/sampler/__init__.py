"""Scaffold-balanced sampling and dynamic batching."""

from molscale.sampler.batching import BatchPlan, plan_batches
from molscale.sampler.scaffolds import (
    SUMMARY_COLUMNS,
    SamplingPlan,
    ScaffoldEntry,
    ScaffoldSampler,
    ScaffoldTable,
    build_plan,
    read_scaffold_table,
    sample_molecules,
    scaffold_frequency_summary,
    write_sampling_plan,
    write_scaffold_table,
)

__all__ = [
    "SUMMARY_COLUMNS",
    "BatchPlan",
    "SamplingPlan",
    "ScaffoldEntry",
    "ScaffoldSampler",
    "ScaffoldTable",
    "build_plan",
    "plan_batches",
    "read_scaffold_table",
    "sample_molecules",
    "scaffold_frequency_summary",
    "write_sampling_plan",
    "write_scaffold_table",
]
