"""Simulation-based evaluation and reporting."""

from .engine import (
    DEFAULT_PERIODS,
    DEFAULT_WARMUP,
    EpisodeStats,
    Estimate,
    PairedEstimate,
    UniformStreams,
    compare_paired,
    estimate_cost,
    optimality_gap,
    run_batch,
    simulate_episode,
)
from .reports import breakdown_report, read_csv, write_csv

__all__ = [
    "DEFAULT_PERIODS",
    "DEFAULT_WARMUP",
    "EpisodeStats",
    "Estimate",
    "PairedEstimate",
    "UniformStreams",
    "breakdown_report",
    "compare_paired",
    "estimate_cost",
    "optimality_gap",
    "read_csv",
    "run_batch",
    "simulate_episode",
    "write_csv",
]
