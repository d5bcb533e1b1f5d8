"""Benchmark harness: configuration, Monte Carlo runner, CSV I/O and CLI."""

from .config import ALGORITHMS, ExperimentConfig, FpcaOptions
from .io import ingest_csv, summarize, write_records, write_summary
from .runner import (OnlineEstimator, ResultRecord, grid_search_schedule, run_experiment,
                     run_replication, time_updates)

__all__ = [
    "ALGORITHMS", "ExperimentConfig", "FpcaOptions", "OnlineEstimator", "ResultRecord",
    "grid_search_schedule", "ingest_csv", "run_experiment", "run_replication", "summarize",
    "time_updates", "write_records", "write_summary",
]
