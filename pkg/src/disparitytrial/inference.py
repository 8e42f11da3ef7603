"""Nonparametric cluster bootstrap for the disparity difference.

Whole top-level clusters are resampled, the full pipeline (trial selection
included) is re-run on each replicate with an index-derived seed, and the
confidence interval is read off the empirical percentiles.  Because every
replicate's seed is a pure function of (master seed, replicate index), the
replicate vector is bit-identical no matter how replicates are scheduled
or how many workers run them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data_model import ObservationTable
from .emulation import COPY_COLUMN
from .errors import DisparityTrialError, ReplicateFailure, SpecMismatch, TooFewClusters
from .rngutil import derive_seed, rng_for

MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class InferenceConfig:
    """Bootstrap settings.

    mode "with_replacement" is the standard cluster bootstrap.  Mode
    "without_replacement" is an m-out-of-n cluster subsample and is
    experimental: subsampling without replacement at full size would be the
    identity, so a subsample size m < #clusters must be chosen.
    """

    replicates: int = 1000
    mode: str = "with_replacement"
    level: float = 0.95
    seed: int = 0
    m: int = None

    def __post_init__(self):
        if self.replicates < 1:
            raise SpecMismatch("at least one bootstrap replicate is required")
        if not (0.0 < self.level < 1.0):
            raise SpecMismatch("confidence level must lie in (0, 1)")
        if self.mode not in ("with_replacement", "without_replacement"):
            raise SpecMismatch(f"unknown bootstrap mode {self.mode!r}")


def resample_cluster_ids(cluster_ids, rng, mode: str, m: int = None):
    """Draw the replicate's cluster list.

    With replacement: exactly len(cluster_ids) draws, duplicates included.
    Without replacement: a subsample of m clusters (default: half, rounded
    down, at least one).
    """
    k = len(cluster_ids)
    if mode == "with_replacement":
        return [cluster_ids[i] for i in rng.integers(0, k, size=k)]
    size = m if m is not None else max(1, k // 2)
    if size >= k:
        raise SpecMismatch("without-replacement subsample size must be below the cluster count")
    chosen = rng.choice(k, size=size, replace=False)
    return [cluster_ids[i] for i in np.sort(chosen)]


def _replicate_table(table, cluster_rows, drawn, base_frame):
    pieces = [cluster_rows[c] for c in drawn]
    idx = np.concatenate(pieces)
    copies = np.repeat(np.arange(len(pieces)), [len(p) for p in pieces])
    frame = base_frame.iloc[idx].reset_index(drop=True)
    frame[COPY_COLUMN] = copies
    return ObservationTable(frame, table.schema, check=False)


def _run_block(table, cluster_rows, cluster_ids, config, estimator, indices):
    base_frame = table.frame
    values = {}
    for b in indices:
        rng = rng_for(config.seed, "replicate", b)
        drawn = resample_cluster_ids(cluster_ids, rng, config.mode, config.m)
        rep_table = _replicate_table(table, cluster_rows, drawn, base_frame)
        rep_seed = derive_seed(config.seed, "estimate", b)
        try:
            values[b] = float(estimator(rep_table, rep_seed))
        except DisparityTrialError:
            values[b] = np.nan
    return values


def cluster_bootstrap(
    table: ObservationTable,
    spec,
    config: InferenceConfig,
    estimator,
    point: float = None,
    workers: int = 1,
):
    """Percentile CI for a cluster-resampled estimator.

    Parameters
    ----------
    estimator : callable (table, seed) -> float
        Must be pure given its inputs; it is re-run on every resampled
        table with the replicate's derived seed (trial selection randomness
        is part of the estimator and sits inside the bootstrap).

    Returns (point, lower, upper, replicates, failures).  Failed replicates
    (any package error on a resample) are recorded as NaN and excluded from
    the percentiles; more than 10% failures raises ReplicateFailure.
    """
    cluster_ids = sorted(set(table.column("cluster_id")))
    if len(cluster_ids) < 2:
        raise TooFewClusters("cluster bootstrap needs at least two distinct clusters")
    cluster_col = table.column("cluster_id")
    cluster_rows = {c: np.flatnonzero(cluster_col == c) for c in cluster_ids}

    b_indices = list(range(config.replicates))
    if workers and workers > 1 and config.replicates > 1:
        from joblib import Parallel, delayed

        blocks = [b_indices[i::workers] for i in range(workers)]
        results = Parallel(n_jobs=workers)(
            delayed(_run_block)(table, cluster_rows, cluster_ids, config, estimator, block)
            for block in blocks
        )
        values = {}
        for block_values in results:
            values.update(block_values)
    else:
        values = _run_block(table, cluster_rows, cluster_ids, config, estimator, b_indices)

    replicates = np.array([values[b] for b in b_indices], dtype=float)
    failures = int(np.isnan(replicates).sum())
    if failures > MAX_FAILURE_FRACTION * config.replicates:
        raise ReplicateFailure(
            f"{failures}/{config.replicates} bootstrap replicates failed to estimate"
        )
    valid = replicates[~np.isnan(replicates)]

    if config.replicates == 1:
        warnings.warn(
            "a single-replicate bootstrap yields a degenerate interval",
            stacklevel=2,
        )
        lone = float(valid[0])
        return point, lone, lone, replicates, failures

    alpha = 1.0 - config.level
    lower, upper = np.percentile(valid, [100 * alpha / 2.0, 100 * (1.0 - alpha / 2.0)])
    return point, float(lower), float(upper), replicates, failures
