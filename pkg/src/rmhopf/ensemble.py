"""Replicate runner.

Replicates are independent (see ``simulate`` for the seed-splitting rule)
and are collected in replicate-index order, so aggregates do not depend
on the number of worker threads. The compiled kernels release the GIL.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import InsufficientDataError, ReplicateError
from .estimators import (
    EnsembleStats,
    ExtinctionStats,
    PsdEstimate,
    estimate_psd,
    estimate_stationary_covariance,
    extinction_stats,
)
from .simulate import SimConfig, Trajectory, simulate


@dataclass(frozen=True)
class EnsembleResult:
    config: SimConfig
    trajectories: list[Trajectory]
    stats: EnsembleStats | None
    extinction: ExtinctionStats
    psd: PsdEstimate | None = None

    @property
    def clamp_count(self) -> int:
        return sum(tr.clamp_count for tr in self.trajectories)

    @property
    def n_events(self) -> int:
        return sum(tr.n_events for tr in self.trajectories)


def run_replicates(config: SimConfig, threads: int = 1) -> list[Trajectory]:
    def one(r):
        try:
            return simulate(config, r)
        except Exception as exc:
            raise ReplicateError(r, exc) from exc

    indices = range(config.n_replicates)
    if threads <= 1 or config.n_replicates == 1:
        return [one(r) for r in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, indices))


def ensemble_run(config: SimConfig, threads: int = 1, psd_segment_length: int | None = None,
                 psd_overlap: float = 0.5) -> EnsembleResult:
    trajs = run_replicates(config, threads)
    try:
        stats = estimate_stationary_covariance(trajs, config.burn_in)
    except InsufficientDataError:
        stats = None
    psd = None
    if psd_segment_length:
        psd = estimate_psd(trajs, psd_segment_length, psd_overlap, config.burn_in)
    return EnsembleResult(config, trajs, stats, extinction_stats(trajs), psd)
