"""Ensemble estimators: stationary covariance, Welch spectra, extinction statistics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .closures import SymMatrix2
from .errors import InsufficientDataError
from .simulate import Boundary, Trajectory


def _as_list(trajs) -> list[Trajectory]:
    return [trajs] if isinstance(trajs, Trajectory) else list(trajs)


@dataclass(frozen=True)
class EnsembleStats:
    """Pooled moments over post-burn-in samples.

    Absorbed replicates contribute only their pre-absorption samples, so
    the moments are survival conditioned; ``survival_fraction`` says how
    much conditioning took place. ``replicate_covs`` holds the
    per-replicate covariances (``None`` where a replicate had fewer than
    two samples) for between-replicate error bars.
    """

    sample_mean: np.ndarray
    sample_cov: SymMatrix2
    n_samples: int
    survival_fraction: float
    mean_absorption_time: float | None
    n_replicates: int = 1
    replicate_covs: tuple = field(default=(), repr=False)

    def standard_errors(self) -> SymMatrix2 | None:
        """Between-replicate standard error of each covariance entry."""
        covs = [c.as_array() for c in self.replicate_covs if c is not None]
        if len(covs) < 2:
            return None
        se = np.std(covs, axis=0, ddof=1) / math.sqrt(len(covs))
        return SymMatrix2.from_array(se)


def estimate_stationary_covariance(trajs, burn_in: float = 0.0) -> EnsembleStats:
    trajs = _as_list(trajs)
    if not trajs:
        raise InsufficientDataError("no trajectories supplied")
    blocks, rep_covs = [], []
    for tr in trajs:
        x = tr.states[tr.times >= burn_in]
        blocks.append(x)
        rep_covs.append(SymMatrix2.from_array(np.cov(x.T)) if len(x) >= 2 else None)
    pooled = np.vstack(blocks) if blocks else np.empty((0, 2))
    if len(pooled) < 2:
        raise InsufficientDataError(f"need at least 2 post-burn-in samples, got {len(pooled)}")
    absorbed = [tr.absorbed_at.time for tr in trajs if tr.absorbed_at is not None]
    return EnsembleStats(
        sample_mean=pooled.mean(axis=0),
        sample_cov=SymMatrix2.from_array(np.cov(pooled.T)),
        n_samples=len(pooled),
        survival_fraction=1.0 - len(absorbed) / len(trajs),
        mean_absorption_time=float(np.mean(absorbed)) if absorbed else None,
        n_replicates=len(trajs),
        replicate_covs=tuple(rep_covs),
    )


@dataclass(frozen=True)
class PsdEstimate:
    """Welch estimate of the two-sided angular-frequency spectrum.

    Normalized like ``S(omega)`` of the OU process, so that
    ``(1/2pi) * integral S d omega`` over all frequencies is the variance.
    Only ``omega >= 0`` is stored; ``S(-omega) = conj(S(omega))``.
    """

    omega_grid: np.ndarray
    s_nn: np.ndarray
    s_pp: np.ndarray
    s_np: np.ndarray
    segment_count: int

    def value_at(self, omega: float, which: str = "nn") -> float:
        """Linear interpolation of a diagonal spectrum."""
        values = {"nn": self.s_nn, "pp": self.s_pp}[which]
        return float(np.interp(omega, self.omega_grid, values))


def _segments(n: int, nperseg: int, noverlap: int) -> int:
    return 0 if n < nperseg else (n - noverlap) // (nperseg - noverlap)


def estimate_psd(trajs, segment_length: int, overlap: float = 0.5,
                 burn_in: float = 0.0) -> PsdEstimate:
    """Hann-windowed Welch periodogram averaged over segments and replicates.

    ``segment_length`` counts samples. Each segment is mean-detrended.
    Replicates are combined by segment-count weighting. ``S_NP`` follows
    ``S_NP(w) = int exp(-i w t) E[N(t+tau) P(t)] d tau``.
    """
    trajs = _as_list(trajs)
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    nperseg = int(segment_length)
    noverlap = int(round(overlap * nperseg))
    acc = None
    total = 0
    interval = None
    for tr in trajs:
        keep = tr.times >= burn_in
        t, x = tr.times[keep], tr.states[keep]
        count = _segments(len(t), nperseg, noverlap)
        if count == 0:
            continue
        dt = float(t[1] - t[0])
        if np.any(np.abs(np.diff(t) - dt) > 1e-9 * dt):
            raise InsufficientDataError("estimate_psd needs uniformly sampled trajectories")
        if interval is not None and abs(dt - interval) > 1e-12 * dt:
            raise InsufficientDataError("replicates use different sample intervals")
        interval = dt
        kw = dict(fs=1.0 / dt, window="hann", nperseg=nperseg, noverlap=noverlap,
                  detrend="constant", return_onesided=False, scaling="density")
        f, pnn = signal.welch(x[:, 0], **kw)
        _, ppp = signal.welch(x[:, 1], **kw)
        _, pnp = signal.csd(x[:, 1], x[:, 0], **kw)
        parts = np.stack([pnn.astype(complex), ppp.astype(complex), pnp])
        acc = count * parts if acc is None else acc + count * parts
        total += count
    if total < 2:
        raise InsufficientDataError(f"need at least 2 Welch segments, got {total}")
    acc /= total
    pos = f >= 0
    order = np.argsort(f[pos])
    omega = 2 * math.pi * f[pos][order]
    return PsdEstimate(
        omega_grid=omega,
        s_nn=acc[0][pos][order].real,
        s_pp=acc[1][pos][order].real,
        s_np=acc[2][pos][order],
        segment_count=total,
    )


@dataclass(frozen=True)
class ExtinctionStats:
    n_replicates: int
    survival_fraction: float
    mean_absorption_time: float | None
    median_absorption_time: float | None
    boundary_counts: dict

    @property
    def n_absorbed(self) -> int:
        return sum(self.boundary_counts.values())


def extinction_stats(trajs) -> ExtinctionStats:
    trajs = _as_list(trajs)
    times = [tr.absorbed_at.time for tr in trajs if tr.absorbed_at is not None]
    counts = Counter(tr.absorbed_at.boundary for tr in trajs if tr.absorbed_at is not None)
    n = len(trajs)
    return ExtinctionStats(
        n_replicates=n,
        survival_fraction=(n - len(times)) / n if n else math.nan,
        mean_absorption_time=float(np.mean(times)) if times else None,
        median_absorption_time=float(np.median(times)) if times else None,
        boundary_counts={b.value: counts.get(b, 0) for b in Boundary},
    )


def survival_curve(trajs, times) -> np.ndarray:
    """Fraction of replicates not yet absorbed at each of ``times``."""
    trajs = _as_list(trajs)
    hit = np.array([tr.absorbed_at.time if tr.absorbed_at else np.inf for tr in trajs])
    t = np.asarray(times, dtype=float)
    return (hit[None, :] > t[:, None]).mean(axis=1)
