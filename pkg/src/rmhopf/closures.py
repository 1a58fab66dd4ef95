"""Demographic-noise closures and their reaction channel sets.

Every closure shares the same drift. They differ only in how a predation
encounter is split into stoichiometric events, and therefore in the
predation block of the diffusion covariance

    a(x) = (1/omega) * sum_k f_k(x) nu_k nu_k^T.

``bernoulli``
    one encounter removes a prey and, with probability ``e``, adds a
    predator (two integer channels).
``effective``
    a single diffusion-only channel with increment ``(-1, e)``.
``split``
    prey removal and predator birth as independent channels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPSDError, UnsupportedClosureError
from .model import ModelParams

PSD_RTOL = 1e-12
RANK_RTOL = 1e-14


class ClosureKind(enum.Enum):
    BERNOULLI_COUPLED = "bernoulli"
    EFFECTIVE_COUPLED = "effective"
    SPLIT_DIAGONAL = "split"

    @classmethod
    def from_name(cls, name: str | ClosureKind) -> ClosureKind:
        if isinstance(name, cls):
            return name
        try:
            return cls(name.lower())
        except ValueError:
            choices = ", ".join(repr(k.value) for k in cls)
            raise ValueError(f"unknown closure {name!r}; expected one of {choices}") from None

    @property
    def is_coupled(self) -> bool:
        return self is not ClosureKind.SPLIT_DIAGONAL


@dataclass(frozen=True)
class SymMatrix2:
    """Symmetric 2x2 matrix with the off-diagonal stored once."""

    q11: float
    q12: float
    q22: float

    @classmethod
    def from_array(cls, a) -> SymMatrix2:
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), 0.5 * float(a[0, 1] + a[1, 0]), float(a[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.q11, self.q12], [self.q12, self.q22]])

    @property
    def det(self) -> float:
        return self.q11 * self.q22 - self.q12 * self.q12

    @property
    def scale(self) -> float:
        return abs(self.q11 * self.q22) + self.q12 * self.q12

    @property
    def max_abs(self) -> float:
        return max(abs(self.q11), abs(self.q12), abs(self.q22))

    def is_psd(self, rtol: float = PSD_RTOL) -> bool:
        tol = rtol * self.max_abs
        return self.q11 >= -tol and self.q22 >= -tol and self.det >= -rtol * self.scale

    def __add__(self, other: SymMatrix2) -> SymMatrix2:
        return SymMatrix2(self.q11 + other.q11, self.q12 + other.q12, self.q22 + other.q22)

    def __sub__(self, other: SymMatrix2) -> SymMatrix2:
        return SymMatrix2(self.q11 - other.q11, self.q12 - other.q12, self.q22 - other.q22)

    def scaled(self, s: float) -> SymMatrix2:
        return SymMatrix2(s * self.q11, s * self.q12, s * self.q22)


ZERO = SymMatrix2(0.0, 0.0, 0.0)


def predation_intensity(params: ModelParams, x) -> float:
    n, p = float(x[0]), float(x[1])
    return params.m * n * p / (1.0 + n)


def base_covariance(params: ModelParams, x) -> SymMatrix2:
    """Prey birth, prey competition and predator death contributions."""
    n, p = float(x[0]), float(x[1])
    inv_omega = 1.0 / params.omega
    return SymMatrix2(inv_omega * (n + n * n / params.k), 0.0, inv_omega * params.c * p)


_PREDATION_BLOCKS = {
    ClosureKind.BERNOULLI_COUPLED: lambda e: (1.0, -e, e),
    ClosureKind.EFFECTIVE_COUPLED: lambda e: (1.0, -e, e * e),
    ClosureKind.SPLIT_DIAGONAL: lambda e: (1.0, 0.0, e),
}


def predation_covariance(params: ModelParams, x, closure: ClosureKind) -> SymMatrix2:
    closure = ClosureKind.from_name(closure)
    s = predation_intensity(params, x) / params.omega
    b11, b12, b22 = _PREDATION_BLOCKS[closure](params.e)
    return SymMatrix2(s * b11, s * b12, s * b22)


def full_covariance(params: ModelParams, x, closure: ClosureKind) -> SymMatrix2:
    return base_covariance(params, x) + predation_covariance(params, x, closure)


def factorize_covariance(a: SymMatrix2) -> np.ndarray:
    """Lower-triangular ``B`` with ``B @ B.T == a``.

    Rank-deficient input (zero Schur complement, or ``q11 == 0``) gets a
    zero trailing column rather than a division by zero.
    """
    tol = PSD_RTOL * a.max_abs
    if a.q11 < -tol or a.q22 < -tol or a.det < -PSD_RTOL * a.scale:
        raise NotPSDError(f"covariance is not positive semidefinite: {a}")
    if a.q11 <= tol:
        # PSD forces q12 = 0 here; the surviving direction is the second axis
        return np.array([[0.0, 0.0], [0.0, math.sqrt(max(a.q22, 0.0))]])
    l11 = math.sqrt(a.q11)
    l21 = a.q12 / l11
    schur = a.q22 - l21 * l21
    l22 = math.sqrt(schur) if a.det > RANK_RTOL * a.scale and schur > 0 else 0.0
    return np.array([[l11, 0.0], [l21, l22]])


# --- channel sets -----------------------------------------------------------

class ChannelKind(enum.IntEnum):
    """Base intensity shapes; the kernel code in ``_kernels`` mirrors these."""

    PREY_BIRTH = 0  # N
    PREY_COMPETITION = 1  # N^2 / k
    PREDATOR_DEATH = 2  # c P
    PREDATION = 3  # m N P / (1 + N)


@dataclass(frozen=True)
class Channel:
    name: str
    increment: tuple[float, float]
    kind: ChannelKind
    weight: float = 1.0

    def intensity(self, params: ModelParams, x) -> float:
        """Density-level intensity ``f_k(x)``."""
        n, p = float(x[0]), float(x[1])
        if self.kind is ChannelKind.PREY_BIRTH:
            base = n
        elif self.kind is ChannelKind.PREY_COMPETITION:
            base = n * n / params.k
        elif self.kind is ChannelKind.PREDATOR_DEATH:
            base = params.c * p
        else:
            base = params.m * n * p / (1.0 + n)
        return self.weight * base

    def rate(self, params: ModelParams, counts) -> float:
        """Count-level propensity ``omega * f_k(counts / omega)``."""
        omega = params.omega
        return omega * self.intensity(params, (counts[0] / omega, counts[1] / omega))


@dataclass(frozen=True)
class ChannelSet:
    channels: tuple[Channel, ...]
    closure: ClosureKind

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def intensities(self, params: ModelParams, x) -> np.ndarray:
        return np.array([ch.intensity(params, x) for ch in self.channels])

    def increments(self) -> np.ndarray:
        return np.array([ch.increment for ch in self.channels], dtype=float)

    def drift(self, params: ModelParams, x) -> np.ndarray:
        return self.intensities(params, x) @ self.increments()

    def covariance(self, params: ModelParams, x) -> SymMatrix2:
        nu = self.increments()
        f = self.intensities(params, x)
        return SymMatrix2.from_array((nu.T * f) @ nu / params.omega)


def _base_channels() -> list[Channel]:
    return [
        Channel("prey_birth", (1, 0), ChannelKind.PREY_BIRTH),
        Channel("prey_competition", (-1, 0), ChannelKind.PREY_COMPETITION),
        Channel("predator_death", (0, -1), ChannelKind.PREDATOR_DEATH),
    ]


def channels(params: ModelParams, closure: ClosureKind) -> ChannelSet:
    """Density-level channel set for any closure, zero-rate channels dropped."""
    closure = ClosureKind.from_name(closure)
    e = params.e
    chans = _base_channels()
    if closure is ClosureKind.BERNOULLI_COUPLED:
        chans.append(Channel("predation_conversion", (-1, 1), ChannelKind.PREDATION, e))
        if e < 1:
            chans.append(Channel("predation_no_conversion", (-1, 0), ChannelKind.PREDATION, 1.0 - e))
    elif closure is ClosureKind.EFFECTIVE_COUPLED:
        chans.append(Channel("predation_effective", (-1.0, e), ChannelKind.PREDATION))
    else:
        chans.append(Channel("prey_removal", (-1, 0), ChannelKind.PREDATION))
        chans.append(Channel("predator_birth", (0, 1), ChannelKind.PREDATION, e))
    return ChannelSet(tuple(chans), closure)


def ssa_channels(params: ModelParams, closure: ClosureKind = ClosureKind.BERNOULLI_COUPLED) -> ChannelSet:
    """Integer-increment channel set for the exact CTMC."""
    closure = ClosureKind.from_name(closure)
    if closure is ClosureKind.EFFECTIVE_COUPLED:
        raise UnsupportedClosureError(
            "the effective closure has the non-integer increment (-1, e) and is not a CTMC jump"
        )
    return channels(params, closure)
