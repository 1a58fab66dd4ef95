"""Deterministic Rosenzweig-MacArthur backbone.

Nondimensional predator-prey system with logistic prey growth and
Holling type II predation::

    dN/dt = N (1 - N/k) - m N P / (1 + N)
    dP/dt = P (-c + m N / (1 + N))

Everything here is closed form; no root finding is involved.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InfeasibleEquilibriumError

THRESHOLD_RTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Parameter tuple ``(m, c, k, omega, e)``.

    ``omega`` is the system size (population scale); ``math.inf`` is
    accepted and means the deterministic limit. ``e`` is the conversion
    efficiency in ``(0, 1]``.
    """

    m: float
    c: float
    k: float
    omega: float = 1.0
    e: float = 1.0

    def __post_init__(self):
        for name in ("m", "c", "k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a positive finite number, got {value!r}")
        if not self.omega > 0 or math.isnan(self.omega):
            raise DomainError(f"omega must be positive, got {self.omega!r}")
        if not 0 < self.e <= 1:
            raise DomainError(f"e must lie in (0, 1], got {self.e!r}")

    def replace(self, **changes) -> ModelParams:
        fields = {"m": self.m, "c": self.c, "k": self.k, "omega": self.omega, "e": self.e}
        fields.update(changes)
        return ModelParams(**fields)


class State2(NamedTuple):
    """Prey and predator densities."""

    n: float
    p: float


class EquilibriumKind(enum.Enum):
    ORIGIN = "Origin"
    PREY_ONLY = "PreyOnly"
    COEXISTENCE = "Coexistence"


@dataclass(frozen=True)
class Equilibrium:
    kind: EquilibriumKind
    state: State2


@dataclass(frozen=True)
class Jacobian2:
    """Real 2x2 matrix ``[[a11, a12], [a21, a22]]``."""

    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def is_hurwitz(self) -> bool:
        return self.trace < 0 and self.det > 0

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def eigenvalues(self) -> tuple[complex, complex]:
        """Eigenvalues ordered by decreasing imaginary part."""
        half_tr = 0.5 * self.trace
        disc = half_tr * half_tr - self.det
        if disc >= 0:
            root = math.sqrt(disc)
            return complex(half_tr + root, 0.0), complex(half_tr - root, 0.0)
        root = math.sqrt(-disc)
        return complex(half_tr, root), complex(half_tr, -root)

    @classmethod
    def from_array(cls, a) -> Jacobian2:
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))


class RegimeLabel(enum.Enum):
    LAMBDA2_STABLE = "Lambda2_Stable"
    LAMBDA1_POST_HOPF = "Lambda1_PostHopf"
    ON_THRESHOLD = "OnThreshold"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class Regime:
    label: RegimeLabel
    hopf_k: float  # nan when m <= c
    margin: float  # hopf_k - k


def is_feasible(params: ModelParams) -> bool:
    m, c, k = params.m, params.c, params.k
    return m > c and k * (m - c) > c


def coexistence_equilibrium(params: ModelParams) -> Equilibrium | None:
    """Interior equilibrium K3, or ``None`` when it is infeasible."""
    if not is_feasible(params):
        return None
    m, c, k = params.m, params.c, params.k
    n_star = c / (m - c)
    p_star = (k * (m - c) - c) / (k * (m - c) ** 2)
    return Equilibrium(EquilibriumKind.COEXISTENCE, State2(n_star, p_star))


def require_coexistence(params: ModelParams) -> State2:
    eq = coexistence_equilibrium(params)
    if eq is None:
        raise InfeasibleEquilibriumError(
            f"coexistence equilibrium infeasible for m={params.m}, c={params.c}, k={params.k} "
            "(need m > c and k(m - c) > c)"
        )
    return eq.state


def equilibria(params: ModelParams) -> list[Equilibrium]:
    """All equilibria in the closed quadrant: origin, prey-only, and K3 if feasible."""
    out = [
        Equilibrium(EquilibriumKind.ORIGIN, State2(0.0, 0.0)),
        Equilibrium(EquilibriumKind.PREY_ONLY, State2(params.k, 0.0)),
    ]
    k3 = coexistence_equilibrium(params)
    if k3 is not None:
        out.append(k3)
    return out


def hopf_threshold(params: ModelParams) -> float:
    """Enrichment threshold ``k_H = (m + c) / (m - c)``."""
    if params.m <= params.c:
        raise DomainError(f"Hopf threshold undefined for m <= c (m={params.m}, c={params.c})")
    return (params.m + params.c) / (params.m - params.c)


def classify_regime(params: ModelParams) -> Regime:
    if params.m <= params.c:
        return Regime(RegimeLabel.INFEASIBLE, math.nan, math.nan)
    k_h = hopf_threshold(params)
    margin = k_h - params.k
    if not is_feasible(params):
        label = RegimeLabel.INFEASIBLE
    elif abs(margin) <= THRESHOLD_RTOL * k_h:
        label = RegimeLabel.ON_THRESHOLD
    elif params.k < k_h:
        label = RegimeLabel.LAMBDA2_STABLE
    else:
        label = RegimeLabel.LAMBDA1_POST_HOPF
    return Regime(label, k_h, margin)


def drift(params: ModelParams, x) -> np.ndarray:
    n, p = float(x[0]), float(x[1])
    m = params.m
    sat = m * n / (1.0 + n)
    return np.array([n * (1.0 - n / params.k) - sat * p, p * (sat - params.c)])


def jacobian(params: ModelParams, x) -> Jacobian2:
    """Jacobian of the drift at an arbitrary state of the closed quadrant."""
    n, p = float(x[0]), float(x[1])
    m, c, k = params.m, params.c, params.k
    inv = 1.0 / (1.0 + n)
    dsat = m * p * inv * inv
    return Jacobian2(
        a11=1.0 - 2.0 * n / k - dsat,
        a12=-m * n * inv,
        a21=dsat,
        a22=-c + m * n * inv,
    )


def jacobian_at_K3(params: ModelParams) -> Jacobian2:
    """Closed-form Jacobian at the coexistence equilibrium.

    The (2, 2) entry vanishes identically because K3 sits on the
    predator nullcline.
    """
    require_coexistence(params)
    m, c, k = params.m, params.c, params.k
    return Jacobian2(
        a11=c * (k * (m - c) - (m + c)) / (k * m * (m - c)),
        a12=-c,
        a21=(k * (m - c) - c) / (k * m),
        a22=0.0,
    )
