"""Linear-noise diagnostics at the coexistence equilibrium.

Around K3 the fluctuations follow the Ornstein-Uhlenbeck process
``dy = J y dt + B dW`` with ``B B^T = D``. In the Hurwitz regime this
module provides the stationary covariance ``W`` (from
``J W + W J^T + D = 0``), the matrix power spectral density

    S(omega) = (J - i omega I)^{-1} D (J^T + i omega I)^{-1},

the confidence ellipse of ``W`` and the precursor ratio
``Pi_p = ell_plus / d_sep``. Spectra use the transform pair
``S(w) = int exp(-i w t) R(t) dt``, ``R(t) = (1/2pi) int exp(i w t) S(w) dw``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .closures import ClosureKind, SymMatrix2, full_covariance, predation_intensity
from .errors import (
    DomainError,
    NotHurwitzError,
    NotPositiveDefiniteError,
    SingularSystemError,
)
from .model import (
    Jacobian2,
    ModelParams,
    Regime,
    State2,
    classify_regime,
    jacobian_at_K3,
    require_coexistence,
)

NOT_DEFINED = "stationary LNA diagnostics not defined"

DEFAULT_INTEGRATION_SPAN = 200.0
DEFAULT_INTEGRATION_POINTS = 200_001


def _as_jacobian(j) -> Jacobian2:
    return j if isinstance(j, Jacobian2) else Jacobian2.from_array(j)


def _as_sym(d) -> SymMatrix2:
    return d if isinstance(d, SymMatrix2) else SymMatrix2.from_array(d)


def _require_hurwitz(j: Jacobian2):
    if not j.is_hurwitz:
        raise NotHurwitzError(
            f"{NOT_DEFINED}: Jacobian not Hurwitz (trace={j.trace!r}, det={j.det!r})"
        )


# --- stationary covariance --------------------------------------------------

@dataclass(frozen=True)
class LyapunovSolution:
    w: SymMatrix2
    residual_norm: float


def lyapunov_residual(j: Jacobian2, w: SymMatrix2, d: SymMatrix2) -> float:
    ja, wa = j.as_array(), w.as_array()
    return float(np.max(np.abs(ja @ wa + wa @ ja.T + d.as_array())))


def solve_lyapunov(j, d) -> LyapunovSolution:
    """Solve ``J W + W J^T + D = 0`` through the 3x3 system on ``(w11, w12, w22)``.

    The system matrix ``M`` has ``det M = 4 tr(J) det(J)``, and its
    solution has the closed form

        W = -(det(J) D + A D A^T) / (2 tr(J) det(J)),   A = J - tr(J) I,

    which is evaluated directly instead of by elimination.
    """
    j, d = _as_jacobian(j), _as_sym(d)
    _require_hurwitz(j)
    a, b, c, dd = j.a11, j.a12, j.a21, j.a22
    tr, det = j.trace, j.det
    det_m = 4.0 * tr * det
    scale = max(abs(a), abs(b), abs(c), abs(dd)) ** 3
    if abs(det_m) <= 1e-14 * scale:
        raise SingularSystemError(f"Lyapunov system is numerically singular (det={det_m!r})")
    # A = J - tr(J) I = [[-dd, b], [c, -a]]
    q11, q12, q22 = d.q11, d.q12, d.q22
    ad11 = -dd * q11 + b * q12
    ad12 = -dd * q12 + b * q22
    ad21 = c * q11 - a * q12
    ad22 = c * q12 - a * q22
    s11 = -dd * ad11 + b * ad12
    s12 = c * ad11 - a * ad12
    s22 = c * ad21 - a * ad22
    k = -0.5 / (tr * det)
    w = SymMatrix2(k * (det * q11 + s11), k * (det * q12 + s12), k * (det * q22 + s22))
    return LyapunovSolution(w, lyapunov_residual(j, w, d))


# --- spectra ----------------------------------------------------------------

@dataclass(frozen=True)
class PsdSample:
    omega: float
    s: np.ndarray  # complex (2, 2)


def psd_batch(j, d, omegas) -> np.ndarray:
    """``S(omega)`` for every entry of ``omegas``; shape ``(len, 2, 2)``, complex."""
    j, d = _as_jacobian(j), _as_sym(d)
    _require_hurwitz(j)
    w = np.asarray(omegas, dtype=float)
    iw = 1j * w
    # (J - i w I)^{-1} by the adjugate
    det = (j.a11 - iw) * (j.a22 - iw) - j.a12 * j.a21
    g = np.empty(w.shape + (2, 2), dtype=complex)
    g[..., 0, 0] = (j.a22 - iw) / det
    g[..., 0, 1] = -j.a12 / det
    g[..., 1, 0] = -j.a21 / det
    g[..., 1, 1] = (j.a11 - iw) / det
    s = g @ d.as_array() @ np.conj(np.swapaxes(g, -1, -2))
    # diagonal of G D G^H is real for symmetric D; drop the roundoff imaginary part
    s[..., 0, 0] = s[..., 0, 0].real
    s[..., 1, 1] = s[..., 1, 1].real
    return s


def psd_matrix(j, d, omega: float) -> PsdSample:
    return PsdSample(float(omega), psd_batch(j, d, np.array([omega]))[0])


@dataclass(frozen=True)
class SpectralPeak:
    omega: float
    height: float


@dataclass(frozen=True)
class PsdSweep:
    omegas: np.ndarray
    s: np.ndarray  # complex (n, 2, 2)
    peak_nn: SpectralPeak
    peak_pp: SpectralPeak

    @property
    def samples(self) -> list[PsdSample]:
        return [PsdSample(float(w), s) for w, s in zip(self.omegas, self.s)]

    @property
    def s_nn(self) -> np.ndarray:
        return self.s[:, 0, 0].real

    @property
    def s_pp(self) -> np.ndarray:
        return self.s[:, 1, 1].real

    @property
    def s_np(self) -> np.ndarray:
        return self.s[:, 0, 1]


def _grid_peak(omegas: np.ndarray, values: np.ndarray) -> SpectralPeak:
    i = int(np.argmax(values))
    return SpectralPeak(float(omegas[i]), float(values[i]))


def psd_sweep(j, d, omega_grid, workers: int = 1) -> PsdSweep:
    """Evaluate the spectrum on a strictly increasing grid and locate the peaks.

    With ``workers > 1`` the grid is split into contiguous blocks that are
    evaluated concurrently; each point is computed by the same expression
    either way, so the output does not depend on ``workers``.
    """
    omegas = np.asarray(omega_grid, dtype=float)
    if omegas.ndim != 1 or omegas.size == 0:
        raise ValueError("omega_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(omegas) <= 0):
        raise ValueError("omega_grid must be strictly increasing")
    if workers > 1 and omegas.size > 1:
        from concurrent.futures import ThreadPoolExecutor

        blocks = np.array_split(omegas, workers)
        with ThreadPoolExecutor(workers) as pool:
            s = np.concatenate(list(pool.map(lambda b: psd_batch(j, d, b), blocks)))
    else:
        s = psd_batch(j, d, omegas)
    return PsdSweep(
        omegas, s,
        _grid_peak(omegas, s[:, 0, 0].real),
        _grid_peak(omegas, s[:, 1, 1].real),
    )


def spectral_scale(j) -> float:
    """Frequency scale of ``J``: its Frobenius norm, an upper bound on |eigenvalue|."""
    j = _as_jacobian(j)
    return float(np.linalg.norm(j.as_array()))


def default_integration_grid(j, span: float = DEFAULT_INTEGRATION_SPAN,
                             n_points: int = DEFAULT_INTEGRATION_POINTS) -> np.ndarray:
    """Symmetric uniform grid on ``[-span * scale, span * scale]``."""
    wmax = span * spectral_scale(j)
    return np.linspace(-wmax, wmax, n_points)


def default_peak_grid(j, n_points: int = 4001, span: float = 4.0) -> np.ndarray:
    """Nonnegative grid used to locate spectral peaks."""
    return np.linspace(0.0, span * spectral_scale(j), n_points)


def integrate_psd(j, d, omega_grid=None) -> np.ndarray:
    """Trapezoid approximation of ``(1/2pi) int S(omega) d omega``.

    For a symmetric grid this approaches the stationary covariance ``W``.
    """
    grid = default_integration_grid(j) if omega_grid is None else np.asarray(omega_grid, float)
    s = psd_batch(j, d, grid)
    return np.trapezoid(s, grid, axis=0).real / (2 * math.pi)


# --- confidence ellipse -----------------------------------------------------

def chi2_quantile_2dof(p: float) -> float:
    """Quantile of the chi-square distribution with two degrees of freedom."""
    if not 0 < p < 1:
        raise DomainError(f"confidence level must lie in (0, 1), got {p!r}")
    return -2.0 * math.log1p(-p)


@dataclass(frozen=True)
class EllipseGeometry:
    lambda_plus: float
    lambda_minus: float
    ell_plus: float
    ell_minus: float
    theta: float  # radians, major axis measured from the prey axis, in (-pi/2, pi/2]
    p: float


def principal_angle(w: SymMatrix2) -> float:
    theta = 0.5 * math.atan2(2.0 * w.q12, w.q11 - w.q22)
    if theta <= -0.5 * math.pi:
        theta += math.pi
    return theta


def ellipse_geometry(w, p: float = 0.95) -> EllipseGeometry:
    w = _as_sym(w)
    q = chi2_quantile_2dof(p)
    half_sum = 0.5 * (w.q11 + w.q22)
    half_gap = 0.5 * math.hypot(w.q11 - w.q22, 2.0 * w.q12)
    lam_plus = half_sum + half_gap
    lam_minus = half_sum - half_gap
    if lam_minus <= 1e-14 * max(abs(lam_plus), 1e-300):
        raise NotPositiveDefiniteError(f"W is not positive definite (eigenvalues {lam_plus}, {lam_minus})")
    return EllipseGeometry(
        lambda_plus=lam_plus,
        lambda_minus=lam_minus,
        ell_plus=math.sqrt(q * lam_plus),
        ell_minus=math.sqrt(q * lam_minus),
        theta=principal_angle(w),
        p=p,
    )


# --- precursor indicator ----------------------------------------------------

class DsepSource(enum.Enum):
    USER_SUPPLIED = "UserSupplied"
    DEFAULT_MIN_EQUILIBRIUM_COORDINATE = "DefaultMinEquilibriumCoordinate"


@dataclass(frozen=True)
class PrecursorReport:
    pi_p: float
    d_sep: float
    d_sep_source: DsepSource
    regime_note: Regime | None = None


def default_d_sep(params: ModelParams) -> float:
    """Distance from K3 to the nearest extinction axis, ``min(N*, P*)``."""
    k3 = require_coexistence(params)
    return min(k3.n, k3.p)


def precursor_indicator(geom: EllipseGeometry, d_sep: float | None = None,
                        params: ModelParams | None = None) -> PrecursorReport:
    """``Pi_p = ell_plus / d_sep``.

    Without ``d_sep`` the axis distance of K3 is used, which requires
    ``params``.
    """
    regime = classify_regime(params) if params is not None else None
    if d_sep is None:
        if params is None:
            raise DomainError("default d_sep needs the model parameters")
        d_sep = default_d_sep(params)
        source = DsepSource.DEFAULT_MIN_EQUILIBRIUM_COORDINATE
    else:
        if not d_sep > 0:
            raise DomainError(f"d_sep must be positive, got {d_sep!r}")
        source = DsepSource.USER_SUPPLIED
    return PrecursorReport(geom.ell_plus / d_sep, float(d_sep), source, regime)


# --- full chain -------------------------------------------------------------

@dataclass(frozen=True)
class SsfReport:
    """Result of the Lyapunov -> ellipse -> precursor chain.

    ``defined`` is False outside the Hurwitz regime; the stationary fields
    are then ``None`` and ``message`` carries the reason.
    """

    params: ModelParams
    closure: ClosureKind
    equilibrium: State2
    jacobian: Jacobian2
    d_star: SymMatrix2
    regime: Regime
    defined: bool
    message: str = ""
    lyapunov: LyapunovSolution | None = None
    ellipse: EllipseGeometry | None = None
    precursor: PrecursorReport | None = None
    extras: dict = field(default_factory=dict)

    @property
    def w(self) -> SymMatrix2 | None:
        return None if self.lyapunov is None else self.lyapunov.w


def ssf_pipeline(params: ModelParams, closure=ClosureKind.BERNOULLI_COUPLED,
                 p: float = 0.95, d_sep: float | None = None) -> SsfReport:
    closure = ClosureKind.from_name(closure)
    k3 = require_coexistence(params)
    j = jacobian_at_K3(params)
    d_star = full_covariance(params, k3, closure)
    regime = classify_regime(params)
    common = dict(params=params, closure=closure, equilibrium=k3, jacobian=j,
                  d_star=d_star, regime=regime)
    if not j.is_hurwitz:
        return SsfReport(defined=False, message=NOT_DEFINED, **common)
    sol = solve_lyapunov(j, d_star)
    w = sol.w.as_array()
    w = SymMatrix2.from_array(0.5 * (w + w.T))
    sol = LyapunovSolution(w, sol.residual_norm)
    geom = ellipse_geometry(w, p)
    prec = precursor_indicator(geom, d_sep, params)
    return SsfReport(defined=True, lyapunov=sol, ellipse=geom, precursor=prec, **common)


def closure_w22_gap(params: ModelParams) -> float:
    """Analytic ``w22(split) - w22(bernoulli)`` at K3.

    The two closures share the diagonal of ``D*`` and differ in the
    cross-covariance by ``e f_pred / omega``. With the zero (2, 2) entry
    of ``J(K3)`` the Lyapunov system leaves ``w11`` and ``w12`` unchanged
    and shifts ``w22`` by ``e f_pred(K3) / (omega c)``.
    """
    k3 = require_coexistence(params)
    return params.e * predation_intensity(params, k3) / (params.omega * params.c)
