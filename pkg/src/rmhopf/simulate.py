"""Trajectory simulators: exact SSA, diffusion Euler-Maruyama, and the LNA OU process.

Randomness
----------
Replicate ``r`` of a run seeded with ``seed`` draws from
``numpy.random.Philox`` keyed by ``SeedSequence(seed, spawn_key=(r,))``.
Philox is counter based, and the spawn key is hashed together with the
seed, so replicate streams are independent and each trajectory is a
pure function of ``(config, r)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .closures import ClosureKind, factorize_covariance, full_covariance, ssa_channels
from .errors import DomainError, NotHurwitzError, StepFailure
from .lna import NOT_DEFINED
from .model import Jacobian2, ModelParams, State2, jacobian_at_K3, require_coexistence

RNG_NAME = "numpy.random.Philox(SeedSequence(seed, spawn_key=(replicate,)))"

UNIFORM_CHUNK = 1 << 20
NORMAL_CHUNK = 1 << 20
FIRST_CHUNK = 1 << 12


def _chunk_sizes(cap: int):
    """Geometric chunk sizes ``FIRST_CHUNK, 4x, ...`` capped at ``cap``.

    Both generators used here produce the same stream whatever the
    request sizes, so short runs stay cheap without changing any path.
    """
    size = FIRST_CHUNK
    while True:
        yield size
        size = min(4 * size, cap)


class Scheme(enum.Enum):
    SSA = "ssa"
    DIFFUSION_EM = "diffusion"
    LNA_OU = "ou"


class Viewpoint(enum.Enum):
    OPEN_DOMAIN = "open"
    ABSORBED = "absorbed"


class Boundary(enum.Enum):
    """Where an absorbed trajectory ended.

    Named geometrically: ``PREY_AXIS`` is the N-axis ``{P = 0}`` (predator
    extinct), ``PREDATOR_AXIS`` is the P-axis ``{N = 0}`` (prey extinct).
    """

    PREY_AXIS = "PreyAxis"
    PREDATOR_AXIS = "PredatorAxis"
    ORIGIN = "Origin"

    @classmethod
    def from_state(cls, prey_gone: bool, predator_gone: bool) -> Boundary:
        if prey_gone and predator_gone:
            return cls.ORIGIN
        return cls.PREDATOR_AXIS if prey_gone else cls.PREY_AXIS


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    closure: ClosureKind = ClosureKind.BERNOULLI_COUPLED
    scheme: Scheme = Scheme.SSA
    viewpoint: Viewpoint = Viewpoint.ABSORBED
    t_end: float = 100.0
    dt: float = 1e-3
    burn_in: float = 0.0
    sample_stride: float = 0.1
    seed: int = 0
    n_replicates: int = 1
    initial_state: State2 | None = None  # None means start at K3

    def __post_init__(self):
        object.__setattr__(self, "closure", ClosureKind.from_name(self.closure))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "viewpoint", Viewpoint(self.viewpoint))
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")
        if not 0 < self.dt < self.t_end:
            raise DomainError("dt must satisfy 0 < dt < t_end")
        if not 0 <= self.burn_in < self.t_end:
            raise DomainError("burn_in must satisfy 0 <= burn_in < t_end")
        if not self.sample_stride > 0:
            raise DomainError("sample_stride must be positive")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.n_replicates < 1:
            raise DomainError("n_replicates must be at least 1")
        if self.initial_state is not None:
            x = State2(float(self.initial_state[0]), float(self.initial_state[1]))
            if x.n < 0 or x.p < 0:
                raise DomainError("initial_state must lie in the closed quadrant")
            object.__setattr__(self, "initial_state", x)
        if self.scheme is Scheme.SSA:
            ssa_channels(self.params, self.closure)  # rejects the effective closure

    def with_(self, **changes) -> SimConfig:
        return replace(self, **changes)

    def start(self) -> State2:
        if self.initial_state is not None:
            return self.initial_state
        return require_coexistence(self.params)


@dataclass
class Absorption:
    time: float
    boundary: Boundary


@dataclass
class Trajectory:
    """Sampled path. ``states`` has shape ``(len(times), 2)``.

    Densities for SSA and diffusion runs; deviations from K3 for OU runs
    (``coordinates == "deviation"``).
    """

    times: np.ndarray
    states: np.ndarray
    absorbed_at: Absorption | None = None
    coordinates: str = "density"
    clamp_count: int = 0
    n_events: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def survived(self) -> bool:
        return self.absorbed_at is None

    def __len__(self):
        return len(self.times)


def replicate_generator(seed: int, replicate: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replicate,))))


def _sample_times(t_end: float, stride: float) -> np.ndarray:
    count = int(math.floor(t_end / stride * (1 + 1e-12))) + 1
    return np.arange(count) * stride


def _steps(config: SimConfig) -> tuple[int, int]:
    n_steps = int(round(config.t_end / config.dt))
    stride = config.sample_stride / config.dt
    stride_steps = int(round(stride))
    if stride_steps < 1 or abs(stride - stride_steps) > 1e-9 * stride:
        raise DomainError("sample_stride must be a positive integer multiple of dt")
    return n_steps, stride_steps


def ssa_simulate(config: SimConfig, replicate: int = 0) -> Trajectory:
    """Exact Gillespie trajectory, sampled on the stride grid."""
    if config.scheme is not Scheme.SSA:
        raise DomainError("ssa_simulate needs scheme=SSA")
    params = config.params
    if not math.isfinite(params.omega):
        raise DomainError("SSA needs a finite system size")
    chans = ssa_channels(params, config.closure)
    kinds = np.array([ch.kind for ch in chans], dtype=np.int64)
    weights = np.array([ch.weight for ch in chans], dtype=float)
    inc = chans.increments()
    x0 = config.start()
    counts = np.array([round(params.omega * x0.n), round(params.omega * x0.p)], dtype=float)

    times = _sample_times(config.t_end, config.sample_stride)
    out_n = np.empty(len(times))
    out_p = np.empty(len(times))
    fstate = np.array([0.0, counts[0], counts[1]])
    istate = np.zeros(3, dtype=np.int64)
    if counts[0] <= 0 or counts[1] <= 0:
        istate[0] = K.ABSORBED
    rng = replicate_generator(config.seed, replicate)
    sizes = _chunk_sizes(UNIFORM_CHUNK)
    while istate[0] == K.RUNNING:
        u = rng.random(next(sizes))
        K.ssa_advance(fstate, istate, kinds, weights, inc[:, 0].copy(), inc[:, 1].copy(),
                      params.m, params.c, params.k, params.omega, config.t_end,
                      u, times, out_n, out_p)
    ks = int(istate[1])
    absorbed = None
    if istate[0] == K.ABSORBED:
        absorbed = Absorption(float(fstate[0]), Boundary.from_state(fstate[1] <= 0, fstate[2] <= 0))
    states = np.column_stack([out_n[:ks], out_p[:ks]]) / params.omega
    return Trajectory(times[:ks], states, absorbed, n_events=int(istate[2]))


def _run_normals(rng: np.random.Generator, advance) -> None:
    """Feed ``advance(z) -> consumed`` with normals until it stops consuming.

    Unused normals carry over to the next call, so the path does not
    depend on the chunk sizes.
    """
    sizes = _chunk_sizes(NORMAL_CHUNK)
    z = rng.standard_normal(next(sizes))
    while True:
        used = advance(z)
        if used is None:
            return
        z = np.concatenate([z[used:], rng.standard_normal(next(sizes))])


def sde_simulate(config: SimConfig, replicate: int = 0) -> Trajectory:
    """Euler-Maruyama path of the density diffusion.

    Absorbed viewpoint: the first step with ``N <= 0`` or ``P <= 0`` ends
    the path and records the crossed boundary. Open viewpoint: an exiting
    step is redrawn up to 100 times, then clamped to ``1e-9`` and counted
    in ``clamp_count``.
    """
    if config.scheme is not Scheme.DIFFUSION_EM:
        raise DomainError("sde_simulate needs scheme=DiffusionEM")
    params = config.params
    n_steps, stride = _steps(config)
    x0 = config.start()
    nsamp = n_steps // stride + 1
    out_n = np.empty(nsamp)
    out_p = np.empty(nsamp)
    fstate = np.array([x0.n, x0.p], dtype=float)
    istate = np.zeros(5, dtype=np.int64)
    absorbing = config.viewpoint is Viewpoint.ABSORBED
    if absorbing and (x0.n <= 0 or x0.p <= 0):
        istate[0] = K.ABSORBED
        istate[4] = (1 if x0.n <= 0 else 0) | (2 if x0.p <= 0 else 0)
    closure_code = {
        ClosureKind.BERNOULLI_COUPLED: K.BERNOULLI,
        ClosureKind.EFFECTIVE_COUPLED: K.EFFECTIVE,
        ClosureKind.SPLIT_DIAGONAL: K.SPLIT,
    }[config.closure]

    def advance(z):
        if istate[0] != K.RUNNING:
            return None
        return K.em_advance(fstate, istate, closure_code, params.m, params.c, params.k,
                            params.omega, params.e, config.dt, n_steps, stride, absorbing,
                            z, out_n, out_p)

    _run_normals(replicate_generator(config.seed, replicate), advance)
    if istate[0] == K.STEP_FAILURE:
        raise StepFailure(
            f"diffusion covariance not factorizable at state ({fstate[0]!r}, {fstate[1]!r})"
        )
    ks = int(istate[2])
    absorbed = None
    if istate[0] == K.ABSORBED:
        bits = int(istate[4])
        absorbed = Absorption(float(istate[1]) * config.dt, Boundary.from_state(bool(bits & 1), bool(bits & 2)))
    times = np.arange(ks) * (stride * config.dt)
    states = np.column_stack([out_n[:ks], out_p[:ks]])
    return Trajectory(times, states, absorbed, clamp_count=int(istate[3]))


def lna_matrices(params: ModelParams, closure: ClosureKind) -> tuple[Jacobian2, np.ndarray]:
    """``J(K3)`` and the lower-triangular factor of ``D* = a(K3)``."""
    k3 = require_coexistence(params)
    return jacobian_at_K3(params), factorize_covariance(full_covariance(params, k3, closure))


def ou_simulate(config: SimConfig, replicate: int = 0, j=None, b=None) -> Trajectory:
    """Euler-Maruyama path of the frozen-coefficient OU process in deviation coordinates.

    ``j`` and ``b`` (with ``b @ b.T == D``) default to the model's
    ``J(K3)`` and the factor of ``D*``.
    """
    if config.scheme is not Scheme.LNA_OU:
        raise DomainError("ou_simulate needs scheme=LnaOU")
    if j is None or b is None:
        j0, b0 = lna_matrices(config.params, config.closure)
        j = j0 if j is None else j
        b = b0 if b is None else b
    j = j if isinstance(j, Jacobian2) else Jacobian2.from_array(j)
    b = np.asarray(b, dtype=float)
    if not j.is_hurwitz:
        raise NotHurwitzError(f"{NOT_DEFINED}: OU process around K3 has no stationary law")
    if b[0, 1] != 0.0:
        raise DomainError("noise factor must be lower triangular")
    n_steps, stride = _steps(config)
    if config.initial_state is None:
        y0 = (0.0, 0.0)
    else:
        k3 = require_coexistence(config.params)
        y0 = (config.initial_state.n - k3.n, config.initial_state.p - k3.p)
    nsamp = n_steps // stride + 1
    out_1 = np.empty(nsamp)
    out_2 = np.empty(nsamp)
    fstate = np.array(y0, dtype=float)
    istate = np.zeros(3, dtype=np.int64)

    def advance(z):
        if istate[0] != K.RUNNING:
            return None
        return K.ou_advance(fstate, istate, j.a11, j.a12, j.a21, j.a22,
                            b[0, 0], b[1, 0], b[1, 1], config.dt, n_steps, stride,
                            z, out_1, out_2)

    _run_normals(replicate_generator(config.seed, replicate), advance)
    ks = int(istate[2])
    times = np.arange(ks) * (stride * config.dt)
    return Trajectory(times, np.column_stack([out_1[:ks], out_2[:ks]]), coordinates="deviation")


def simulate(config: SimConfig, replicate: int = 0) -> Trajectory:
    """Dispatch on ``config.scheme``."""
    if config.scheme is Scheme.SSA:
        return ssa_simulate(config, replicate)
    if config.scheme is Scheme.DIFFUSION_EM:
        return sde_simulate(config, replicate)
    return ou_simulate(config, replicate)
