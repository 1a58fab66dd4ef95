import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rmhopf.closures import ClosureKind, channels, full_covariance
from rmhopf.errors import DomainError, NotHurwitzError, UnsupportedClosureError
from rmhopf.estimators import estimate_stationary_covariance
from rmhopf.lna import solve_lyapunov
from rmhopf.model import ModelParams, State2, drift, jacobian_at_K3, require_coexistence
from rmhopf.simulate import (
    Boundary,
    SimConfig,
    lna_matrices,
    ou_simulate,
    sde_simulate,
    simulate,
    ssa_simulate,
)

WORKED = ModelParams(2.0, 1.0, 2.0, omega=1.0)


def cfg(**kw):
    base = dict(params=WORKED.replace(omega=200.0), t_end=5.0, dt=1e-3, sample_stride=0.1)
    base.update(kw)
    return SimConfig(**base)


class TestConfig:
    def test_defaults_start_at_k3(self):
        assert cfg().start() == State2(1.0, 0.5)

    @pytest.mark.parametrize("kw", [dict(t_end=0.0), dict(dt=10.0), dict(burn_in=5.0),
                                    dict(sample_stride=0.0), dict(seed=-1), dict(n_replicates=0),
                                    dict(initial_state=(-1.0, 1.0))])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            cfg(**kw)

    def test_effective_rejected_for_ssa(self):
        with pytest.raises(UnsupportedClosureError):
            cfg(closure="effective")
        cfg(closure="effective", scheme="diffusion")

    def test_stride_must_divide_dt(self):
        with pytest.raises(DomainError):
            sde_simulate(cfg(scheme="diffusion", sample_stride=0.10005))

    def test_scheme_guard(self):
        with pytest.raises(DomainError):
            ssa_simulate(cfg(scheme="ou"))
        with pytest.raises(DomainError):
            ou_simulate(cfg())


class TestSSA:
    def test_shape_and_units(self):
        tr = ssa_simulate(cfg())
        assert len(tr) == 51 and tr.states.shape == (51, 2)
        assert np.all(np.diff(tr.times) > 0)
        assert np.array_equal(tr.states[0], [1.0, 0.5])
        # densities are counts over omega
        assert np.allclose(tr.states * 200.0, np.round(tr.states * 200.0))
        assert tr.n_events > 0

    def test_origin_start_absorbed(self):
        tr = ssa_simulate(cfg(initial_state=(0.0, 0.0)))
        assert tr.absorbed_at.boundary is Boundary.ORIGIN
        assert tr.absorbed_at.time == 0.0

    def test_prey_only_start(self):
        tr = ssa_simulate(cfg(initial_state=(1.0, 0.0)))
        assert tr.absorbed_at.boundary is Boundary.PREY_AXIS

    def test_deterministic(self):
        a, b = ssa_simulate(cfg(seed=9), 3), ssa_simulate(cfg(seed=9), 3)
        assert a.states.tobytes() == b.states.tobytes()
        c = ssa_simulate(cfg(seed=9), 4)
        assert a.states.tobytes() != c.states.tobytes()

    def test_absorbed_samples_stop(self):
        p = ModelParams(2.0, 1.0, 2.9, omega=10.0)
        for r in range(20):
            tr = ssa_simulate(SimConfig(p, t_end=500.0, seed=1), r)
            if tr.absorbed_at is not None:
                assert tr.times[-1] <= tr.absorbed_at.time
                assert np.all(tr.states >= 0)
                return
        pytest.fail("no absorption at omega=10 near the Hopf threshold")

    @pytest.mark.parametrize("closure,e", [("bernoulli", 1.0), ("bernoulli", 0.5), ("split", 1.0)])
    def test_short_run_moments(self, closure, e):
        """Mean and covariance of short-horizon increments match the channel drift and a(x)."""
        params = ModelParams(2.0, 1.0, 2.0, omega=100.0, e=e)
        x = (1.5, 0.8)
        h, runs = 0.01, 20000
        c = SimConfig(params, closure=closure, t_end=h, sample_stride=h, initial_state=x, seed=17)
        inc = np.array([ssa_simulate(c, r).states[1] for r in range(runs)]) - np.array(x)
        mean = inc.mean(axis=0) / h
        chans = channels(params, closure)
        b = chans.drift(params, x)
        se = inc.std(axis=0, ddof=1) / h / math.sqrt(runs)
        assert np.all(np.abs(mean - b) <= 3 * se)
        if e == 1.0:
            assert np.allclose(b, drift(params, x), atol=1e-12)
        cov = np.cov(inc.T) / h
        a = chans.covariance(params, x).as_array()
        # standard error of a sample (co)variance from fourth moments
        dev = inc - inc.mean(axis=0)
        for i, j in ((0, 0), (0, 1), (1, 1)):
            prod = dev[:, i] * dev[:, j]
            se_ij = prod.std(ddof=1) / h / math.sqrt(runs)
            assert abs(cov[i, j] - a[i, j]) <= 3 * se_ij, (i, j)


class TestDiffusion:
    def test_zero_noise_stays_at_k3(self):
        params = WORKED.replace(omega=math.inf)
        for viewpoint in ("open", "absorbed"):
            tr = sde_simulate(cfg(params=params, scheme="diffusion", viewpoint=viewpoint, t_end=50.0))
            assert np.allclose(tr.states, [1.0, 0.5], atol=1e-12)

    def test_zero_noise_follows_ode(self):
        params = WORKED.replace(omega=math.inf)
        c = cfg(params=params, scheme="diffusion", t_end=5.0, dt=1e-4, initial_state=(1.5, 0.7))
        tr = sde_simulate(c)
        ref = solve_ivp(lambda t, y: drift(params, y), (0, 5), [1.5, 0.7], t_eval=tr.times,
                        rtol=1e-10, atol=1e-12)
        assert np.allclose(tr.states, ref.y.T, atol=1e-3)

    def test_absorbed_extinctions_near_hopf(self):
        params = ModelParams(2.0, 1.0, 2.9, omega=50.0)
        c = SimConfig(params, scheme="diffusion", viewpoint="absorbed", t_end=500.0, dt=1e-3, seed=3)
        hits = [sde_simulate(c, r).absorbed_at for r in range(20)]
        assert any(h is not None for h in hits)
        for h in hits:
            if h is not None:
                assert h.boundary in set(Boundary)
                assert 0 < h.time <= 500.0

    def test_open_domain_no_clamps_large_omega(self):
        params = ModelParams(2.0, 1.0, 0.9 * 3.0, omega=1000.0)
        tr = sde_simulate(SimConfig(params, scheme="diffusion", viewpoint="open", t_end=1000.0, seed=5))
        assert tr.clamp_count == 0 and tr.survived
        assert len(tr) == 10001

    def test_open_domain_stays_positive(self):
        params = ModelParams(2.0, 1.0, 2.9, omega=20.0)
        tr = sde_simulate(SimConfig(params, scheme="diffusion", viewpoint="open", t_end=300.0, seed=2))
        assert tr.survived and np.all(tr.states > 0)

    def test_deterministic(self):
        c = cfg(scheme="diffusion", seed=4)
        assert sde_simulate(c, 2).states.tobytes() == sde_simulate(c, 2).states.tobytes()

    @pytest.mark.slow
    def test_covariance_matches_lyapunov(self):
        params = WORKED.replace(omega=5000.0)
        c = SimConfig(params, scheme="diffusion", viewpoint="open", t_end=2000.0, burn_in=200.0, seed=0)
        stats = estimate_stationary_covariance([sde_simulate(c, r) for r in range(8)], 200.0)
        w = solve_lyapunov(*_jd(params)).w.as_array()
        assert np.all(np.abs(stats.sample_cov.as_array() - w) <= 0.1 * np.abs(w))


def _jd(params, closure=ClosureKind.BERNOULLI_COUPLED):
    return jacobian_at_K3(params), full_covariance(params, require_coexistence(params), closure)


class TestOU:
    def test_lna_matrices(self):
        j, b = lna_matrices(WORKED, ClosureKind.BERNOULLI_COUPLED)
        assert np.allclose(b @ b.T, [[2.0, -0.5], [-0.5, 1.0]])
        assert j.a22 == 0.0

    def test_not_hurwitz(self):
        with pytest.raises(NotHurwitzError):
            ou_simulate(cfg(params=WORKED.replace(k=4.0), scheme="ou"))

    def test_deviation_coordinates(self):
        tr = ou_simulate(cfg(scheme="ou", initial_state=(1.5, 0.5)))
        assert tr.coordinates == "deviation"
        assert np.allclose(tr.states[0], [0.5, 0.0])

    def test_stationary_covariance(self):
        c = SimConfig(WORKED, scheme="ou", t_end=5e4, dt=1e-3, burn_in=1e3, seed=0)
        got = estimate_stationary_covariance(ou_simulate(c), 1e3).sample_cov.as_array()
        w = np.array([[12.0, -2.0], [-2.0, 3.0]])
        assert np.all(np.abs(got - w) <= 0.05 * np.abs(w))

    def test_zero_noise_decays(self):
        c = cfg(scheme="ou", t_end=100.0, initial_state=(1.5, 0.7))
        tr = ou_simulate(c, b=np.zeros((2, 2)))
        assert np.abs(tr.states[-1]).max() < 1e-4 * np.abs(tr.states[0]).max()

    def test_dispatch(self):
        assert simulate(cfg(scheme="ou")).coordinates == "deviation"
        assert simulate(cfg()).n_events > 0
