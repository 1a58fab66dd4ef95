import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rmhopf.closures import (
    ClosureKind,
    SymMatrix2,
    base_covariance,
    channels,
    factorize_covariance,
    full_covariance,
    predation_covariance,
    predation_intensity,
    ssa_channels,
)
from rmhopf.errors import NotPSDError, UnsupportedClosureError
from rmhopf.model import ModelParams, drift

from conftest import random_feasible

B, E, S = ClosureKind.BERNOULLI_COUPLED, ClosureKind.EFFECTIVE_COUPLED, ClosureKind.SPLIT_DIAGONAL
interior = st.tuples(st.floats(1e-3, 50.0), st.floats(1e-3, 50.0))
efficiency = st.floats(0.01, 1.0)


def sym_close(a: SymMatrix2, b, tol=1e-12):
    b = b if isinstance(b, SymMatrix2) else SymMatrix2.from_array(b)
    scale = max(a.max_abs, b.max_abs, 1e-300)
    return np.max(np.abs(a.as_array() - b.as_array())) <= tol * scale


class TestClosureKind:
    def test_from_name(self):
        assert ClosureKind.from_name("Split") is S
        assert ClosureKind.from_name(B) is B
        with pytest.raises(ValueError):
            ClosureKind.from_name("diagonal")

    def test_coupled_flag(self):
        assert B.is_coupled and E.is_coupled and not S.is_coupled


class TestSymMatrix:
    def test_psd_check(self):
        assert SymMatrix2(1.0, 1.0, 1.0).is_psd()
        assert not SymMatrix2(1.0, 2.0, 1.0).is_psd()
        assert not SymMatrix2(-1.0, 0.0, 1.0).is_psd()

    def test_arithmetic(self):
        a = SymMatrix2(1.0, 2.0, 3.0)
        assert a + a == SymMatrix2(2.0, 4.0, 6.0)
        assert (a - a).max_abs == 0.0
        assert a.scaled(0.5) == SymMatrix2(0.5, 1.0, 1.5)
        assert a.det == -1.0

    def test_from_array_symmetrizes(self):
        assert SymMatrix2.from_array([[1.0, 2.0], [4.0, 5.0]]).q12 == 3.0


class TestCovariances:
    def test_predation_intensity(self, worked):
        assert predation_intensity(worked, (1.0, 0.5)) == 0.5
        assert predation_intensity(worked, (0.0, 7.0)) == 0.0
        assert predation_intensity(worked, (5.0, 0.0)) == 0.0

    def test_base(self, worked):
        assert base_covariance(worked, (1.0, 0.5)) == SymMatrix2(1.5, 0.0, 0.5)
        assert base_covariance(worked, (0.0, 0.0)).max_abs == 0.0
        big = base_covariance(worked.replace(omega=1000.0), (1.0, 0.5))
        assert sym_close(big, SymMatrix2(1.5e-3, 0.0, 0.5e-3))

    def test_predation_blocks(self, worked):
        x = (1.0, 0.5)
        assert predation_covariance(worked, x, B) == SymMatrix2(0.5, -0.5, 0.5)
        assert predation_covariance(worked, x, S) == SymMatrix2(0.5, 0.0, 0.5)
        half = worked.replace(e=0.5)
        f = predation_intensity(half, x)
        pb, pe = predation_covariance(half, x, B), predation_covariance(half, x, E)
        assert pb.q12 == pe.q12
        assert math.isclose(pb.q12, -0.5 * f) and math.isclose(pe.q12, -0.5 * f)
        assert math.isclose(pb.q22, 0.5 * f) and math.isclose(pe.q22, 0.25 * f)

    def test_full_worked(self, worked):
        assert full_covariance(worked, (1.0, 0.5), B) == SymMatrix2(2.0, -0.5, 1.0)
        assert full_covariance(worked, (1.0, 0.5), S) == SymMatrix2(2.0, 0.0, 1.0)

    @given(interior, efficiency)
    def test_structural_signs(self, x, e):
        params = ModelParams(2.0, 1.0, 2.5, omega=7.0, e=e)
        f = predation_intensity(params, x)
        qb = predation_covariance(params, x, B)
        qe = predation_covariance(params, x, E)
        qs = predation_covariance(params, x, S)
        assert qb.q12 < 0 and qb.q12 == qe.q12
        assert math.isclose(qb.q12, -e * f / params.omega, rel_tol=1e-15)
        assert qs.q12 == 0.0
        gap = qb.q22 - qe.q22
        assert gap >= 0
        assert math.isclose(gap, e * (1 - e) * f / params.omega, rel_tol=1e-9, abs_tol=1e-15 * f)

    @given(interior, efficiency, st.sampled_from([B, E, S]))
    def test_all_psd(self, x, e, closure):
        params = ModelParams(2.0, 1.0, 2.5, omega=3.0, e=e)
        assert full_covariance(params, x, closure).is_psd()
        assert predation_covariance(params, x, closure).is_psd()

    @given(interior)
    def test_unit_efficiency_shares_diagonal(self, x):
        params = ModelParams(2.0, 1.0, 2.5, omega=3.0, e=1.0)
        a, b = full_covariance(params, x, B), full_covariance(params, x, S)
        assert a.q11 == b.q11 and a.q22 == b.q22
        assert math.isclose(a.q12, -predation_intensity(params, x) / 3.0)


class TestFactorization:
    def test_identity(self):
        assert np.array_equal(factorize_covariance(SymMatrix2(1.0, 0.0, 1.0)), np.eye(2))

    def test_cholesky_case(self):
        b = factorize_covariance(SymMatrix2(2.0, -0.5, 1.0))
        ref = np.array([[math.sqrt(2), 0.0], [-0.5 / math.sqrt(2), math.sqrt(1 - 0.125)]])
        assert np.allclose(b, ref, rtol=1e-15, atol=1e-15)

    def test_rank_one(self):
        b = factorize_covariance(SymMatrix2(1.0, -1.0, 1.0))
        assert np.array_equal(b, np.array([[1.0, 0.0], [-1.0, 0.0]]))

    def test_zero_prey_variance(self):
        b = factorize_covariance(SymMatrix2(0.0, 0.0, 4.0))
        assert np.allclose(b @ b.T, [[0, 0], [0, 4]])

    @pytest.mark.parametrize("a", [SymMatrix2(-1.0, 0.0, 1.0), SymMatrix2(1.0, 2.0, 1.0)])
    def test_not_psd(self, a):
        with pytest.raises(NotPSDError):
            factorize_covariance(a)

    def test_random_recomposition(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            g = rng.normal(size=(2, 2))
            if rng.random() < 0.2:
                g[:, 1] = 0.0  # rank one
            a = SymMatrix2.from_array(g @ g.T)
            b = factorize_covariance(a)
            assert b[0, 1] == 0.0
            assert sym_close(SymMatrix2.from_array(b @ b.T), a, 1e-12)


class TestChannels:
    def test_counts(self, worked):
        assert len(ssa_channels(worked, B)) == 4
        assert len(ssa_channels(worked.replace(e=0.5), B)) == 5
        assert len(ssa_channels(worked, S)) == 5
        with pytest.raises(UnsupportedClosureError):
            ssa_channels(worked, E)

    def test_integer_increments(self, worked):
        for closure in (B, S):
            inc = ssa_channels(worked.replace(e=0.3), closure).increments()
            assert np.array_equal(inc, np.round(inc))

    def test_count_rates(self):
        params = ModelParams(2.0, 1.0, 2.0, omega=100.0, e=0.25)
        counts = (30.0, 20.0)
        rates = {ch.name: ch.rate(params, counts) for ch in ssa_channels(params, B)}
        assert math.isclose(rates["prey_birth"], 30.0)
        assert math.isclose(rates["prey_competition"], 900.0 / (2.0 * 100.0))
        assert math.isclose(rates["predator_death"], 20.0)
        assert math.isclose(rates["predation_conversion"], 0.25 * 2 * 30 * 20 / 130.0)
        assert math.isclose(rates["predation_no_conversion"], 0.75 * 2 * 30 * 20 / 130.0)

    def test_drift_match_unit_efficiency(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            params = random_feasible(rng)
            x = rng.uniform(0.0, 5.0, size=2)
            ref = drift(params, x)
            for closure in (B, E, S):
                got = channels(params, closure).drift(params, x)
                assert np.allclose(got, ref, rtol=1e-12, atol=1e-12 * (1 + np.abs(ref).max()))

    def test_covariance_match(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            params = random_feasible(rng, e=rng.uniform(0.05, 1.0), omega=rng.uniform(1, 1e4))
            x = rng.uniform(0.0, 5.0, size=2)
            for closure in (B, E, S):
                assert sym_close(channels(params, closure).covariance(params, x),
                                 full_covariance(params, x, closure))

    @given(interior, efficiency)
    def test_same_drift_different_covariance(self, x, e):
        params = ModelParams(2.0, 1.0, 2.5, omega=1.0, e=e)
        db = channels(params, B).drift(params, x)
        ds = channels(params, S).drift(params, x)
        de = channels(params, E).drift(params, x)
        assert np.allclose(db, ds, rtol=1e-12, atol=1e-12) and np.allclose(db, de, rtol=1e-12, atol=1e-12)
        assert channels(params, B).covariance(params, x) != channels(params, S).covariance(params, x)
