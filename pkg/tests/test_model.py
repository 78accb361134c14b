"""System construction, stream generation, and hyperparameter selection."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sysid import linalg, model
from sysid.errors import (
    ConfigError,
    DegenerateNormBound,
    DimensionError,
    StabilityError,
)

from helpers import make_rng, random_stable_system


class TestMakeSystem:
    def test_caches_factor_and_norm(self):
        sys_ = random_stable_system(4, 0.8, seed=1)
        assert sys_.dim == 4
        assert np.allclose(sys_.noise_chol @ sys_.noise_chol.T, sys_.noise_cov, atol=1e-10)
        assert sys_.transition_norm == pytest.approx(0.8, abs=1e-10)

    def test_nonsquare_rejected(self):
        with pytest.raises(DimensionError):
            model.make_system(np.ones((2, 3)), np.eye(2))

    def test_mismatched_noise_rejected(self):
        with pytest.raises(DimensionError):
            model.make_system(np.eye(2), np.eye(3))

    def test_asymmetric_noise_rejected(self):
        with pytest.raises(ValueError):
            model.make_system(np.eye(2), np.array([[1.0, 0.2], [0.0, 1.0]]))

    def test_unstable_warns_not_fails(self):
        with pytest.warns(RuntimeWarning):
            sys_ = model.make_system(1.5 * np.eye(2), np.eye(2))
        assert sys_.transition_norm == pytest.approx(1.5, abs=1e-10)

    def test_zero_noise_allowed(self):
        sys_ = model.make_system(0.5 * np.eye(2), np.zeros((2, 2)))
        assert np.array_equal(sys_.noise_chol, np.zeros((2, 2)))


class TestRandBimod:
    def test_eigenvalue_multiset_d5(self):
        a = model.rand_bimod(5, 0.9, make_rng(2))
        eigs = np.sort(np.linalg.eigvalsh(a))
        expected = np.sort([0.9, 0.9, 0.9, 0.3, 0.3])
        assert np.max(np.abs(eigs - expected)) < 1e-10

    def test_d1(self):
        a = model.rand_bimod(1, 0.9, make_rng(3))
        assert a.shape == (1, 1)
        assert a[0, 0] == pytest.approx(0.9, abs=1e-12)

    def test_d4_symmetric_with_expected_norm(self):
        a = model.rand_bimod(4, 0.6, make_rng(4))
        assert np.array_equal(a, a.T)
        assert linalg.spectral_norm(a) == pytest.approx(0.6, abs=1e-10)

    def test_distinct_seeds_differ(self):
        a = model.rand_bimod(5, 0.9, make_rng(5))
        b = model.rand_bimod(5, 0.9, make_rng(6))
        assert not np.allclose(a, b)

    def test_invalid_params(self):
        with pytest.raises(DimensionError):
            model.rand_bimod(0, 0.9, make_rng(0))
        with pytest.raises(ValueError):
            model.rand_bimod(3, -0.1, make_rng(0))
        with pytest.warns(RuntimeWarning):
            model.rand_bimod(3, 1.2, make_rng(0))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 9))
    def test_spectrum_property(self, seed, d):
        rho = 0.7
        a = model.rand_bimod(d, rho, make_rng(seed))
        eigs = np.sort(np.linalg.eigvalsh(a))
        expected = np.sort([rho] * math.ceil(d / 2) + [rho / 3.0] * (d // 2))
        assert np.max(np.abs(eigs - expected)) < 1e-10


class TestStreams:
    def test_zero_transition_yields_pure_noise(self):
        sys_ = model.make_system(np.zeros((3, 3)), np.diag([1.0, 2.0, 0.5]))
        samples = model.simulate(sys_, 10**5 + 1, rng=make_rng(7))
        noise = samples[1:]
        cov = noise.T @ noise / noise.shape[0]
        assert np.max(np.abs(cov - sys_.noise_cov)) < 0.05 * 2.0

    def test_noise_free_recursion_exact(self):
        a = np.array([[0.5, 0.1], [0.0, 0.4]])
        sys_ = model.make_system(a, np.zeros((2, 2)))
        v = np.array([1.0, -2.0])
        samples = model.simulate(sys_, 5, rng=make_rng(0), x0=v)
        expected = v
        for t in range(5):
            assert np.allclose(samples[t], expected, atol=0)
            expected = a @ expected

    def test_stationary_start_covariance(self):
        sys_ = random_stable_system(5, 0.9, seed=8)
        g = linalg.solve_lyapunov(sys_.transition, sys_.noise_cov)
        samples = model.simulate(sys_, 10**6, start="stationary", rng=make_rng(9))
        cov = samples.T @ samples / samples.shape[0]
        assert np.max(np.abs(cov - g)) < 0.10 * np.max(np.abs(g))

    def test_zero_start_first_sample(self):
        sys_ = random_stable_system(3, 0.5, seed=10)
        samples = model.simulate(sys_, 3, rng=make_rng(11))
        assert np.array_equal(samples[0], np.zeros(3))

    def test_stream_matches_simulate(self):
        # Lazy and materialized paths must agree sample-for-sample, including
        # across the internal chunk boundary.
        sys_ = random_stable_system(2, 0.8, seed=12)
        n = 8192 * 2 + 37
        materialized = model.simulate(sys_, n, rng=make_rng(13))
        stream = model.var_stream(sys_, rng=make_rng(13))
        for t in range(n):
            assert np.array_equal(materialized[t], next(stream))

    def test_same_seed_identical_streams(self):
        sys_ = random_stable_system(3, 0.9, seed=14)
        a = model.simulate(sys_, 1000, rng=make_rng(15))
        b = model.simulate(sys_, 1000, rng=make_rng(15))
        assert np.array_equal(a, b)

    def test_stationary_start_unstable_raises(self):
        with pytest.warns(RuntimeWarning):
            sys_ = model.make_system(1.2 * np.eye(2), np.eye(2))
        with pytest.raises(StabilityError):
            model.simulate(sys_, 10, start="stationary", rng=make_rng(16))

    def test_unknown_start_mode(self):
        sys_ = random_stable_system(2, 0.5, seed=17)
        with pytest.raises(ConfigError):
            model.simulate(sys_, 10, start="warm", rng=make_rng(18))

    def test_rng_required(self):
        sys_ = random_stable_system(2, 0.5, seed=19)
        with pytest.raises(ValueError):
            model.simulate(sys_, 10)
        with pytest.raises(ValueError):
            next(model.var_stream(sys_))

    def test_x0_shape_checked(self):
        sys_ = random_stable_system(2, 0.5, seed=20)
        with pytest.raises(DimensionError):
            model.simulate(sys_, 10, rng=make_rng(21), x0=np.ones(3))


class TestEstimateNormBound:
    def test_two_vector_arithmetic(self):
        prefix = np.array([[1.0, 0.0], [2.0, 0.0]])
        assert model.estimate_norm_bound(prefix) == pytest.approx(5.0, abs=0)

    def test_plain_norm_reading(self):
        prefix = np.array([[3.0, 4.0], [0.0, 2.0]])
        assert model.estimate_norm_bound(prefix, squared=False) == pytest.approx(7.0)

    def test_resummation_oracle(self):
        prefix = make_rng(22).standard_normal((32, 5))
        oracle = 0.0
        for row in prefix:
            oracle += float(np.dot(row, row))
        assert model.estimate_norm_bound(prefix) == oracle

    def test_all_zero_prefix_raises(self):
        with pytest.raises(DegenerateNormBound):
            model.estimate_norm_bound(np.zeros((2, 3)))

    def test_empty_prefix_raises(self):
        with pytest.raises(DimensionError):
            model.estimate_norm_bound(np.zeros((0, 3)))

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        n=st.integers(1, 20),
        extra=st.integers(1, 5),
    )
    def test_monotone_in_prefix_length(self, seed, n, extra):
        data = make_rng(seed).uniform(-3, 3, size=(n + extra, 4))
        shorter = model.estimate_norm_bound(data[:n])
        longer = model.estimate_norm_bound(data)
        assert longer >= shorter


class TestPickHyperparams:
    def test_theory_frozen_values(self):
        hp = model.pick_hyperparams(
            10**6, 5, spectral_bound=0.9, noise_trace=5.0, alpha=22.0, preset="theory"
        )
        assert hp.gap == 2885
        assert hp.buffer_size == 28850
        assert hp.stride == 31735
        assert hp.n_buffers == 31
        assert hp.burn_in == 15
        log_t = math.log(10**6)
        expected_bound = 5.0 * log_t / (1.0 - 0.81)
        assert hp.norm_bound == pytest.approx(expected_bound, rel=1e-12)
        assert hp.step_size == pytest.approx(1.0 / (8.0 * expected_bound * 28850), rel=1e-12)

    def test_theory_step_rule_substitution(self):
        # gamma = 1/(8 R B) for whatever R the preset produced.
        hp = model.pick_hyperparams(
            10**5, 3, spectral_bound=0.5, noise_trace=3.0, preset="theory"
        )
        assert hp.step_size == pytest.approx(
            1.0 / (8.0 * hp.norm_bound * hp.buffer_size), rel=1e-12
        )
        assert hp.buffer_size == 10 * hp.gap
        assert hp.step_size * hp.norm_bound <= 0.5

    def test_theory_requires_stable_bound(self):
        with pytest.raises(StabilityError):
            model.pick_hyperparams(
                10**5, 2, spectral_bound=1.0, noise_trace=2.0, preset="theory"
            )

    def test_theory_requires_alpha_floor(self):
        with pytest.raises(ConfigError):
            model.pick_hyperparams(
                10**5, 2, spectral_bound=0.5, noise_trace=2.0, alpha=10.0, preset="theory"
            )

    def test_theory_horizon_too_small(self):
        with pytest.raises(ConfigError):
            model.pick_hyperparams(
                100, 2, spectral_bound=0.9, noise_trace=2.0, preset="theory"
            )

    def test_experiment_preset(self):
        hp = model.pick_hyperparams(10**7, 5, preset="experiment", norm_bound=500.0)
        assert hp.buffer_size == 100
        assert hp.gap == 10
        assert hp.step_size == pytest.approx(1.0 / 1000.0)
        assert hp.burn_in == 16  # floor(ln 1e7)

    def test_experiment_needs_bound(self):
        with pytest.raises(ConfigError):
            model.pick_hyperparams(10**6, 5, preset="experiment")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            model.pick_hyperparams(10**6, 5, preset="tuned", norm_bound=1.0)


class TestHyperParamsInvariants:
    def test_burn_in_range_enforced(self):
        with pytest.raises(ConfigError):
            model.HyperParams(
                horizon=1000, buffer_size=100, gap=10, step_size=1e-3,
                norm_bound=10.0, burn_in=9,
            )

    def test_step_bound_product_enforced(self):
        with pytest.raises(ConfigError):
            model.HyperParams(
                horizon=1000, buffer_size=10, gap=0, step_size=0.1,
                norm_bound=10.0, burn_in=0,
            )

    def test_no_full_buffer(self):
        with pytest.raises(ConfigError):
            model.HyperParams(
                horizon=50, buffer_size=100, gap=10, step_size=1e-3,
                norm_bound=10.0, burn_in=0,
            )

    def test_derived_quantities(self):
        hp = model.HyperParams(
            horizon=1000, buffer_size=100, gap=10, step_size=1e-3,
            norm_bound=10.0, burn_in=3,
        )
        assert hp.stride == 110
        assert hp.n_buffers == 9


class TestGelfandGap:
    def test_frozen_scaled_identity_case(self):
        # ceil((ln(1e4 * 4/3) + 2 ln(2 * 0.5)) / ln 2) = ceil(13.70) = 14,
        # which also equals the plain stable-case floor for norm 0.5.
        gap = model.gelfand_gap(0.5 * np.eye(2), 10**4, g_max=4.0 / 3.0)
        assert gap == 14

    def test_nilpotent_fallback_exceeds_stable_case(self):
        nilpotent = np.array([[0.0, 3.0], [0.0, 0.0]])
        gap = model.gelfand_gap(nilpotent, 10**4, g_max=4.0 / 3.0)
        assert gap == math.ceil(2 * math.log(10**4))  # 19
        assert gap > 14

    def test_stable_norm_floor_applies(self):
        # Tiny formula value must still respect ceil(ln T / ln(1/||A||)).
        a = 0.9 * np.eye(2)
        gap = model.gelfand_gap(a, 10**4, g_max=1e-6)
        assert gap >= math.ceil(math.log(10**4) / math.log(1.0 / 0.9))

    def test_radius_at_or_above_one_raises(self):
        with pytest.raises(StabilityError):
            model.gelfand_gap(np.eye(2), 10**4, g_max=1.0)

    def test_validates_inputs(self):
        with pytest.raises(ConfigError):
            model.gelfand_gap(0.5 * np.eye(2), 1, g_max=1.0)
        with pytest.raises(ConfigError):
            model.gelfand_gap(0.5 * np.eye(2), 10**4, g_max=0.0)
