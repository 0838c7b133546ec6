"""
Tests for the random Euler product model
"""
import math

import numpy as np
import pytest
from scipy import stats

from src.core.error_handler import InvalidArgumentError
from src.core.grid import EvalGrid
from src.core.lfun import direct_tail_bound
from src.core.numkernel import primes_up_to, sato_tate_cdf
from src.core.randmodel import (
    EnsembleGenerator,
    SU2Sample,
    build_coefficients,
    coefficient_rows_for,
    correction_tail_bound,
    derive_seed,
    eval_euler_product,
    eval_smoothed_series,
    sample_log_euler_product,
    sample_on_grid,
    sample_traces,
    sample_values,
    second_moment_stat,
    trace_matrix,
)

ZETA2_SQUARED = 2.7058080842778454


class TestSampler:
    @pytest.fixture(scope="class")
    def traces(self):
        return trace_matrix(range(1_000_000), np.array([2]))[:, 0]

    def test_in_range(self, traces):
        assert np.all(np.abs(traces) <= 2.0)

    def test_moments(self, traces):
        assert abs(traces.mean()) < 3e-3
        assert abs(traces.var() - 1.0) < 5e-3
        assert abs((traces**4).mean() - 2.0) < 2e-2

    def test_semicircle_law(self, traces):
        assert stats.kstest(traces, sato_tate_cdf).statistic < 3e-3

    def test_value_depends_only_on_seed_and_prime(self):
        wide = trace_matrix([5, 9], np.array([2, 3, 5, 7, 11]))
        narrow = trace_matrix([9], np.array([7]))
        assert wide[1, 3] == narrow[0, 0]
        assert sample_traces(5, 11).trace(11) == wide[0, 4]

    def test_derived_seeds(self):
        assert derive_seed(1, 0) == derive_seed(1, 0)
        assert len({derive_seed(1, i) for i in range(1000)}) == 1000


class TestCoefficients:
    def test_multiplicative(self):
        table = primes_up_to(1 << 16)
        rows = coefficient_rows_for([11, 12, 13], 1 << 16, table)
        rng = np.random.default_rng(2)
        checked = 0
        while checked < 1000:
            m, n = (int(v) for v in rng.integers(2, 256, size=2))
            if math.gcd(m, n) != 1:
                continue
            np.testing.assert_allclose(rows[:, m * n], rows[:, m] * rows[:, n], rtol=1e-12, atol=1e-12)
            checked += 1

    def test_squarefree_orthonormal(self):
        M = 100_000
        squarefree = [n for n in range(1, 31) if all(n % (p * p) for p in (2, 3, 5))]
        rows = coefficient_rows_for(range(M), 30, primes_up_to(64))[:, squarefree]
        for i in range(len(squarefree)):
            for j in range(i, len(squarefree)):
                products = rows[:, i] * rows[:, j]
                delta = 1.0 if i == j else 0.0
                assert abs(products.mean() - delta) < 5 * max(products.std(), 1.0) / math.sqrt(M)

    def test_constant_sample_is_divisor_function(self):
        table = primes_up_to(1000)
        coeffs = build_coefficients(SU2Sample.constant(2.0, 1000), 1000, table)
        assert coeffs[12] == pytest.approx(6.0)
        assert coeffs[997] == pytest.approx(2.0)
        assert coeffs[512] == pytest.approx(10.0)


class TestEvaluation:
    def test_constant_two_gives_zeta_squared(self):
        result = eval_euler_product(SU2Sample.constant(2.0, 1 << 17), 2.0, 1 << 17)
        assert not result.formal
        assert result.value.real == pytest.approx(ZETA2_SQUARED, rel=1e-5)
        assert result.value.imag == 0.0

    def test_euler_product_matches_smoothed_series(self):
        table = primes_up_to(4096)
        N = 1024
        for seed in range(20):
            sample = sample_traces(seed, 4096)
            smoothed = eval_smoothed_series(build_coefficients(sample, 2 * N, table), 2.0, N)
            product = eval_euler_product(sample, 2.0, 4096).value
            assert abs(product - smoothed) < 1e-6 + direct_tail_bound(2.0, N) + direct_tail_bound(2.0, 4096)

    def test_euler_product_rejects_left_half(self):
        with pytest.raises(InvalidArgumentError):
            eval_euler_product(sample_traces(1, 100), 0.5, 100)

    def test_strip_truncation_is_formal(self):
        result = eval_euler_product(sample_traces(1, 1000), 0.75 + 1j, 1000)
        assert result.formal and result.tail_bound is None

    def test_real_on_real_axis(self):
        values = sample_values([3, 4], np.array([0.6, 0.75, 0.9]), 512)
        assert np.all(values.imag == 0.0)

    def test_smoothed_series_needs_two_n(self):
        table = primes_up_to(1024)
        coeffs = build_coefficients(sample_traces(1, 1024), 1024, table)
        eval_smoothed_series(coeffs, 0.75, 512)
        with pytest.raises(InvalidArgumentError):
            eval_smoothed_series(coeffs, 0.75, 513)

    def test_sample_on_grid(self, small_grid):
        sample = sample_on_grid(9, small_grid, 256)
        assert sample.values.shape == (small_grid.n_points,)
        assert sample.meta["seed"] == 9
        assert sample.sup_distance(sample.values) == 0.0


class TestSecondMoment:
    def test_does_not_diverge(self):
        estimates = second_moment_stat(0.75, [100, 1000, 10_000], M=500, seed=5)
        assert all(e.mean < 1.5 * estimates[0].mean for e in estimates)

    def test_tracks_exact_value(self):
        for estimate in second_moment_stat(0.75, [100, 1000], M=400, seed=3):
            assert abs(estimate.mean - estimate.expected) < 5 * estimate.stderr + 0.05 * estimate.expected

    def test_rejects_sigma_outside_strip(self):
        with pytest.raises(InvalidArgumentError):
            second_moment_stat(1.2, [100], M=10, seed=0)


class TestLogProduct:
    def test_split_adds_up(self):
        sample = sample_traces(21, 5000)
        s = 0.8 + 0.3j
        prime_sum, correction = sample_log_euler_product(sample, s, 5000)
        primes = sample.primes.astype(float)
        ps = primes**-s
        total = -np.sum(np.log(1.0 - sample.traces * ps + ps * ps))
        assert prime_sum + correction == pytest.approx(total, abs=1e-10)

    def test_tail_bound_covers_large_primes(self):
        sample = sample_traces(22, 100_000)
        s = 0.7 + 2j
        _, small = sample_log_euler_product(sample, s, 10)
        _, large = sample_log_euler_product(sample, s, 100_000)
        bound = correction_tail_bound(0.7, 10)
        assert math.isfinite(bound)
        assert abs(large - small) <= bound

    def test_tail_bound_decreases(self):
        assert correction_tail_bound(0.75, 1000) < correction_tail_bound(0.75, 100)


class TestEnsembleGenerator:
    @pytest.mark.asyncio
    async def test_independent_of_threads(self, small_grid):
        one = await EnsembleGenerator(threads=1, batch_size=7).generate(5, small_grid, 256, 20)
        many = await EnsembleGenerator(threads=4, batch_size=3).generate(5, small_grid, 256, 20)
        assert np.array_equal(one.values, many.values)
        assert one.meta["seed"] == 5 and one.size == 20

    @pytest.mark.asyncio
    async def test_rows_are_single_samples(self, small_grid):
        ensemble = await EnsembleGenerator(threads=2).generate(5, small_grid, 256, 4)
        single = sample_values([derive_seed(5, 2)], small_grid.points, 256)[0]
        np.testing.assert_allclose(ensemble.values[2], single, rtol=1e-12, atol=1e-12)

    @pytest.mark.asyncio
    async def test_mean_near_one(self):
        grid = EvalGrid.disc(0.8, 0.1, 16)
        ensemble = await EnsembleGenerator(threads=2).generate(11, grid, 256, 400)
        assert abs(ensemble.values[:, -1].mean() - 1.0) < 0.3

    def test_rejects_zero_threads(self):
        with pytest.raises(InvalidArgumentError):
            EnsembleGenerator(threads=0)
