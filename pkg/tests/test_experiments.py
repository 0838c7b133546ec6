"""
Tests for the statistical experiments and the greedy support approximation
"""
import asyncio
import math

import numpy as np
import pytest
from scipy import stats

from src.core.error_handler import BranchError, InadmissibleTargetError, IncompleteDataError, InvalidArgumentError
from src.core.experiments import (
    bagchi_compare,
    joint_moment_test,
    kloosterman_side,
    model_support_probability,
    moment_growth_test,
    natural_density_bound,
    petersson_check,
    sato_tate_test,
    smoothing_decay_test,
    support_probability_from_ensemble,
    universality_count,
)
from src.core.grid import EvalGrid
from src.core.lfun import family_ensemble, family_on_grid
from src.core.numkernel import sato_tate_cdf
from src.core.randmodel import EnsembleGenerator, trace_matrix
from src.core.statistics import (
    effective_size,
    ks_two_sample_quantile,
    weighted_ecdf,
    weighted_ks_2samp,
    weighted_ks_to_cdf,
)
from src.core.support import greedy_support_approx
from src.models.targets import TargetFunction


@pytest.fixture(scope="module")
def grid16():
    return EvalGrid.disc(0.75, 0.1, 16)


@pytest.fixture(scope="module")
def model_pair(grid16):

    async def build():
        generator = EnsembleGenerator(threads=2)
        first = await generator.generate(101, grid16, 1024, 500)
        second = await generator.generate(202, grid16, 1024, 500)
        return first, second

    return asyncio.run(build())


class TestStatistics:
    def test_unweighted_matches_scipy(self):
        rng = np.random.default_rng(0)
        x, y = rng.normal(size=300), rng.normal(0.2, 1.0, size=200)
        assert weighted_ks_2samp(x, y) == pytest.approx(stats.ks_2samp(x, y).statistic, abs=1e-12)
        assert weighted_ks_to_cdf(x, stats.norm.cdf) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)

    def test_weights_act_as_multiplicities(self):
        x = np.array([0.0, 1.0, 2.0])
        repeated = np.array([0.0, 0.0, 1.0, 2.0, 2.0, 2.0])
        y = np.linspace(-1, 3, 17)
        assert weighted_ks_2samp(x, y, wx=[2, 1, 3]) == pytest.approx(weighted_ks_2samp(repeated, y))

    def test_ecdf(self):
        support, cdf = weighted_ecdf([3.0, 1.0, 1.0], [0.5, 0.25, 0.25])
        assert support.tolist() == [1.0, 3.0]
        assert cdf.tolist() == pytest.approx([0.5, 1.0])
        with pytest.raises(InvalidArgumentError):
            weighted_ecdf([1.0, 2.0], [1.0])

    def test_effective_size(self):
        assert effective_size(None, 10) == 10
        assert effective_size(np.full(4, 0.25), 4) == pytest.approx(4.0)
        assert effective_size(np.array([1.0, 0.0]), 2) == pytest.approx(1.0)

    def test_quantile(self):
        assert ks_two_sample_quantile(500, 500) == pytest.approx(0.103, abs=5e-4)
        with pytest.raises(InvalidArgumentError):
            ks_two_sample_quantile(0, 10)


class TestEquidistribution:
    def test_sampled_traces_follow_semicircle(self):
        traces = trace_matrix(range(1_000_000), np.array([3]))[:, 0]
        assert weighted_ks_to_cdf(traces, sato_tate_cdf) < 2e-3

    def test_single_form_is_far(self, family11):
        assert sato_tate_test(family11, 2) >= 0.5
        assert sato_tate_test(family11, 3, weighting="natural") >= 0.5

    def test_prime_checks(self, family11):
        with pytest.raises(InvalidArgumentError):
            sato_tate_test(family11, 11)
        with pytest.raises(InvalidArgumentError):
            sato_tate_test(family11, 9)
        with pytest.raises(InvalidArgumentError):
            sato_tate_test(family11, 2, reference="uniform")

    def test_joint_moments(self, family37):
        trivial = joint_moment_test(family37, [2, 3], [0, 0])
        assert trivial.family == pytest.approx(1.0) and trivial.model == 1.0
        second = joint_moment_test(family37, [2], [2])
        assert second.model == 1.0
        assert second.family == pytest.approx(float(np.dot(family37.weights, [2.0, 0.0])))
        with pytest.raises(InvalidArgumentError):
            joint_moment_test(family37, [2, 2], [1, 1])
        with pytest.raises(InvalidArgumentError):
            joint_moment_test(family37, [2], [1, 2])


class TestComparison:
    def test_self_comparison_is_zero(self, model_pair):
        first, _ = model_pair
        report = bagchi_compare(first, first)
        assert report.aggregate == 0.0
        assert len(report.to_rows()) == first.grid.n_points

    def test_independent_models_agree(self, model_pair):
        first, second = model_pair
        report = bagchi_compare(first, second)
        assert report.aggregate < ks_two_sample_quantile(500, 500)
        assert report.model_size == 500 and report.family_size == 500

    def test_grid_mismatch(self, model_pair, family37, small_grid):
        evaluations = family_on_grid(family37, small_grid, 1024)
        with pytest.raises(InvalidArgumentError):
            bagchi_compare(evaluations, model_pair[0])

    def test_family_against_model(self, model_pair, family37, grid16):
        report = bagchi_compare(family_on_grid(family37, grid16, 1024), model_pair[0])
        assert report.family_size == 2
        assert report.family_effective_size <= 2.0
        assert np.all((report.per_point >= 0) & (report.per_point <= 1))
        assert report.to_dict()["family"]["level"] == 37


class TestUniversality:
    def test_counts(self, family37, grid16):
        evaluations = family_on_grid(family37, grid16, 1024)
        target = TargetFunction.from_spec("const:1", grid16)
        assert universality_count(evaluations, target, 0.0).count == 0
        counts = [universality_count(evaluations, target, eps) for eps in (0.1, 1.0, 10.0, 100.0)]
        assert [c.count for c in counts] == sorted(c.count for c in counts)
        assert counts[-1].count == 2
        for c in counts:
            assert c.natural_fraction == c.count / c.genus
            assert 0.0 <= c.harmonic_fraction <= 1.0 + 1e-12

    def test_ensemble_input(self, family37, grid16):
        target = TargetFunction.constant(1.0)
        count = universality_count(family_ensemble(family37, grid16, 1024), target, 100.0)
        assert count.harmonic_fraction == pytest.approx(1.0)

    def test_inadmissible_target(self, family37, grid16):
        evaluations = family_on_grid(family37, grid16, 1024)
        with pytest.raises(InadmissibleTargetError):
            universality_count(evaluations, TargetFunction.from_spec("const:-1", grid16), 1.0)
        with pytest.raises(InvalidArgumentError):
            universality_count(evaluations, TargetFunction.constant(1.0), -1.0)

    def test_density_bound_holds(self, family37):
        for event in ([True, True], [True, False], [False, True], [False, False]):
            for eta in (0.25, 0.5, 1.0):
                bound = natural_density_bound(family37, event, eta)
                assert bound.natural_fraction >= bound.lower_bound - 1e-12
        full = natural_density_bound(family37, [True, True], 0.5)
        assert full.harmonic_probability == pytest.approx(1.0)
        with pytest.raises(InvalidArgumentError):
            natural_density_bound(family37, [True], 0.5)


class TestSupport:
    def test_probability_monotone_in_eps(self, model_pair):
        target = TargetFunction.constant(1.0)
        results = support_probability_from_ensemble(model_pair[0], target, [0.5, 1.0, 2.0, 50.0])
        hits = [r.hits for r in results]
        assert hits == sorted(hits)
        assert results[-1].estimate == pytest.approx(1.0)
        assert results[0].stderr >= 0.0

    @pytest.mark.asyncio
    async def test_model_probability(self, grid16):
        results = await model_support_probability(TargetFunction.constant(1.0), grid16, [1.0, 100.0], M=50, seed=4, N=256, threads=2)
        assert [r.samples for r in results] == [50, 50]
        assert results[1].hits == 50

    def test_greedy_residual_never_grows(self, default_grid):
        trace = greedy_support_approx(TargetFunction.constant(2.0), default_grid, pmax=200, n0=5)
        history = [trace.initial_residual] + trace.residuals
        assert all(b <= a for a, b in zip(history, history[1:]))
        assert trace.final_residual <= trace.initial_residual
        assert np.all(trace.approximant(np.array([0.6, 0.75, 0.9])).real > 0)
        assert math.isfinite(trace.tail_bound)
        assert trace.to_dict()["n0"] == 5

    def test_greedy_rejects_winding_target(self, default_grid):
        target = TargetFunction.from_spec("poly:0.01,0,1", default_grid)
        with pytest.raises(BranchError):
            greedy_support_approx(target, default_grid, pmax=100, n0=3)

    def test_greedy_arguments(self, default_grid):
        with pytest.raises(InvalidArgumentError):
            greedy_support_approx(TargetFunction.constant(1.0), default_grid, pmax=5, n0=10)


class TestSmoothingAndGrowth:
    def test_model_decay(self, grid16):
        table = smoothing_decay_test("model", [64, 256, 1024], grid16, M=20, seed=1, N_ref=4096)
        assert table.gaps[0] > table.gaps[-1]
        assert table.slope < 0
        assert len(table.to_rows()) == 3

    def test_family_decay(self, family37, grid16):
        table = smoothing_decay_test(family37, [64, 256], grid16, N_ref=1024)
        assert table.gaps[0] > table.gaps[1] > 0
        with pytest.raises(IncompleteDataError):
            smoothing_decay_test(family37, [64, 256], grid16, N_ref=4096)

    def test_decay_arguments(self, grid16):
        with pytest.raises(InvalidArgumentError):
            smoothing_decay_test("model", [256, 64], grid16, M=2)
        with pytest.raises(InvalidArgumentError):
            smoothing_decay_test("other", [64], grid16, M=2)

    def test_growth(self, family37):
        table = moment_growth_test(family37, 0.75, [0.0, 5.0], N=1024, M=50, seed=2)
        assert len(table.family) == 2 and len(table.model) == 2
        assert all(v > 0 for v in table.family + table.model)
        assert math.isfinite(table.family_exponent)
        assert moment_growth_test(None, 0.75, [0.0], M=0).family == []
        with pytest.raises(InvalidArgumentError):
            moment_growth_test(family37, 0.5, [0.0])


class TestPetersson:
    def test_structure(self, family11):
        report = petersson_check(family11, pairs=((2, 2), (2, 3)), c_factor=50)
        assert report.sign in (1, -1)
        assert [(r["m"], r["n"]) for r in report.rows] == [(2, 2), (2, 3)]
        assert all(math.isfinite(r["residual"]) for r in report.rows)
        assert report.to_dict()["max_residual"] == report.max_residual

    def test_kloosterman_side_is_small(self):
        assert abs(kloosterman_side(1, 1, 101, 200)) < 0.1

    @pytest.mark.slow
    def test_weights_satisfy_trace_formula(self, family101):
        report = petersson_check(family101)
        assert report.max_residual < 0.05
