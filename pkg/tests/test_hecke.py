"""
Tests for eigenforms, Fricke signs and harmonic weights
"""
import math
from dataclasses import replace

import numpy as np
import pytest

from src.core.error_handler import EmptyFamilyError, IncompleteDataError, InvalidArgumentError, WeightFailureError
from src.core.numkernel import primes_up_to
from src.models.hecke import (
    FamilySnapshot,
    atkin_lehner_sign,
    compute_family,
    decompose,
    extend_coefficients,
    harmonic_horizon,
    min_eigenvalue_gap,
    normalized_petersson_ratio,
    symmetric_square_proxy,
    with_epsilon_convention,
)
from tests.oracles import count_points


class TestLevel11:
    def test_point_counts(self, family11):
        form = family11.forms[0]
        for p in primes_up_to(100).primes.tolist():
            if p != 11:
                assert form.a(p) == pytest.approx(p + 1 - count_points(p), abs=1e-8), p

    def test_small_coefficients(self, family11):
        form = family11.forms[0]
        assert form.a(1) == 1.0
        assert form.a(11) == pytest.approx(1.0)
        assert form.a(4) == pytest.approx(2.0)
        assert form.a(6) == pytest.approx(2.0)
        assert form.root_number == 1

    def test_single_form_has_full_weight(self, family11):
        assert family11.genus == 1
        assert family11.weights[0] == pytest.approx(1.0)

    def test_small_family_from_scratch(self):
        family = compute_family(11, 1000)
        assert family.genus == 1
        assert family.nmax == 1000
        form = family.forms[0]
        for p in primes_up_to(100).primes.tolist():
            if p != 11:
                assert form.a(p) == pytest.approx(p + 1 - count_points(p), abs=1e-8), p


class TestEigenvalueGap:
    def test_two_values(self):
        assert min_eigenvalue_gap(np.array([3.0, -2.0])) == pytest.approx(5.0)

    def test_single_value_has_no_gap(self):
        assert min_eigenvalue_gap(np.array([3.0])) == math.inf

    def test_repeated_value(self):
        gap = min_eigenvalue_gap(np.array([1.0, 4.0, 1.0]))
        assert gap == 0.0
        assert not math.isnan(gap)


class TestSmallLevels:
    def test_level_23_golden_ratio(self, family23):
        a2 = sorted(f.a(2) for f in family23.forms)
        expected = sorted([(-1 - math.sqrt(5)) / 2, (-1 + math.sqrt(5)) / 2])
        np.testing.assert_allclose(a2, expected, atol=1e-8)

    def test_level_37_two_curves(self, family37):
        assert [round(f.a(2)) for f in family37.forms] == [-2, 0]
        assert [f.root_number for f in family37.forms] == [-1, 1]
        assert [f.id for f in family37.forms] == [0, 1]

    def test_level_without_forms(self):
        with pytest.raises(EmptyFamilyError):
            compute_family(13, 100)


class TestCoefficients:
    def test_deligne_and_recursion(self, family37):
        table = primes_up_to(4096)
        for form in family37.forms:
            form.check(table)
            for p in table.primes[table.primes <= 64].tolist():
                if p != 37:
                    assert form.a(p * p) == pytest.approx(form.a(p) ** 2 - p, abs=1e-8)
            assert form.a(37 * 37) == pytest.approx(1.0)

    def test_multiplicative(self, family37):
        form = family37.forms[1]
        for m, n in ((2, 3), (4, 9), (5, 37), (7, 64)):
            assert form.a(m * n) == pytest.approx(form.a(m) * form.a(n), abs=1e-8)

    def test_extend_from_primes(self, family37):
        form = family37.forms[0]
        table = primes_up_to(1000)
        primes_only = np.zeros(1001)
        primes_only[1] = 1.0
        primes_only[table.primes] = form.coeffs[table.primes]
        rebuilt = extend_coefficients(replace(form, coeffs=primes_only), 1000)
        np.testing.assert_allclose(rebuilt.coeffs, form.coeffs[:1001], atol=1e-8)

    def test_extend_past_known_primes(self, family37):
        short = replace(family37.forms[0], coeffs=family37.forms[0].coeffs[:101].copy())
        with pytest.raises(IncompleteDataError):
            extend_coefficients(short, 200)
        with pytest.raises(IncompleteDataError):
            short.a(101)

    def test_epsilon_convention_flips_level_coefficients(self, family37):
        form = family37.forms[0]
        flipped = with_epsilon_convention(form, 1)
        assert flipped.a(37) == pytest.approx(-form.a(37))
        assert flipped.a(74) == pytest.approx(-form.a(74))
        assert flipped.a(2) == form.a(2)
        with pytest.raises(InvalidArgumentError):
            with_epsilon_convention(form, 0)


class TestSigns:
    def test_atkin_lehner_sign_agrees(self, space37, family37):
        for form in family37.forms:
            assert atkin_lehner_sign(space37, form) == form.fricke_sign

    def test_wrong_level(self, space23, family37):
        with pytest.raises(InvalidArgumentError):
            atkin_lehner_sign(space23, family37.forms[0])

    def test_seed_independent(self, space37):
        first = decompose(space37, 500, seed=1)
        second = decompose(space37, 500, seed=2)
        for a, b in zip(first, second):
            np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-8)
            assert a.fricke_sign == b.fricke_sign


class TestWeights:
    def test_probability_vector(self, family37):
        weights = family37.weights
        assert np.all(weights > 0)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(normalized_petersson_ratio(family37) * weights * family37.genus, 1.0)

    def test_proxy_needs_coefficients(self, family37):
        X = harmonic_horizon(37)
        assert symmetric_square_proxy(family37.forms[0], 100.0) > 0
        with pytest.raises(IncompleteDataError):
            symmetric_square_proxy(family37.forms[0], X)

    def test_expectation(self, family37):
        assert family37.expectation(lambda f: 1.0) == pytest.approx(1.0)
        natural = family37.expectation(lambda f: f.a(2), weighting="natural")
        assert natural == pytest.approx(-1.0)
        with pytest.raises(InvalidArgumentError):
            family37.weights_for("uniform")

    def test_rejects_bad_weights(self, family37):
        forms = [replace(f, weight=0.2) for f in family37.forms]
        with pytest.raises(WeightFailureError):
            FamilySnapshot(level=37, forms=tuple(forms), nmax=family37.nmax)

    def test_truncation(self, family37):
        small = family37.truncated(100)
        assert small.nmax == 100
        assert small.coefficient_matrix().shape == (2, 101)
        with pytest.raises(IncompleteDataError):
            small.coefficient_matrix(200)
