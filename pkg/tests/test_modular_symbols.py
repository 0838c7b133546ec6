"""
Tests for weight-2 modular symbols of prime level
"""
import numpy as np
import pytest

from src.core.error_handler import EmptyFamilyError, InvalidArgumentError, WrongOperatorError
from src.core.numkernel import primes_up_to
from src.models.modular_symbols import build_space, fricke_operator, genus_x0, hecke_operator, star_operator
from tests.oracles import genus_by_counting


def test_genus_matches_elliptic_point_count():
    for q in primes_up_to(200).primes:
        if q >= 11:
            assert genus_x0(int(q)) == genus_by_counting(int(q)), q


def test_known_genera():
    assert [genus_x0(q) for q in (11, 23, 37, 101, 389)] == [1, 2, 2, 8, 32]


def test_rejects_composite_level():
    with pytest.raises(InvalidArgumentError):
        build_space(15)
    with pytest.raises(InvalidArgumentError):
        genus_x0(33)


def test_rejects_levels_without_forms():
    with pytest.raises(EmptyFamilyError):
        build_space(7)


def test_dimensions(space11, space37):
    assert space11.cuspidal_basis.shape[1] == 2
    assert space37.cuspidal_basis.shape[1] == 4
    assert space37.plus_basis.shape[1] == space37.genus + 1


def test_dimensions_match_genus_for_small_primes():
    for q in primes_up_to(200).primes.tolist():
        if q < 11:
            continue
        space = build_space(q)
        g = genus_by_counting(q)
        assert space.genus == g, q
        assert space.dimension == 2 * g + 1, q
        assert space.cuspidal_basis.shape[1] == 2 * g, q
        assert space.plus_basis.shape[1] == g + 1, q


def test_level_11_eigenvalues(space11):
    for p, a_p in ((2, -2.0), (3, -1.0), (5, 1.0), (7, -2.0), (13, 4.0)):
        eigenvalues = np.linalg.eigvals(hecke_operator(space11, p))
        np.testing.assert_allclose(eigenvalues.real, [a_p, a_p], atol=1e-8)


def test_level_23_trace(space23):
    assert np.trace(hecke_operator(space23, 2)) == pytest.approx(-2.0, abs=1e-8)


def test_operators_commute(space37):
    t2, t3 = hecke_operator(space37, 2), hecke_operator(space37, 3)
    star, fricke = star_operator(space37), fricke_operator(space37)
    for a, b in ((t2, t3), (t2, star), (t3, fricke), (star, fricke)):
        assert np.max(np.abs(a @ b - b @ a)) < 1e-8


def test_fricke_is_an_involution(space23, space37):
    for space in (space23, space37):
        w = fricke_operator(space)
        np.testing.assert_allclose(w @ w, np.eye(len(w)), atol=1e-8)


def test_hecke_at_level_is_rejected(space11):
    with pytest.raises(WrongOperatorError):
        hecke_operator(space11, 11)
    with pytest.raises(InvalidArgumentError):
        hecke_operator(space11, 4)
