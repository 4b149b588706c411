import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab.torus import (MappingTorusPoint, as_int_matrix,
                           canonicalize_coords, check_commuting,
                           check_hyperbolic, check_unimodular,
                           compute_splitting, format_int_matrix,
                           identity_automorphism, int_det, int_inverse,
                           parse_int_matrix)

A3 = [[3, 2, 1], [2, 2, 1], [1, 1, 1]]
B3 = [[2, 1, 1], [1, 2, 0], [1, 0, 1]]


def test_cat_map_is_hyperbolic_with_golden_rates(cat_matrix):
    assert check_hyperbolic(cat_matrix)
    aut = compute_splitting(cat_matrix)
    mu = (3.0 + np.sqrt(5.0)) / 2.0
    assert aut.unstable_rates[0] == pytest.approx(mu, abs=1e-12)
    assert aut.stable_rates[0] == pytest.approx(1.0 / mu, abs=1e-12)
    assert aut.unstable_rates[0] * aut.stable_rates[0] == pytest.approx(1.0, abs=1e-12)


def test_splitting_residual_is_certified(cat_matrix):
    aut = compute_splitting(cat_matrix)
    for basis, eigs in ((aut.unstable_basis, aut.unstable_eigenvalues),
                        (aut.stable_basis, aut.stable_eigenvalues)):
        for vec, lam in zip(basis, eigs):
            res = np.max(np.abs(aut.matrix.astype(float) @ vec - lam * vec))
            assert res < 1e-10
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


def test_fibonacci_matrix_has_signed_eigenvalues():
    aut = compute_splitting([[1, 1], [1, 0]])
    lam = (1.0 + np.sqrt(5.0)) / 2.0
    assert aut.unstable_eigenvalues[0] == pytest.approx(lam, abs=1e-12)
    assert aut.stable_eigenvalues[0] == pytest.approx(-1.0 / lam, abs=1e-12)


def test_three_dimensional_commuting_pair():
    assert check_hyperbolic(A3)
    assert check_commuting(A3, B3)
    assert not check_commuting(A3, [[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    aut = compute_splitting(A3)
    assert aut.dim == 3
    assert aut.unstable_basis.shape[0] + aut.stable_basis.shape[0] == 3


def test_identity_and_shears_are_not_hyperbolic():
    assert not check_hyperbolic([[1, 0], [0, 1]])
    assert not check_hyperbolic([[1, 1], [0, 1]])


def test_int_inverse_is_exact(cat_matrix):
    inv = int_inverse(cat_matrix)
    assert np.array_equal(cat_matrix @ inv, np.eye(2, dtype=np.int64))
    assert int_det(cat_matrix) == 1
    assert int_det([[1, 1], [1, 0]]) == -1
    with pytest.raises(ValueError):
        int_inverse([[2, 0], [0, 2]])
    assert check_unimodular(cat_matrix)
    assert not check_unimodular([[2, 0], [0, 1]])


def test_matrix_text_round_trip(cat_matrix):
    text = format_int_matrix(cat_matrix)
    assert np.array_equal(parse_int_matrix(text), cat_matrix)
    assert np.array_equal(parse_int_matrix("2 1\n1 1"), cat_matrix)
    with pytest.raises(ValueError):
        parse_int_matrix("1, 2\n3")


@given(st.lists(st.floats(-50.0, 50.0, allow_nan=False), min_size=1, max_size=4))
@settings(max_examples=50, deadline=None)
def test_canonicalize_lands_in_unit_cube_and_is_idempotent(coords):
    v = canonicalize_coords(np.array(coords))
    assert np.all(v >= 0.0) and np.all(v < 1.0)
    assert np.array_equal(canonicalize_coords(v), v)


@given(st.lists(st.floats(0.0, 1.0, exclude_max=True), min_size=2, max_size=2),
       st.lists(st.integers(-3, 3), min_size=2, max_size=2))
@settings(max_examples=50, deadline=None)
def test_canonicalize_ignores_integer_translations(coords, shift):
    v = np.array(coords)
    w = canonicalize_coords(v + np.array(shift, dtype=float))
    # circle metric: adding the integer shift can round across the wrap
    # (e.g. 0.9999999999999999 + 1 rounds to exactly 2.0), so distances are
    # measured modulo 1
    diff = np.abs(w - canonicalize_coords(v))
    assert np.max(np.minimum(diff, 1.0 - diff)) < 1e-9


def test_mapping_torus_point_folds_height_through_gluing(cat_matrix):
    gluing = compute_splitting(cat_matrix)
    p = MappingTorusPoint((0.25, 0.5), 2.3)
    q = p.canonical(gluing)
    assert 0.0 <= q.height < 1.0
    assert q.height == pytest.approx(0.3, abs=1e-12)
    v = np.array([0.25, 0.5])
    expect = canonicalize_coords(
        cat_matrix.astype(float) @ canonicalize_coords(cat_matrix.astype(float) @ v))
    assert np.max(np.abs(np.array(q.base) - expect)) < 1e-12


def test_identity_gluing_preserves_base():
    ident = identity_automorphism(2)
    assert ident.is_identity
    q = MappingTorusPoint((0.1, 0.9), -1.25).canonical(ident)
    assert q.base == (0.1, 0.9)
    assert q.height == pytest.approx(0.75, abs=1e-12)


def test_as_int_matrix_rejects_non_integers():
    with pytest.raises(ValueError):
        as_int_matrix([[1.5, 0], [0, 1]])
