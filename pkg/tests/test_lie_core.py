from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from todamaps.lie_core import (
    DecompositionError,
    InvalidRankError,
    build_sl_chevalley,
    check_result5,
    commutator,
    decompose_chevalley,
    decompose_field,
    diagonal_commutator_pairs,
    reconstruct,
    verify_chevalley_relations,
    verify_jacobi,
)

# frozen oracles: Cartan matrices of A_1..A_3
CARTAN = {
    2: [[2]],
    3: [[2, -1], [-1, 2]],
    4: [[2, -1, 0], [-1, 2, -1], [0, -1, 2]],
}


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cartan_matrix(n):
    assert build_sl_chevalley(n).cartan.tolist() == CARTAN[n]


@pytest.mark.parametrize("n", range(2, 7))
def test_relations_and_jacobi_exact(n):
    b = build_sl_chevalley(n)
    assert verify_chevalley_relations(b) == []
    assert verify_jacobi(b) == []
    assert all(m.dtype.kind == "i" for _, m in b.elements())


@pytest.mark.parametrize("n", range(2, 6))
def test_root_counts(n):
    b = build_sl_chevalley(n)
    assert len(b.positive_roots) == n * (n - 1) // 2
    assert len(b.elements()) == n * n - 1


def test_sl2_brackets():
    b = build_sl_chevalley(2)
    H, E, F = b.H[0], b.simple(0, +1), b.simple(0, -1)
    assert np.array_equal(commutator(H, E), 2 * E)
    assert np.array_equal(commutator(H, F), -2 * F)
    assert np.array_equal(commutator(E, F), H)


@pytest.mark.parametrize("bad", [1, 0, -3, 2.5])
def test_invalid_rank(bad):
    with pytest.raises(InvalidRankError):
        build_sl_chevalley(bad)


def test_commutator_shape_mismatch():
    with pytest.raises(ValueError):
        commutator(np.eye(2), np.eye(3))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_decompose_reconstruct_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    b = build_sl_chevalley(n)
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    X -= np.trace(X) / n * np.eye(n)
    assert np.abs(reconstruct(decompose_chevalley(X, b), b) - X).max() < 1e-12


def test_decompose_is_exact_on_fractions():
    b = build_sl_chevalley(3)
    X = np.array([[Fraction(1, 3), Fraction(2, 7), 0], [0, Fraction(-1, 2), 1], [Fraction(5, 2), 0, Fraction(1, 6)]],
                 dtype=object)
    c = decompose_chevalley(X, b)
    assert c.h[0] == Fraction(1, 3)
    assert c.h[1] == Fraction(1, 3) - Fraction(1, 2)


def test_decompose_rejects_trace_and_shape():
    b = build_sl_chevalley(2)
    with pytest.raises(DecompositionError):
        decompose_chevalley(np.eye(2), b)
    with pytest.raises(DecompositionError):
        decompose_chevalley(np.zeros((3, 3)), b)


def test_decompose_field_batched():
    b = build_sl_chevalley(3)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 5, 3, 3))
    X -= np.trace(X, axis1=-2, axis2=-1)[..., None, None] / 3 * np.eye(3)
    c = decompose_field(X, b)
    assert c.h[0].shape == (4, 5)
    single = decompose_chevalley(X[2, 3], b)
    assert np.isclose(c.h[1][2, 3], single.h[1])


def test_coordinate_predicates():
    b = build_sl_chevalley(3)
    upper = decompose_chevalley(b.simple(0, 1) + b.H[1], b)
    assert upper.is_upper() and not upper.is_lower() and not upper.is_off_diagonal()
    off = decompose_chevalley(b.simple(0, 1) + b.simple(1, -1), b)
    assert off.is_off_diagonal() and not off.is_diagonal()


def test_result5_sl3_counterexample():
    b = build_sl_chevalley(3)
    Az = np.diag([1, 1, -2]) + b.simple(0, +1)
    Azbar = b.simple(0, -1)
    v = check_result5(Az, Azbar, b)
    assert v.commutator_diagonal and not v.commutator_zero and not v.components_off_diagonal
    assert not v.holds


def test_result5_sl2_always_holds_on_generator():
    for Az, Azbar, b in diagonal_commutator_pairs(60, seed=7, dims=(2,)):
        assert check_result5(Az, Azbar, b).holds


def test_pair_generator_deterministic():
    a = diagonal_commutator_pairs(5, seed=3)
    b = diagonal_commutator_pairs(5, seed=3)
    assert all(np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) for x, y in zip(a, b))
