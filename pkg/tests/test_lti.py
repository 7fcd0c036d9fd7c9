import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twostep_sls.exceptions import DimensionError, TailError
from twostep_sls.lti import (FirTransferMatrix, LtiSystem, fir_add, fir_inverse_checked,
                             fir_inverse_truncated, fir_multiply, identity_map, norm_h2,
                             norm_l1, norm_one_to_one, spectral_radius, zero_map)


def rand_fir(rng, rows, cols, start, horizon):
    return FirTransferMatrix(rng.standard_normal((horizon - start + 1, rows, cols)), start)


seeds = st.integers(0, 2**32 - 1)


# --- containers -----------------------------------------------------------

def test_lti_system_shapes():
    sys = LtiSystem(np.eye(3), np.ones((3, 2)))
    assert (sys.n, sys.m) == (3, 2)
    with pytest.raises(DimensionError):
        LtiSystem(np.ones((3, 2)), np.ones((3, 1)))
    with pytest.raises(DimensionError):
        LtiSystem(np.eye(3), np.ones((2, 1)))


def test_fir_indexing_outside_support_is_zero(rng):
    X = rand_fir(rng, 2, 3, 1, 4)
    assert X.shape == (2, 3) and X.horizon == 4
    np.testing.assert_array_equal(X[0], np.zeros((2, 3)))
    np.testing.assert_array_equal(X[7], np.zeros((2, 3)))
    np.testing.assert_array_equal(X[2], X.coeffs[1])


def test_fir_coeffs_are_read_only(rng):
    X = rand_fir(rng, 2, 2, 1, 2)
    with pytest.raises(ValueError):
        X.coeffs[0, 0, 0] = 1.0


# --- fir_add --------------------------------------------------------------

def test_add_zero_map(rng):
    X = rand_fir(rng, 2, 2, 1, 3)
    Z = fir_add(X, zero_map(2, 2))
    np.testing.assert_array_equal(Z.padded(1, 3), X.coeffs)


def test_add_doubles_delay():
    X = FirTransferMatrix(np.eye(2)[None], 1)
    np.testing.assert_array_equal((X + X).coeffs, 2 * np.eye(2)[None])


def test_add_different_horizons_indexwise(rng):
    X, Y = rand_fir(rng, 2, 2, 1, 3), rand_fir(rng, 2, 2, 1, 5)
    Z = fir_add(X, Y)
    assert (Z.start, Z.horizon) == (1, 5)
    for k in range(1, 6):
        np.testing.assert_array_equal(Z[k], X[k] + Y[k])


def test_add_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        fir_add(rand_fir(rng, 2, 2, 1, 2), rand_fir(rng, 2, 3, 1, 2))


# --- fir_multiply ---------------------------------------------------------

def test_multiply_by_identity(rng):
    X = rand_fir(rng, 3, 3, 1, 4)
    Z = fir_multiply(X, identity_map(3))
    assert (Z.start, Z.horizon) == (1, 4)
    np.testing.assert_array_equal(Z.coeffs, X.coeffs)


def test_multiply_single_terms(rng):
    A, B = rng.standard_normal((2, 3, 3))
    Z = fir_multiply(FirTransferMatrix(A[None], 1), FirTransferMatrix(B[None], 1))
    assert (Z.start, Z.horizon) == (2, 2)
    np.testing.assert_allclose(Z[2], A @ B, rtol=1e-14)


def test_multiply_matches_pointwise_evaluation(rng):
    X, Y = rand_fir(rng, 3, 3, 1, 4), rand_fir(rng, 3, 3, 1, 4)
    Z = fir_multiply(X, Y)
    for theta in np.linspace(0, 2 * np.pi, 10, endpoint=False):
        z = np.exp(1j * theta)
        assert np.max(np.abs(Z.evaluate(z) - X.evaluate(z) @ Y.evaluate(z))) < 1e-10


def test_multiply_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        fir_multiply(rand_fir(rng, 2, 3, 1, 2), rand_fir(rng, 2, 2, 1, 2))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_multiply_associative_and_distributive(seed):
    rng = np.random.default_rng(seed)
    X, Y, W = (rand_fir(rng, 2, 2, s, s + h) for s, h in [(0, 2), (1, 3), (1, 1)])
    lhs = fir_multiply(fir_multiply(X, Y), W)
    rhs = fir_multiply(X, fir_multiply(Y, W))
    assert norm_h2(lhs - rhs) < 1e-9
    lhs = fir_multiply(X, fir_add(Y, W))
    rhs = fir_add(fir_multiply(X, Y), fir_multiply(X, W))
    assert norm_h2(lhs - rhs) < 1e-9


# --- inversion ------------------------------------------------------------

def test_inverse_of_identity():
    Y = fir_inverse_truncated(identity_map(3), 5)
    np.testing.assert_array_equal(Y.padded(0, 5), identity_map(3).padded(0, 5))


def test_inverse_geometric_series():
    N = np.array([[0.0, 0.7], [0.0, 0.0]])
    X = FirTransferMatrix(np.stack([np.eye(2), N]), 0)
    Y = fir_inverse_truncated(X, 6)
    for k in range(7):
        np.testing.assert_allclose(Y[k], np.linalg.matrix_power(-N, k), atol=1e-15)
    a = 0.5
    Y = fir_inverse_truncated(FirTransferMatrix(np.array([[[1.0]], [[a]]]), 0), 8)
    np.testing.assert_allclose(Y.coeffs[:, 0, 0], (-a) ** np.arange(9), rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_inverse_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    X = FirTransferMatrix(np.concatenate([np.eye(n)[None],
                                          0.3 * rng.standard_normal((3, n, n))]), 0)
    H = 12
    P = fir_multiply(X, fir_inverse_truncated(X, H)).padded(0, H)
    assert np.max(np.abs(P - identity_map(n).padded(0, H))) < 1e-9


def test_inverse_errors():
    with pytest.raises(ValueError):
        fir_inverse_truncated(FirTransferMatrix(np.eye(2)[None], 1), 3)
    with pytest.raises(np.linalg.LinAlgError):
        fir_inverse_truncated(FirTransferMatrix(np.zeros((2, 2, 2)), 0), 3)


def test_inverse_checked_tail():
    slow = FirTransferMatrix(np.array([[[1.0]], [[-0.99]]]), 0)
    with pytest.raises(TailError):
        fir_inverse_checked(slow, 10)
    fast = FirTransferMatrix(np.array([[[1.0]], [[-0.1]]]), 0)
    assert fir_inverse_checked(fast, 20).horizon == 20


# --- norms ----------------------------------------------------------------

def test_norm_h2_examples(rng):
    assert norm_h2(zero_map(2, 2)) == 0.0
    assert norm_h2(FirTransferMatrix(np.eye(2)[None], 1)) == pytest.approx(np.sqrt(2), abs=1e-15)
    X = rand_fir(rng, 3, 2, 1, 4)
    assert norm_h2(X) == pytest.approx(np.sqrt(sum(v * v for v in X.coeffs.ravel())), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_norm_h2_column_separable(seed):
    X = rand_fir(np.random.default_rng(seed), 3, 4, 1, 3)
    total = sum(norm_h2(X.column(j)) ** 2 for j in range(4))
    assert norm_h2(X) ** 2 == pytest.approx(total, rel=1e-12)


def test_norm_l1_examples():
    assert norm_l1(zero_map(2, 2)) == 0.0
    C = np.array([[1.0, -2.0], [0.0, 3.0]])
    assert norm_l1(FirTransferMatrix(C[None], 1)) == 3.0
    assert norm_l1(FirTransferMatrix(np.stack([C, C]), 1)) == 6.0


def test_norm_one_to_one_examples(rng):
    assert norm_one_to_one(np.eye(5)) == 1.0
    assert norm_one_to_one([[1.0, -4.0], [2.0, 0.0]]) == 4.0
    M = rng.standard_normal((20, 20))
    assert norm_one_to_one(M) == max(np.sum(np.abs(M[:, j])) for j in range(20))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_norm_one_to_one_submultiplicative(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((2, 6, 6))
    assert norm_one_to_one(A @ B) <= norm_one_to_one(A) * norm_one_to_one(B) * (1 + 1e-12)


def test_spectral_radius_examples(chain_sys):
    assert spectral_radius(np.triu(np.ones((5, 5)), 1)) == 0.0
    assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9, abs=1e-15)
    assert spectral_radius(chain_sys.A) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DimensionError):
        spectral_radius(np.ones((2, 3)))
