"""
선형대수 커널 테스트
에르미트 역행렬, Sherman–Morrison 갱신, 가중 역행렬 트레이스 검증
"""

import numpy as np
import pytest

from numerics import (
    NotHermitian, SingularMatrix, DegenerateUpdate, NumericsError,
    as_power_vector, gram_inverse, hermitian_inverse, rank_one_inverse_update,
    weighted_inverse_trace, inverse_trace_from_gram_inverse,
)


def _random_channel(rng, K, T):
    return (rng.standard_normal((K, T)) + 1j * rng.standard_normal((K, T))) / np.sqrt(2.0)


def test_hermitian_inverse_identity_product():
    """A·A^{-1} = I"""
    rng = np.random.default_rng(0)
    H = _random_channel(rng, 4, 8)
    A = H @ H.conj().T
    inverse = hermitian_inverse(A)
    np.testing.assert_allclose(A @ inverse, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(inverse, inverse.conj().T, atol=1e-14)


def test_hermitian_inverse_of_identity():
    np.testing.assert_allclose(hermitian_inverse(np.eye(3)), np.eye(3))


def test_hermitian_inverse_rejects_non_hermitian():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    with pytest.raises(NotHermitian):
        hermitian_inverse(A)


def test_hermitian_inverse_rejects_non_square():
    with pytest.raises(NotHermitian):
        hermitian_inverse(np.ones((2, 3)))


def test_hermitian_inverse_rejects_rank_deficient():
    """랭크 1 행렬은 특이"""
    v = np.array([1.0, 2.0, 3.0])
    with pytest.raises(SingularMatrix):
        hermitian_inverse(np.outer(v, v))


def test_not_hermitian_is_value_error_and_numerics_error():
    assert issubclass(NotHermitian, ValueError)
    assert issubclass(NotHermitian, NumericsError)
    assert issubclass(SingularMatrix, ArithmeticError)


def test_rank_one_update_matches_direct_inverse():
    rng = np.random.default_rng(1)
    H = _random_channel(rng, 3, 6)
    A = H @ H.conj().T
    u = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    updated = rank_one_inverse_update(np.linalg.inv(A), u, v)
    np.testing.assert_allclose(updated, np.linalg.inv(A + np.outer(u, v.conj())), atol=1e-9)


def test_rank_one_update_degenerate():
    """1 + v^H·A^{-1}·u = 0이면 DegenerateUpdate"""
    e1 = np.array([1.0, 0.0])
    with pytest.raises(DegenerateUpdate):
        rank_one_inverse_update(np.eye(2), -e1, e1)


def test_weighted_inverse_trace_identity_channel():
    """H = I, P = diag(1, 2) → Tr = 3"""
    assert weighted_inverse_trace(np.eye(2), np.array([1.0, 2.0])) == pytest.approx(3.0)


def test_weighted_inverse_trace_accepts_diagonal_matrix():
    H = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert weighted_inverse_trace(H, np.diag([4.0, 1.0])) == pytest.approx(4.0 / 4.0 + 1.0)


def test_weighted_inverse_trace_equals_zf_transmit_power():
    """Tr((HH^H)^{-1}P) = Tr(V^H V), V = H^H(HH^H)^{-1}P^{1/2}"""
    rng = np.random.default_rng(2)
    H = _random_channel(rng, 3, 5)
    p = rng.uniform(0.1, 1.0, 3)
    V = H.conj().T @ np.linalg.inv(H @ H.conj().T) @ np.diag(np.sqrt(p))
    expected = float(np.real(np.trace(V.conj().T @ V)))
    assert weighted_inverse_trace(H, p) == pytest.approx(expected, rel=1e-10)
    assert inverse_trace_from_gram_inverse(gram_inverse(H), p) == pytest.approx(expected, rel=1e-10)


def test_weighted_inverse_trace_more_users_than_antennas():
    with pytest.raises(SingularMatrix):
        weighted_inverse_trace(np.ones((3, 2)), np.ones(3))


def test_as_power_vector_shapes():
    np.testing.assert_allclose(as_power_vector(np.diag([1.0, 2.0])), [1.0, 2.0])
    np.testing.assert_allclose(as_power_vector(0.5), [0.5])
