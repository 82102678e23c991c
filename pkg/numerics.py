"""복소 선형대수 커널
에르미트 역행렬, 가중 역행렬 트레이스, Sherman–Morrison 랭크-1 역행렬 갱신"""

import logging
from typing import Union

import numpy as np
import scipy.linalg


# 로깅 설정
logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-10
PIVOT_TOLERANCE = 1e-14
DEGENERATE_TOLERANCE = 1e-12


class NumericsError(ArithmeticError):
    """선형대수 커널 오류의 기본 클래스"""


class SingularMatrix(NumericsError):
    """피벗이 너무 작아 역행렬을 신뢰할 수 없음"""


class NotHermitian(NumericsError, ValueError):
    """입력 행렬이 허용오차 내에서 에르미트가 아님"""


class DegenerateUpdate(NumericsError):
    """랭크-1 갱신 후 행렬이 특이해짐 (호출자는 전체 역행렬로 대체)"""


def as_power_vector(P: Union[np.ndarray, float]) -> np.ndarray:
    """대각 전력 행렬 또는 전력 벡터를 1차원 실수 벡터로 변환"""
    P = np.asarray(P)
    if P.ndim == 2:
        P = np.diag(P)
    return np.real(np.atleast_1d(P)).astype(float)


def hermitian_inverse(A: np.ndarray) -> np.ndarray:
    """
    에르미트 양정치 행렬의 역행렬 (Cholesky 분해)

    Args:
        A: 정방 에르미트 양정치 행렬

    Returns:
        A의 역행렬 (에르미트 대칭화됨)

    Raises:
        NotHermitian: 정방이 아니거나 max|A − A^H| > 1e-10·max(1, max|A|)
        SingularMatrix: Cholesky 피벗 < 1e-14·max 대각원소 또는 분해 실패
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape[0] != A.shape[1]:
        raise NotHermitian(f"정방 행렬이 아닙니다: {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SingularMatrix("행렬에 NaN/Inf가 포함되어 있습니다")

    scale = float(np.max(np.abs(A))) if A.size else 0.0
    asymmetry = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if asymmetry > HERMITIAN_TOLERANCE * max(1.0, scale):
        raise NotHermitian(f"에르미트 행렬이 아닙니다 (max|A−A^H| = {asymmetry:.3e})")

    diag = np.real(np.diag(A))
    max_diag = float(np.max(diag)) if diag.size else 0.0
    if max_diag <= 0.0:
        raise SingularMatrix("대각 원소가 양수가 아닙니다")

    A_sym = 0.5 * (A + A.conj().T)
    try:
        factor, lower = scipy.linalg.cho_factor(A_sym, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise SingularMatrix(f"Cholesky 분해 실패: {e}")

    pivots = np.abs(np.diag(factor)) ** 2
    if float(np.min(pivots)) < PIVOT_TOLERANCE * max_diag:
        raise SingularMatrix(
            f"피벗이 너무 작습니다 (min pivot {np.min(pivots):.3e}, max diag {max_diag:.3e})"
        )

    identity = np.eye(A.shape[0], dtype=complex)
    inverse = scipy.linalg.cho_solve((factor, lower), identity, check_finite=False)
    inverse = 0.5 * (inverse + inverse.conj().T)
    if not np.all(np.isfinite(inverse)):
        raise SingularMatrix("역행렬에 NaN/Inf가 발생했습니다")
    return inverse


def gram_inverse(H: np.ndarray) -> np.ndarray:
    """(H·H^H)^{-1}"""
    H = np.atleast_2d(H)
    return hermitian_inverse(H @ H.conj().T)


def rank_one_inverse_update(Ainv: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    Sherman–Morrison 공식으로 (A + u·v^H)^{-1} 계산

    Args:
        Ainv: A의 역행렬
        u, v: 복소 벡터

    Returns:
        Ainv − (Ainv·u)(v^H·Ainv) / (1 + v^H·Ainv·u)

    Raises:
        DegenerateUpdate: |1 + v^H·Ainv·u| ≤ 1e-12
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    v = np.asarray(v, dtype=complex).reshape(-1)
    Ainv_u = Ainv @ u
    vH_Ainv = v.conj() @ Ainv
    denominator = 1.0 + v.conj() @ Ainv_u
    if abs(denominator) <= DEGENERATE_TOLERANCE:
        raise DegenerateUpdate(f"Sherman–Morrison 분모가 0에 가깝습니다: {abs(denominator):.3e}")
    return Ainv - np.outer(Ainv_u, vH_Ainv) / denominator


def weighted_inverse_trace(H: np.ndarray, P: Union[np.ndarray, float]) -> float:
    """
    Tr((H·H^H)^{-1}·P)

    ZF 빔포머 V_D = H^H(HH^H)^{-1}P^{1/2}에 대해 Tr(V_D^H·V_D)와 같습니다.

    Args:
        H: K×T 채널 (K ≤ T)
        P: 대각 전력 행렬 또는 길이 K 전력 벡터 (음수 아님)

    Raises:
        SingularMatrix: H·H^H가 역행렬을 갖지 않는 경우
    """
    H = np.atleast_2d(H)
    if H.shape[0] > H.shape[1]:
        raise SingularMatrix(f"행 수가 열 수보다 많아 H·H^H가 특이합니다: {H.shape}")
    p = as_power_vector(P)
    G_inv = gram_inverse(H)
    return float(np.real(np.diag(G_inv)) @ p)


def inverse_trace_from_gram_inverse(G_inv: np.ndarray, p: np.ndarray) -> float:
    """이미 계산된 (HH^H)^{-1}로부터 Tr((HH^H)^{-1}·P)"""
    return float(np.real(np.diag(G_inv)) @ p)
