"""아날로그 빔포밍 모듈 (RIS 위상 최적화)
소자별 좌표 하강: 이산 위상 전수 비교와 연속 위상 닫힌 형태 해

목적 함수는 고정 전력 p에서의 총 송신 전력 f(Q) = Tr((HH^H)^{-1}P)입니다.
소자 j만 바꾸면 HH^H가 랭크-2만큼 변하므로
  - 이산 후보는 Sherman–Morrison 갱신 두 번으로 O(K²)에 평가하고,
  - 연속 위상은 f(θ) = f₀ − N(θ)/Δ(θ) (N, Δ는 1차 삼각 다항식) 형태에서
    tan(θ/2)에 대한 2차 방정식의 근으로 정류점을 구합니다."""

import math
import logging
import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import CONTINUOUS, SystemConfig
from channel import ChannelSet, effective_channel, reflected_channel
from numerics import (
    NumericsError, SingularMatrix, DegenerateUpdate,
    hermitian_inverse, rank_one_inverse_update, weighted_inverse_trace,
)
from power_metrics import power_constraints


# 로깅 설정
logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
BUDGET_SLACK = 1e-9
TIE_TOLERANCE = 1e-12
EXHAUSTIVE_LIMIT_BITS = 20


class NoRealRoot(NumericsError):
    """정류점 방정식에 실근이 없음 (목적 함수가 θ에 무관)"""


def phase_grid(bits: int) -> np.ndarray:
    """b비트 위상 집합 {i·π/2^{b−1} : i = 0..2^b−1}"""
    if bits < 1:
        raise ValueError(f"양자화 비트는 1 이상이어야 합니다: {bits}")
    return np.arange(2 ** bits) * (math.pi / 2 ** (bits - 1))


@dataclass
class PhaseConfig:
    """RIS 위상 상태 (길이 M·L, rad). bits가 None이면 연속 위상"""
    theta: np.ndarray
    bits: Optional[int] = None

    def __post_init__(self):
        self.theta = np.mod(np.asarray(self.theta, dtype=float).reshape(-1), TWO_PI)

    @property
    def size(self) -> int:
        return self.theta.size

    def coefficients(self) -> np.ndarray:
        """반사 계수 q = e^{jθ} (|q| = 1)"""
        return np.exp(1j * self.theta)

    def indices(self) -> np.ndarray:
        """이산 위상 인덱스 i_{m,l}"""
        if self.bits is None:
            raise ValueError("연속 위상은 인덱스 표현이 없습니다")
        step = math.pi / 2 ** (self.bits - 1)
        return np.rint(self.theta / step).astype(int) % (2 ** self.bits)

    def copy(self) -> "PhaseConfig":
        return PhaseConfig(theta=self.theta.copy(), bits=self.bits)

    @classmethod
    def from_indices(cls, indices: Any, bits: int) -> "PhaseConfig":
        return cls(theta=phase_grid(bits)[np.asarray(indices, dtype=int)], bits=bits)

    def to_dict(self) -> Dict[str, Any]:
        if self.bits is None:
            return {"bits": CONTINUOUS, "theta": self.theta.tolist()}
        return {"bits": self.bits, "indices": self.indices().tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PhaseConfig":
        if data["bits"] == CONTINUOUS:
            return cls(theta=np.asarray(data["theta"], dtype=float), bits=None)
        return cls.from_indices(data["indices"], int(data["bits"]))


def phase_indices(q: PhaseConfig) -> np.ndarray:
    """PhaseConfig → 정수 인덱스 벡터"""
    return q.indices()


def phases_from_indices(indices: Any, bits: int) -> PhaseConfig:
    """정수 인덱스 벡터 → PhaseConfig"""
    return PhaseConfig.from_indices(indices, bits)


def quantize_phase(theta: float, bits: int) -> float:
    """
    원형 거리로 가장 가까운 b비트 격자점 (동률이면 작은 인덱스)

    Args:
        theta: 위상 (rad)
        bits: 양자화 비트 (≥ 1)
    """
    grid = phase_grid(bits)
    distance = np.abs(np.mod(theta - grid + math.pi, TWO_PI) - math.pi)
    best = int(np.flatnonzero(distance <= distance.min() + TIE_TOLERANCE)[0])
    return float(grid[best])


def objective_f(ch: ChannelSet, p: np.ndarray, q: PhaseConfig, include_direct: bool = True) -> float:
    """
    f(Q) = Tr((HH^H)^{-1}P), H는 등가 채널 (또는 반사 경로만)

    Raises:
        SingularMatrix: 채널이 행 풀랭크가 아닌 경우 (반사 경로만일 때 M·L < K 등)
    """
    H = effective_channel(ch, q) if include_direct else reflected_channel(ch, q)
    return weighted_inverse_trace(H, p)


def _within_budget(H: np.ndarray, G_inv: np.ndarray, p: np.ndarray, config: SystemConfig) -> bool:
    """고정 p에서 ZF 빔포머가 모든 송신 전력 예산을 지키는지"""
    V = (H.conj().T @ G_inv) * np.sqrt(p)[None, :]
    row_power = np.sum(np.abs(V) ** 2, axis=1)
    return all(
        float(np.sum(row_power[rows])) <= budget * (1.0 + BUDGET_SLACK)
        for rows, budget in power_constraints(config)
    )


@dataclass
class DiscreteCandidate:
    """이산 후보 하나의 평가 결과"""
    index: int
    theta: float
    value: float
    H: np.ndarray
    G_inv: Optional[np.ndarray]


def evaluate_discrete_candidates(
    j: int,
    ch: ChannelSet,
    p: np.ndarray,
    q: PhaseConfig,
    H: Optional[np.ndarray] = None,
    G_inv: Optional[np.ndarray] = None,
) -> List[DiscreteCandidate]:
    """
    소자 j의 모든 격자 위상에 대해 전체 목적 함수 평가

    H' = H + δ·r·c (r = H_RU^H의 j열, c = H_BR의 j행)이면
    H'H'^H = G + x·y^H + y·x^H, x = δ·r, y = u + (δ·s/2)·r (u = H·c^H, s = ‖c‖²)이므로
    Sherman–Morrison 갱신 두 번으로 역행렬을 얻습니다. 분모가 퇴화하면 전체 역행렬로 대체합니다.
    """
    if q.bits is None:
        raise ValueError("이산 위상 모드에서만 사용할 수 있습니다")
    p = np.asarray(p, dtype=float)
    if H is None:
        H = effective_channel(ch, q)
    if G_inv is None:
        G_inv = hermitian_inverse(H @ H.conj().T)

    r = ch.H_RU_h[:, j]
    c = ch.H_BR[j, :]
    u = H @ c.conj()
    s = float(np.real(c @ c.conj()))
    q_old = np.exp(1j * q.theta[j])
    current = int(q.indices()[j])

    candidates = []
    for index, theta in enumerate(phase_grid(q.bits)):
        if index == current:
            value = float(np.real(np.diag(G_inv)) @ p)
            candidates.append(DiscreteCandidate(index, float(q.theta[j]), value, H, G_inv))
            continue

        delta = np.exp(1j * theta) - q_old
        x = delta * r
        y = u + (delta * s / 2.0) * r
        H_new = H + delta * np.outer(r, c)
        try:
            G_new = rank_one_inverse_update(rank_one_inverse_update(G_inv, x, y), y, x)
        except DegenerateUpdate:
            logger.warning(f"소자 {j} 후보 {index}: Sherman–Morrison 퇴화, 전체 역행렬로 대체")
            try:
                G_new = hermitian_inverse(H_new @ H_new.conj().T)
            except SingularMatrix:
                candidates.append(DiscreteCandidate(index, float(theta), math.inf, H_new, None))
                continue
        value = float(np.real(np.diag(G_new)) @ p)
        candidates.append(DiscreteCandidate(index, float(theta), value, H_new, G_new))
    return candidates


def _select_candidate(
    candidates: List[DiscreteCandidate],
    current: int,
    p: np.ndarray,
    power_budget: Optional[SystemConfig],
) -> DiscreteCandidate:
    """최소 f 후보 선택. 현재 값과의 근소한 차이는 현재 값 유지, 나머지 동률은 작은 인덱스"""
    incumbent = candidates[current]
    ranked = sorted(candidates, key=lambda cand: (cand.value, cand.index))
    for cand in ranked:
        if cand.index == current:
            return incumbent
        if cand.value >= incumbent.value - TIE_TOLERANCE * abs(incumbent.value):
            # 현재 값과 1e-12 상대 차이 이내 동률은 작은 인덱스보다 현재 위상 우선
            return incumbent
        if power_budget is None or _within_budget(cand.H, cand.G_inv, p, power_budget):
            return cand
    return incumbent


def best_discrete_phase(
    j: int,
    ch: ChannelSet,
    p: np.ndarray,
    q: PhaseConfig,
    power_budget: Optional[SystemConfig] = None,
) -> float:
    """
    소자 j의 2^b 격자 위상 중 전체 목적 함수(직접 링크 포함)를 최소화하는 값

    Args:
        j: 소자 인덱스 (0부터, j = m·L + l)
        ch: 채널 묶음
        p: 고정 전력 벡터
        q: 현재 위상 상태 (이산)
        power_budget: 주어지면 고정 p에서 송신 전력 예산을 지키는 후보만 허용

    Returns:
        선택된 위상 (rad). 현재 위상도 후보이므로 f는 증가하지 않음
    """
    candidates = evaluate_discrete_candidates(j, ch, p, q)
    return _select_candidate(candidates, int(q.indices()[j]), np.asarray(p, dtype=float), power_budget).theta


@dataclass
class ElementWorkspace:
    """소자 j의 닫힌 형태 갱신에 필요한 값 묶음

    A_j..D_j와 E/a 계수는 with_table이고 K = T, p > 0일 때만 채워집니다 (검사용).
    b 계수는 E1이 필요해 비어 있습니다.
    최적화는 재유도된 삼각 다항식 계수(num_coeffs, den_coeffs, trig_coeffs)를 사용합니다.
    """
    index: int
    theta: float
    include_direct: bool
    r: np.ndarray
    u: np.ndarray
    base_inverse: Optional[np.ndarray]
    f_base: float = 0.0
    num_coeffs: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    den_coeffs: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    trig_coeffs: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    chi_candidates: List[float] = field(default_factory=list)
    stationary: bool = False
    A_j: Optional[np.ndarray] = None
    B_j: Optional[np.ndarray] = None
    C_j: Optional[np.ndarray] = None
    D_j: Optional[np.ndarray] = None
    E: Dict[str, complex] = field(default_factory=dict)
    a: Dict[str, complex] = field(default_factory=dict)
    b: Dict[str, complex] = field(default_factory=dict)
    table_consistent: Optional[bool] = None

    def value(self, theta: float) -> float:
        """f(θ) = f₀ − N(θ)/Δ(θ)"""
        n0, n1, n2 = self.num_coeffs
        d0, d1, d2 = self.den_coeffs
        cos, sin = math.cos(theta), math.sin(theta)
        return self.f_base - (n0 + n1 * cos + n2 * sin) / (d0 + d1 * cos + d2 * sin)

    def derivative(self, theta: float) -> float:
        """∂f/∂θ"""
        n0, n1, n2 = self.num_coeffs
        d0, d1, d2 = self.den_coeffs
        cos, sin = math.cos(theta), math.sin(theta)
        numerator = n0 + n1 * cos + n2 * sin
        denominator = d0 + d1 * cos + d2 * sin
        d_num = -n1 * sin + n2 * cos
        d_den = -d1 * sin + d2 * cos
        return -(d_num * denominator - numerator * d_den) / denominator ** 2


def _relative_gap(actual: np.ndarray, expected: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(expected))), np.finfo(float).tiny)
    return float(np.max(np.abs(actual - expected))) / scale


def _table_coefficients(ws: ElementWorkspace, ch: ChannelSet, p: np.ndarray, q_removed: np.ndarray):
    """
    A_j, B_j, C_j, D_j와 E1에 의존하지 않는 E2..E8, a5..a8 (K = T, p > 0)

    조립 직후 C_j, D_j를 A_j, B_j로 다시 만들어 비교하고
    (A_j + q_j·B_j)(A_j + q_j·B_j)^H가 P^{-1/2}·H_r·H_r^H·P^{-1/2}와 같은지 확인합니다 (상대오차 1e-10).
    """
    K, T = ch.H_D.shape
    if K != T or np.any(p <= 0):
        return
    scaled = ch.H_RU_h / np.sqrt(p)[:, None]
    ws.A_j = (scaled * q_removed[None, :]) @ ch.H_BR
    ws.B_j = np.outer(scaled[:, ws.index], ch.H_BR[ws.index, :])
    ws.C_j = ws.A_j @ ws.A_j.conj().T + ws.B_j @ ws.B_j.conj().T
    ws.D_j = ws.A_j + ws.A_j.conj().T

    q_j = complex(np.exp(1j * ws.theta))
    combined = ws.A_j + q_j * ws.B_j
    q_full = q_removed.copy()
    q_full[ws.index] = q_j
    reflected = (scaled * q_full[None, :]) @ ch.H_BR
    gaps = (
        _relative_gap(ws.A_j @ ws.A_j.conj().T + ws.B_j @ ws.B_j.conj().T, ws.C_j),
        _relative_gap(ws.A_j + ws.A_j.conj().T, ws.D_j),
        _relative_gap(combined @ combined.conj().T, reflected @ reflected.conj().T),
    )
    ws.table_consistent = max(gaps) <= 1e-10
    if not ws.table_consistent:
        logger.warning(f"소자 {ws.index}: 계수 표 불일치 (C_j {gaps[0]:.2e}, D_j {gaps[1]:.2e}, 그람 {gaps[2]:.2e})")

    try:
        D_inv = np.linalg.inv(ws.D_j)
    except np.linalg.LinAlgError:
        return
    C, CH = ws.C_j, ws.C_j.conj().T
    D_inv2 = D_inv @ D_inv
    E = {
        "E2": np.trace(D_inv2 @ C),
        "E3": np.trace(D_inv @ C),
        "E4": np.trace(D_inv2 @ CH),
        "E5": np.trace(D_inv2 @ C @ D_inv @ CH + D_inv @ C @ D_inv2 @ CH),
        "E6": np.trace(np.linalg.matrix_power(D_inv @ C @ D_inv, 2) @ CH),
        "E7": np.trace(D_inv @ C @ D_inv @ CH),
        "E8": np.trace(D_inv @ CH),
    }
    E3, E7, E8 = E["E3"], E["E7"], E["E8"]
    ws.E = {key: complex(value) for key, value in E.items()}
    ws.a = {
        "a5": complex(E8),
        "a6": complex(2 * E3 * E8 - E7 + 1),
        "a7": complex(E3 ** 2 * E8 - E3 * E7 + 2 * E3),
        "a8": complex(E3 ** 2),
    }


def build_element_workspace(
    j: int,
    ch: ChannelSet,
    p: np.ndarray,
    q: PhaseConfig,
    include_direct: bool = False,
    with_table: bool = False,
) -> ElementWorkspace:
    """
    소자 j 분리: H = H₀ + q_j·r·c에서
    HH^H = D + q_j·r·u^H + q̄_j·u·r^H (D = H₀H₀^H + ‖c‖²·r·r^H, u = H₀·c^H)

    Woodbury 공식 (2×2 핵심 행렬이 자기 역행렬)로
    f(θ) = f₀ − [γw₁₁ + αw₂₂ − 2Re((β + e^{jθ})w₂₁)] / [αγ − |β + e^{jθ}|²]
    (α = r^H D^{-1} r, β = r^H D^{-1} u, γ = u^H D^{-1} u, W = [r u]^H D^{-1} P D^{-1} [r u])

    Args:
        include_direct: False면 반사 경로만의 목적 함수
        with_table: A_j..D_j, E, a 계수 표를 조립하고 일관성 검사

    Returns:
        ElementWorkspace (D가 특이하면 base_inverse는 None)
    """
    p = np.asarray(p, dtype=float)
    coefficients = q.coefficients()
    q_removed = coefficients.copy()
    q_removed[j] = 0.0

    H0 = (ch.H_RU_h * q_removed[None, :]) @ ch.H_BR
    if include_direct:
        H0 = H0 + ch.H_D
    r = ch.H_RU_h[:, j].astype(complex)
    c = ch.H_BR[j, :]
    u = H0 @ c.conj()
    s = float(np.real(c @ c.conj()))

    ws = ElementWorkspace(index=j, theta=float(q.theta[j]), include_direct=include_direct, r=r, u=u, base_inverse=None)
    if with_table:
        _table_coefficients(ws, ch, p, q_removed)

    D = H0 @ H0.conj().T + s * np.outer(r, r.conj())
    try:
        D_inv = hermitian_inverse(D)
    except NumericsError:
        return ws
    ws.base_inverse = D_inv

    Dr, Du = D_inv @ r, D_inv @ u
    alpha = float(np.real(r.conj() @ Dr))
    gamma = float(np.real(u.conj() @ Du))
    beta = complex(r.conj() @ Du)
    w11 = float(np.real(Dr.conj() @ (p * Dr)))
    w22 = float(np.real(Du.conj() @ (p * Du)))
    w21 = complex(Du.conj() @ (p * Dr))

    n0 = gamma * w11 + alpha * w22 - 2.0 * (beta * w21).real
    n1 = -2.0 * w21.real
    n2 = 2.0 * w21.imag
    d0 = alpha * gamma - abs(beta) ** 2 - 1.0
    d1 = -2.0 * beta.real
    d2 = -2.0 * beta.imag

    ws.f_base = float(np.real(np.diag(D_inv)) @ p)
    ws.num_coeffs = (n0, n1, n2)
    ws.den_coeffs = (d0, d1, d2)
    # 정류 조건 A·sinθ + B·cosθ + C = 0
    ws.trig_coeffs = (n0 * d1 - n1 * d0, n2 * d0 - n0 * d2, n2 * d1 - n1 * d2)
    ws.gamma1 = math.atan2(n2, n1)
    ws.gamma2 = math.atan2(d2, d1)
    try:
        ws.chi_candidates = _tan_half_roots(ws)
        ws.stationary = True
    except NoRealRoot as e:
        logger.debug(str(e))
    return ws


def _tan_half_roots(ws: ElementWorkspace) -> List[float]:
    """
    (C − B)t² + 2At + (B + C) = 0의 실근 t = tan(θ/2)

    Raises:
        NoRealRoot: 계수가 모두 0 (목적 함수가 θ에 무관)
    """
    A, B, C = ws.trig_coeffs
    scale = max(abs(A), abs(B), abs(C))
    magnitude = sum(abs(v) for v in ws.num_coeffs) * sum(abs(v) for v in ws.den_coeffs)
    if scale == 0.0 or scale <= 1e-14 * magnitude:
        raise NoRealRoot(f"소자 {ws.index}: 목적 함수가 위상에 무관합니다")
    roots = np.roots(np.array([C - B, 2.0 * A, B + C]) / scale)
    return sorted(float(t.real) for t in roots if abs(t.imag) <= 1e-9 * (1.0 + abs(t)))


def closed_form_phase(ws: ElementWorkspace) -> float:
    """
    연속 위상 최적해: tan(θ/2) 2차 방정식의 실근과 θ = π (t → ∞) 중 f 최소값

    Returns:
        θ* ∈ [0, 2π). 정류점이 없거나 분리된 그람 행렬이 특이하면 현재 θ
    """
    if ws.base_inverse is None or not ws.stationary:
        return ws.theta

    candidates = [float(np.mod(2.0 * math.atan(t), TWO_PI)) for t in ws.chi_candidates]
    candidates.append(math.pi)
    values = [ws.value(theta) for theta in candidates]
    best = int(np.argmin(values))
    if values[best] > ws.value(ws.theta):
        return ws.theta
    return candidates[best]


def _accept_element(
    ch: ChannelSet,
    p: np.ndarray,
    q: PhaseConfig,
    j: int,
    theta: float,
    current_value: float,
    power_budget: Optional[SystemConfig],
) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
    """연속/양자화 후보를 전체 목적 함수로 검증. 수락하면 (H, G_inv, f) 반환"""
    trial = q.copy()
    trial.theta[j] = theta
    H = effective_channel(ch, trial)
    try:
        G_inv = hermitian_inverse(H @ H.conj().T)
    except SingularMatrix:
        return None
    value = float(np.real(np.diag(G_inv)) @ p)
    if value > current_value:
        return None
    if power_budget is not None and not _within_budget(H, G_inv, p, power_budget):
        return None
    return H, G_inv, value


def analog_sweep(
    ch: ChannelSet,
    p: np.ndarray,
    q: PhaseConfig,
    config: SystemConfig,
    history: Optional[List[float]] = None,
) -> PhaseConfig:
    """
    RIS 기반 아날로그 빔포밍: 소자 j = 0..M·L−1 순서로 좌표 하강

    이산 모드는 best_discrete_phase와 같은 전수 비교, closed_form 방식(또는 연속 위상)은
    닫힌 형태 해 후 양자화하며 전체 목적 함수가 증가하지 않을 때만 수락합니다.
    한 패스의 상대 변화가 ϱ 이하이거나 max_passes에 도달하면 종료합니다.

    Args:
        ch: 채널 묶음
        p: 고정 전력 벡터
        q: 시작 위상
        config: 시스템 설정
        history: 주어지면 소자 갱신마다 f 값을 추가

    Returns:
        새 PhaseConfig (f는 시작값 이하)
    """
    p = np.asarray(p, dtype=float)
    q = q.copy()
    if q.size == 0:
        return q

    method = "closed_form" if q.bits is None else config.solver.analog_method
    power_budget = config if config.solver.enforce_power_budget else None

    H = effective_channel(ch, q)
    f = weighted_inverse_trace(H, p)
    if history is not None:
        history.append(f)

    for sweep in range(1, config.solver.max_passes + 1):
        f_start = f
        G_inv = hermitian_inverse(H @ H.conj().T)

        for j in range(q.size):
            if method == "enumerate":
                candidates = evaluate_discrete_candidates(j, ch, p, q, H=H, G_inv=G_inv)
                chosen = _select_candidate(candidates, int(q.indices()[j]), p, power_budget)
                q.theta[j] = chosen.theta
                H, G_inv, f = chosen.H, chosen.G_inv, chosen.value
            else:
                ws = build_element_workspace(j, ch, p, q, include_direct=True)
                theta = closed_form_phase(ws)
                if q.bits is not None:
                    theta = quantize_phase(theta, q.bits)
                if abs(theta - q.theta[j]) > 0.0:
                    accepted = _accept_element(ch, p, q, j, theta, f, power_budget)
                    if accepted is not None:
                        q.theta[j] = theta
                        H, G_inv, f = accepted
            if history is not None:
                history.append(f)

        logger.debug(f"아날로그 패스 {sweep}: f {f_start:.6e} → {f:.6e}")
        if abs(f_start - f) <= config.inner_threshold * abs(f_start):
            break

    return q


def exhaustive_phase_search(
    ch: ChannelSet,
    p: np.ndarray,
    config: SystemConfig,
    include_direct: bool = True,
) -> Tuple[PhaseConfig, float]:
    """
    모든 2^{b·M·L} 위상 조합 전수 탐색 (작은 문제의 기준값)

    Returns:
        (최적 PhaseConfig, 최소 f)

    Raises:
        ValueError: 연속 위상이거나 b·M·L > 20
    """
    if config.is_continuous:
        raise ValueError("전수 탐색은 이산 위상에서만 가능합니다")
    bits = config.phase_bits
    ML = ch.num_elements
    if bits * ML > EXHAUSTIVE_LIMIT_BITS:
        raise ValueError(f"전수 탐색 범위가 너무 큽니다: b·M·L = {bits * ML}")

    best_indices, best_value = None, math.inf
    for indices in itertools.product(range(2 ** bits), repeat=ML):
        q = PhaseConfig.from_indices(indices, bits)
        try:
            value = objective_f(ch, p, q, include_direct)
        except SingularMatrix:
            continue
        if value < best_value:
            best_indices, best_value = indices, value

    if best_indices is None:
        raise SingularMatrix("모든 위상 조합에서 채널이 특이합니다")
    return PhaseConfig.from_indices(best_indices, bits), best_value
