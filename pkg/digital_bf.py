"""디지털 빔포밍 모듈
ZF 디지털 빔포머와 Benson 변환 기반 Dinkelbach 전력 할당

전력 할당은 비율 Σ_k log2(1 + p_k/σ²) / (ω·Σ_k w_k·p_k + 𝒫_s)를 최대화합니다.
w_k = ‖ṽ_k‖²이므로 분모는 실제 송신 전력을 반영하며 비율은 η/B와 같습니다."""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import SystemConfig
from numerics import SingularMatrix, gram_inverse
from power_metrics import block_powers, power_constraints


# 로깅 설정
logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-12
ARMIJO_SLOPE = 1e-4
MIN_STEP = 1e-16
GRADIENT_FLOOR = 1e-12
STATIONARITY_STEP = 1e-3
STALL_WINDOW = 100
STALL_RELATIVE_GAIN = 1e-10


class RankDeficient(SingularMatrix):
    """H·H^H 역행렬 계산 실패 (채널 재생성 필요)"""


class InfeasibleBudget(ValueError):
    """송신 전력 예산이 0 이하"""


class NonConvergence(RuntimeError):
    """내부 솔버가 최대 반복 안에 수렴하지 않음"""


@dataclass
class BeamformerState:
    """ZF 디지털 빔포머 상태"""
    zf_directions: np.ndarray       # T×K, Ṽ_D = H^H(HH^H)^{-1}
    power_alloc: np.ndarray         # 길이 K
    V_D: np.ndarray                 # T×K, Ṽ_D·P^{1/2}
    y: Optional[float] = None       # Benson 보조 변수
    ratio: Optional[float] = None   # 최종 비율 (η/B)
    iterations: int = 0
    ratio_trace: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "power_alloc": self.power_alloc.tolist(),
            "y": self.y,
            "ratio": self.ratio,
            "iterations": self.iterations,
            "ratio_trace": list(self.ratio_trace),
        }


def zf_beamformer(H: np.ndarray, p: np.ndarray) -> BeamformerState:
    """
    ZF 빔포머 V_D = H^H(HH^H)^{-1}·diag(√p)

    Args:
        H: K×T 등가 채널 (K ≤ T, 행 풀랭크)
        p: 길이 K 전력 벡터

    Returns:
        BeamformerState (y 없음)

    Raises:
        RankDeficient: H·H^H 역행렬 계산 실패
    """
    H = np.atleast_2d(H)
    p = np.maximum(np.asarray(p, dtype=float).reshape(-1), 0.0)
    if H.shape[0] > H.shape[1]:
        raise RankDeficient(f"사용자 수가 안테나 수보다 많습니다: {H.shape}")
    try:
        G_inv = gram_inverse(H)
    except SingularMatrix as e:
        raise RankDeficient(f"ZF 역행렬 실패: {e}") from e

    directions = H.conj().T @ G_inv
    V_D = directions * np.sqrt(p)[None, :]
    return BeamformerState(zf_directions=directions, power_alloc=p, V_D=V_D)


def transmit_weights(zf_directions: np.ndarray) -> np.ndarray:
    """w_k = ‖ṽ_k‖² = [(HH^H)^{-1}]_kk"""
    return np.sum(np.abs(zf_directions) ** 2, axis=0)


def per_bs_power(V_D: np.ndarray, n: int, config: SystemConfig) -> float:
    """
    BS n의 송신 전력 Tr(V_{D,n}^H·V_{D,n})

    Raises:
        BlockMismatch: V_D 행 수가 블록 구성과 다른 경우
    """
    return float(block_powers(V_D, config)[n])


def constraint_matrix(zf_directions: np.ndarray, config: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    전력 제약 행렬

    Returns:
        (G, budgets): G[n, k] = [G_n]_kk = Σ_{블록 n의 행} |ṽ_{row,k}|², budgets[n] = 예산 (W)
    """
    row_power = np.abs(zf_directions) ** 2
    constraints = power_constraints(config)
    G = np.vstack([row_power[rows].sum(axis=0) for rows, _ in constraints])
    budgets = np.array([budget for _, budget in constraints], dtype=float)
    return G, budgets


def sum_log_rate(p: np.ndarray, noise_power: float) -> float:
    """Σ_k log2(1 + p_k/σ²)"""
    return float(np.sum(np.log2(1.0 + np.maximum(p, 0.0) / noise_power)))


def power_ratio(p: np.ndarray, weights: np.ndarray, config: SystemConfig) -> float:
    """Dinkelbach 비율 Σ log2(1 + p_k/σ²) / (ω·Σ w_k p_k + 𝒫_s)"""
    denominator = config.amplifier_factor * float(weights @ p) + config.static_power_w
    return sum_log_rate(p, config.noise_power_w) / denominator


def benson_objective(p: np.ndarray, y: float, weights: np.ndarray, config: SystemConfig) -> float:
    """2y·√(Σ log2(1 + p_k/σ²)) − y²·(ω·Σ w_k p_k + 𝒫_s)"""
    numerator = sum_log_rate(p, config.noise_power_w)
    denominator = config.amplifier_factor * float(weights @ p) + config.static_power_w
    return 2.0 * y * math.sqrt(max(numerator, 0.0)) - y * y * denominator


def equal_power_start(G: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    """p_k = min_n budget_n / (K·max_k [G_n]_kk), 모든 제약을 만족"""
    K = G.shape[1]
    peak = G.max(axis=1)
    level = min(budget / (K * g) for budget, g in zip(budgets, peak) if g > 0)
    return np.full(K, level)


def _project_single(z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """{x ≥ 0, a·x ≤ 1}로의 정확한 사영 (정렬된 분기점 탐색)"""
    x = np.maximum(z, 0.0)
    if a @ x <= 1.0:
        return x

    # x(λ) = max(z − λa, 0), a·x(λ) = 1을 만족하는 λ > 0 탐색
    active = (a > 0) & (z > 0)
    breakpoints = z[active] / a[active]
    order = np.argsort(-breakpoints)
    a_z = np.cumsum((a[active] * z[active])[order])
    a_a = np.cumsum((a[active] ** 2)[order])
    candidates = (a_z - 1.0) / a_a
    following = np.append(breakpoints[order][1:], 0.0)
    valid = np.flatnonzero(candidates >= following)
    lam = max(float(candidates[valid[0] if valid.size else -1]), 0.0)

    x = np.maximum(z - lam * a, 0.0)
    load = a @ x
    return x / load if load > 1.0 else x


def project_feasible(z: np.ndarray, A: np.ndarray) -> np.ndarray:
    """
    다면체 {x ≥ 0, A·x ≤ 1} 위로의 사영

    위반 제약이 하나면 정확한 사영, 여럿이면 Dykstra 교대 사영 후 실현 가능하도록 축소
    """
    x = np.maximum(z, 0.0)
    loads = A @ x
    violated = np.flatnonzero(loads > 1.0 + FEASIBILITY_SLACK)
    if violated.size == 0:
        return x

    if violated.size == 1:
        x = _project_single(z, A[violated[0]])
        if np.all(A @ x <= 1.0 + FEASIBILITY_SLACK):
            return x

    x = z.copy()
    increments = np.zeros_like(A)
    for _ in range(2000):
        previous = x.copy()
        for n in range(A.shape[0]):
            shifted = x + increments[n]
            x = _project_single(shifted, A[n])
            increments[n] = shifted - x
        if np.linalg.norm(x - previous) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break

    peak = float(np.max(A @ x))
    return x / peak if peak > 1.0 else x


def dinkelbach_inner(
    y: float,
    G: np.ndarray,
    noise_power: float,
    config: SystemConfig,
    budgets: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
    p_init: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    고정 y에 대한 Benson 변환 부분 문제 (오목)

    max_p 2y·√(Σ log2(1 + p_k/σ²)) − y²·(ω·Σ w_k p_k + 𝒫_s)
    s.t. Σ_k p_k·[G_n]_kk ≤ budget_n ∀n, p ≥ 0

    변수 x_k = p_k/p_k^max (p_k^max = min_n budget_n/[G_n]_kk)로 척도를 맞춘 뒤
    Armijo 백트래킹 + Barzilai–Borwein 스텝의 사영 경사 상승법으로 풉니다.

    Args:
        y: Benson 보조 변수 (≥ 0)
        G: 제약 행렬 (제약 수 × K)
        noise_power: σ² (W)
        config: 시스템 설정 (ω, 𝒫_s, 솔버 허용오차)
        budgets: 제약별 예산 (기본: 모든 제약 P_T)
        weights: 송신 전력 가중치 w_k (기본: G의 열 합)
        p_init: 시작점 (기본: 균등 전력)

    Returns:
        모든 제약을 만족하는 전력 벡터 p

    Raises:
        InfeasibleBudget: 예산이 0 이하
        NonConvergence: max_inner_iters 안에 정규화 잔차가 허용오차 이하로 줄지 않고 정체도 없음
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    K = G.shape[1]
    budgets = np.full(G.shape[0], config.pt_w) if budgets is None else np.asarray(budgets, dtype=float)
    if np.any(budgets <= 0):
        raise InfeasibleBudget(f"전력 예산은 0보다 커야 합니다: {budgets}")
    if np.any(G < 0):
        raise ValueError("제약 행렬 원소는 음수일 수 없습니다")
    weights = G.sum(axis=0) if weights is None else np.asarray(weights, dtype=float)

    if y <= 0:
        return np.zeros(K)

    with np.errstate(divide="ignore"):
        caps = np.where(G > 0, budgets[:, None] / G, np.inf).min(axis=0)
    if not np.all(np.isfinite(caps)):
        raise ValueError("전력 제약이 없는 사용자가 있습니다")

    A = G * caps[None, :] / budgets[:, None]
    omega = config.amplifier_factor
    static = config.static_power_w
    ln2 = math.log(2.0)

    def objective(x: np.ndarray) -> float:
        p = x * caps
        rate = float(np.sum(np.log1p(p / noise_power))) / ln2
        return 2.0 * y * math.sqrt(max(rate, 0.0)) - y * y * (omega * float(weights @ p) + static)

    def gradient_parts(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = x * caps
        rate = float(np.sum(np.log1p(p / noise_power))) / ln2
        root = max(math.sqrt(max(rate, 0.0)), GRADIENT_FLOOR)
        d_rate = 1.0 / ((noise_power + p) * ln2)
        return y * d_rate / root * caps, y * y * omega * weights * caps

    def stationarity(x: np.ndarray, gain: np.ndarray, cost: np.ndarray) -> float:
        # 작은 스텝의 사영 경사를 경사 성분 크기로 나눈 무차원 잔차 (KKT 점에서 0)
        scale = max(float(np.max(gain)), float(np.max(cost)), GRADIENT_FLOOR)
        t = STATIONARITY_STEP / scale
        moved = project_feasible(x + t * (gain - cost), A) - x
        return float(np.max(np.abs(moved))) / STATIONARITY_STEP

    start = equal_power_start(G, budgets) if p_init is None else np.asarray(p_init, dtype=float)
    x = project_feasible(start / caps, A)
    f = objective(x)
    gain, cost = gradient_parts(x)
    g = gain - cost
    step = 1.0 / max(float(np.max(np.abs(g))), 1e-12)
    tolerance = config.solver.inner_tolerance
    history = [f]

    for iteration in range(config.solver.max_inner_iters):
        residual = stationarity(x, gain, cost)
        if residual <= tolerance:
            logger.debug(f"내부 솔버 수렴: {iteration}회, 잔차 {residual:.2e}")
            return x * caps
        if len(history) > STALL_WINDOW and f - history[-STALL_WINDOW - 1] <= STALL_RELATIVE_GAIN * abs(f):
            # 예산 경계 위에서 목적값이 반올림 수준으로만 변함
            logger.debug(f"내부 솔버 정체: {iteration}회, 잔차 {residual:.2e}")
            return x * caps

        while True:
            candidate = project_feasible(x + step * g, A)
            f_candidate = objective(candidate)
            if f_candidate >= f + ARMIJO_SLOPE * float(g @ (candidate - x)) and f_candidate >= f:
                break
            step *= 0.5
            if step < MIN_STEP:
                # 부동소수점 정밀도 한계에서 더 이상 상승 불가
                logger.debug(f"내부 솔버 정체: {iteration}회, 잔차 {residual:.2e}")
                return x * caps

        gain, cost = gradient_parts(candidate)
        g_candidate = gain - cost
        s = candidate - x
        curvature = float(s @ (g_candidate - g))
        if curvature < 0:
            step = float(s @ s) / -curvature
        else:
            step *= 2.0
        step = min(max(step, 1e-12), 1e12)
        x, f, g = candidate, f_candidate, g_candidate
        history.append(f)

    raise NonConvergence(f"내부 솔버가 {config.solver.max_inner_iters}회 안에 수렴하지 않았습니다")


def dinkelbach_power_allocation(
    H: np.ndarray,
    config: SystemConfig,
    p_init: Optional[np.ndarray] = None,
) -> BeamformerState:
    """
    디지털 빔포밍 설계: ZF 방향 고정 후 Benson 변환 반복으로 전력 할당

    y ← √(Σ log2(1 + p_k/σ²)) / (ω·Σ w_k p_k + 𝒫_s)와 내부 문제 풀이를 비율의 상대 변화가
    ϱ 이하가 될 때까지 번갈아 수행합니다. 비율은 반복마다 감소하지 않습니다.

    Args:
        H: K×T 등가 채널
        config: 시스템 설정
        p_init: 시작 전력 (기본: 균등 전력)

    Returns:
        최종 BeamformerState (y, ratio, ratio_trace 포함)

    Raises:
        RankDeficient: H가 행 풀랭크가 아닌 경우
        InfeasibleBudget: P_T < 0
    """
    if config.pt_w < 0:
        raise InfeasibleBudget(f"전력 예산은 음수일 수 없습니다: {config.pt_w}")

    state = zf_beamformer(H, np.zeros(np.atleast_2d(H).shape[0]))
    if config.pt_w == 0:
        state.y, state.ratio = 0.0, 0.0
        return state

    G, budgets = constraint_matrix(state.zf_directions, config)
    weights = G.sum(axis=0)
    noise = config.noise_power_w

    if p_init is None:
        p = equal_power_start(G, budgets)
    else:
        p = np.maximum(np.asarray(p_init, dtype=float), 0.0)
        load = float(np.max(G @ p / budgets))
        if load > 1.0:
            p = p / load
    ratio = power_ratio(p, weights, config)
    trace = [ratio]
    y = 0.0

    iterations = 0
    for iterations in range(1, config.solver.max_dinkelbach_iters + 1):
        y = math.sqrt(sum_log_rate(p, noise)) / (config.amplifier_factor * float(weights @ p) + config.static_power_w)
        p_next = dinkelbach_inner(y, G, noise, config, budgets=budgets, weights=weights, p_init=p)
        ratio_next = power_ratio(p_next, weights, config)
        if ratio_next < ratio:
            # 내부 해가 반올림 수준에서 나빠지면 이전 해 유지
            ratio_next, p_next = ratio, p
        change = abs(ratio_next - ratio)
        p, ratio = p_next, ratio_next
        trace.append(ratio)
        logger.debug(f"Dinkelbach {iterations}회: 비율 {ratio:.6e}, y {y:.4e}")
        if change <= config.inner_threshold * abs(ratio):
            break
    else:
        logger.warning(f"Dinkelbach가 {config.solver.max_dinkelbach_iters}회 안에 수렴하지 않았습니다")

    return BeamformerState(
        zf_directions=state.zf_directions,
        power_alloc=p,
        V_D=state.zf_directions * np.sqrt(p)[None, :],
        y=y,
        ratio=ratio,
        iterations=iterations,
        ratio_trace=trace,
    )
