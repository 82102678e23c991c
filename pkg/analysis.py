"""이론 분석 모듈
고SNR 에너지 효율 해석식과 그 도함수 (전송 전력, RIS 개수, RIS 크기),
그리고 같은 변수에 대한 몬테카를로 스윕으로 경향을 확인합니다.

해석식은 각 도함수가 해당 η 식의 정확한 도함수가 되도록 구성되어 있어
중앙 차분과 비교하는 자기 일관성 검사가 가능합니다."""

import math
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import CONTINUOUS, SystemConfig
from channel import generate_channel_set
from eem import init_random_phase, run_eem
from numerics import SingularMatrix
from utils import dbm_to_watts, ensure_directory, write_json_file


# 로깅 설정
logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
TREND_TOLERANCE = 0.05
NOISE_FLOOR = 1e-9
SWEEP_VARIABLES = ("P_T", "M", "L", "b")
PROPOSITION_IDS = {"P_T": "prop1", "M": "prop2", "L": "prop3", "b": "quantization"}


# ---------------------------------------------------------------------------
# 전송 전력 (Σp)에 대한 해석식
# ---------------------------------------------------------------------------

def eta_power_high_snr(p_sum: float, config: SystemConfig) -> float:
    """고SNR η(S) = B·(log2 S − log2 σ²) / (ω·S + 𝒫_s)"""
    B, omega, Ps = config.bandwidth_hz, config.amplifier_factor, config.static_power_w
    return B * (math.log2(p_sum) - math.log2(config.noise_power_w)) / (omega * p_sum + Ps)


def prop1_molecule(p_sum: float, config: SystemConfig) -> float:
    """h(S) = (B/ln2)·𝒫_s + (ωB/ln2)·(S − S·ln S) + ωB·S·log2 σ²"""
    B, omega, Ps = config.bandwidth_hz, config.amplifier_factor, config.static_power_w
    S = p_sum
    return B / LN2 * Ps + omega * B / LN2 * (S - S * math.log(S)) + omega * B * S * math.log2(config.noise_power_w)


def prop1_molecule_slope(p_sum: float, config: SystemConfig) -> float:
    """h′(S) = −ωB·log2(S/σ²), S > σ²에서 음수"""
    return -config.amplifier_factor * config.bandwidth_hz * math.log2(p_sum / config.noise_power_w)


def prop1_derivative(p_sum: float, config: SystemConfig) -> float:
    """
    ∂η/∂S = h(S) / (S·(ω·S + 𝒫_s)²)

    Args:
        p_sum: 전체 전송 전력 S = Σ p_k (W, > 0)
    """
    if p_sum <= 0:
        raise ValueError(f"전송 전력 합은 양수여야 합니다: {p_sum}")
    denominator = p_sum * (config.amplifier_factor * p_sum + config.static_power_w) ** 2
    return prop1_molecule(p_sum, config) / denominator


# ---------------------------------------------------------------------------
# RIS 개수 M에 대한 해석식 (N₀ = N + M 고정)
# ---------------------------------------------------------------------------

@dataclass
class Prop2Constants:
    """η(M) = (c1·ln M + c2) / (c3·M² + c4·M + c5)"""
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return self.c1, self.c2, self.c3, self.c4, self.c5


def _total_sites(config: SystemConfig, total_sites: Optional[int]) -> int:
    return config.num_bs + config.num_ris if total_sites is None else total_sites


def prop2_constants(config: SystemConfig, trace_V: float, total_sites: Optional[int] = None) -> Prop2Constants:
    """
    c1 = 2BK/ln2, c2 = BK·log2(L²·(trace_V/K)/σ²), c3 = ω·L²·trace_V,
    c4 = L·P_R − P_B, c5 = K·P_U + N₀·P_B

    Args:
        trace_V: 기준점에서의 Tr(V_D^H V_D)/(M·L)² (고정 상수)
        total_sites: N₀ (기본: 설정의 N + M)
    """
    B, K, L = config.bandwidth_hz, config.num_users, config.elements_per_ris
    N0 = _total_sites(config, total_sites)
    return Prop2Constants(
        c1=2.0 * B * K / LN2,
        c2=B * K * math.log2(L ** 2 * (trace_V / K) / config.noise_power_w),
        c3=config.amplifier_factor * L ** 2 * trace_V,
        c4=L * config.ris_static_w - config.bs_static_w,
        c5=K * config.user_static_w + N0 * config.bs_static_w,
    )


def eta_ris_count_high_snr(M: float, config: SystemConfig, trace_V: float, total_sites: Optional[int] = None) -> float:
    """고SNR η(M), 채널 경화 가정"""
    c1, c2, c3, c4, c5 = prop2_constants(config, trace_V, total_sites).as_tuple()
    return (c1 * math.log(M) + c2) / (c3 * M ** 2 + c4 * M + c5)


def prop2_terms(M: float, config: SystemConfig, trace_V: float, total_sites: Optional[int] = None) -> Tuple[float, float, float]:
    """
    분자 분해: ① (c1 − c2)(M·c4 + M²·c3), ② c1·c5 − M²·c2·c3, ③ −M·ln M·(c1·c4 + 2M·c1·c3)
    """
    c1, c2, c3, c4, c5 = prop2_constants(config, trace_V, total_sites).as_tuple()
    first = (c1 - c2) * (M * c4 + M ** 2 * c3)
    second = c1 * c5 - M ** 2 * c2 * c3
    third = -M * math.log(M) * (c1 * c4 + 2.0 * M * c1 * c3)
    return first, second, third


def prop2_derivative(M: float, config: SystemConfig, trace_V: float, total_sites: Optional[int] = None) -> float:
    """
    ∂η/∂M = (① + ② + ③) / (M·(c3·M² + c4·M + c5)²)

    Raises:
        ValueError: M < 1 또는 N₀ ≤ M
    """
    N0 = _total_sites(config, total_sites)
    if M < 1 or N0 <= M:
        raise ValueError(f"1 ≤ M < N₀ 이어야 합니다: M={M}, N₀={N0}")
    c1, c2, c3, c4, c5 = prop2_constants(config, trace_V, total_sites).as_tuple()
    molecule = sum(prop2_terms(M, config, trace_V, total_sites))
    return molecule / (M * (c3 * M ** 2 + c4 * M + c5) ** 2)


def prop2_conditions(M: float, config: SystemConfig, trace_V: float, total_sites: Optional[int] = None) -> Dict[str, bool]:
    """η(M)이 감소하기 위한 충분조건: c1 < c2, c5 < M²·c3"""
    c1, c2, c3, c4, c5 = prop2_constants(config, trace_V, total_sites).as_tuple()
    return {"c1_below_c2": c1 < c2, "c5_below_M2c3": c5 < M ** 2 * c3}


# ---------------------------------------------------------------------------
# RIS 크기 L에 대한 해석식
# ---------------------------------------------------------------------------

def _size_constants(config: SystemConfig, p_sum: Optional[float], mean_gain: Optional[float]) -> Tuple[float, float, float]:
    """(C, ā, Σp): C = ω·Σp + K·P_U + N·P_B, 기본 Σp = N·P_T, ā = N·P_T/(K·M·σ²)"""
    p_sum = config.num_bs * config.pt_w if p_sum is None else p_sum
    if mean_gain is None:
        mean_gain = config.num_bs * config.pt_w / (config.num_users * config.num_ris * config.noise_power_w)
    C = config.amplifier_factor * p_sum + config.num_users * config.user_static_w + config.num_bs * config.bs_static_w
    return C, mean_gain, p_sum


def eta_size_snr_form(L: float, config: SystemConfig, p_sum: Optional[float] = None, mean_gain: Optional[float] = None) -> float:
    """η(L) = B·log2(L·M·ā) / (C + L·M·P_R)"""
    C, a_bar, _ = _size_constants(config, p_sum, mean_gain)
    M, P_R = config.num_ris, config.ris_static_w
    return config.bandwidth_hz * math.log2(L * M * a_bar) / (C + L * M * P_R)


def prop3_condition(config: SystemConfig) -> bool:
    """𝒫_s / (M·P_R) > ln(N·P_T / (K·σ²))"""
    lhs = config.static_power_w / (config.num_ris * config.ris_static_w)
    return lhs > math.log(config.num_bs * config.pt_w / (config.num_users * config.noise_power_w))


def prop3_g(
    L: float,
    config: SystemConfig,
    p_sum: Optional[float] = None,
    mean_gain: Optional[float] = None,
) -> Tuple[float, bool]:
    """
    분자 g(L) = (B/ln2)·C + [(L − L·ln L)·B/ln2 − L·B·log2(M·ā)]·M·P_R

    ∂η/∂L = g(L) / (L·(C + L·M·P_R)²)

    Returns:
        (g(L), 단봉성 충분조건 성립 여부)
    """
    if L < 1:
        raise ValueError(f"RIS 크기는 1 이상이어야 합니다: {L}")
    C, a_bar, _ = _size_constants(config, p_sum, mean_gain)
    B, M, P_R = config.bandwidth_hz, config.num_ris, config.ris_static_w
    g = B / LN2 * C + ((L - L * math.log(L)) * B / LN2 - L * B * math.log2(M * a_bar)) * M * P_R
    return g, prop3_condition(config)


def prop3_derivative(L: float, config: SystemConfig, p_sum: Optional[float] = None, mean_gain: Optional[float] = None) -> float:
    """∂η/∂L = g(L) / (L·(C + L·M·P_R)²)"""
    C, _, _ = _size_constants(config, p_sum, mean_gain)
    g, _ = prop3_g(L, config, p_sum, mean_gain)
    return g / (L * (C + L * config.num_ris * config.ris_static_w) ** 2)


def eta_size_high_snr(L: float, config: SystemConfig, per_user_trace: Optional[Sequence[float]] = None) -> float:
    """
    RIS 크기가 커질 때의 η(L) (채널 경화)
    η = [2BK·log2 L + B·Σ log2(M²·v_k/σ²)] / [ω·L²·M²·Σ v_k + L·M·P_R + N·P_B + K·P_U]

    Args:
        per_user_trace: v_k (기본: N·P_T/(K·M²) 균등)
    """
    B, K, M = config.bandwidth_hz, config.num_users, config.num_ris
    if per_user_trace is None:
        v = np.full(K, config.num_bs * config.pt_w / (K * M ** 2))
    else:
        v = np.asarray(per_user_trace, dtype=float)
    numerator = 2.0 * B * K * math.log2(L) + B * float(np.sum(np.log2(M ** 2 * v / config.noise_power_w)))
    denominator = (
        config.amplifier_factor * L ** 2 * M ** 2 * float(np.sum(v))
        + L * M * config.ris_static_w
        + config.num_bs * config.bs_static_w
        + K * config.user_static_w
    )
    return numerator / denominator


def central_difference(func, x: float, rel_step: float = 1e-5) -> float:
    """중앙 차분 (func(x+h) − func(x−h)) / 2h, h = rel_step·|x| (x = 0이면 rel_step)"""
    h = rel_step * abs(x) if x != 0 else rel_step
    return (func(x + h) - func(x - h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# 경향 판정
# ---------------------------------------------------------------------------

def _significant_steps(values: Sequence[float], tolerance: float) -> List[int]:
    """인접 차분의 부호 (상대 tolerance·η와 1e-9·η 미만은 0)"""
    signs = []
    for before, after in zip(values, values[1:]):
        threshold = max(tolerance, NOISE_FLOOR) * max(abs(before), abs(after))
        delta = after - before
        signs.append(0 if abs(delta) <= threshold else int(np.sign(delta)))
    return signs


def is_unimodal(values: Sequence[float], tolerance: float = TREND_TOLERANCE) -> bool:
    """증가 후 감소 (유의한 부호 변화가 +에서 −로 최대 한 번)"""
    signs = [s for s in _significant_steps(values, tolerance) if s != 0]
    return all(not (a < 0 and b > 0) for a, b in zip(signs, signs[1:]))


def is_nondecreasing(values: Sequence[float], tolerance: float = TREND_TOLERANCE) -> bool:
    """한쪽 방향 tolerance 안에서 감소하지 않음"""
    return all(s >= 0 for s in _significant_steps(values, tolerance))


def has_interior_maximum(values: Sequence[float]) -> bool:
    best = int(np.argmax(values))
    return 0 < best < len(values) - 1


def _flattens(values: Sequence[float], tolerance: float = TREND_TOLERANCE) -> bool:
    """증가 후 평탄: 감소 없음, 마지막 구간 상대 변화 < tolerance"""
    if len(values) < 2:
        return True
    last = abs(values[-1] - values[-2]) / max(abs(values[-2]), NOISE_FLOOR)
    return is_nondecreasing(values, tolerance) and last < tolerance


# ---------------------------------------------------------------------------
# 몬테카를로 스윕
# ---------------------------------------------------------------------------

@dataclass
class PropositionReport:
    """스윕 결과 (격자점별 평균)"""
    proposition_id: str
    sweep_variable: str
    sweep_points: List[Any]
    eta_values: List[float]
    derivative_values: List[float]
    condition_holds: bool
    verdict: bool
    sum_rate_values: List[float] = field(default_factory=list)
    iteration_values: List[float] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "proposition_id": self.proposition_id,
            "sweep_variable": self.sweep_variable,
            "sweep_points": list(self.sweep_points),
            "eta_values": list(self.eta_values),
            "derivative_values": list(self.derivative_values),
            "sum_rate_values": list(self.sum_rate_values),
            "iteration_values": list(self.iteration_values),
            "condition_holds": self.condition_holds,
            "verdict": self.verdict,
        }

    def to_frame(self) -> pd.DataFrame:
        """격자점·시드별 한 행"""
        return pd.DataFrame(self.rows, columns=["sweep_value", "seed", "eta_bits_per_joule", "sum_rate_bps_hz", "iterations"])

    def save(self, output_directory: str) -> Tuple[Path, Path]:
        """CSV(행 단위)와 JSON(요약) 저장"""
        directory = ensure_directory(output_directory)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        stem = f"sweep_{self.sweep_variable}_{timestamp}"
        csv_path = directory / f"{stem}.csv"
        json_path = directory / f"{stem}.json"
        self.to_frame().to_csv(csv_path, index=False)
        write_json_file(str(json_path), {"created_at": datetime.now().isoformat(), **self.to_dict()})
        logger.info(f"스윕 결과 저장됨: {csv_path}, {json_path}")
        return csv_path, json_path


def sweep_point_config(variable: str, value: Any, config: SystemConfig, total_sites: Optional[int] = None) -> SystemConfig:
    """
    스윕 변수 하나를 바꾼 설정

    Args:
        variable: "P_T" (dBm), "M" (N₀ = N + M 고정), "L", "b" (1, 2, 3, "continuous")
    """
    if variable == "P_T":
        return config.with_updates(pt_w=dbm_to_watts(float(value)))
    if variable == "M":
        N0 = _total_sites(config, total_sites)
        if not 1 <= int(value) < N0:
            raise ValueError(f"M은 1..N₀−1 범위여야 합니다: {value} (N₀={N0})")
        return config.with_updates(num_ris=int(value), num_bs=N0 - int(value))
    if variable == "L":
        return config.with_updates(elements_per_ris=int(value))
    if variable == "b":
        return config.with_updates(phase_bits=None if value in (None, CONTINUOUS) else int(value))
    raise ValueError(f"지원하지 않는 스윕 변수입니다: {variable} (가능: {', '.join(SWEEP_VARIABLES)})")


def reference_trace_v(transmit_power: float, config: SystemConfig) -> float:
    """Tr(V_D^H V_D)/(M·L)² (RIS 개수 해석식의 고정 상수)"""
    return transmit_power / max(config.num_elements, 1) ** 2


def _analytic_derivative(variable: str, value: Any, point: SystemConfig, trace_V: float, total_sites: int) -> float:
    if variable == "P_T":
        return prop1_derivative(point.num_bs * point.pt_w, point)
    if variable == "M":
        return prop2_derivative(float(value), point, trace_V, total_sites)
    if variable == "L":
        return prop3_derivative(float(value), point)
    return float("nan")


def _verdict(variable: str, eta: List[float], sum_rate: List[float]) -> bool:
    if variable == "P_T":
        return _flattens(eta)
    if variable == "M":
        return is_unimodal(eta) and has_interior_maximum(eta)
    if variable == "L":
        return is_unimodal(eta)
    return is_nondecreasing(sum_rate)


def empirical_sweep(
    variable: str,
    grid: Sequence[Any],
    config: SystemConfig,
    seeds: Sequence[int],
    total_sites: Optional[int] = None,
    show_progress: bool = False,
) -> PropositionReport:
    """
    격자점·시드마다 EEM 전체 실행 후 평균 η로 경향 판정

    같은 시드를 모든 격자점에 사용합니다 (공통 난수). 채널이 특이한 시드는 경고 후 제외합니다.

    Args:
        variable: "P_T", "M", "L", "b"
        grid: 격자 값 목록 (비어 있으면 안 됨)
        config: 기준 설정
        seeds: 채널/초기 위상 시드 목록
        total_sites: M 스윕의 N₀ (기본: 설정의 N + M)
        show_progress: tqdm 진행 표시

    Returns:
        PropositionReport
    """
    if not grid:
        raise ValueError("스윕 격자가 비어 있습니다")
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"지원하지 않는 스윕 변수입니다: {variable}")
    N0 = _total_sites(config, total_sites)

    rows: List[Dict[str, Any]] = []
    eta_values, rate_values, iteration_values, derivatives = [], [], [], []
    trace_V = None
    iterator = tqdm(grid, desc=f"{variable} 스윕", disable=not show_progress)
    for value in iterator:
        point = sweep_point_config(variable, value, config, N0)
        etas, rates, iterations = [], [], []
        for seed in seeds:
            try:
                ch = generate_channel_set(point, seed)
                report = run_eem(point, ch, init_random_phase(point, seed))
            except SingularMatrix as e:
                logger.warning(f"{variable}={value}, 시드 {seed} 제외: {e}")
                continue
            etas.append(report.final_eta)
            rates.append(report.final_rates.sum)
            iterations.append(report.iterations)
            rows.append({
                "sweep_value": value,
                "seed": seed,
                "eta_bits_per_joule": report.final_eta,
                "sum_rate_bps_hz": report.final_rates.sum,
                "iterations": report.iterations,
            })
            if trace_V is None and variable == "M":
                trace_V = reference_trace_v(float(np.sum(report.final_power.transmit_per_bs)), point)

        eta_values.append(float(np.mean(etas)) if etas else float("nan"))
        rate_values.append(float(np.mean(rates)) if rates else float("nan"))
        iteration_values.append(float(np.mean(iterations)) if iterations else float("nan"))

    for value in grid:
        if variable == "M" and not trace_V:
            derivatives.append(float("nan"))
            continue
        point = sweep_point_config(variable, value, config, N0)
        derivatives.append(_analytic_derivative(variable, value, point, trace_V, N0))

    if variable == "L":
        condition = prop3_condition(config)
    elif variable == "M" and trace_V:
        condition = all(all(prop2_conditions(float(m), sweep_point_config("M", m, config, N0), trace_V, N0).values()) for m in grid)
    else:
        condition = True

    report = PropositionReport(
        proposition_id=PROPOSITION_IDS[variable],
        sweep_variable=variable,
        sweep_points=list(grid),
        eta_values=eta_values,
        derivative_values=derivatives,
        condition_holds=bool(condition),
        verdict=_verdict(variable, eta_values, rate_values),
        sum_rate_values=rate_values,
        iteration_values=iteration_values,
        rows=rows,
    )
    logger.info(f"{variable} 스윕 완료: 판정 {report.verdict}, η = {[f'{v:.3e}' for v in eta_values]}")
    return report


if __name__ == "__main__":
    from config import get_config

    system = get_config().system
    print("📐 해석식 점검")
    for S in (0.01, 0.1, 1.0, 10.0):
        print(f"  Σp = {S:6.2f} W: ∂η/∂Σp = {prop1_derivative(S, system):+.4e}")
    for L in (1, 4, 16, 64, 256):
        g, condition = prop3_g(L, system)
        print(f"  L = {L:4d}: g(L) = {g:+.4e} (조건 {condition})")
