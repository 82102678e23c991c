"""에너지 효율 최대화 (EEM) 외부 루프
디지털 빔포밍(전력 할당)과 아날로그 빔포밍(RIS 위상)을 번갈아 수행합니다.

각 반복은 (1) 현재 위상에서 Dinkelbach 전력 할당 (직전 p로 시작),
(2) p 고정 아날로그 좌표 하강, (3) η 재계산 순서입니다.
두 단계 모두 η를 감소시키지 않으므로 η 기록은 단조 증가합니다."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from config import SystemConfig
from channel import ChannelSet, effective_channel
from analog_bf import PhaseConfig, analog_sweep, phase_grid
from digital_bf import BeamformerState, dinkelbach_power_allocation, zf_beamformer
from power_metrics import (
    PowerBreakdown, RateReport, energy_efficiency, power_constraints, total_power, user_rates,
)


# 로깅 설정
logger = logging.getLogger(__name__)

PHASE_STREAM = 4
MONOTONE_SLACK = 1e-9


@dataclass
class EEReport:
    """EEM 실행 결과"""
    eta_trace: List[float]
    final_rates: RateReport
    final_power: PowerBreakdown
    final_eta: float
    iterations: int
    converged: bool
    phase_state: PhaseConfig
    beam_state: BeamformerState
    initial_eta: Optional[float] = None
    analog_trace: List[float] = field(default_factory=list)

    @property
    def monotone_violations(self) -> int:
        """η 기록에서 1e-9·η 이상 감소한 횟수"""
        trace = ([self.initial_eta] if self.initial_eta is not None else []) + list(self.eta_trace)
        return sum(
            1 for before, after in zip(trace, trace[1:])
            if after < before - MONOTONE_SLACK * abs(before)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta_trace": list(self.eta_trace),
            "initial_eta": self.initial_eta,
            "final_eta": self.final_eta,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_rates": self.final_rates.to_dict(),
            "final_power": self.final_power.to_dict(),
            "phase_state": self.phase_state.to_dict(),
            "beam_state": self.beam_state.to_dict(),
        }


def init_random_phase(config: SystemConfig, seed: int) -> PhaseConfig:
    """
    소자별 b비트 격자 위의 균등 난수 위상 (연속 위상이면 [0, 2π) 균등)

    Args:
        config: 시스템 설정 (M·L, b)
        seed: 난수 시드
    """
    rng = np.random.default_rng([seed, PHASE_STREAM])
    if config.is_continuous:
        return PhaseConfig(theta=rng.uniform(0.0, 2.0 * np.pi, config.num_elements), bits=None)
    indices = rng.integers(0, 2 ** config.phase_bits, size=config.num_elements)
    return PhaseConfig(theta=phase_grid(config.phase_bits)[indices], bits=config.phase_bits)


def evaluate_state(H: np.ndarray, p: np.ndarray, config: SystemConfig):
    """
    고정 (H, p)에서 ZF 빔포머와 전송률/전력/η 계산

    Returns:
        (BeamformerState, RateReport, PowerBreakdown, η)
    """
    state = zf_beamformer(H, p)
    rates = user_rates(H, state.V_D, config.noise_power_w)
    power = total_power(config, state.V_D)
    return state, rates, power, energy_efficiency(rates, power, config.bandwidth_hz)


def _feasible_start(H: np.ndarray, p_init: np.ndarray, config: SystemConfig) -> np.ndarray:
    """시작 전력을 현재 채널의 예산 안으로 축소"""
    p = np.maximum(np.asarray(p_init, dtype=float).reshape(-1), 0.0)
    V_D = zf_beamformer(H, p).V_D
    row_power = np.sum(np.abs(V_D) ** 2, axis=1)
    load = max(float(np.sum(row_power[rows])) / budget for rows, budget in power_constraints(config))
    return p / load if load > 1.0 else p


def _report(trace, H, state, config, q, iterations, converged, initial_eta=None, analog_trace=None) -> EEReport:
    final_state, rates, power, eta = evaluate_state(H, state.power_alloc, config)
    final_state.y, final_state.ratio = state.y, state.ratio
    final_state.iterations, final_state.ratio_trace = state.iterations, state.ratio_trace
    return EEReport(
        eta_trace=trace,
        final_rates=rates,
        final_power=power,
        final_eta=eta,
        iterations=iterations,
        converged=converged,
        phase_state=q,
        beam_state=final_state,
        initial_eta=initial_eta,
        analog_trace=analog_trace or [],
    )


def run_digital_only(config: SystemConfig, ch: ChannelSet, p_init: Optional[np.ndarray] = None) -> EEReport:
    """
    RIS 없는 구성의 단일 디지털 빔포밍 (No-RIS, 기존 cell-free, DAS 벤치마크)

    Raises:
        RankDeficient: H_D가 행 풀랭크가 아닌 경우
    """
    H = ch.H_D
    state = dinkelbach_power_allocation(H, config, p_init=p_init)
    q = PhaseConfig(theta=np.zeros(0), bits=config.phase_bits)
    report = _report([], H, state, config, q, iterations=1, converged=True)
    report.eta_trace.append(report.final_eta)
    return report


def run_eem(
    config: SystemConfig,
    ch: ChannelSet,
    init_phase: PhaseConfig,
    p_init: Optional[np.ndarray] = None,
) -> EEReport:
    """
    EEM 알고리즘: 디지털/아날로그 단계를 η의 상대 변화가 ε 이하가 될 때까지 반복

    Args:
        config: 시스템 설정
        ch: 채널 묶음
        init_phase: 시작 위상 (b비트 격자 위)
        p_init: 시작 전력 (주어지면 초기 η를 계산하여 첫 반복부터 수렴 판정)

    Returns:
        EEReport (eta_trace는 반복별 η)

    Raises:
        RankDeficient: 등가 채널이 행 풀랭크가 아닌 경우 (호출자가 채널 재생성)
        ValueError: 위상 상태와 설정의 크기/비트가 다른 경우
    """
    if ch.num_elements == 0:
        return run_digital_only(config, ch, p_init)
    if init_phase.size != ch.num_elements or init_phase.bits != config.phase_bits:
        raise ValueError(
            f"시작 위상 ({init_phase.size}개, b={init_phase.bits})이 "
            f"설정 ({ch.num_elements}개, b={config.phase_bits})과 맞지 않습니다"
        )

    q = init_phase.copy()
    H = effective_channel(ch, q)
    p = None
    eta_prev = None
    initial_eta = None
    if p_init is not None:
        p = _feasible_start(H, p_init, config)
        initial_eta = eta_prev = evaluate_state(H, p, config)[3]

    trace: List[float] = []
    analog_trace: List[float] = []
    converged = False
    state = None
    iterations = 0

    for iterations in range(1, config.solver.max_outer_iters + 1):
        state = dinkelbach_power_allocation(H, config, p_init=p)
        p = state.power_alloc

        q = analog_sweep(ch, p, q, config, history=analog_trace)
        H = effective_channel(ch, q)

        eta = evaluate_state(H, p, config)[3]
        trace.append(eta)
        logger.debug(f"EEM {iterations}회: η = {eta:.6e} bits/J")

        if eta_prev is not None and abs(eta - eta_prev) <= config.outer_threshold * abs(eta):
            converged = True
            break
        eta_prev = eta
    else:
        logger.warning(f"EEM이 {config.solver.max_outer_iters}회 안에 수렴하지 않았습니다")

    report = _report(trace, H, state, config, q, iterations, converged, initial_eta, analog_trace)
    if report.monotone_violations:
        logger.warning(f"η 기록이 {report.monotone_violations}회 감소했습니다")
    logger.info(f"EEM 완료: {iterations}회, η = {report.final_eta:.6e} bits/J, 수렴 {converged}")
    return report


if __name__ == "__main__":
    from config import get_config
    from channel import generate_channel_set

    logging.basicConfig(level=logging.INFO)
    system = get_config().system.with_updates(num_ris=1, elements_per_ris=16)
    channels = generate_channel_set(system, seed=0)
    result = run_eem(system, channels, init_random_phase(system, seed=0))

    print("⚡ EEM 실행 결과")
    print(f"  반복 횟수: {result.iterations} (수렴: {result.converged})")
    print(f"  η 기록: {[f'{value:.4e}' for value in result.eta_trace]}")
    print(f"  합 전송률: {result.final_rates.sum:.3f} bits/s/Hz")
    print(f"  전체 전력: {result.final_power.total:.3f} W")
