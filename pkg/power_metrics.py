"""전송률·전력 소비·에너지 효율 계산 모듈"""

import logging
from dataclasses import dataclass, asdict
from typing import Any, Dict, List, Tuple

import numpy as np

from config import SystemConfig


# 로깅 설정
logger = logging.getLogger(__name__)


class BlockMismatch(ValueError):
    """V_D 행 수가 송신 안테나 블록 구성과 맞지 않음"""


@dataclass
class RateReport:
    """사용자별 전송률 (bits/s/Hz)"""
    per_user: np.ndarray
    sum: float
    sinr_per_user: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_user": self.per_user.tolist(),
            "sum": self.sum,
            "sinr_per_user": self.sinr_per_user.tolist(),
        }


@dataclass
class PowerBreakdown:
    """전력 소비 내역 (W)"""
    transmit_per_bs: np.ndarray
    amplifier_weighted: float
    static_bs: float
    static_ris: float
    static_users: float
    static_das: float
    total: float

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["transmit_per_bs"] = self.transmit_per_bs.tolist()
        return data


def antenna_blocks(config: SystemConfig) -> List[np.ndarray]:
    """
    V_D 행 분할: BS마다 N_a개 행, 그 뒤 DAS 사이트마다 사이트 안테나 수만큼

    Returns:
        블록별 행 인덱스 배열 목록
    """
    blocks = []
    start = 0
    for _ in range(config.num_bs):
        blocks.append(np.arange(start, start + config.antennas_per_bs))
        start += config.antennas_per_bs
    for _ in range(config.das_sites):
        blocks.append(np.arange(start, start + config.das_antennas_per_site))
        start += config.das_antennas_per_site
    return blocks


def power_constraints(config: SystemConfig) -> List[Tuple[np.ndarray, float]]:
    """
    송신 전력 제약 (행 인덱스, 예산 W) 목록

    BS별 예산 P_T, 또는 joint_power_budget이면 전체 안테나에 N·P_T 하나
    """
    if config.joint_power_budget:
        return [(np.arange(config.num_antennas), config.num_bs * config.pt_w)]
    return [(rows, config.pt_w) for rows in antenna_blocks(config)]


def static_power(config: SystemConfig) -> float:
    """V_D와 무관한 정적 전력 𝒫_s (W)"""
    return config.static_power_w


def block_powers(V_D: np.ndarray, config: SystemConfig) -> np.ndarray:
    """
    블록별 송신 전력 Tr(V_{D,n}^H·V_{D,n})

    Raises:
        BlockMismatch: V_D 행 수 ≠ 송신 안테나 수
    """
    V_D = np.atleast_2d(V_D)
    if V_D.shape[0] != config.num_antennas:
        raise BlockMismatch(f"V_D 행 수 {V_D.shape[0]} ≠ 송신 안테나 수 {config.num_antennas}")
    row_power = np.sum(np.abs(V_D) ** 2, axis=1)
    return np.array([float(np.sum(row_power[rows])) for rows in antenna_blocks(config)])


def user_rates(H: np.ndarray, V_D: np.ndarray, noise_power: float) -> RateReport:
    """
    SINR_k = |H_k V_{D,k}|² / (Σ_{k'≠k} |H_k V_{D,k'}|² + σ²), R_k = log2(1 + SINR_k)

    Args:
        H: K×T 등가 채널
        V_D: T×K 디지털 빔포머
        noise_power: 잡음 전력 σ² (W)
    """
    H = np.atleast_2d(H)
    V_D = np.atleast_2d(V_D)
    if H.shape[1] != V_D.shape[0] or H.shape[0] != V_D.shape[1]:
        raise BlockMismatch(f"차원 불일치: H {H.shape}, V_D {V_D.shape}")

    received = np.abs(H @ V_D) ** 2
    signal = np.diag(received).copy()
    interference = received.sum(axis=1) - signal
    sinr = signal / (interference + noise_power)
    per_user = np.log2(1.0 + sinr)
    return RateReport(per_user=per_user, sum=float(per_user.sum()), sinr_per_user=sinr)


def total_power(config: SystemConfig, V_D: np.ndarray) -> PowerBreakdown:
    """
    전체 전력 소비 𝒫 = Σ ω·p_t^{(n)} + N·P_B + M·L·P_R(b) + K·P_U (+ DAS 안테나 정적 전력)

    Raises:
        BlockMismatch: V_D 행 수가 블록 구성과 다른 경우
    """
    transmit = block_powers(V_D, config)
    amplifier_weighted = config.amplifier_factor * float(transmit.sum())
    static_bs = config.num_bs * config.bs_static_w
    static_ris = config.num_elements * config.ris_static_w if config.num_elements else 0.0
    static_users = config.num_users * config.user_static_w
    static_das = config.num_das_antennas * config.das_antenna_static_w
    total = amplifier_weighted + static_bs + static_ris + static_users + static_das
    return PowerBreakdown(
        transmit_per_bs=transmit,
        amplifier_weighted=amplifier_weighted,
        static_bs=static_bs,
        static_ris=static_ris,
        static_users=static_users,
        static_das=static_das,
        total=total,
    )


def energy_efficiency(rr: RateReport, pb: PowerBreakdown, bandwidth: float) -> float:
    """
    에너지 효율 η = B·R / 𝒫 (bits/J)

    Raises:
        ValueError: 전체 전력이 0 이하인 경우
    """
    if not pb.total > 0:
        raise ValueError(f"전체 전력은 0보다 커야 합니다: {pb.total}")
    return bandwidth * rr.sum / pb.total
