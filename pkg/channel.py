"""채널 생성 모듈
배치(topology), 경로 손실, 라이시안 채널 생성, 등가 채널 합성, 채널 경화 측정

난수는 하나의 마스터 시드에서 (링크 종류, 개체 인덱스) 별 하위 스트림으로 분기합니다.
사용자를 추가해도 BS–RIS 채널은 바뀌지 않습니다."""

import math
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import SystemConfig
from utils import read_json_file, write_json_file


# 로깅 설정
logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0

# 위치 난수 스트림 라벨
_LABEL_BS = 1
_LABEL_SITE = 2
_LABEL_USER = 3

# 링크 난수 스트림 라벨 (송신 개체 종류별)
_LINK_DIRECT_BS = 11
_LINK_DIRECT_DAS = 12
_LINK_BS_RIS = 21
_LINK_DAS_RIS = 22
_LINK_RIS_USER = 31


@dataclass
class Topology:
    """노드 2차원 좌표 (m)"""
    bs_positions: np.ndarray      # N×2
    ris_positions: np.ndarray     # M×2
    user_positions: np.ndarray    # K×2
    das_positions: Optional[np.ndarray] = None  # DAS 사이트 × 2 (DAS 벤치마크에서만)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "bs_positions": self.bs_positions.tolist(),
            "ris_positions": self.ris_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
        }
        if self.das_positions is not None:
            data["das_positions"] = self.das_positions.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Topology":
        das = data.get("das_positions")
        return cls(
            bs_positions=np.asarray(data["bs_positions"], dtype=float).reshape(-1, 2),
            ris_positions=np.asarray(data["ris_positions"], dtype=float).reshape(-1, 2),
            user_positions=np.asarray(data["user_positions"], dtype=float).reshape(-1, 2),
            das_positions=None if das is None else np.asarray(das, dtype=float).reshape(-1, 2),
        )


@dataclass
class ChannelSet:
    """채널 행렬 묶음

    H_D: K×T 직접 링크, H_BR: (M·L)×T BS→RIS, H_RU_h: K×(M·L) (RIS→사용자 채널의 H_RU^H)
    """
    H_D: np.ndarray
    H_BR: np.ndarray
    H_RU_h: np.ndarray
    topology: Optional[Topology] = None

    @property
    def num_users(self) -> int:
        return self.H_D.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.H_D.shape[1]

    @property
    def num_elements(self) -> int:
        return self.H_BR.shape[0]

    def validate(self):
        """차원 일관성과 유한성 확인"""
        K, T = self.H_D.shape
        ML = self.H_BR.shape[0]
        if self.H_BR.shape != (ML, T) or self.H_RU_h.shape != (K, ML):
            raise ValueError(
                f"채널 차원 불일치: H_D {self.H_D.shape}, H_BR {self.H_BR.shape}, H_RU_h {self.H_RU_h.shape}"
            )
        for name in ("H_D", "H_BR", "H_RU_h"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name}에 NaN/Inf가 있습니다")


def _stream(seed: int, *key: int) -> np.random.Generator:
    """마스터 시드와 라벨 튜플로 독립 난수 스트림 생성"""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def _uniform_in_disc(rng: np.random.Generator, radius: float) -> np.ndarray:
    r = radius * math.sqrt(rng.random())
    phi = 2.0 * math.pi * rng.random()
    return np.array([r * math.cos(phi), r * math.sin(phi)])


def generate_topology(config: SystemConfig, seed: Optional[int] = None) -> Topology:
    """
    BS·RIS는 반경 bs_radius 원 안에, 사용자는 반경 user_radius 원 안에 균일 배치

    Args:
        config: 시스템 설정
        seed: 시드 (None이면 config.seed)

    Returns:
        Topology (같은 시드면 항상 같은 좌표)
    """
    seed = config.seed if seed is None else seed

    def site(index: int) -> np.ndarray:
        return _uniform_in_disc(_stream(seed, _LABEL_SITE, index), config.bs_radius_m)

    # 기존 BS는 BS 라벨, RIS 자리로 옮겨진 BS는 사이트 라벨을 사용
    regular_bs = config.num_bs - config.bs_at_ris_sites
    bs_positions = [
        _uniform_in_disc(_stream(seed, _LABEL_BS, n), config.bs_radius_m) for n in range(regular_bs)
    ]
    bs_positions += [site(m) for m in range(config.bs_at_ris_sites)]

    ris_positions = [site(m) for m in range(config.num_ris)]
    das_positions = [site(s) for s in range(config.das_sites)] if config.das_sites else None

    user_positions = [
        _uniform_in_disc(_stream(seed, _LABEL_USER, k), config.user_radius_m) for k in range(config.num_users)
    ]

    return Topology(
        bs_positions=np.array(bs_positions, dtype=float).reshape(-1, 2),
        ris_positions=np.array(ris_positions, dtype=float).reshape(-1, 2),
        user_positions=np.array(user_positions, dtype=float).reshape(-1, 2),
        das_positions=None if das_positions is None else np.array(das_positions, dtype=float).reshape(-1, 2),
    )


def path_loss_db(distance: float, carrier_freq: float) -> float:
    """3GPP UMa LOS 경로 손실 (dB), 거리는 1 m 미만이면 1 m로 고정"""
    d = np.maximum(distance, 1.0)
    return 28.0 + 22.0 * np.log10(d) + 20.0 * np.log10(carrier_freq / 1e9)


def path_loss_linear(distance: float, carrier_freq: float) -> float:
    """
    선형 전력 이득 10^(−PL_dB/10)

    Args:
        distance: 거리 (m), 배열도 허용
        carrier_freq: 반송파 주파수 (Hz)
    """
    return 10.0 ** (-path_loss_db(distance, carrier_freq) / 10.0)


def bs_antenna_positions(center: np.ndarray, num_antennas: int, spacing: float) -> np.ndarray:
    """BS 중심 기준 x축 균일 선형 배열"""
    offsets = (np.arange(num_antennas) - (num_antennas - 1) / 2.0) * spacing
    positions = np.tile(np.asarray(center, dtype=float), (num_antennas, 1))
    positions[:, 0] += offsets
    return positions


def ris_element_positions(center: np.ndarray, num_elements: int, pitch: float) -> np.ndarray:
    """√L×√L 정사각 격자 (L이 제곱수가 아니면 한 줄)"""
    side = math.isqrt(num_elements)
    if side * side == num_elements:
        rows, cols = side, side
    else:
        rows, cols = 1, num_elements
    row_idx, col_idx = np.divmod(np.arange(num_elements), cols)
    positions = np.tile(np.asarray(center, dtype=float), (num_elements, 1))
    positions[:, 0] += (col_idx - (cols - 1) / 2.0) * pitch
    positions[:, 1] += (row_idx - (rows - 1) / 2.0) * pitch
    return positions


def rician_block(
    rx: np.ndarray,
    tx: np.ndarray,
    config: SystemConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    수신 위치 rx(R×2) × 송신 위치 tx(S×2) 라이시안 채널 블록

    h = √g·(√(κ/(κ+1))·e^{−j2πd/λ} + √(1/(κ+1))·w), w ~ CN(0, 1)
    """
    distances = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)
    gain = path_loss_linear(distances, config.carrier_freq_hz)
    wavelength = SPEED_OF_LIGHT / config.carrier_freq_hz

    kappa = config.rician_factor
    if math.isinf(kappa):
        los_weight, nlos_weight = 1.0, 0.0
    else:
        los_weight = math.sqrt(kappa / (kappa + 1.0))
        nlos_weight = math.sqrt(1.0 / (kappa + 1.0))

    normals = rng.standard_normal(distances.shape + (2,))
    scatter = (normals[..., 0] + 1j * normals[..., 1]) / math.sqrt(2.0)
    los = np.exp(-2j * math.pi * distances / wavelength)
    return np.sqrt(gain) * (los_weight * los + nlos_weight * scatter)


def _transmitters(topology: Topology, config: SystemConfig) -> List[Tuple[int, int, np.ndarray]]:
    """(링크 라벨 오프셋, 개체 인덱스, 안테나 좌표) 목록. BS 배열 뒤에 DAS 사이트"""
    entities = [
        (0, n, bs_antenna_positions(pos, config.antennas_per_bs, config.bs_antenna_spacing_m))
        for n, pos in enumerate(topology.bs_positions)
    ]
    if topology.das_positions is not None:
        entities += [
            (1, s, ris_element_positions(pos, config.das_antennas_per_site, config.ris_element_size_m))
            for s, pos in enumerate(topology.das_positions)
        ]
    return entities


def generate_channels(topology: Topology, config: SystemConfig, seed: Optional[int] = None) -> ChannelSet:
    """
    배치에 따른 H_D, H_BR, H_RU_h 생성

    Args:
        topology: 노드 배치
        config: 시스템 설정
        seed: 시드 (None이면 config.seed)

    Returns:
        ChannelSet (같은 시드면 비트 단위로 동일)
    """
    seed = config.seed if seed is None else seed
    transmitters = _transmitters(topology, config)
    ris_elements = [
        ris_element_positions(pos, config.elements_per_ris, config.ris_element_size_m)
        for pos in topology.ris_positions
    ]
    users = topology.user_positions

    direct_codes = (_LINK_DIRECT_BS, _LINK_DIRECT_DAS)
    ris_codes = (_LINK_BS_RIS, _LINK_DAS_RIS)

    H_D = np.hstack([
        np.vstack([
            rician_block(users[k:k + 1], tx, config, _stream(seed, direct_codes[kind], index, k))
            for k in range(len(users))
        ])
        for kind, index, tx in transmitters
    ]) if len(users) else np.zeros((0, config.num_antennas), dtype=complex)

    T = H_D.shape[1]
    if ris_elements:
        H_BR = np.vstack([
            np.hstack([
                rician_block(elements, tx, config, _stream(seed, ris_codes[kind], index, m))
                for kind, index, tx in transmitters
            ])
            for m, elements in enumerate(ris_elements)
        ])
        H_RU_h = np.hstack([
            np.vstack([
                rician_block(users[k:k + 1], elements, config, _stream(seed, _LINK_RIS_USER, m, k))
                for k in range(len(users))
            ])
            for m, elements in enumerate(ris_elements)
        ])
    else:
        H_BR = np.zeros((0, T), dtype=complex)
        H_RU_h = np.zeros((len(users), 0), dtype=complex)

    channels = ChannelSet(H_D=H_D, H_BR=H_BR, H_RU_h=H_RU_h, topology=topology)
    channels.validate()
    logger.debug(f"채널 생성: K={H_D.shape[0]}, T={T}, ML={H_BR.shape[0]}, seed={seed}")
    return channels


def generate_channel_set(config: SystemConfig, seed: Optional[int] = None) -> ChannelSet:
    """배치와 채널을 한 번에 생성"""
    seed = config.seed if seed is None else seed
    return generate_channels(generate_topology(config, seed), config, seed)


def reflection_coefficients(q: Any) -> np.ndarray:
    """PhaseConfig(또는 위상 벡터)를 단위 크기 반사 계수 벡터로 변환"""
    if hasattr(q, "coefficients"):
        return q.coefficients()
    return np.exp(1j * np.asarray(q, dtype=float))


def reflected_channel(ch: ChannelSet, q: Any) -> np.ndarray:
    """반사 경로만의 채널 H_RU^H·Q·H_BR"""
    return (ch.H_RU_h * reflection_coefficients(q)[None, :]) @ ch.H_BR


def effective_channel(ch: ChannelSet, q: Any) -> np.ndarray:
    """
    등가 채널 H = H_D + H_RU^H·Q·H_BR

    Args:
        ch: 채널 묶음
        q: PhaseConfig 또는 위상 벡터 (rad)
    """
    if ch.num_elements == 0:
        return ch.H_D.copy()
    return ch.H_D + reflected_channel(ch, q)


def hardening_metric(ch: ChannelSet) -> float:
    """
    정규화 그람 행렬 (1/ML)·H_BR^H·H_BR의 비대각 원소 크기 RMS

    RIS 소자 수가 늘면 (ML)^{-1/2}로 감소합니다 (i.i.d. 페이딩).
    """
    ML, T = ch.H_BR.shape
    if ML < 1:
        raise ValueError("RIS 소자가 없으면 채널 경화를 측정할 수 없습니다")
    if T < 2:
        return 0.0
    gram = ch.H_BR.conj().T @ ch.H_BR / ML
    off_diagonal = np.abs(gram[~np.eye(T, dtype=bool)])
    return float(np.sqrt(np.mean(off_diagonal ** 2)))


def _complex_to_list(matrix: np.ndarray) -> List[List[List[float]]]:
    return np.stack([matrix.real, matrix.imag], axis=-1).tolist()


def _complex_from_list(data: Any, shape_hint: Tuple[int, int]) -> np.ndarray:
    array = np.asarray(data, dtype=float)
    if array.size == 0:
        return np.zeros(shape_hint, dtype=complex)
    return array[..., 0] + 1j * array[..., 1]


def channel_to_dict(ch: ChannelSet) -> Dict[str, Any]:
    """JSON 직렬화용 딕셔너리 (복소수는 [re, im])"""
    data: Dict[str, Any] = {
        "shape": {"K": ch.num_users, "T": ch.num_antennas, "ML": ch.num_elements},
        "H_D": _complex_to_list(ch.H_D),
        "H_BR": _complex_to_list(ch.H_BR),
        "H_RU_h": _complex_to_list(ch.H_RU_h),
    }
    if ch.topology is not None:
        data["topology"] = ch.topology.to_dict()
    return data


def channel_from_dict(data: Dict[str, Any]) -> ChannelSet:
    """channel_to_dict의 역변환"""
    shape = data["shape"]
    K, T, ML = shape["K"], shape["T"], shape["ML"]
    topology = Topology.from_dict(data["topology"]) if "topology" in data else None
    ch = ChannelSet(
        H_D=_complex_from_list(data["H_D"], (K, T)),
        H_BR=_complex_from_list(data["H_BR"], (ML, T)),
        H_RU_h=_complex_from_list(data["H_RU_h"], (K, ML)),
        topology=topology,
    )
    ch.validate()
    return ch


def save_channel_set(ch: ChannelSet, file_path: str):
    """채널 묶음을 JSON 파일로 저장 (회귀 테스트 픽스처)"""
    write_json_file(file_path, channel_to_dict(ch))


def load_channel_set(file_path: str) -> ChannelSet:
    """JSON 파일에서 채널 묶음 로드"""
    data = read_json_file(file_path)
    if not data:
        raise ValueError(f"채널 파일을 읽을 수 없습니다: {file_path}")
    return channel_from_dict(data)


if __name__ == "__main__":
    print("=== 채널 모듈 테스트 ===\n")
    config = SystemConfig()
    ch = generate_channel_set(config, seed=1)
    print(f"H_D {ch.H_D.shape}, H_BR {ch.H_BR.shape}, H_RU_h {ch.H_RU_h.shape}")
    print(f"경로 손실 (100 m, 5.9 GHz): {path_loss_db(100.0, 5.9e9):.2f} dB")
    print(f"채널 경화 지표: {hardening_metric(ch):.3e}")
