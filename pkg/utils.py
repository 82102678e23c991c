"""유틸리티 함수 모음
공통으로 사용되는 헬퍼 함수들 (파일 입출력, 단위 변환, 시드 파싱, 시간 측정)"""

import os
import json
import math
import time
import hashlib
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np


# 로거 설정
logger = logging.getLogger(__name__)


# 파일 유틸리티
def ensure_directory(path: str) -> Path:
    """
    디렉토리가 존재하지 않으면 생성
    """
    dir_path = Path(path)
    dir_path.mkdir(parents=True, exist_ok=True)
    return dir_path


def _json_default(obj: Any) -> Any:
    """numpy 타입을 JSON 직렬화 가능한 값으로 변환"""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"JSON 직렬화 불가 타입: {type(obj).__name__}")


def read_json_file(file_path: str) -> Dict[str, Any]:
    """
    JSON 파일 읽기

    Args:
        file_path: 파일 경로

    Returns:
        파싱된 딕셔너리 (파일이 없거나 손상된 경우 빈 딕셔너리)
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        logger.warning(f"파일을 찾을 수 없음: {file_path}")
        return {}
    except json.JSONDecodeError as e:
        logger.error(f"JSON 파싱 오류: {e}")
        return {}


def write_json_file(file_path: str, data: Any, indent: int = 2):
    """
    JSON 파일 쓰기 (numpy 배열/스칼라 자동 변환)
    """
    parent = Path(file_path).parent
    if str(parent):
        ensure_directory(str(parent))
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=indent, default=_json_default)
    logger.info(f"파일 저장 완료: {file_path}")


def generate_hash(data: Any) -> str:
    """
    정렬된 키의 JSON 표현에 대한 SHA-256 해시 생성

    키 순서와 무관하게 같은 내용이면 같은 해시를 반환합니다.
    """
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def get_timestamp() -> str:
    """현재 시각 문자열 (파일명용)"""
    return datetime.now().strftime("%Y%m%d_%H%M%S")


# 환경변수 유틸리티
def get_env_variable(key: str, default: Optional[str] = None, required: bool = False) -> Optional[str]:
    """
    환경변수 조회

    Args:
        key: 환경변수 이름
        default: 기본값
        required: 필수 여부

    Raises:
        ValueError: 필수 환경변수가 없는 경우
    """
    value = os.getenv(key, default)
    if required and value is None:
        raise ValueError(f"필수 환경변수가 설정되지 않았습니다: {key}")
    return value


def load_env_file(env_path: str = ".env"):
    """.env 파일 로드"""
    from dotenv import load_dotenv

    if Path(env_path).exists():
        load_dotenv(env_path)
        logger.debug(f".env 파일 로드됨: {env_path}")


def get_thread_limit(default: Optional[int] = None) -> int:
    """
    EEM_THREADS 환경변수로 병렬 작업 수 상한 결정

    값이 없거나 잘못된 경우 default (없으면 CPU 수) 사용
    """
    fallback = default or os.cpu_count() or 1
    raw = get_env_variable("EEM_THREADS")
    if raw is None:
        return fallback
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"EEM_THREADS 값이 정수가 아님: {raw!r}, {fallback} 사용")
        return fallback
    return max(1, value)


# 단위 변환
def db_to_linear(value_db: float) -> float:
    """dB → 선형 비율"""
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """선형 비율 → dB"""
    return 10.0 * math.log10(value)


def dbm_to_watts(value_dbm: float) -> float:
    """dBm → W"""
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def watts_to_dbm(value_w: float) -> float:
    """W → dBm"""
    return 10.0 * math.log10(value_w) + 30.0


def dbw_to_watts(value_dbw: float) -> float:
    """dBW → W"""
    return 10.0 ** (value_dbw / 10.0)


def watts_to_dbw(value_w: float) -> float:
    """W → dBW"""
    return 10.0 * math.log10(value_w)


# 인자 파싱
def parse_seed_range(text: str) -> List[int]:
    """
    시드 목록 문자열 파싱

    "0..49" (양 끝 포함), "1,4,7", "3" 형식과 그 조합("0..2,10")을 지원합니다.

    Raises:
        ValueError: 형식이 잘못된 경우
    """
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            start_str, end_str = part.split("..", 1)
            start, end = int(start_str), int(end_str)
            if end < start:
                raise ValueError(f"잘못된 시드 범위: {part}")
            seeds.extend(range(start, end + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"시드 목록이 비어 있습니다: {text!r}")
    return seeds


def parse_float_list(text: str) -> List[float]:
    """쉼표로 구분된 실수 목록 파싱"""
    return [float(item) for item in text.split(",") if item.strip()]


class Timer:
    """실행 시간 측정 컨텍스트 매니저"""

    def __init__(self, name: str = "Operation"):
        self.name = name
        self.start_time: Optional[float] = None
        self.end_time: Optional[float] = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end_time = time.perf_counter()
        logger.debug(f"{self.name} 실행 시간: {self.get_elapsed_time():.3f}초")

    def get_elapsed_time(self) -> float:
        """경과 시간 (초)"""
        if self.start_time is None:
            return 0.0
        end = self.end_time if self.end_time is not None else time.perf_counter()
        return end - self.start_time
