"""환경 설정 모듈
시스템 파라미터, 솔버, 하네스, 로깅 설정값 관리

설정 파일은 단위가 키 이름에 드러나는 JSON 형식입니다 (`pt_dbm`, `noise_dbm`,
`bandwidth_hz`...). dB 단위 값은 로드 시점에 한 번만 선형 W로 변환되며,
내부 계산은 모두 선형 단위를 사용합니다."""

import json
import logging
import logging.handlers
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple
from dataclasses import dataclass, field, asdict, replace

from utils import (
    write_json_file, load_env_file, get_env_variable, generate_hash,
    dbm_to_watts, watts_to_dbm, dbw_to_watts, watts_to_dbw,
)


# 로깅 설정
logger = logging.getLogger(__name__)

CONTINUOUS = "continuous"
PHASE_BIT_CHOICES = (1, 2, 3)


class ConfigError(ValueError):
    """설정 파일 또는 설정값 오류 (가능하면 `line N: ...` 진단 포함)"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _default_ris_static() -> Dict[str, float]:
    return {
        "1": dbm_to_watts(5.0),
        "2": dbm_to_watts(10.0),
        "3": dbm_to_watts(15.0),
        CONTINUOUS: dbm_to_watts(25.0),
    }


@dataclass
class SolverConfig:
    """솔버 반복/허용오차 설정"""
    max_outer_iters: int = 50
    max_dinkelbach_iters: int = 100
    max_inner_iters: int = 10000
    inner_tolerance: float = 1e-7
    max_passes: int = 20
    analog_method: str = "enumerate"  # "enumerate", "closed_form"
    enforce_power_budget: bool = True


@dataclass
class SystemConfig:
    """시스템 파라미터 (모든 전력은 선형 W)"""
    num_bs: int = 4
    antennas_per_bs: int = 8
    num_users: int = 8
    num_ris: int = 3
    elements_per_ris: int = 64
    phase_bits: Optional[int] = 3  # None = 연속 위상
    bandwidth_hz: float = 10e6
    noise_power_w: float = field(default_factory=lambda: dbm_to_watts(-90.0))
    rician_factor: float = 4.0
    carrier_freq_hz: float = 5.9e9
    bs_radius_m: float = 150.0
    user_radius_m: float = 20.0
    bs_antenna_spacing_m: float = 1.0
    ris_element_size_m: float = 0.02
    pt_w: float = field(default_factory=lambda: dbm_to_watts(30.0))
    amplifier_factor: float = 1.0
    bs_static_w: float = field(default_factory=lambda: dbw_to_watts(10.0))
    ris_element_static_w: Dict[str, float] = field(default_factory=_default_ris_static)
    user_static_w: float = field(default_factory=lambda: dbm_to_watts(10.0))
    das_antenna_static_w: float = field(default_factory=lambda: dbm_to_watts(20.0))
    outer_threshold: float = 1e-3
    inner_threshold: float = 1e-3
    seed: int = 0

    # 벤치마크 구성 (기본값은 제안 방식)
    das_sites: int = 0
    das_antennas_per_site: int = 0
    bs_at_ris_sites: int = 0
    joint_power_budget: bool = False

    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def is_continuous(self) -> bool:
        return self.phase_bits is None

    @property
    def num_bs_antennas(self) -> int:
        return self.num_bs * self.antennas_per_bs

    @property
    def num_das_antennas(self) -> int:
        return self.das_sites * self.das_antennas_per_site

    @property
    def num_antennas(self) -> int:
        """송신 안테나 총 수 (BS 배열 + DAS 안테나)"""
        return self.num_bs_antennas + self.num_das_antennas

    @property
    def num_elements(self) -> int:
        """RIS 소자 총 수 M·L"""
        return self.num_ris * self.elements_per_ris

    @property
    def phase_key(self) -> str:
        return CONTINUOUS if self.phase_bits is None else str(self.phase_bits)

    @property
    def ris_static_w(self) -> float:
        """현재 양자화 비트에 해당하는 RIS 소자당 정적 전력 P_R(b)"""
        try:
            return self.ris_element_static_w[self.phase_key]
        except KeyError:
            raise ConfigError(f"ris_element_static_dbm에 '{self.phase_key}' 항목이 없습니다")

    @property
    def static_power_w(self) -> float:
        """V_D와 무관한 정적 전력 합 𝒫_s"""
        return (
            self.num_bs * self.bs_static_w
            + (self.num_elements * self.ris_static_w if self.num_elements else 0.0)
            + self.num_das_antennas * self.das_antenna_static_w
            + self.num_users * self.user_static_w
        )

    def with_updates(self, **kwargs) -> "SystemConfig":
        """일부 필드만 바꾼 복사본 (solver, 정적 전력 표는 복제)"""
        kwargs.setdefault("solver", replace(self.solver))
        kwargs.setdefault("ris_element_static_w", dict(self.ris_element_static_w))
        return replace(self, **kwargs)

    def validation_errors(self) -> List[Tuple[str, str]]:
        """(필드명, 오류 메시지) 목록. 비어 있으면 유효"""
        errors: List[Tuple[str, str]] = []

        for name in ("num_bs", "antennas_per_bs", "num_users"):
            if getattr(self, name) < 1:
                errors.append((name, f"{name}은(는) 1 이상이어야 합니다"))
        for name in ("num_ris", "elements_per_ris", "das_sites", "das_antennas_per_site", "bs_at_ris_sites"):
            if getattr(self, name) < 0:
                errors.append((name, f"{name}은(는) 음수일 수 없습니다"))
        if self.num_ris > 0 and self.elements_per_ris < 1:
            errors.append(("elements_per_ris", "RIS가 있으면 elements_per_ris는 1 이상이어야 합니다"))
        if self.bs_at_ris_sites > self.num_bs:
            errors.append(("bs_at_ris_sites", "bs_at_ris_sites는 num_bs 이하여야 합니다"))

        if self.num_users > self.num_antennas:
            errors.append((
                "num_users",
                f"사용자 수 K={self.num_users}가 송신 안테나 수 {self.num_antennas}보다 큽니다",
            ))

        if self.phase_bits is not None and self.phase_bits not in PHASE_BIT_CHOICES:
            errors.append(("phase_bits", f"phase_bits는 1, 2, 3 또는 '{CONTINUOUS}'이어야 합니다"))
        elif self.phase_key not in self.ris_element_static_w:
            errors.append(("ris_element_static_dbm", f"'{self.phase_key}' 비트의 정적 전력이 없습니다"))

        positive = (
            "bandwidth_hz", "noise_power_w", "carrier_freq_hz", "bs_radius_m",
            "bs_antenna_spacing_m", "ris_element_size_m", "pt_w", "amplifier_factor",
            "bs_static_w", "user_static_w", "das_antenna_static_w",
            "outer_threshold", "inner_threshold",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                errors.append((name, f"{name}은(는) 0보다 커야 합니다"))
        if self.user_radius_m < 0:
            errors.append(("user_radius_m", "user_radius_m은 음수일 수 없습니다"))
        if self.rician_factor < 0:
            errors.append(("rician_factor", "rician_factor는 음수일 수 없습니다"))
        for key, value in self.ris_element_static_w.items():
            if not value > 0:
                errors.append(("ris_element_static_dbm", f"'{key}' 정적 전력은 0보다 커야 합니다"))

        if self.solver.analog_method not in ("enumerate", "closed_form"):
            errors.append(("analog_method", "analog_method는 'enumerate' 또는 'closed_form'이어야 합니다"))
        for name in ("max_outer_iters", "max_dinkelbach_iters", "max_inner_iters", "max_passes"):
            if getattr(self.solver, name) < 1:
                errors.append((name, f"{name}은(는) 1 이상이어야 합니다"))
        if not self.solver.inner_tolerance > 0:
            errors.append(("inner_tolerance", "inner_tolerance는 0보다 커야 합니다"))

        return errors

    def validate(self):
        """
        설정 유효성 검사

        Raises:
            ConfigError: 하나 이상의 값이 유효하지 않은 경우 (모든 오류 나열)
        """
        errors = self.validation_errors()
        if errors:
            raise ConfigError("; ".join(message for _, message in errors))

    def to_dict(self) -> Dict[str, Any]:
        """단위 접미사 JSON 스키마로 변환"""
        data = {json_key: to_json(getattr(self, attr)) for json_key, attr, _, to_json in _SYSTEM_FIELDS}
        return data

    def config_hash(self) -> str:
        """필드 순서와 무관한 설정 해시 (SHA-256)"""
        return generate_hash({"system": self.to_dict(), "solver": asdict(self.solver)})


def _phase_bits_from_json(value: Any) -> Optional[int]:
    if value == CONTINUOUS or value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"phase_bits는 정수 또는 '{CONTINUOUS}'이어야 합니다: {value!r}")
    return value


def _phase_bits_to_json(value: Optional[int]) -> Any:
    return CONTINUOUS if value is None else value


def _static_from_json(value: Any) -> Dict[str, float]:
    if not isinstance(value, dict):
        raise ValueError("ris_element_static_dbm은 객체여야 합니다")
    return {str(key): dbm_to_watts(float(dbm)) for key, dbm in value.items()}


def _static_to_json(value: Dict[str, float]) -> Dict[str, float]:
    return {key: round(watts_to_dbm(w), 10) for key, w in value.items()}


def _identity(value: Any) -> Any:
    return value


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ValueError(f"정수가 필요합니다: {value!r}")
    return int(value)


def _as_float(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"숫자가 필요합니다: {value!r}")
    return float(value)


def _as_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"true/false가 필요합니다: {value!r}")
    return value


def _round10(value: float) -> float:
    return round(value, 10)


# (JSON 키, 속성명, JSON→내부 변환, 내부→JSON 변환)
_SYSTEM_FIELDS: List[Tuple[str, str, Callable[[Any], Any], Callable[[Any], Any]]] = [
    ("num_bs", "num_bs", _as_int, _identity),
    ("antennas_per_bs", "antennas_per_bs", _as_int, _identity),
    ("num_users", "num_users", _as_int, _identity),
    ("num_ris", "num_ris", _as_int, _identity),
    ("elements_per_ris", "elements_per_ris", _as_int, _identity),
    ("phase_bits", "phase_bits", _phase_bits_from_json, _phase_bits_to_json),
    ("bandwidth_hz", "bandwidth_hz", _as_float, _identity),
    ("noise_dbm", "noise_power_w", lambda v: dbm_to_watts(_as_float(v)), lambda w: _round10(watts_to_dbm(w))),
    ("rician_factor", "rician_factor", _as_float, _identity),
    ("carrier_freq_hz", "carrier_freq_hz", _as_float, _identity),
    ("bs_radius_m", "bs_radius_m", _as_float, _identity),
    ("user_radius_m", "user_radius_m", _as_float, _identity),
    ("bs_antenna_spacing_m", "bs_antenna_spacing_m", _as_float, _identity),
    ("ris_element_size_m", "ris_element_size_m", _as_float, _identity),
    ("pt_dbm", "pt_w", lambda v: dbm_to_watts(_as_float(v)), lambda w: _round10(watts_to_dbm(w))),
    ("amplifier_factor", "amplifier_factor", _as_float, _identity),
    ("bs_static_dbw", "bs_static_w", lambda v: dbw_to_watts(_as_float(v)), lambda w: _round10(watts_to_dbw(w))),
    ("ris_element_static_dbm", "ris_element_static_w", _static_from_json, _static_to_json),
    ("user_static_dbm", "user_static_w", lambda v: dbm_to_watts(_as_float(v)), lambda w: _round10(watts_to_dbm(w))),
    ("das_antenna_static_dbm", "das_antenna_static_w", lambda v: dbm_to_watts(_as_float(v)), lambda w: _round10(watts_to_dbm(w))),
    ("outer_threshold", "outer_threshold", _as_float, _identity),
    ("inner_threshold", "inner_threshold", _as_float, _identity),
    ("seed", "seed", _as_int, _identity),
    ("das_sites", "das_sites", _as_int, _identity),
    ("das_antennas_per_site", "das_antennas_per_site", _as_int, _identity),
    ("bs_at_ris_sites", "bs_at_ris_sites", _as_int, _identity),
    ("joint_power_budget", "joint_power_budget", _as_bool, _identity),
]

_SYSTEM_ATTRS = {json_key: attr for json_key, attr, _, _ in _SYSTEM_FIELDS}


@dataclass
class HarnessConfig:
    """실험 하네스 설정"""
    threads: int = 1
    output_directory: str = "./results"
    show_progress: bool = True


@dataclass
class LoggingConfig:
    """로깅 설정"""
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file_path: Optional[str] = None
    max_bytes: int = 10485760  # 10MB
    backup_count: int = 5


@dataclass
class AppConfig:
    """애플리케이션 전체 설정"""
    system: SystemConfig = field(default_factory=SystemConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)


def _find_key_line(text: str, key: str) -> Optional[int]:
    """원문에서 키가 처음 등장하는 줄 번호 (1부터)"""
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def system_config_from_dict(data: Dict[str, Any], source_text: str = "") -> SystemConfig:
    """
    `system` 섹션 딕셔너리로부터 SystemConfig 생성

    Args:
        data: system 섹션 (단위 접미사 키) + 선택적 solver 섹션
        source_text: 줄 번호 진단용 원문 JSON

    Returns:
        변환된 SystemConfig (유효성 검사 전)

    Raises:
        ConfigError: 알 수 없는 키 또는 형식 오류
    """
    if not isinstance(data, dict):
        raise ConfigError("system 섹션은 객체여야 합니다", _find_key_line(source_text, "system"))

    converters = {json_key: (attr, from_json) for json_key, attr, from_json, _ in _SYSTEM_FIELDS}
    kwargs: Dict[str, Any] = {}
    solver = SolverConfig()

    for key, value in data.items():
        if key == "solver":
            solver = solver_config_from_dict(value, source_text)
            continue
        if key not in converters:
            raise ConfigError(f"알 수 없는 system 키: {key!r}", _find_key_line(source_text, key))
        attr, from_json = converters[key]
        try:
            kwargs[attr] = from_json(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{key}: {e}", _find_key_line(source_text, key))

    return SystemConfig(solver=solver, **kwargs)


def solver_config_from_dict(data: Dict[str, Any], source_text: str = "") -> SolverConfig:
    """solver 섹션 딕셔너리로부터 SolverConfig 생성"""
    if not isinstance(data, dict):
        raise ConfigError("solver 섹션은 객체여야 합니다", _find_key_line(source_text, "solver"))
    solver = SolverConfig()
    for key, value in data.items():
        if not hasattr(solver, key):
            raise ConfigError(f"알 수 없는 solver 키: {key!r}", _find_key_line(source_text, key))
        expected = type(getattr(solver, key))
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
            raise ConfigError(f"{key}: {expected.__name__} 값이 필요합니다", _find_key_line(source_text, key))
        setattr(solver, key, value)
    return solver


class ConfigManager:
    """설정 관리자"""

    def __init__(self, config_path: Optional[str] = None, env_path: str = ".env"):
        """
        ConfigManager 초기화

        Args:
            config_path: 설정 파일 경로 (None이면 기본값만 사용)
            env_path: 환경변수 파일 경로
        """
        self.config_path = config_path
        self.env_path = env_path
        self.config = AppConfig()

        # 설정 로드
        self.load_config()

    def load_config(self):
        """설정 로드 (.env -> 설정 파일 -> 환경변수 재정의 순서)

        Raises:
            ConfigError: 설정 파일이 손상되었거나 값이 잘못된 경우
        """
        # 1. 환경변수 파일 로드
        load_env_file(self.env_path)

        # 2. 설정 파일 로드
        if self.config_path:
            path = Path(self.config_path)
            if not path.exists():
                raise ConfigError(f"설정 파일을 찾을 수 없습니다: {self.config_path}")
            text = path.read_text(encoding="utf-8")
            try:
                config_data = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(e.msg, e.lineno)
            self._update_config_from_dict(config_data, text)
            logger.info(f"설정 파일 로드됨: {self.config_path}")

        # 3. 환경변수 재정의 (최우선 순위)
        self._load_overrides_from_env()

    def _update_config_from_dict(self, data: Dict[str, Any], source_text: str = ""):
        """딕셔너리로부터 설정 업데이트"""
        if not isinstance(data, dict):
            raise ConfigError("최상위 JSON 값은 객체여야 합니다", 1)

        for key in data:
            if key not in ("system", "solver", "harness", "logging"):
                raise ConfigError(f"알 수 없는 섹션: {key!r}", _find_key_line(source_text, key))

        # System 설정
        if "system" in data:
            self.config.system = system_config_from_dict(data["system"], source_text)

        # Solver 설정 (최상위 섹션도 허용)
        if "solver" in data:
            self.config.system.solver = solver_config_from_dict(data["solver"], source_text)

        # Harness 설정
        if "harness" in data:
            for key, value in data["harness"].items():
                if not hasattr(self.config.harness, key):
                    raise ConfigError(f"알 수 없는 harness 키: {key!r}", _find_key_line(source_text, key))
                setattr(self.config.harness, key, value)

        # Logging 설정
        if "logging" in data:
            for key, value in data["logging"].items():
                if not hasattr(self.config.logging, key):
                    raise ConfigError(f"알 수 없는 logging 키: {key!r}", _find_key_line(source_text, key))
                setattr(self.config.logging, key, value)

        errors = self.config.system.validation_errors()
        if errors:
            name, message = errors[0]
            json_key = next((k for k, attr in _SYSTEM_ATTRS.items() if attr == name), name)
            raise ConfigError(message, _find_key_line(source_text, json_key))

    def _load_overrides_from_env(self):
        """환경변수에서 스레드 수와 로그 레벨 재정의"""
        threads = get_env_variable("EEM_THREADS")
        if threads:
            try:
                self.config.harness.threads = max(1, int(threads))
                logger.info(f"EEM_THREADS 적용: {self.config.harness.threads}")
            except ValueError:
                logger.warning(f"EEM_THREADS 값 무시 (정수 아님): {threads!r}")

        level = get_env_variable("EEM_LOG_LEVEL")
        if level:
            self.config.logging.level = level.upper()

    def save_config(self, config_path: Optional[str] = None):
        """설정을 파일로 저장"""
        save_path = config_path or self.config_path
        if not save_path:
            raise ConfigError("저장할 설정 파일 경로가 없습니다")

        config_dict = {
            "system": self.config.system.to_dict(),
            "solver": asdict(self.config.system.solver),
            "harness": asdict(self.config.harness),
            "logging": asdict(self.config.logging),
        }

        write_json_file(save_path, config_dict)
        logger.info(f"설정 저장 완료: {save_path}")

    def get_config(self) -> AppConfig:
        """현재 설정 반환"""
        return self.config

    def update_system(self, **kwargs):
        """시스템 설정 일부 업데이트"""
        for key, value in kwargs.items():
            if not hasattr(self.config.system, key):
                raise ConfigError(f"알 수 없는 시스템 필드: {key}")
            setattr(self.config.system, key, value)
            logger.info(f"설정 업데이트: {key} = {value}")

    def validate_config(self) -> bool:
        """설정 유효성 검사"""
        errors = [message for _, message in self.config.system.validation_errors()]

        if self.config.harness.threads < 1:
            errors.append("harness.threads는 1 이상이어야 합니다")
        if self.config.logging.level.upper() not in logging._nameToLevel:
            errors.append(f"알 수 없는 로그 레벨: {self.config.logging.level}")

        if errors:
            for error in errors:
                logger.error(error)
            return False

        logger.info("설정 유효성 검사 통과")
        return True

    def get_logging_config(self) -> Dict[str, Any]:
        """로깅 설정 딕셔너리 반환"""
        config: Dict[str, Any] = {
            "level": getattr(logging, self.config.logging.level.upper(), logging.INFO),
            "format": self.config.logging.format,
        }

        handlers: List[logging.Handler] = [logging.StreamHandler()]
        if self.config.logging.file_path:
            Path(self.config.logging.file_path).parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.handlers.RotatingFileHandler(
                self.config.logging.file_path,
                maxBytes=self.config.logging.max_bytes,
                backupCount=self.config.logging.backup_count,
                encoding="utf-8",
            ))
        config["handlers"] = handlers

        return config

    def setup_logging(self):
        """루트 로거 구성 (CLI 진입점에서 한 번만 호출)"""
        logging.basicConfig(force=True, **self.get_logging_config())

    def reset_to_defaults(self):
        """기본값 설정으로 복원"""
        self.config = AppConfig()
        logger.info("설정이 기본값으로 복원되었습니다.")


# 전역 설정 인스턴스
_config_manager: Optional[ConfigManager] = None


def get_config_manager(config_path: Optional[str] = None) -> ConfigManager:
    """전역 설정 관리자 반환"""
    global _config_manager
    if _config_manager is None or (config_path and config_path != _config_manager.config_path):
        _config_manager = ConfigManager(config_path)
    return _config_manager


def get_config() -> AppConfig:
    """현재 설정 반환"""
    return get_config_manager().get_config()


# 테스트 코드
if __name__ == "__main__":
    print("설정 관리 테스트\n")

    config_manager = ConfigManager()
    system = config_manager.get_config().system

    print("1단계: 기본 시스템 설정")
    print(f"  BS {system.num_bs}개 × 안테나 {system.antennas_per_bs}개, 사용자 {system.num_users}명")
    print(f"  RIS {system.num_ris}개 × 소자 {system.elements_per_ris}개, 위상 비트 {system.phase_key}")
    print(f"  P_T = {watts_to_dbm(system.pt_w):.1f} dBm, 정적 전력 𝒫_s = {system.static_power_w:.3f} W")

    print("\n2단계: 설정 유효성 검사")
    is_valid = config_manager.validate_config()
    print(f"  검증 결과: {'통과' if is_valid else '실패'}")

    print(f"\n3단계: 설정 해시 = {system.config_hash()[:16]}...")
    print("\n설정 관리 테스트 완료!")
