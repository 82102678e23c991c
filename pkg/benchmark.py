"""벤치마크 하네스 모듈
제안 방식(RIS), DAS, No-RIS, 기존 cell-free 방식을 같은 시드로 비교합니다."""

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import SystemConfig
from channel import generate_channel_set
from eem import init_random_phase, run_digital_only, run_eem
from numerics import NumericsError
from utils import Timer, ensure_directory, get_thread_limit


# 로깅 설정
logger = logging.getLogger(__name__)

PROPOSED_RIS = "proposed_ris"
DAS = "das"
NO_RIS = "no_ris"
CONVENTIONAL_CELLFREE = "conventional_cellfree"
SCHEME_KINDS = (PROPOSED_RIS, DAS, NO_RIS, CONVENTIONAL_CELLFREE)

CSV_COLUMNS = ["scheme", "seed", "eta_bits_per_joule", "sum_rate_bps_hz", "iterations", "wall_time_s"]


def derive_scheme_config(kind: str, config: SystemConfig) -> SystemConfig:
    """
    방식별 설정 변환

    - proposed_ris: 그대로
    - das: RIS 자리에 능동 안테나 (사이트당 L개), 전체 예산 N·P_T 하나
    - no_ris: M = 0
    - conventional_cellfree: RIS를 모두 BS로 교체 (N + M개 BS), M = 0

    Raises:
        ValueError: 알 수 없는 방식
    """
    if kind == PROPOSED_RIS:
        return config.with_updates()
    if kind == NO_RIS:
        return config.with_updates(num_ris=0)
    if kind == CONVENTIONAL_CELLFREE:
        return config.with_updates(
            num_bs=config.num_bs + config.num_ris,
            bs_at_ris_sites=config.num_ris,
            num_ris=0,
        )
    if kind == DAS:
        return config.with_updates(
            num_ris=0,
            das_sites=config.num_ris,
            das_antennas_per_site=config.elements_per_ris,
            joint_power_budget=True,
        )
    raise ValueError(f"알 수 없는 방식입니다: {kind} (가능: {', '.join(SCHEME_KINDS)})")


@dataclass
class Scheme:
    """벤치마크 방식과 변환된 설정"""
    kind: str
    derived_config: SystemConfig

    @classmethod
    def from_kind(cls, kind: str, config: SystemConfig) -> "Scheme":
        return cls(kind=kind, derived_config=derive_scheme_config(kind, config))


@dataclass
class RunRecord:
    """시드 하나의 실행 결과 (실패하면 error에 사유)"""
    scheme: str
    seed: int
    config_hash: str
    eta: float
    sum_rate: float
    iterations: int
    wall_time: float
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_row(self) -> Dict[str, Any]:
        """CSV 한 행 (실패한 시드는 값 없음)"""
        return {
            "scheme": self.scheme,
            "seed": self.seed,
            "eta_bits_per_joule": self.eta if self.ok else None,
            "sum_rate_bps_hz": self.sum_rate if self.ok else None,
            "iterations": self.iterations if self.ok else None,
            "wall_time_s": self.wall_time,
        }

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def run_seed(kind: str, config: SystemConfig, seed: int) -> RunRecord:
    """
    시드 하나 실행 (프로세스 풀 작업 단위)

    솔버 오류는 전파하지 않고 error 태그로 기록합니다.
    """
    config_hash = config.config_hash()
    with Timer(f"{kind} seed {seed}") as timer:
        try:
            ch = generate_channel_set(config, seed)
            if kind == PROPOSED_RIS:
                report = run_eem(config, ch, init_random_phase(config, seed))
            else:
                report = run_digital_only(config, ch)
        except (NumericsError, ValueError, RuntimeError) as e:
            logger.warning(f"{kind} 시드 {seed} 실패: {type(e).__name__}: {e}")
            return RunRecord(
                scheme=kind, seed=seed, config_hash=config_hash,
                eta=math.nan, sum_rate=math.nan, iterations=0,
                wall_time=timer.get_elapsed_time(), error=f"{type(e).__name__}: {e}",
            )

    return RunRecord(
        scheme=kind,
        seed=seed,
        config_hash=config_hash,
        eta=report.final_eta,
        sum_rate=report.final_rates.sum,
        iterations=report.iterations,
        wall_time=timer.get_elapsed_time(),
    )


def run_benchmark(
    scheme: Union[str, Scheme],
    config: SystemConfig,
    seeds: Sequence[int],
    threads: Optional[int] = None,
    show_progress: bool = False,
) -> List[RunRecord]:
    """
    방식 하나를 여러 시드로 실행

    Args:
        scheme: 방식 이름 또는 Scheme (설정은 항상 config에서 다시 유도)
        config: 기준 설정 (제안 방식 기준)
        seeds: 시드 목록
        threads: 병렬 작업 수 (기본: EEM_THREADS 또는 1), 상한은 EEM_THREADS
        show_progress: tqdm 진행 표시

    Returns:
        시드 순서대로 정렬된 RunRecord 목록
    """
    kind = scheme.kind if isinstance(scheme, Scheme) else scheme
    derived = derive_scheme_config(kind, config)
    derived.validate()

    limit = get_thread_limit(default=threads or 1)
    workers = max(1, min(threads or limit, limit, len(seeds)))
    logger.info(f"{kind} 벤치마크 시작: 시드 {len(seeds)}개, 작업자 {workers}개")

    if workers == 1:
        records = [
            run_seed(kind, derived, seed)
            for seed in tqdm(seeds, desc=kind, disable=not show_progress)
        ]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = executor.map(run_seed, [kind] * len(seeds), [derived] * len(seeds), seeds)
            records = list(tqdm(results, total=len(seeds), desc=kind, disable=not show_progress))

    failed = sum(1 for record in records if not record.ok)
    if failed:
        logger.warning(f"{kind}: {failed}/{len(records)}개 시드 실패")
    return records


def run_schemes(
    kinds: Iterable[str],
    config: SystemConfig,
    seeds: Sequence[int],
    threads: Optional[int] = None,
    show_progress: bool = False,
) -> List[RunRecord]:
    """여러 방식을 같은 시드로 실행 (방식 순서, 시드 순서)"""
    records: List[RunRecord] = []
    for kind in kinds:
        records.extend(run_benchmark(kind, config, seeds, threads=threads, show_progress=show_progress))
    return records


def records_to_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.to_row() for record in records], columns=CSV_COLUMNS)


def write_benchmark_csv(records: Sequence[RunRecord], file_path: str) -> Path:
    """CSV 저장 (헤더: scheme,seed,eta_bits_per_joule,sum_rate_bps_hz,iterations,wall_time_s)"""
    path = Path(file_path)
    ensure_directory(str(path.parent))
    records_to_frame(records).to_csv(path, index=False)
    logger.info(f"벤치마크 결과 저장됨: {path} ({len(records)}행)")
    return path


def summarize(records: Sequence[RunRecord]) -> Dict[str, Dict[str, float]]:
    """방식별 η·합 전송률 통계 (성공한 시드만)"""
    summary: Dict[str, Dict[str, float]] = {}
    for kind in dict.fromkeys(record.scheme for record in records):
        ok = [record for record in records if record.scheme == kind and record.ok]
        if not ok:
            summary[kind] = {"num_runs": 0, "num_failed": sum(1 for r in records if r.scheme == kind)}
            continue
        etas = [record.eta for record in ok]
        summary[kind] = {
            "num_runs": len(ok),
            "num_failed": sum(1 for r in records if r.scheme == kind and not r.ok),
            "avg_eta": float(np.mean(etas)),
            "std_eta": float(np.std(etas)),
            "avg_sum_rate": float(np.mean([record.sum_rate for record in ok])),
            "avg_iterations": float(np.mean([record.iterations for record in ok])),
            "median_iterations": float(np.median([record.iterations for record in ok])),
        }
    return summary


if __name__ == "__main__":
    from config import get_config

    logging.basicConfig(level=logging.INFO)
    system = get_config().system.with_updates(num_ris=2, elements_per_ris=16)
    results = run_schemes(SCHEME_KINDS, system, seeds=[0, 1])

    print("📊 방식별 평균 에너지 효율")
    for name, stats in summarize(results).items():
        print(f"  {name:24s} η = {stats.get('avg_eta', float('nan')):.4e} bits/J")
