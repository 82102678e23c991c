"""
RIS 기반 cell-free MIMO 에너지 효율 툴킷 CLI
단일 EEM 실행, 스윕, 벤치마크, 검증 하위 명령을 제공

종료 코드: 0 성공, 1 설정/입력 오류, 2 검증 실패, 3 솔버 실행 실패
"""

import sys
import json
import argparse
import logging
from typing import List, Optional

from config import CONTINUOUS, ConfigError, ConfigManager
from channel import generate_channel_set
from numerics import NumericsError
from digital_bf import InfeasibleBudget
from eem import init_random_phase, run_eem
from analysis import SWEEP_VARIABLES, empirical_sweep
from benchmark import SCHEME_KINDS, run_schemes, summarize, write_benchmark_csv
from validator import validate_all
from utils import dbm_to_watts, parse_float_list, parse_seed_range, write_json_file


# 로깅 설정
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_VALIDATION_FAILED = 2
EXIT_SOLVER_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    """명령행 파서 생성"""
    parser = argparse.ArgumentParser(description='RIS 기반 cell-free MIMO 에너지 효율 툴킷')
    parser.add_argument('--config', type=str, default=None, help='설정 JSON 파일 (기본: 내장 기본값)')
    parser.add_argument('--log-level', type=str, default=None, help='로그 레벨 (기본: 설정 파일 또는 INFO)')

    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='단일 EEM 실행')
    run.add_argument('--seed', type=int, default=None, help='채널/초기 위상 시드 (기본: 설정의 seed)')
    run.add_argument('--ptdbm', type=float, default=None, help='BS당 송신 전력 예산 (dBm)')
    run.add_argument('--out', type=str, default=None, help='EEReport JSON 저장 경로')

    sweep = subparsers.add_parser('sweep', help='변수 스윕과 경향 판정')
    sweep.add_argument('--variable', choices=SWEEP_VARIABLES, required=True, help='스윕 변수')
    sweep.add_argument('--grid', type=str, required=True, help='격자 값, 쉼표 구분 (b는 1,2,3,continuous)')
    sweep.add_argument('--seeds', type=str, default='0..9', help='시드 목록 (기본: 0..9)')
    sweep.add_argument('--total-sites', type=int, default=None, help='M 스윕의 N₀ = N + M (기본: 설정값)')
    sweep.add_argument('--out-dir', type=str, default=None, help='CSV/JSON 저장 디렉토리 (기본: harness.output_directory)')

    bench = subparsers.add_parser('bench', help='방식별 벤치마크')
    bench.add_argument('--schemes', type=str, default='all',
                       help=f"방식 목록, 쉼표 구분 또는 all (가능: {', '.join(SCHEME_KINDS)})")
    bench.add_argument('--seeds', type=str, default='0..49', help='시드 목록 (기본: 0..49)')
    bench.add_argument('--ptdbm', type=float, default=None, help='BS당 송신 전력 예산 (dBm)')
    bench.add_argument('--threads', type=int, default=None, help='병렬 작업 수 (기본: harness.threads, 상한 EEM_THREADS)')
    bench.add_argument('--out', type=str, required=True, help='CSV 저장 경로')

    validate = subparsers.add_parser('validate', help='오라클/경향 검사 실행')
    validate.add_argument('--quick', action='store_true', help='표본 수를 줄여 빠르게 실행')
    validate.add_argument('--trends', action='store_true', help='몬테카를로 경향 검사 포함')
    validate.add_argument('--seeds', type=str, default='0..49', help='경향 검사 시드 (기본: 0..49)')
    validate.add_argument('--suite', action='append', default=None, help='실행할 검사 이름 (반복 가능)')
    validate.add_argument('--report', type=str, default=None, help='JSON 보고서 저장 경로')

    return parser


def _parse_grid(variable: str, text: str) -> list:
    if variable == 'b':
        return [CONTINUOUS if item.strip() == CONTINUOUS else int(item) for item in text.split(',') if item.strip()]
    values = parse_float_list(text)
    return values if variable == 'P_T' else [int(value) for value in values]


def _command_run(args, manager: ConfigManager) -> int:
    system = manager.get_config().system
    if args.ptdbm is not None:
        system = system.with_updates(pt_w=dbm_to_watts(args.ptdbm))
    seed = system.seed if args.seed is None else args.seed

    channels = generate_channel_set(system, seed)
    report = run_eem(system, channels, init_random_phase(system, seed))
    data = {"seed": seed, "config_hash": system.config_hash(), **report.to_dict()}

    if args.out:
        write_json_file(args.out, data)
        logger.info(f"EEReport 저장됨: {args.out}")
    print(json.dumps({key: data[key] for key in ("seed", "eta_trace", "final_eta", "iterations", "converged")},
                     ensure_ascii=False, indent=2))
    return EXIT_OK


def _command_sweep(args, manager: ConfigManager) -> int:
    config = manager.get_config()
    report = empirical_sweep(
        args.variable,
        _parse_grid(args.variable, args.grid),
        config.system,
        parse_seed_range(args.seeds),
        total_sites=args.total_sites,
        show_progress=config.harness.show_progress,
    )
    csv_path, json_path = report.save(args.out_dir or config.harness.output_directory)

    print(f"\n{args.variable} 스윕 결과 (판정: {'통과' if report.verdict else '불일치'})")
    for point, eta, rate in zip(report.sweep_points, report.eta_values, report.sum_rate_values):
        print(f"  {point!s:>12}: η = {eta:.4e} bits/J, 합 전송률 = {rate:.3f} bits/s/Hz")
    print(f"  저장: {csv_path}, {json_path}")
    return EXIT_OK


def _command_bench(args, manager: ConfigManager) -> int:
    config = manager.get_config()
    system = config.system
    if args.ptdbm is not None:
        system = system.with_updates(pt_w=dbm_to_watts(args.ptdbm))

    kinds = list(SCHEME_KINDS) if args.schemes == 'all' else [k.strip() for k in args.schemes.split(',') if k.strip()]
    unknown = [kind for kind in kinds if kind not in SCHEME_KINDS]
    if unknown:
        raise ConfigError(f"알 수 없는 방식: {', '.join(unknown)}")

    records = run_schemes(
        kinds, system, parse_seed_range(args.seeds),
        threads=args.threads or config.harness.threads,
        show_progress=config.harness.show_progress,
    )
    write_benchmark_csv(records, args.out)

    print("\n방식별 결과:")
    for kind, stats in summarize(records).items():
        if stats["num_runs"]:
            print(f"  {kind:24s} η = {stats['avg_eta']:.4e} ± {stats['std_eta']:.2e} bits/J "
                  f"({stats['num_runs']}개 성공, {stats['num_failed']}개 실패)")
        else:
            print(f"  {kind:24s} 모든 시드 실패")
    return EXIT_OK


def _command_validate(args, manager: ConfigManager) -> int:
    all_ok, results = validate_all(
        manager.get_config().system,
        quick=args.quick,
        include_trends=args.trends,
        trend_seeds=parse_seed_range(args.seeds),
        report_path=args.report,
        only=args.suite,
    )

    print("\n검증 결과:")
    for result in results:
        mark = "✓" if result.ok else "✗"
        print(f"  {mark} {result.name}: {result.passed}/{result.total} ({result.elapsed_s:.1f}초)")
        for failure in result.failures[:3]:
            print(f"      - {failure}")
    return EXIT_OK if all_ok else EXIT_VALIDATION_FAILED


COMMANDS = {
    'run': _command_run,
    'sweep': _command_sweep,
    'bench': _command_bench,
    'validate': _command_validate,
}


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    CLI 진입점

    Args:
        argv: 인자 목록 (기본: sys.argv[1:])

    Returns:
        종료 코드 (0 성공, 1 설정/입력 오류, 2 검증 실패, 3 솔버 실행 실패)
    """
    args = build_parser().parse_args(argv)

    try:
        manager = ConfigManager(args.config)
        if args.log_level:
            manager.config.logging.level = args.log_level.upper()
        manager.setup_logging()
        manager.get_config().system.validate()
        return COMMANDS[args.command](args, manager)
    except ConfigError as e:
        print(f"설정 오류: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (NumericsError, InfeasibleBudget, RuntimeError) as e:
        logger.error(f"솔버 실행 실패: {type(e).__name__}: {e}")
        print(f"실행 오류: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER_ERROR
    except ValueError as e:
        # 시드/격자 문자열 등 입력 값 오류
        print(f"입력 오류: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(run_cli())
