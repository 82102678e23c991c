#!/usr/bin/env python3
"""
실행 환경 점검 스크립트
패키지 버전, 병렬 작업 수, 설정 파일 유효성, 작은 EEM 실행을 확인
"""

import os
import sys
from pathlib import Path
from dotenv import load_dotenv
from colorama import init, Fore, Style

# colorama 초기화 (Windows 지원)
init()

# 프로젝트 루트 경로 설정
ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

# .env 파일 로드
env_path = ROOT_DIR / '.env'
load_dotenv(env_path)


def print_status(name: str, value: str, ok: bool = True):
    """상태를 색상과 함께 출력"""
    status = f"{Fore.GREEN}✓{Style.RESET_ALL}" if ok else f"{Fore.RED}✗{Style.RESET_ALL}"
    print(f"{status} {name}: {value}")


def check_dependencies():
    """필수 패키지 설치 및 버전 확인"""
    print(f"\n{Fore.CYAN}=== 필수 패키지 확인 ==={Style.RESET_ALL}\n")

    packages = {
        "numpy": "NumPy",
        "scipy": "SciPy",
        "pandas": "pandas",
        "tqdm": "tqdm",
        "dotenv": "python-dotenv",
    }

    all_installed = True
    for package, name in packages.items():
        try:
            module = __import__(package)
            print_status(name, getattr(module, "__version__", "installed"))
        except ImportError:
            print_status(name, "not installed", False)
            all_installed = False

    return all_installed


def check_environment_variables():
    """환경변수 확인 (EEM_THREADS, EEM_LOG_LEVEL, EEM_CONFIG)"""
    print(f"\n{Fore.CYAN}=== 환경변수 확인 ==={Style.RESET_ALL}\n")

    from utils import get_thread_limit

    threads = os.getenv("EEM_THREADS")
    valid = threads is None or threads.isdigit()
    print_status("EEM_THREADS", f"{threads or '미설정'} → 작업자 상한 {get_thread_limit()}", valid)
    print_status("EEM_LOG_LEVEL", os.getenv("EEM_LOG_LEVEL") or "미설정 (INFO)")
    print_status("EEM_CONFIG", os.getenv("EEM_CONFIG") or "미설정 (기본값 사용)")
    return valid


def check_config():
    """설정 파일 로드와 유효성 검사"""
    print(f"\n{Fore.CYAN}=== 설정 확인 ==={Style.RESET_ALL}\n")

    from config import ConfigError, ConfigManager

    config_path = os.getenv("EEM_CONFIG")
    try:
        manager = ConfigManager(config_path)
    except ConfigError as e:
        print_status("설정 파일", str(e), False)
        return False

    system = manager.get_config().system
    ok = manager.validate_config()
    print_status("설정 유효성", "유효" if ok else "오류 (로그 확인)", ok)
    print(f"  - N={system.num_bs}, N_a={system.antennas_per_bs}, K={system.num_users}, "
          f"M={system.num_ris}, L={system.elements_per_ris}, b={system.phase_key}")
    print(f"  - 설정 해시: {system.config_hash()[:16]}...")
    return ok


def check_small_run():
    """작은 구성에서 EEM 한 번 실행"""
    print(f"\n{Fore.CYAN}=== 작은 EEM 실행 ==={Style.RESET_ALL}\n")

    try:
        from config import SystemConfig
        from channel import generate_channel_set
        from eem import init_random_phase, run_eem

        system = SystemConfig(num_bs=2, antennas_per_bs=2, num_users=2, num_ris=1, elements_per_ris=4)
        report = run_eem(system, generate_channel_set(system, 0), init_random_phase(system, 0))
        print_status("EEM", f"{report.iterations}회, η = {report.final_eta:.4e} bits/J",
                     report.monotone_violations == 0)
        return report.monotone_violations == 0
    except Exception as e:
        print_status("EEM", f"실행 실패: {e}", False)
        return False


def main():
    """메인 점검 실행"""
    print(f"\n{Fore.BLUE}{'='*50}")
    print(f"   RIS cell-free EEM 환경 점검")
    print(f"{'='*50}{Style.RESET_ALL}")

    results = {
        "필수 패키지": check_dependencies(),
        "환경변수": check_environment_variables(),
        "설정": check_config(),
        "EEM 실행": check_small_run(),
    }

    # 결과 요약
    print(f"\n{Fore.CYAN}=== 점검 결과 요약 ==={Style.RESET_ALL}\n")

    all_passed = True
    for name, result in results.items():
        if result:
            print(f"{Fore.GREEN}✓{Style.RESET_ALL} {name}: PASS")
        else:
            print(f"{Fore.RED}✗{Style.RESET_ALL} {name}: FAIL")
            all_passed = False

    print(f"\n{Fore.BLUE}{'='*50}{Style.RESET_ALL}")
    if all_passed:
        print(f"{Fore.GREEN}🎉 모든 점검 통과! 실험을 시작할 수 있습니다.{Style.RESET_ALL}")
    else:
        print(f"{Fore.YELLOW}⚠️ 일부 점검에 실패했습니다. 위의 메시지를 확인하세요.{Style.RESET_ALL}")
        print(f"\n다음 단계:")
        print(f"1. 누락된 패키지 설치: pip install -r requirements.txt")
        print(f"2. 설정 파일 확인: docs/config-schema.md")
    print(f"{Fore.BLUE}{'='*50}{Style.RESET_ALL}\n")

    return 0 if all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
