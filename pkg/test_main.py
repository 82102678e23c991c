"""
CLI 테스트
하위 명령 실행, 종료 코드, 출력 파일 형식
"""

import json

import pytest

import main
from digital_bf import InfeasibleBudget, NonConvergence, RankDeficient
from main import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_SOLVER_ERROR, build_parser, run_cli


@pytest.fixture
def small_config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "system": {
            "num_bs": 2, "antennas_per_bs": 2, "num_users": 2,
            "num_ris": 1, "elements_per_ris": 4, "phase_bits": 1,
        },
        "harness": {"show_progress": False, "output_directory": str(tmp_path / "results")},
        "logging": {"level": "WARNING"},
    }), encoding="utf-8")
    return str(path)


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_run_writes_report(small_config_path, tmp_path, capsys):
    out = tmp_path / "run.json"
    assert run_cli(["--config", small_config_path, "run", "--seed", "1", "--out", str(out)]) == EXIT_OK

    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["seed"] == 1
    assert report["final_eta"] > 0
    assert len(report["eta_trace"]) == report["iterations"]
    assert report["phase_state"]["bits"] == 1
    assert len(report["config_hash"]) == 64

    printed = json.loads(capsys.readouterr().out)
    assert printed["final_eta"] == report["final_eta"]


def test_bench_writes_csv(small_config_path, tmp_path):
    out = tmp_path / "bench.csv"
    code = run_cli([
        "--config", small_config_path, "bench",
        "--schemes", "proposed_ris,no_ris", "--seeds", "0..1", "--out", str(out),
    ])
    assert code == EXIT_OK
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "scheme,seed,eta_bits_per_joule,sum_rate_bps_hz,iterations,wall_time_s"
    assert [line.split(",")[:2] for line in lines[1:]] == [
        ["proposed_ris", "0"], ["proposed_ris", "1"], ["no_ris", "0"], ["no_ris", "1"],
    ]


def test_bench_rejects_unknown_scheme(small_config_path, tmp_path):
    code = run_cli([
        "--config", small_config_path, "bench", "--schemes", "hybrid", "--out", str(tmp_path / "x.csv"),
    ])
    assert code == EXIT_CONFIG_ERROR


@pytest.mark.slow
def test_sweep_saves_results(small_config_path, tmp_path):
    out_dir = tmp_path / "sweep"
    code = run_cli([
        "--config", small_config_path, "sweep",
        "--variable", "b", "--grid", "1,continuous", "--seeds", "0..0", "--out-dir", str(out_dir),
    ])
    assert code == EXIT_OK
    assert len(list(out_dir.glob("sweep_b_*.csv"))) == 1
    assert len(list(out_dir.glob("sweep_b_*.json"))) == 1


def test_malformed_config_exits_with_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "system": {\n    "num_bs": ,\n  }\n}\n', encoding="utf-8")
    assert run_cli(["--config", str(path), "run"]) == EXIT_CONFIG_ERROR


def test_bad_seed_range_exits_with_config_error(small_config_path, tmp_path):
    code = run_cli(["--config", small_config_path, "bench", "--seeds", "5..1", "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_CONFIG_ERROR


def test_validate_single_suite(small_config_path, tmp_path):
    report_path = tmp_path / "validation.json"
    code = run_cli([
        "--config", small_config_path, "validate", "--quick",
        "--suite", "zf_exactness", "--report", str(report_path),
    ])
    assert code == EXIT_OK
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["all_passed"] is True
    assert [suite["name"] for suite in report["suites"]] == ["zf_exactness"]


def test_validate_unknown_suite(small_config_path):
    assert run_cli(["--config", small_config_path, "validate", "--suite", "bogus"]) == EXIT_CONFIG_ERROR


def test_more_users_than_antennas_is_config_error(small_config_path, tmp_path, capsys):
    path = tmp_path / "crowded.json"
    with open(small_config_path, encoding="utf-8") as f:
        config = json.load(f)
    config["system"]["num_users"] = 5
    path.write_text(json.dumps(config), encoding="utf-8")

    assert run_cli(["--config", str(path), "run"]) == EXIT_CONFIG_ERROR
    assert "K=5" in capsys.readouterr().err


@pytest.mark.parametrize("error", [
    RankDeficient("ZF 역행렬 실패"),
    NonConvergence("내부 솔버가 수렴하지 않았습니다"),
    InfeasibleBudget("전력 예산은 0보다 커야 합니다"),
])
def test_solver_failure_exits_with_solver_error(small_config_path, monkeypatch, capsys, error):
    def failing_run(*args, **kwargs):
        raise error

    monkeypatch.setattr(main, "run_eem", failing_run)
    assert run_cli(["--config", small_config_path, "run", "--seed", "2"]) == EXIT_SOLVER_ERROR
    assert type(error).__name__ in capsys.readouterr().err
