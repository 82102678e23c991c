"""
벤치마크 하네스 테스트
방식별 설정 유도, 시드 순서, 오류 기록, CSV 형식
"""

import math

import pytest

from config import SystemConfig
from utils import dbm_to_watts
from benchmark import (
    CONVENTIONAL_CELLFREE, CSV_COLUMNS, DAS, NO_RIS, PROPOSED_RIS, SCHEME_KINDS,
    Scheme, derive_scheme_config, run_benchmark, run_schemes, run_seed, summarize, write_benchmark_csv,
)


@pytest.fixture
def base_config():
    return SystemConfig(num_bs=2, antennas_per_bs=2, num_users=2, num_ris=1, elements_per_ris=4, phase_bits=1)


def test_scheme_configs(base_config):
    das = derive_scheme_config(DAS, base_config)
    assert (das.num_ris, das.das_sites, das.das_antennas_per_site) == (0, 1, 4)
    assert das.joint_power_budget

    cellfree = derive_scheme_config(CONVENTIONAL_CELLFREE, base_config)
    assert (cellfree.num_bs, cellfree.bs_at_ris_sites, cellfree.num_ris) == (3, 1, 0)

    assert derive_scheme_config(NO_RIS, base_config).num_ris == 0
    assert derive_scheme_config(PROPOSED_RIS, base_config) == base_config
    assert Scheme.from_kind(DAS, base_config).derived_config == das
    with pytest.raises(ValueError):
        derive_scheme_config("hybrid", base_config)


def test_no_ris_matches_proposed_without_ris(base_config):
    no_ris = run_seed(NO_RIS, derive_scheme_config(NO_RIS, base_config), 3)
    proposed = run_seed(PROPOSED_RIS, base_config.with_updates(num_ris=0), 3)
    assert no_ris.ok and proposed.ok
    assert no_ris.eta == pytest.approx(proposed.eta, rel=1e-12)


def test_records_follow_seed_order(base_config):
    records = run_benchmark(NO_RIS, base_config, seeds=[3, 1, 2])
    assert [record.seed for record in records] == [3, 1, 2]
    assert all(record.scheme == NO_RIS and record.ok for record in records)
    assert len({record.config_hash for record in records}) == 1


@pytest.mark.slow
def test_parallel_matches_sequential(base_config):
    sequential = run_benchmark(PROPOSED_RIS, base_config, seeds=[0, 1, 2])
    parallel = run_benchmark(PROPOSED_RIS, base_config, seeds=[0, 1, 2], threads=2)
    assert [r.eta for r in parallel] == [r.eta for r in sequential]


def test_failed_seed_is_tagged():
    config = SystemConfig(num_bs=1, antennas_per_bs=2, num_users=3, num_ris=0)
    record = run_seed(NO_RIS, config, 0)
    assert not record.ok
    assert record.error.startswith("RankDeficient")
    assert math.isnan(record.eta)
    assert record.to_row()["eta_bits_per_joule"] is None


def test_csv_header_and_rows(base_config, tmp_path):
    records = run_schemes(SCHEME_KINDS, base_config, seeds=[0, 1])
    path = write_benchmark_csv(records, str(tmp_path / "out" / "bench.csv"))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "scheme,seed,eta_bits_per_joule,sum_rate_bps_hz,iterations,wall_time_s"
    assert lines[0].split(",") == CSV_COLUMNS
    assert len(lines) == 1 + 4 * 2
    assert [line.split(",")[0] for line in lines[1:3]] == [PROPOSED_RIS, PROPOSED_RIS]


def test_summary_per_scheme(base_config):
    records = run_schemes([PROPOSED_RIS, NO_RIS], base_config, seeds=[0, 1])
    summary = summarize(records)
    assert list(summary) == [PROPOSED_RIS, NO_RIS]
    assert summary[PROPOSED_RIS]["num_runs"] == 2
    assert summary[NO_RIS]["avg_eta"] > 0


@pytest.mark.parametrize("seed", [1, 6])
def test_digital_only_converges_at_high_power(seed):
    config = derive_scheme_config(NO_RIS, SystemConfig().with_updates(pt_w=dbm_to_watts(40.0)))
    record = run_seed(NO_RIS, config, seed)
    assert record.ok, record.error
    assert record.eta > 0


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 6])
def test_proposed_converges_at_high_power(seed):
    config = SystemConfig().with_updates(pt_w=dbm_to_watts(40.0))
    record = run_seed(PROPOSED_RIS, config, seed)
    assert record.ok, record.error
    assert record.eta > 0
