"""
EEM 외부 루프 테스트
단조성, 결정성, 재시작 멱등성, 무작위 초기 위상
"""

import math

import numpy as np
import pytest

from config import SystemConfig
from channel import effective_channel, generate_channel_set
from analog_bf import PhaseConfig
from eem import evaluate_state, init_random_phase, run_digital_only, run_eem


@pytest.fixture
def small_config():
    return SystemConfig(
        num_bs=2, antennas_per_bs=2, num_users=2, num_ris=1, elements_per_ris=4, phase_bits=1,
    )


def _nondecreasing(values, slack=1e-9):
    return all(after >= before - slack * abs(before) for before, after in zip(values, values[1:]))


def test_no_ris_matches_digital_only(small_config):
    config = small_config.with_updates(num_ris=0)
    ch = generate_channel_set(config, seed=0)
    report = run_eem(config, ch, PhaseConfig(theta=np.zeros(0), bits=config.phase_bits))
    reference = run_digital_only(config, ch)
    assert report.final_eta == pytest.approx(reference.final_eta, rel=1e-12)
    assert report.iterations == 1
    assert report.eta_trace == [report.final_eta]


@pytest.mark.parametrize("seed", range(3))
def test_eta_trace_is_monotone(small_config, seed):
    ch = generate_channel_set(small_config, seed)
    report = run_eem(small_config, ch, init_random_phase(small_config, seed))
    assert report.monotone_violations == 0
    assert _nondecreasing(report.eta_trace)
    assert report.final_eta == pytest.approx(report.eta_trace[-1], rel=1e-9)
    assert report.analog_trace


def test_continuous_phase_run_is_monotone(small_config):
    config = small_config.with_updates(phase_bits=None)
    ch = generate_channel_set(config, seed=3)
    report = run_eem(config, ch, init_random_phase(config, 3))
    assert report.phase_state.bits is None
    assert _nondecreasing(report.eta_trace)


def test_run_is_deterministic(small_config):
    ch = generate_channel_set(small_config, seed=1)
    first = run_eem(small_config, ch, init_random_phase(small_config, 1))
    second = run_eem(small_config, ch, init_random_phase(small_config, 1))
    assert first.eta_trace == second.eta_trace
    np.testing.assert_array_equal(first.phase_state.theta, second.phase_state.theta)


def test_restart_from_solution_is_idempotent(small_config):
    config = small_config.with_updates(inner_threshold=1e-6)
    ch = generate_channel_set(config, seed=2)
    first = run_eem(config, ch, init_random_phase(config, 2))
    second = run_eem(config, ch, first.phase_state, p_init=first.beam_state.power_alloc)

    assert second.initial_eta == pytest.approx(first.final_eta, rel=1e-9)
    assert second.final_eta >= first.final_eta * (1.0 - 1e-9)
    assert second.final_eta == pytest.approx(first.final_eta, rel=1e-3)
    assert second.monotone_violations == 0


def test_final_state_is_consistent(small_config):
    ch = generate_channel_set(small_config, seed=4)
    report = run_eem(small_config, ch, init_random_phase(small_config, 4))
    H = effective_channel(ch, report.phase_state)
    _, rates, power, eta = evaluate_state(H, report.beam_state.power_alloc, small_config)
    assert eta == pytest.approx(report.final_eta, rel=1e-12)
    assert rates.sum == pytest.approx(report.final_rates.sum, rel=1e-12)
    assert np.all(power.transmit_per_bs <= small_config.pt_w * (1.0 + 1e-9))


def test_mismatched_phase_state_raises(small_config):
    ch = generate_channel_set(small_config, seed=0)
    with pytest.raises(ValueError):
        run_eem(small_config, ch, PhaseConfig(theta=np.zeros(3), bits=1))
    with pytest.raises(ValueError):
        run_eem(small_config, ch, PhaseConfig(theta=np.zeros(4), bits=2))


def test_report_to_dict(small_config):
    ch = generate_channel_set(small_config, seed=0)
    data = run_eem(small_config, ch, init_random_phase(small_config, 0)).to_dict()
    assert set(data) >= {"eta_trace", "final_eta", "iterations", "converged", "phase_state", "beam_state"}
    assert data["phase_state"]["bits"] == 1
    assert len(data["phase_state"]["indices"]) == 4


def test_random_phase_lies_on_grid(small_config):
    q = init_random_phase(small_config.with_updates(elements_per_ris=64), seed=0)
    assert q.bits == 1
    assert set(np.round(q.theta, 12)) <= {0.0, round(math.pi, 12)}


def test_random_phase_is_seeded(small_config):
    config = small_config.with_updates(elements_per_ris=32, phase_bits=3)
    np.testing.assert_array_equal(init_random_phase(config, 5).theta, init_random_phase(config, 5).theta)
    assert not np.array_equal(init_random_phase(config, 5).theta, init_random_phase(config, 6).theta)


def test_random_phase_is_uniform_over_grid():
    config = SystemConfig(num_ris=4, elements_per_ris=256, phase_bits=2)
    counts = np.bincount(init_random_phase(config, seed=11).indices(), minlength=4)
    assert counts.sum() == 1024
    # 기대값 256, 표준편차 약 14
    assert np.all(np.abs(counts - 256) < 75)


def test_random_continuous_phase_range():
    config = SystemConfig(num_ris=1, elements_per_ris=100, phase_bits=None)
    q = init_random_phase(config, seed=0)
    assert q.bits is None
    assert np.all((q.theta >= 0.0) & (q.theta < 2 * math.pi))
    assert len(set(q.theta)) == 100
