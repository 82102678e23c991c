"""
아날로그 빔포밍 테스트
위상 격자, 양자화, 이산 전수 비교, 닫힌 형태 해, 좌표 하강, 전수 탐색
"""

import math

import numpy as np
import pytest

from config import CONTINUOUS, SolverConfig, SystemConfig
from channel import ChannelSet
from analog_bf import (
    DiscreteCandidate, PhaseConfig, _select_candidate, analog_sweep, best_discrete_phase,
    build_element_workspace, closed_form_phase, evaluate_discrete_candidates, exhaustive_phase_search,
    objective_f, phase_grid, quantize_phase,
)


def _complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _random_channels(seed, K=2, T=4, ML=4, direct_scale=1.0):
    rng = np.random.default_rng(seed)
    return ChannelSet(
        H_D=direct_scale * _complex(rng, K, T),
        H_BR=_complex(rng, ML, T),
        H_RU_h=_complex(rng, K, ML),
    )


def _with_phase(q, j, theta):
    trial = q.copy()
    trial.theta[j] = theta
    return trial


def _sweep_config(method="enumerate", phase_bits=2, **overrides):
    return SystemConfig(
        num_bs=1, antennas_per_bs=4, num_users=2, num_ris=1, elements_per_ris=4,
        phase_bits=phase_bits,
        solver=SolverConfig(analog_method=method, enforce_power_budget=False),
        **overrides,
    )


def test_phase_grid_values():
    np.testing.assert_allclose(phase_grid(1), [0.0, math.pi])
    np.testing.assert_allclose(phase_grid(2), [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
    assert phase_grid(3).size == 8
    with pytest.raises(ValueError):
        phase_grid(0)


def test_quantize_nearest_and_wraparound():
    assert quantize_phase(math.pi / 4, 1) == 0.0
    assert quantize_phase(3.0, 1) == pytest.approx(math.pi)
    assert quantize_phase(2 * math.pi - 0.1, 2) == 0.0
    assert quantize_phase(1.5, 2) == pytest.approx(math.pi / 2)


def test_quantize_ties_take_smallest_index():
    assert quantize_phase(math.pi / 4, 2) == 0.0
    assert quantize_phase(math.pi / 2, 1) == 0.0


def test_phase_config_wraps_and_serializes():
    q = PhaseConfig(theta=[-math.pi / 2, 5 * math.pi], bits=None)
    np.testing.assert_allclose(q.theta, [3 * math.pi / 2, math.pi])
    assert q.to_dict()["bits"] == CONTINUOUS
    np.testing.assert_allclose(PhaseConfig.from_dict(q.to_dict()).theta, q.theta)

    discrete = PhaseConfig.from_indices([0, 3, 1], bits=2)
    assert discrete.to_dict() == {"bits": 2, "indices": [0, 3, 1]}
    np.testing.assert_array_equal(PhaseConfig.from_dict(discrete.to_dict()).indices(), [0, 3, 1])
    np.testing.assert_allclose(np.abs(discrete.coefficients()), 1.0)


def test_continuous_phase_has_no_indices():
    with pytest.raises(ValueError):
        PhaseConfig(theta=[0.1]).indices()


def test_discrete_candidates_match_full_objective():
    ch = _random_channels(0, ML=5)
    p = np.array([0.7, 1.3])
    q = PhaseConfig.from_indices([1, 0, 3, 2, 1], bits=2)
    for j in (0, 3):
        for cand in evaluate_discrete_candidates(j, ch, p, q):
            expected = objective_f(ch, p, _with_phase(q, j, cand.theta))
            assert cand.value == pytest.approx(expected, rel=1e-8)


def test_best_discrete_phase_never_increases_objective():
    ch = _random_channels(1, ML=6)
    p = np.array([1.0, 2.0])
    q = PhaseConfig.from_indices([0, 1, 2, 3, 0, 1], bits=2)
    for j in range(q.size):
        before = objective_f(ch, p, q)
        q = _with_phase(q, j, best_discrete_phase(j, ch, p, q))
        assert objective_f(ch, p, q) <= before * (1.0 + 1e-12)


def test_tied_candidates_keep_current_phase():
    ch = _random_channels(5, ML=4)
    ch.H_BR[2, :] = 0.0
    p = np.array([1.0, 1.0])
    q = PhaseConfig.from_indices([0, 1, 3, 2], bits=2)
    assert best_discrete_phase(2, ch, p, q) == pytest.approx(q.theta[2])


def test_candidate_ties_prefer_incumbent_then_smallest_index():
    H = np.eye(1, dtype=complex)

    def candidates(values):
        return [DiscreteCandidate(i, float(theta), v, H, H) for i, (theta, v) in enumerate(zip(phase_grid(2), values))]

    near_tie = candidates([1.0, 1.0, 2.0, 1.0 + 5e-13])
    assert _select_candidate(near_tie, 3, np.ones(1), None).index == 3
    assert _select_candidate(near_tie, 2, np.ones(1), None).index == 0


@pytest.mark.parametrize("include_direct", [False, True])
def test_element_workspace_matches_objective(include_direct):
    ch = _random_channels(2, ML=6)
    p = np.array([0.5, 1.5])
    q = PhaseConfig(theta=np.linspace(0.0, 5.0, 6))
    ws = build_element_workspace(2, ch, p, q, include_direct=include_direct)
    for theta in np.linspace(0.0, 2 * math.pi, 13):
        expected = objective_f(ch, p, _with_phase(q, 2, theta), include_direct=include_direct)
        assert ws.value(theta) == pytest.approx(expected, rel=1e-8)


def test_coefficient_table_is_consistent():
    """K = T: (A_j + q_j·B_j)(A_j + q_j·B_j)^H의 역행렬 대각합이 반사 경로 목적 함수"""
    ch = _random_channels(7, K=3, T=3, ML=6)
    p = np.array([0.5, 1.0, 2.0])
    q = PhaseConfig(theta=np.linspace(0.3, 4.0, 6))
    ws = build_element_workspace(4, ch, p, q, with_table=True)

    assert ws.table_consistent
    np.testing.assert_allclose(ws.C_j, ws.A_j @ ws.A_j.conj().T + ws.B_j @ ws.B_j.conj().T, rtol=1e-10)
    np.testing.assert_allclose(ws.D_j, ws.A_j + ws.A_j.conj().T, rtol=1e-10)
    assert set(ws.a) == {"a5", "a6", "a7", "a8"}
    assert ws.b == {}

    combined = ws.A_j + np.exp(1j * q.theta[4]) * ws.B_j
    traced = float(np.real(np.trace(np.linalg.inv(combined @ combined.conj().T))))
    assert traced == pytest.approx(objective_f(ch, p, q, include_direct=False), rel=1e-8)
    assert traced == pytest.approx(ws.value(q.theta[4]), rel=1e-8)


def test_coefficient_table_is_opt_in():
    ch = _random_channels(7, K=3, T=3, ML=6)
    ws = build_element_workspace(0, ch, np.ones(3), PhaseConfig(theta=np.zeros(6)))
    assert ws.A_j is None and ws.table_consistent is None

    non_square = build_element_workspace(0, _random_channels(7), np.ones(2), PhaseConfig(theta=np.zeros(4)), with_table=True)
    assert non_square.A_j is None


def test_element_workspace_derivative():
    ch = _random_channels(3, ML=4)
    p = np.array([1.0, 1.0])
    ws = build_element_workspace(1, ch, p, PhaseConfig(theta=np.zeros(4)), include_direct=True)
    h = 1e-6
    for theta in (0.3, 2.0, 4.5):
        numeric = (ws.value(theta + h) - ws.value(theta - h)) / (2 * h)
        assert ws.derivative(theta) == pytest.approx(numeric, rel=1e-4, abs=1e-9 * abs(ws.value(theta)))


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_beats_fine_grid(seed):
    ch = _random_channels(10 + seed, ML=4)
    p = np.array([1.0, 0.5])
    q = PhaseConfig(theta=np.random.default_rng(seed).uniform(0, 2 * math.pi, 4))
    ws = build_element_workspace(0, ch, p, q, include_direct=True)
    theta = closed_form_phase(ws)
    grid_min = min(ws.value(t) for t in np.linspace(0.0, 2 * math.pi, 4096, endpoint=False))
    assert ws.stationary
    assert 0.0 <= theta < 2 * math.pi
    assert ws.value(theta) <= grid_min + 1e-9 * abs(grid_min)


def test_single_antenna_sweep_aligns_all_paths():
    """K = T = 1이면 모든 반사 경로가 직접 링크와 위상 정렬"""
    rng = np.random.default_rng(4)
    ch = ChannelSet(H_D=_complex(rng, 1, 1), H_BR=_complex(rng, 2, 1), H_RU_h=_complex(rng, 1, 2))
    config = SystemConfig(
        num_bs=1, antennas_per_bs=1, num_users=1, num_ris=1, elements_per_ris=2,
        phase_bits=None, inner_threshold=1e-14,
        solver=SolverConfig(max_passes=200, enforce_power_budget=False),
    )
    p = np.array([2.0])
    q = analog_sweep(ch, p, PhaseConfig(theta=[1.0, 4.0]), config)

    aligned = abs(ch.H_D[0, 0]) + np.sum(np.abs(ch.H_RU_h[0] * ch.H_BR[:, 0]))
    assert objective_f(ch, p, q) == pytest.approx(2.0 / aligned ** 2, rel=1e-6)


@pytest.mark.parametrize("method,phase_bits", [("enumerate", 2), ("closed_form", 3), ("closed_form", None)])
def test_sweep_history_is_monotone(method, phase_bits):
    ch = _random_channels(5, ML=4)
    p = np.array([1.0, 2.0])
    config = _sweep_config(method, phase_bits)
    start = PhaseConfig(theta=np.zeros(4), bits=phase_bits)
    history = []
    q = analog_sweep(ch, p, start, config, history=history)

    assert len(history) >= 1 + q.size
    for before, after in zip(history, history[1:]):
        assert after <= before * (1.0 + 1e-12)
    assert objective_f(ch, p, q) == pytest.approx(history[-1], rel=1e-9)
    if phase_bits is not None:
        np.testing.assert_allclose(q.theta, phase_grid(phase_bits)[q.indices()], atol=1e-12)


def test_sweep_without_elements_returns_empty_state():
    ch = ChannelSet(H_D=np.eye(2, dtype=complex), H_BR=np.zeros((0, 2)), H_RU_h=np.zeros((2, 0)))
    q = analog_sweep(ch, np.ones(2), PhaseConfig(theta=np.zeros(0), bits=2), _sweep_config())
    assert q.size == 0


def test_exhaustive_search_bounds_sweep():
    ch = _random_channels(6, ML=4)
    p = np.array([1.0, 1.0])
    config = _sweep_config("enumerate", 2)
    best_q, best_value = exhaustive_phase_search(ch, p, config)
    swept = analog_sweep(ch, p, PhaseConfig.from_indices([0, 0, 0, 0], 2), config)

    assert best_value == pytest.approx(objective_f(ch, p, best_q), rel=1e-12)
    assert best_value <= objective_f(ch, p, swept) * (1.0 + 1e-12)


def test_exhaustive_search_limits():
    ch = _random_channels(7, ML=7)
    with pytest.raises(ValueError):
        exhaustive_phase_search(ch, np.ones(2), _sweep_config(phase_bits=3))
    with pytest.raises(ValueError):
        exhaustive_phase_search(ch, np.ones(2), _sweep_config(phase_bits=None))
