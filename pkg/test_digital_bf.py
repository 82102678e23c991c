"""
디지털 빔포밍 테스트
ZF 빔포머, 전력 제약, 사영, Dinkelbach 전력 할당
"""

import numpy as np
import pytest

from config import SystemConfig
from channel import generate_channel_set
from digital_bf import (
    InfeasibleBudget, RankDeficient, constraint_matrix, dinkelbach_inner,
    dinkelbach_power_allocation, equal_power_start, per_bs_power, power_ratio,
    project_feasible, transmit_weights, zf_beamformer,
)
from numerics import SingularMatrix
from power_metrics import block_powers, user_rates


def _random_channel(rng, K, T):
    return (rng.standard_normal((K, T)) + 1j * rng.standard_normal((K, T))) / np.sqrt(2.0)


@pytest.fixture
def no_ris_config():
    return SystemConfig(num_bs=2, antennas_per_bs=4, num_users=3, num_ris=0)


def test_zf_removes_interference():
    rng = np.random.default_rng(0)
    H = _random_channel(rng, 3, 6)
    p = np.array([1.0, 0.5, 2.0])
    state = zf_beamformer(H, p)
    np.testing.assert_allclose(H @ state.zf_directions, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(H @ state.V_D, np.diag(np.sqrt(p)), atol=1e-10)


def test_zf_rates_are_noise_limited():
    rng = np.random.default_rng(1)
    H = _random_channel(rng, 2, 4)
    p = np.array([3.0, 1.0])
    rates = user_rates(H, zf_beamformer(H, p).V_D, noise_power=0.5)
    np.testing.assert_allclose(rates.per_user, np.log2(1.0 + p / 0.5), rtol=1e-10)


def test_transmit_weights_match_inverse_diagonal():
    rng = np.random.default_rng(2)
    H = _random_channel(rng, 3, 5)
    state = zf_beamformer(H, np.ones(3))
    expected = np.real(np.diag(np.linalg.inv(H @ H.conj().T)))
    np.testing.assert_allclose(transmit_weights(state.zf_directions), expected, rtol=1e-10)


def test_rank_deficient_channel():
    H = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]], dtype=complex)
    with pytest.raises(RankDeficient):
        zf_beamformer(H, np.ones(2))
    with pytest.raises(SingularMatrix):
        zf_beamformer(np.ones((3, 2)), np.ones(3))


def test_constraint_matrix_matches_block_powers(no_ris_config):
    rng = np.random.default_rng(3)
    H = _random_channel(rng, 3, 8)
    p = np.array([0.2, 0.3, 0.1])
    state = zf_beamformer(H, p)
    G, budgets = constraint_matrix(state.zf_directions, no_ris_config)
    np.testing.assert_allclose(G @ p, block_powers(state.V_D, no_ris_config), rtol=1e-10)
    assert per_bs_power(state.V_D, 1, no_ris_config) == pytest.approx(float((G @ p)[1]))
    np.testing.assert_allclose(budgets, [no_ris_config.pt_w] * 2)


def test_equal_power_start_is_feasible():
    G = np.array([[1.0, 3.0], [2.0, 0.5]])
    budgets = np.array([1.0, 1.0])
    p = equal_power_start(G, budgets)
    assert np.all(G @ p <= budgets + 1e-12)
    assert p[0] == pytest.approx(p[1])


def test_projection_onto_single_constraint():
    A = np.array([[1.0, 1.0, 1.0]])
    np.testing.assert_allclose(project_feasible(np.array([2.0, 1.0, 0.5]), A), [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(project_feasible(np.array([0.3, -0.2, 0.1]), A), [0.3, 0.0, 0.1])


def test_projection_onto_two_constraints():
    A = np.array([[1.0, 0.5], [0.5, 1.0]])
    x = project_feasible(np.array([2.0, 2.0]), A)
    assert np.all(A @ x <= 1.0 + 1e-9)
    np.testing.assert_allclose(x, [2.0 / 3.0, 2.0 / 3.0], atol=1e-6)


def test_inner_problem_respects_budgets():
    config = SystemConfig(noise_power_w=1.0, pt_w=2.0, num_ris=0)
    G = np.array([[1.0, 2.0], [0.5, 0.5]])
    p = dinkelbach_inner(0.3, G, 1.0, config, budgets=np.array([2.0, 2.0]))
    assert np.all(p >= 0.0)
    assert np.all(G @ p <= 2.0 * (1.0 + 1e-9))
    np.testing.assert_array_equal(dinkelbach_inner(0.0, G, 1.0, config), np.zeros(2))


def test_inner_problem_rejects_nonpositive_budget():
    config = SystemConfig(num_ris=0)
    with pytest.raises(InfeasibleBudget):
        dinkelbach_inner(1.0, np.ones((1, 2)), 1.0, config, budgets=np.array([0.0]))


@pytest.mark.parametrize("pt_w", [1.0, 1e4])
def test_single_user_matches_grid_search(pt_w):
    """K = 1이면 비율을 1차원 격자로 직접 최대화한 값과 일치"""
    config = SystemConfig(
        num_bs=2, antennas_per_bs=2, num_users=1, num_ris=0, pt_w=pt_w, inner_threshold=1e-6
    )
    H = generate_channel_set(config, seed=0).H_D
    state = dinkelbach_power_allocation(H, config)

    G, budgets = constraint_matrix(state.zf_directions, config)
    weights = G.sum(axis=0)
    p_max = float(np.min(budgets / G[:, 0]))
    grid = np.geomspace(p_max * 1e-8, p_max, 200001)
    ratios = np.log2(1.0 + grid / config.noise_power_w) / (
        config.amplifier_factor * weights[0] * grid + config.static_power_w
    )
    best = float(ratios.max())

    assert state.ratio >= best * (1.0 - 1e-5)
    assert state.ratio <= best * (1.0 + 1e-5)


def test_dinkelbach_power_is_feasible_and_ratio_nondecreasing():
    config = SystemConfig(num_bs=3, antennas_per_bs=4, num_users=4, num_ris=0)
    H = generate_channel_set(config, seed=2).H_D
    state = dinkelbach_power_allocation(H, config)
    assert np.all(block_powers(state.V_D, config) <= config.pt_w * (1.0 + 1e-9))
    assert np.all(np.diff(state.ratio_trace) >= 0.0)
    assert state.ratio == pytest.approx(power_ratio(state.power_alloc, transmit_weights(state.zf_directions), config))


def test_ratio_equals_efficiency_over_bandwidth():
    """w_k 가중 비율은 η/B와 같음"""
    from power_metrics import energy_efficiency, total_power

    config = SystemConfig(num_bs=2, antennas_per_bs=4, num_users=3, num_ris=0)
    H = generate_channel_set(config, seed=4).H_D
    state = dinkelbach_power_allocation(H, config)
    rates = user_rates(H, state.V_D, config.noise_power_w)
    eta = energy_efficiency(rates, total_power(config, state.V_D), config.bandwidth_hz)
    assert state.ratio == pytest.approx(eta / config.bandwidth_hz, rel=1e-9)


def test_warm_start_is_scaled_into_budget(no_ris_config):
    H = generate_channel_set(no_ris_config, seed=5).H_D
    state = dinkelbach_power_allocation(H, no_ris_config, p_init=np.full(3, 1e9))
    assert np.all(block_powers(state.V_D, no_ris_config) <= no_ris_config.pt_w * (1.0 + 1e-9))


def test_zero_budget_gives_zero_power(no_ris_config):
    H = generate_channel_set(no_ris_config, seed=0).H_D
    state = dinkelbach_power_allocation(H, no_ris_config.with_updates(pt_w=0.0))
    np.testing.assert_array_equal(state.power_alloc, np.zeros(3))
    assert state.ratio == 0.0


def test_negative_budget_raises(no_ris_config):
    H = generate_channel_set(no_ris_config, seed=0).H_D
    with pytest.raises(InfeasibleBudget):
        dinkelbach_power_allocation(H, no_ris_config.with_updates(pt_w=-1.0))


def test_joint_budget_for_das_layout():
    config = SystemConfig(
        num_bs=2, antennas_per_bs=2, num_users=3, num_ris=0,
        das_sites=2, das_antennas_per_site=4, joint_power_budget=True,
    )
    H = generate_channel_set(config, seed=1).H_D
    state = dinkelbach_power_allocation(H, config)
    assert float(np.sum(np.abs(state.V_D) ** 2)) <= config.num_bs * config.pt_w * (1.0 + 1e-9)
