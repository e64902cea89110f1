import numpy as np
import pytest

from smoothcurate.diagnostics import (
    QualityQuantityInput,
    StateActionSet,
    chunk_noise_floor,
    chunk_variance_ratio,
    conditional_action_variance,
    mixture_noise_floor,
    quality_quantity_curve,
    regret_bound,
    state_action_from_trajectories,
)
from smoothcurate.errors import DomainError, ShapeError
from smoothcurate.synth import SynthConfig, synth_dataset


def test_deterministic_actions_vanish_with_density():
    estimates = []
    for m in (200, 2000, 20000):
        s = np.random.default_rng(0).uniform(size=(m, 2))
        a = np.stack([np.sin(3 * s[:, 0]), s[:, 0] * s[:, 1]], axis=1)
        estimates.append(conditional_action_variance(StateActionSet(s, a), 8))
    assert estimates[0] > estimates[1] > estimates[2]
    assert estimates[2] < 0.05 * estimates[0]


def test_isotropic_repeated_states():
    rng = np.random.default_rng(1)
    sigma = 0.3
    s = np.repeat(rng.uniform(size=(1000, 2)), 100, axis=0)
    a = rng.normal(scale=sigma, size=(100_000, 3))
    est = conditional_action_variance(StateActionSet(s, a), 8)
    assert est == pytest.approx(3 * sigma**2, rel=0.05)


def test_matches_brute_force_oracle(oracles):
    kn = oracles["knn_isotropic"]
    rng = np.random.default_rng(kn["seed"])
    s = rng.uniform(size=(kn["m"], 2))
    a = rng.normal(scale=kn["sigma"], size=(kn["m"], 3))
    assert conditional_action_variance(StateActionSet(s, a), kn["k"]) == pytest.approx(kn["estimate"], abs=1e-12)


def test_operator_mixture_includes_between_group_spread():
    rng = np.random.default_rng(2)
    m, sigma = 20000, 0.1
    s = np.zeros((m, 1))
    group = rng.random(m) < 0.5
    mu = np.where(group, 1.0, -1.0)[:, None]
    a = mu + rng.normal(scale=sigma, size=(m, 1))
    est = conditional_action_variance(StateActionSet(s, a), 8)
    # total variance = within (sigma^2) + between (1.0)
    assert est == pytest.approx(sigma**2 + 1.0, rel=0.05)


def test_true_mean_predictor_reaches_floor():
    # the predictor that outputs the true conditional mean has MSE equal to the floor
    rng = np.random.default_rng(3)
    m = 40000
    s = rng.uniform(size=(m, 2))
    mean = np.stack([np.sin(2 * s[:, 0]), np.cos(3 * s[:, 1]), s[:, 0] * s[:, 1]], axis=1)
    noise_sd = 0.05 + 0.1 * s[:, :1]
    a = mean + rng.normal(size=(m, 3)) * noise_sd
    mse = np.mean(np.sum((a - mean) ** 2, axis=1))
    est = conditional_action_variance(StateActionSet(s, a), 8)
    assert est == pytest.approx(mse, rel=0.05)


def test_knn_argument_checks():
    data = StateActionSet(np.zeros((5, 1)), np.zeros((5, 1)))
    with pytest.raises(ValueError):
        conditional_action_variance(data, 5)
    with pytest.raises(ShapeError):
        StateActionSet(np.zeros((5, 1)), np.zeros((4, 1)))


def test_mixture_floor():
    assert mixture_noise_floor(1.0, 0.2, 9.0) == 0.2
    assert mixture_noise_floor(0.5, 1.0, 9.0) == 5.0
    assert mixture_noise_floor(0.0, 0.2, 9.0) == 9.0
    vals = [mixture_noise_floor(a, 0.2, 9.0) for a in np.linspace(0, 1, 11)]
    assert np.allclose(np.diff(vals), np.diff(vals)[0])
    assert all(0.2 <= v <= 9.0 for v in vals)
    with pytest.raises(DomainError):
        mixture_noise_floor(1.5, 1, 1)


def test_mixture_oracle(oracles):
    for m in oracles["mixture"]:
        assert mixture_noise_floor(m["alpha"], m["clean"], m["noisy"]) == m["floor"]


def test_regret_bound():
    assert regret_bound(10, 0.01) == pytest.approx(1.0)
    assert regret_bound(10, 0.0) == 0.0
    assert regret_bound(20, 0.01) == pytest.approx(4 * regret_bound(10, 0.01))


def test_chunk_floor_and_monte_carlo(oracles):
    assert chunk_noise_floor(1, 0.3) == 0.3
    assert chunk_noise_floor(16, 0.01) == pytest.approx(0.16)
    for hc in (8, 16):
        assert chunk_variance_ratio(hc) == pytest.approx(hc, rel=0.05)
        assert oracles["chunk_ratio"][str(hc)] == pytest.approx(hc, rel=0.05)


def test_quality_quantity_constant_floor():
    curve, k = quality_quantity_curve(QualityQuantityInput([0.1] * 20, 3.0, 1.0, 50.0))
    assert k == 20
    assert np.all(np.diff(curve) < 0)


def test_quality_quantity_crossing_matches_scan():
    N = 50
    floor = 0.01 * np.arange(1, N + 1) / N
    inp = QualityQuantityInput(floor, complexity=2.0, capacity=0.01, demo_length=10.0)
    curve, k = quality_quantity_curve(inp)
    scan = min(range(1, N + 1), key=lambda j: floor[j - 1] + 0.01 * 2.0 / (j * 10.0))
    assert k == scan
    assert 1 < k < N


def test_quality_quantity_zero_capacity():
    floor = [0.5, 0.2, 0.3, 0.1, 0.4]
    _, k = quality_quantity_curve(QualityQuantityInput(floor, 1.0, 0.0, 10.0))
    assert k == 4


def test_quality_quantity_oracle_curves(oracles):
    for c in oracles["quality_quantity"]:
        inp = QualityQuantityInput(c["floor"], c["complexity"], c["capacity"], c["demo_length"])
        assert quality_quantity_curve(inp)[1] == c["k_star"]


def test_quality_quantity_callable():
    inp = QualityQuantityInput(lambda k: 0.001 * k, 1.0, 1.0, 10.0, n_total=30)
    curve, k = quality_quantity_curve(inp)
    assert len(curve) == 30 and 1 < k < 30


def test_state_actions_from_trajectories():
    trajs = synth_dataset(SynthConfig(), 2, seed=0)[:2]
    data = state_action_from_trajectories(trajs)
    assert len(data) == sum(t.length - 1 for t in trajs)
    assert data.states.shape[1] == 3 and data.actions.shape[1] == 3
