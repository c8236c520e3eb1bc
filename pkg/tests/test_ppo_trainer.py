"""
Advantage estimation, the clipped surrogate and its gradients, and
end-to-end training runs on tiny scenarios
"""

import numpy as np
import pandas as pd
import pytest

from learning.checkpoint import checkpoint_path, load_checkpoint, save_checkpoint
from learning.optimizer import Adam, clip_grad_norm, global_norm
from learning.policy_net import PolicyParams, forward, log_prob_entropy
from learning.ppo_trainer import (
    TRAINER,
    REWARD_CURVE_COLUMNS,
    TrainConfig,
    TrainerState,
    clipped_objective,
    compute_gae,
    normalize_advantages,
    ppo_loss,
    train,
    train_iteration,
)
from simulation.road import InflowSpec, ScenarioConfig
from utils.errors import CheckpointVersionError, ConfigError, StructuralError
from utils.state_manager import get_activity_log


def tiny_config(**overrides):
    values = dict(
        hidden_units=8,
        sample_size=64,
        minibatch_size=32,
        epochs=2,
        max_rollout_episodes=4,
        max_iterations=2,
        checkpoint_every=1,
        seed=11,
        scenario=ScenarioConfig(episode_steps=40, seed=11),
    )
    values.update(overrides)
    return TrainConfig(**values)


def test_gae_single_step():
    advantages, returns = compute_gae([1.0], [0.5, 2.0], [False], gamma=0.99, lam=0.95)
    assert advantages[0] == pytest.approx(2.48)
    assert returns[0] == pytest.approx(2.98)


def test_gae_two_steps_ending_in_done():
    advantages, returns = compute_gae([1.0, 1.0], [0.0, 0.0, 5.0], [False, True], gamma=0.99, lam=0.95)
    np.testing.assert_allclose(advantages, [1.9405, 1.0])
    np.testing.assert_allclose(returns, [1.9405, 1.0])


def test_gae_length_mismatch():
    with pytest.raises(StructuralError):
        compute_gae([1.0, 1.0], [0.0, 0.0], [False, False])


def test_gae_with_unit_lambda_is_discounted_return_minus_value():
    rng = np.random.default_rng(0)
    gamma = 0.9
    for _ in range(100):
        steps = int(rng.integers(1, 12))
        rewards = rng.normal(size=steps)
        values = rng.normal(size=steps + 1)
        dones = np.zeros(steps, dtype=bool)
        dones[-1] = bool(rng.integers(0, 2))
        advantages, returns = compute_gae(rewards, values, dones, gamma=gamma, lam=1.0)
        for t in range(steps):
            target = sum(gamma ** (k - t) * rewards[k] for k in range(t, steps))
            if not dones[-1]:
                target += gamma ** (steps - t) * values[steps]
            assert advantages[t] == pytest.approx(target - values[t], abs=1e-10)
            assert returns[t] == pytest.approx(target, abs=1e-10)


def test_clipped_objective_examples():
    assert clipped_objective(1.3, 1.0, 0.2) == pytest.approx(1.2)
    assert clipped_objective(0.7, -1.0, 0.2) == pytest.approx(-0.8)


def test_clipped_objective_is_pessimistic():
    rng = np.random.default_rng(1)
    ratio = rng.uniform(0.0, 3.0, 1000)
    advantages = rng.normal(size=1000)
    objective = clipped_objective(ratio, advantages, 0.2)
    assert np.all(objective <= ratio * advantages + 1e-12)
    inside = np.abs(ratio - 1.0) <= 0.2
    np.testing.assert_allclose(objective[inside], (ratio * advantages)[inside])


def test_normalized_advantages():
    normalized = normalize_advantages(np.random.default_rng(2).normal(3.0, 7.0, 500))
    assert abs(normalized.mean()) < 1e-10
    assert abs(normalized.std() - 1.0) < 1e-10


def test_constant_advantages_only_center():
    np.testing.assert_array_equal(normalize_advantages(np.full(4, 2.5)), np.zeros(4))


def _loss_inputs(seed, params):
    rng = np.random.default_rng(seed)
    n = 12
    obs = rng.random((n, 29))
    dist = forward(params, obs)
    raw = dist.accel_mean + rng.normal(size=n)
    lanes = rng.integers(0, 3, n)
    log_probs, _ = log_prob_entropy(dist, raw, lanes)
    ratios = rng.choice([0.3, 1.0, 2.0], n)
    old = log_probs - np.log(ratios)
    advantages = rng.normal(size=n)
    returns = rng.normal(size=n)
    return obs, raw, lanes, old, advantages, returns


def test_identical_policy_has_no_clipping():
    params = PolicyParams.initialize(np.random.default_rng(3), hidden=8)
    obs, raw, lanes, _, advantages, returns = _loss_inputs(4, params)
    log_probs, _ = log_prob_entropy(forward(params, obs), raw, lanes)
    stats, _ = ppo_loss(params, obs, raw, lanes, log_probs, advantages, returns, tiny_config())
    assert stats.policy_loss == pytest.approx(-advantages.mean(), abs=1e-12)
    assert stats.clip_fraction == 0.0


def test_policy_loss_is_the_mean_clipped_objective():
    params = PolicyParams.initialize(np.random.default_rng(5), hidden=8)
    obs, raw, lanes, old, advantages, returns = _loss_inputs(6, params)
    log_probs, _ = log_prob_entropy(forward(params, obs), raw, lanes)
    cfg = tiny_config()
    stats, _ = ppo_loss(params, obs, raw, lanes, old, advantages, returns, cfg)
    expected = clipped_objective(np.exp(log_probs - old), advantages, cfg.clip_epsilon)
    assert stats.policy_loss == pytest.approx(-expected.mean(), abs=1e-12)
    assert stats.clip_fraction > 0.0


@pytest.mark.parametrize("seed", range(10))
def test_ppo_loss_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(50 + seed)
    params = PolicyParams.initialize(rng, hidden=4)
    for array in params.arrays().values():
        array += 0.2 * rng.standard_normal(array.shape)
    params.log_std[:] = 0.1
    inputs = _loss_inputs(60 + seed, params)
    cfg = tiny_config(entropy_coef=0.05, value_coef=0.5)
    _, grads = ppo_loss(params, *inputs, cfg)

    step = 1e-5
    for name, array in params.arrays().items():
        numeric = np.zeros_like(array)
        for idx in np.ndindex(array.shape):
            original = array[idx]
            array[idx] = original + step
            up = ppo_loss(params, *inputs, cfg)[0].loss
            array[idx] = original - step
            down = ppo_loss(params, *inputs, cfg)[0].loss
            array[idx] = original
            numeric[idx] = (up - down) / (2 * step)
        np.testing.assert_allclose(getattr(grads, name), numeric, rtol=1e-4, atol=1e-7, err_msg=name)


def test_clip_grad_norm_scales_to_limit():
    grads = PolicyParams.zeros(hidden=4)
    grads.value_b[:] = 3.0
    grads.mean_b[:] = 4.0
    assert clip_grad_norm(grads, 0.5) == pytest.approx(5.0)
    assert global_norm(grads) == pytest.approx(0.5)


def test_adam_keeps_log_std_in_range():
    params = PolicyParams.zeros(hidden=4)
    params.log_std[:] = 0.99
    grads = params.zeros_like()
    grads.log_std[:] = -1.0
    optimizer = Adam(learning_rate=0.5)
    for _ in range(5):
        optimizer.step(params, grads)
    assert params.log_std[0] == 1.0


def test_train_config_validation():
    with pytest.raises(ConfigError):
        tiny_config(gamma=1.0)
    with pytest.raises(ConfigError):
        tiny_config(minibatch_size=0)


def test_zero_inflow_gives_empty_batch():
    cfg = tiny_config(scenario=ScenarioConfig(inflow=InflowSpec(0.0, 0.0), episode_steps=10))
    params = PolicyParams.initialize(np.random.default_rng(5), hidden=8)
    before = params.copy()
    state = TrainerState(params, Adam(cfg.learning_rate))
    row = train_iteration(state, cfg)
    assert row["empty_batch"]
    assert row["total_env_steps"] == 0
    for name, array in before.arrays().items():
        np.testing.assert_array_equal(getattr(state.params, name), array)


def test_iteration_log_reports_loss_entropy_and_kl():
    cfg = tiny_config()
    params = PolicyParams.initialize(np.random.default_rng(5), hidden=8)
    row = train_iteration(TrainerState(params, Adam(cfg.learning_rate)), cfg)
    assert not row["empty_batch"]
    entry = [e for e in get_activity_log() if e["agent"] == TRAINER][-1]
    assert entry["action"] == "Iteration"
    for field in ("loss", "entropy", "kl"):
        assert f" {field} " in entry["details"]


def test_zero_iterations_writes_initial_checkpoint_only(tmp_path):
    result = train(tiny_config(max_iterations=0), tmp_path, progress=False)
    assert sorted(p.name for p in tmp_path.glob("checkpoint_*.npz")) == ["checkpoint_0000.npz"]
    assert result.checkpoint == checkpoint_path(tmp_path, 0)
    assert list(pd.read_csv(tmp_path / "reward_curve.csv").columns) == REWARD_CURVE_COLUMNS
    assert result.reward_curve.empty


def test_training_is_deterministic(tmp_path):
    first = train(tiny_config(), tmp_path / "a", progress=False)
    second = train(tiny_config(), tmp_path / "b", progress=False)
    pd.testing.assert_frame_equal(first.reward_curve, second.reward_curve)
    for name, array in first.params.arrays().items():
        np.testing.assert_array_equal(getattr(second.params, name), array)
    assert list(first.reward_curve["iteration"]) == [1, 2]
    assert (first.reward_curve["total_env_steps"].diff().dropna() > 0).all()


def test_resume_reproduces_uninterrupted_run(tmp_path):
    straight = train(tiny_config(), tmp_path / "straight", progress=False)
    train(tiny_config(max_iterations=1), tmp_path / "split", progress=False)
    resumed = train(tiny_config(), tmp_path / "split", progress=False,
                    resume_from=checkpoint_path(tmp_path / "split", 1))
    for name, array in straight.params.arrays().items():
        np.testing.assert_array_equal(getattr(resumed.params, name), array)
    pd.testing.assert_frame_equal(straight.reward_curve, resumed.reward_curve, check_dtype=False)


@pytest.mark.slow
def test_worker_count_does_not_change_results(tmp_path):
    single = train(tiny_config(), tmp_path / "one", progress=False)
    pooled = train(tiny_config(workers=2), tmp_path / "two", progress=False)
    for name, array in single.params.arrays().items():
        np.testing.assert_array_equal(getattr(pooled.params, name), array)


def test_checkpoint_round_trip(tmp_path):
    params = PolicyParams.initialize(np.random.default_rng(6), hidden=8)
    optimizer = Adam(1e-3)
    grads = params.zeros_like()
    grads.value_b[:] = 0.5
    optimizer.step(params, grads)
    path = save_checkpoint(tmp_path / "ck.npz", params, 7, optimizer, total_env_steps=123)

    loaded, iteration, restored, steps = load_checkpoint(path, 1e-3)
    assert (iteration, steps, restored.t) == (7, 123, 1)
    for name, array in params.arrays().items():
        np.testing.assert_array_equal(getattr(loaded, name), array)
        assert getattr(loaded, name).shape == array.shape
    np.testing.assert_array_equal(restored.m["value_b"], optimizer.m["value_b"])
    np.testing.assert_array_equal(restored.v["value_b"], optimizer.v["value_b"])


def test_checkpoint_version_mismatch(tmp_path):
    path = tmp_path / "old.npz"
    arrays = {"param/" + name: array for name, array in PolicyParams.zeros(hidden=4).arrays().items()}
    np.savez(path, format_version=np.array(99), iteration=np.array(0), **arrays)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_missing_checkpoint_is_structural(tmp_path):
    with pytest.raises(StructuralError):
        load_checkpoint(tmp_path / "absent.npz")


@pytest.mark.slow
def test_training_raises_system_reward(tmp_path):
    improved = 0
    for seed in (1, 2, 3):
        cfg = TrainConfig(sample_size=4000, max_iterations=50, checkpoint_every=50, seed=seed,
                          scenario=ScenarioConfig(seed=seed))
        curve = train(cfg, tmp_path / f"seed_{seed}", progress=False).reward_curve
        rewards = curve["mean_system_reward"].to_numpy()
        if rewards[-5:].mean() > rewards[:5].mean():
            improved += 1
    assert improved >= 2
