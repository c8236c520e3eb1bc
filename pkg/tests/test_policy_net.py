"""
Forward pass, sampling, log-probabilities and hand-written gradients
"""

import math

import numpy as np
import pytest

from learning.policy_net import (
    HeadGradients,
    PolicyParams,
    backward,
    forward,
    log_prob_entropy,
    sample_action,
    sample_actions,
)
from simulation.road import LaneDecision
from utils.errors import StructuralError, TrainingFault


def small_params(seed, hidden=4):
    rng = np.random.default_rng(seed)
    params = PolicyParams.initialize(rng, hidden=hidden)
    for name, array in params.arrays().items():
        if name != "log_std":
            array += 0.3 * rng.standard_normal(array.shape)
    params.log_std[:] = 0.2
    return params


def test_zero_params_give_uniform_lanes_and_zero_mean():
    dist = forward(PolicyParams.zeros(hidden=8), np.full(29, 0.5))
    assert dist.accel_mean[0] == 0.0
    np.testing.assert_allclose(dist.lane_probs[0], [1 / 3, 1 / 3, 1 / 3], atol=1e-15)
    assert dist.lane_probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_forward_is_deterministic():
    params = small_params(1)
    obs = np.random.default_rng(2).random((5, 29))
    a, b = forward(params, obs), forward(params, obs)
    np.testing.assert_array_equal(a.accel_mean, b.accel_mean)
    np.testing.assert_array_equal(a.lane_logits, b.lane_logits)
    np.testing.assert_array_equal(a.values, b.values)


def test_tanh_saturates():
    params = small_params(3)
    params.actor_w1 *= 1e6
    params.actor_b1[:] = 0.0
    obs = np.random.default_rng(4).random((3, 29))
    hidden = forward(params, obs).actor_hidden
    np.testing.assert_allclose(np.abs(hidden), 1.0, atol=1e-9)


def test_wrong_observation_size_is_structural_error():
    with pytest.raises(StructuralError):
        forward(PolicyParams.zeros(hidden=4), np.zeros(28))


def test_log_prob_at_mean_with_unit_std():
    params = small_params(5)
    params.log_std[:] = 0.0
    dist = forward(params, np.random.default_rng(6).random(29))
    lane = int(dist.lane_logits.argmax())
    log_prob, _ = log_prob_entropy(dist, dist.accel_mean.copy(), np.array([lane]))
    expected = -0.5 * math.log(2 * math.pi) + math.log(dist.lane_probs[0, lane])
    assert log_prob[0] == pytest.approx(expected, abs=1e-12)


def test_entropy_closed_forms():
    dist = forward(PolicyParams.zeros(hidden=4), np.zeros(29))
    _, entropy = log_prob_entropy(dist, np.zeros(1), np.zeros(1, dtype=int))
    assert entropy[0] == pytest.approx(math.log(3) + 0.5 * math.log(2 * math.pi * math.e), abs=1e-12)


def test_lane_log_probs_normalize():
    dist = forward(small_params(7), np.random.default_rng(8).random((4, 29)))
    np.testing.assert_allclose(np.exp(dist.lane_log_probs).sum(axis=1), 1.0, atol=1e-12)


def test_uniform_logits_sample_lanes_evenly():
    dist = forward(PolicyParams.zeros(hidden=4), np.zeros((100_000, 29)))
    _, lanes = sample_actions(dist, np.random.default_rng(9))
    freq = np.bincount(lanes, minlength=3) / len(lanes)
    np.testing.assert_allclose(freq, 1 / 3, atol=0.02)


def test_deterministic_sample_is_clamped_mean_and_argmax():
    params = small_params(10)
    params.mean_b[:] = 50.0
    dist = forward(params, np.random.default_rng(11).random(29))
    action, _ = sample_action(dist, np.random.default_rng(12), deterministic=True)
    assert action.accel == 4.0
    assert action.lane_decision is LaneDecision(int(dist.lane_logits.argmax()))


def test_stored_sample_reproduces_its_log_prob():
    dist = forward(small_params(13), np.random.default_rng(14).random(29))
    action, log_prob = sample_action(dist, np.random.default_rng(15))
    again, _ = log_prob_entropy(dist, np.array([action.raw_accel]), np.array([action.lane_decision.value]))
    assert again[0] == log_prob


def _head_loss(params, obs, w):
    dist = forward(params, obs)
    return (np.sum(w["mean"] * dist.accel_mean) + np.sum(w["logits"] * dist.lane_logits)
            + np.sum(w["values"] * dist.values) + w["log_std"] * dist.accel_log_std)


@pytest.mark.parametrize("seed", range(10))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    params = small_params(seed)
    obs = rng.random((6, 29))
    w = {
        "mean": rng.standard_normal(6),
        "logits": rng.standard_normal((6, 3)),
        "values": rng.standard_normal(6),
        "log_std": float(rng.standard_normal()),
    }
    dist = forward(params, obs)
    grads = backward(params, dist, HeadGradients(w["mean"], w["log_std"], w["logits"], w["values"]))

    step = 1e-5
    for name, array in params.arrays().items():
        numeric = np.zeros_like(array)
        for idx in np.ndindex(array.shape):
            original = array[idx]
            array[idx] = original + step
            up = _head_loss(params, obs, w)
            array[idx] = original - step
            down = _head_loss(params, obs, w)
            array[idx] = original
            numeric[idx] = (up - down) / (2 * step)
        np.testing.assert_allclose(getattr(grads, name), numeric, rtol=1e-4, atol=1e-7, err_msg=name)


def test_zero_upstream_gradient_gives_zero_gradients():
    params = small_params(20)
    dist = forward(params, np.random.default_rng(21).random((3, 29)))
    grads = backward(params, dist, HeadGradients(np.zeros(3), 0.0, np.zeros((3, 3)), np.zeros(3)))
    for array in grads.arrays().values():
        assert not array.any()


def test_critic_and_actor_gradients_are_separate():
    params = small_params(22)
    dist = forward(params, np.random.default_rng(23).random((3, 29)))
    value_only = backward(params, dist, HeadGradients(np.zeros(3), 0.0, np.zeros((3, 3)), np.ones(3)))
    for name in ("actor_w1", "actor_b1", "mean_w", "mean_b", "lane_w", "lane_b", "log_std"):
        assert not getattr(value_only, name).any()
    actor_only = backward(params, dist, HeadGradients(np.ones(3), 1.0, np.ones((3, 3)), np.zeros(3)))
    for name in ("critic_w1", "critic_b1", "value_w", "value_b"):
        assert not getattr(actor_only, name).any()


def test_non_finite_gradient_is_training_fault():
    params = small_params(24)
    dist = forward(params, np.random.default_rng(25).random((2, 29)))
    with pytest.raises(TrainingFault) as info:
        backward(params, dist, HeadGradients(np.array([np.nan, 0.0]), 0.0, np.zeros((2, 3)), np.zeros(2)))
    assert "actor_w1" in info.value.diagnostics["parameters"]


def test_log_std_is_clamped():
    params = small_params(26)
    params.log_std[:] = 7.0
    params.clamp_log_std()
    assert params.log_std[0] == 1.0
