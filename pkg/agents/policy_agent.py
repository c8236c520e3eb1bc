"""
Learned and random driving policies
"""

import numpy as np

import config
from agents.base_agent import BaseAgent, PolicyStep
from environment.actions import AgentAction
from learning.policy_net import forward, log_prob_entropy, sample_actions, value_estimates
from simulation.road import LaneDecision


class PolicyAgent(BaseAgent):
    """
    Shared policy: one parameter set drives every agent in the control zone.

    Stochastic mode samples from the Gaussian/categorical heads and records
    log-probabilities and values for training. Deterministic mode takes the
    clamped mean acceleration and the most likely lane decision.
    """

    def __init__(self, params, deterministic=False, name="PPO Policy"):
        super().__init__(name)
        self.params = params
        self.deterministic = deterministic

    def act(self, vehicle_ids, observations, world, rng):
        if not vehicle_ids:
            return PolicyStep(actions={}, log_probs=np.zeros(0), values=np.zeros(0))
        dist = forward(self.params, observations)
        raw_accel, lanes = sample_actions(dist, rng, deterministic=self.deterministic)
        log_probs, _ = log_prob_entropy(dist, raw_accel, lanes)
        actions = {
            vid: AgentAction.clamped(raw_accel[i], LaneDecision(int(lanes[i])), raw_accel=float(raw_accel[i]))
            for i, vid in enumerate(vehicle_ids)
        }
        return PolicyStep(actions=actions, log_probs=log_probs, values=dist.values)

    def value(self, observations):
        if len(observations) == 0:
            return np.zeros(0)
        return value_estimates(self.params, observations)


class RandomAgent(BaseAgent):
    """Uniform acceleration in the action range and a uniform lane decision"""

    def __init__(self, name="Random Policy"):
        super().__init__(name)

    def act(self, vehicle_ids, observations, world, rng):
        accels = rng.uniform(-config.MAX_DECEL, config.MAX_ACCEL, size=len(vehicle_ids))
        lanes = rng.integers(0, len(LaneDecision), size=len(vehicle_ids))
        actions = {
            vid: AgentAction.clamped(accels[i], LaneDecision(int(lanes[i])))
            for i, vid in enumerate(vehicle_ids)
        }
        return PolicyStep(actions=actions)
