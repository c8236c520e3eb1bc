"""
Shared actor-critic network in numpy with hand-written gradients.

Actor: tanh hidden layer, then a Gaussian acceleration mean and three lane
logits, with one learnable log-std shared by every state. Critic: its own
tanh hidden layer and a scalar value. Rows are samples throughout, so a batch
of observations has shape (N, obs_size).
"""

import math
from dataclasses import dataclass, fields

import numpy as np

import config
from environment.actions import AgentAction
from simulation.road import LaneDecision
from utils.errors import StructuralError, TrainingFault

LANE_CHOICES = len(LaneDecision)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class PolicyParams:
    actor_w1: np.ndarray
    actor_b1: np.ndarray
    mean_w: np.ndarray
    mean_b: np.ndarray
    lane_w: np.ndarray
    lane_b: np.ndarray
    log_std: np.ndarray
    critic_w1: np.ndarray
    critic_b1: np.ndarray
    value_w: np.ndarray
    value_b: np.ndarray

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def initialize(cls, rng, obs_size=config.OBSERVATION_SIZE, hidden=config.HIDDEN_UNITS,
                   log_std=config.INITIAL_LOG_STD):
        """Orthogonal trunks, output layers scaled by 0.01, zero biases"""
        trunk_gain = math.sqrt(2.0)
        return cls(
            actor_w1=_orthogonal(rng, (obs_size, hidden), trunk_gain),
            actor_b1=np.zeros(hidden),
            mean_w=_orthogonal(rng, (hidden, 1), 0.01),
            mean_b=np.zeros(1),
            lane_w=_orthogonal(rng, (hidden, LANE_CHOICES), 0.01),
            lane_b=np.zeros(LANE_CHOICES),
            log_std=np.full(1, float(log_std)),
            critic_w1=_orthogonal(rng, (obs_size, hidden), trunk_gain),
            critic_b1=np.zeros(hidden),
            value_w=_orthogonal(rng, (hidden, 1), 1.0),
            value_b=np.zeros(1),
        )

    @classmethod
    def zeros(cls, obs_size=config.OBSERVATION_SIZE, hidden=config.HIDDEN_UNITS):
        return cls(
            actor_w1=np.zeros((obs_size, hidden)),
            actor_b1=np.zeros(hidden),
            mean_w=np.zeros((hidden, 1)),
            mean_b=np.zeros(1),
            lane_w=np.zeros((hidden, LANE_CHOICES)),
            lane_b=np.zeros(LANE_CHOICES),
            log_std=np.zeros(1),
            critic_w1=np.zeros((obs_size, hidden)),
            critic_b1=np.zeros(hidden),
            value_w=np.zeros((hidden, 1)),
            value_b=np.zeros(1),
        )

    @classmethod
    def from_arrays(cls, arrays):
        missing = [name for name in cls.names() if name not in arrays]
        if missing:
            raise StructuralError(f"missing parameter arrays: {missing}")
        return cls(**{name: np.array(arrays[name], dtype=np.float64) for name in cls.names()})

    @property
    def obs_size(self):
        return self.actor_w1.shape[0]

    @property
    def hidden_units(self):
        return self.actor_w1.shape[1]

    def arrays(self):
        return {name: getattr(self, name) for name in self.names()}

    def copy(self):
        return PolicyParams(**{name: array.copy() for name, array in self.arrays().items()})

    def zeros_like(self):
        return PolicyParams(**{name: np.zeros_like(array) for name, array in self.arrays().items()})

    def clamp_log_std(self):
        np.clip(self.log_std, config.LOG_STD_MIN, config.LOG_STD_MAX, out=self.log_std)
        return self

    def non_finite(self):
        return [name for name, array in self.arrays().items() if not np.all(np.isfinite(array))]

    def check_finite(self):
        bad = self.non_finite()
        if bad:
            raise TrainingFault("non-finite policy parameters", {"parameters": ",".join(bad)})
        return self


def _orthogonal(rng, shape, gain):
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


@dataclass
class ActionDistribution:
    """Head outputs for a batch, plus the activations backward needs"""

    accel_mean: np.ndarray
    accel_log_std: float
    lane_logits: np.ndarray
    values: np.ndarray
    obs: np.ndarray
    actor_hidden: np.ndarray
    critic_hidden: np.ndarray

    def __len__(self):
        return len(self.accel_mean)

    @property
    def accel_std(self):
        return math.exp(self.accel_log_std)

    @property
    def lane_log_probs(self):
        shifted = self.lane_logits - self.lane_logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    @property
    def lane_probs(self):
        return np.exp(self.lane_log_probs)


def _as_batch(params, obs):
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if obs.ndim != 2 or obs.shape[1] != params.obs_size:
        raise StructuralError(f"observation shape {obs.shape} does not match network input {params.obs_size}")
    return obs


def forward(params, obs):
    obs = _as_batch(params, obs)
    actor_hidden = np.tanh(obs @ params.actor_w1 + params.actor_b1)
    critic_hidden = np.tanh(obs @ params.critic_w1 + params.critic_b1)
    log_std = float(np.clip(params.log_std[0], config.LOG_STD_MIN, config.LOG_STD_MAX))
    return ActionDistribution(
        accel_mean=(actor_hidden @ params.mean_w + params.mean_b)[:, 0],
        accel_log_std=log_std,
        lane_logits=actor_hidden @ params.lane_w + params.lane_b,
        values=(critic_hidden @ params.value_w + params.value_b)[:, 0],
        obs=obs,
        actor_hidden=actor_hidden,
        critic_hidden=critic_hidden,
    )


def value_estimates(params, obs):
    obs = _as_batch(params, obs)
    hidden = np.tanh(obs @ params.critic_w1 + params.critic_b1)
    return (hidden @ params.value_w + params.value_b)[:, 0]


def sample_actions(dist, rng, deterministic=False):
    """
    Pre-clamp accelerations and lane indices for the whole batch.

    Stochastic: mean + std * z with z ~ N(0, 1), lanes by inverse CDF on a
    uniform draw. Deterministic: clamped mean and the most likely lane.
    """
    if deterministic:
        raw = np.clip(dist.accel_mean, -config.MAX_DECEL, config.MAX_ACCEL)
        return raw, dist.lane_logits.argmax(axis=1)
    n = len(dist)
    raw = dist.accel_mean + dist.accel_std * rng.standard_normal(n)
    cdf = np.cumsum(dist.lane_probs, axis=1)
    u = rng.random(n)
    lanes = (cdf[:, :-1] <= u[:, None]).sum(axis=1)
    return raw, lanes


def sample_action(dist, rng, deterministic=False):
    """One AgentAction and its joint log-probability, from a single-row distribution"""
    raw, lanes = sample_actions(dist, rng, deterministic)
    log_prob, _ = log_prob_entropy(dist, raw, lanes)
    action = AgentAction.clamped(raw[0], LaneDecision(int(lanes[0])), raw_accel=float(raw[0]))
    return action, float(log_prob[0])


def log_prob_entropy(dist, raw_accel, lanes):
    """Factored log-probability of (pre-clamp accel, lane) and the joint entropy, per row"""
    raw_accel = np.asarray(raw_accel, dtype=np.float64)
    lanes = np.asarray(lanes, dtype=np.int64)
    if raw_accel.shape != dist.accel_mean.shape or lanes.shape != dist.accel_mean.shape:
        raise StructuralError("action batch does not match distribution batch")
    z = (raw_accel - dist.accel_mean) / dist.accel_std
    log_pi_lane = dist.lane_log_probs
    gaussian = -0.5 * z * z - dist.accel_log_std - HALF_LOG_2PI
    categorical = log_pi_lane[np.arange(len(lanes)), lanes]
    gaussian_entropy = 0.5 + HALF_LOG_2PI + dist.accel_log_std
    lane_entropy = -(np.exp(log_pi_lane) * log_pi_lane).sum(axis=1)
    return gaussian + categorical, gaussian_entropy + lane_entropy


@dataclass
class HeadGradients:
    """d(loss)/d(head output) for every row of a batch"""

    accel_mean: np.ndarray
    accel_log_std: float
    lane_logits: np.ndarray
    values: np.ndarray


def log_prob_gradients(dist, raw_accel, lanes):
    """d log_prob / d(mean, log_std, logits), per row"""
    z = (np.asarray(raw_accel, dtype=np.float64) - dist.accel_mean) / dist.accel_std
    d_logits = -dist.lane_probs
    d_logits[np.arange(len(lanes)), np.asarray(lanes, dtype=np.int64)] += 1.0
    return z / dist.accel_std, z * z - 1.0, d_logits


def entropy_gradients(dist):
    """d entropy / d(log_std, logits), per row"""
    log_p = dist.lane_log_probs
    p = np.exp(log_p)
    lane_entropy = -(p * log_p).sum(axis=1, keepdims=True)
    return np.ones(len(dist)), -p * (log_p + lane_entropy)


def backward(params, dist, head_grads):
    """Parameter gradients of a scalar loss given its gradients at the heads"""
    d_mean = np.asarray(head_grads.accel_mean, dtype=np.float64).reshape(-1, 1)
    d_logits = np.asarray(head_grads.lane_logits, dtype=np.float64)
    d_values = np.asarray(head_grads.values, dtype=np.float64).reshape(-1, 1)
    if not (len(d_mean) == len(d_logits) == len(d_values) == len(dist)):
        raise StructuralError("head gradient batch does not match distribution batch")

    h = dist.actor_hidden
    d_h = d_mean @ params.mean_w.T + d_logits @ params.lane_w.T
    d_pre = d_h * (1.0 - h * h)

    hc = dist.critic_hidden
    d_hc = d_values @ params.value_w.T
    d_pre_c = d_hc * (1.0 - hc * hc)

    grads = PolicyParams(
        actor_w1=dist.obs.T @ d_pre,
        actor_b1=d_pre.sum(axis=0),
        mean_w=h.T @ d_mean,
        mean_b=d_mean.sum(axis=0),
        lane_w=h.T @ d_logits,
        lane_b=d_logits.sum(axis=0),
        log_std=np.full(1, float(head_grads.accel_log_std)),
        critic_w1=dist.obs.T @ d_pre_c,
        critic_b1=d_pre_c.sum(axis=0),
        value_w=hc.T @ d_values,
        value_b=d_values.sum(axis=0),
    )
    bad = grads.non_finite()
    if bad:
        raise TrainingFault(
            "non-finite gradient",
            {"parameters": ",".join(bad), "batch": len(dist), "log_std": dist.accel_log_std},
        )
    return grads
