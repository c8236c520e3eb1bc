"""
Multi-agent PPO: rollouts with the shared policy, GAE, the clipped surrogate,
minibatch Adam updates, reward curve and checkpoints.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

import config
from agents.policy_agent import PolicyAgent
from environment.weave_env import run_episode
from learning.checkpoint import checkpoint_path, load_checkpoint, save_checkpoint
from learning.optimizer import Adam, clip_grad_norm
from learning.policy_net import (
    HeadGradients,
    PolicyParams,
    backward,
    entropy_gradients,
    forward,
    log_prob_entropy,
    log_prob_gradients,
)
from simulation.road import ScenarioConfig
from utils.errors import ConfigError, StructuralError, TrainingFault
from utils.seeding import init_rng, iteration_episode_seeds, iteration_shuffle_rng
from utils.state_manager import log_activity

REWARD_CURVE_COLUMNS = [
    "iteration",
    "total_env_steps",
    "mean_system_reward",
    "clip_fraction",
    "policy_loss",
    "value_loss",
]
TRAINER = "PPO Trainer"


@dataclass
class TrainConfig:
    learning_rate: float = config.LEARNING_RATE
    clip_epsilon: float = config.CLIP_EPSILON
    gamma: float = config.GAMMA
    gae_lambda: float = config.GAE_LAMBDA
    epochs: int = config.EPOCHS_PER_ITER
    minibatch_size: int = config.MINIBATCH_SIZE
    value_coef: float = config.VALUE_COEF
    entropy_coef: float = config.ENTROPY_COEF
    max_grad_norm: float = config.MAX_GRAD_NORM
    sample_size: int = config.SAMPLE_SIZE
    max_iterations: int = config.MAX_ITERATIONS
    checkpoint_every: int = config.CHECKPOINT_EVERY
    hidden_units: int = config.HIDDEN_UNITS
    max_rollout_episodes: int = config.MAX_ROLLOUT_EPISODES
    workers: int = config.ROLLOUT_WORKERS
    seed: int = config.DEFAULT_SEED
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"GAMMA must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.gae_lambda < 1.0:
            raise ConfigError(f"GAE_LAMBDA must lie in (0, 1), got {self.gae_lambda}")
        if self.clip_epsilon <= 0:
            raise ConfigError(f"CLIP_EPSILON must be positive, got {self.clip_epsilon}")
        if self.learning_rate <= 0:
            raise ConfigError(f"LEARNING_RATE must be positive, got {self.learning_rate}")
        for name in ("epochs", "minibatch_size", "sample_size", "checkpoint_every",
                     "hidden_units", "max_rollout_episodes", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name.upper()} must be at least 1")
        if self.max_iterations < 0:
            raise ConfigError("MAX_ITERATIONS must not be negative")


def compute_gae(rewards, values, dones, gamma=config.GAMMA, lam=config.GAE_LAMBDA):
    """
    Generalized advantage estimates and return targets for one trajectory.

    values carries one extra bootstrap entry; a done step does not look past itself.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    steps = len(rewards)
    if len(values) != steps + 1 or len(dones) != steps:
        raise StructuralError(
            f"GAE needs T rewards, T dones and T+1 values; got {steps}, {len(dones)}, {len(values)}"
        )
    advantages = np.zeros(steps)
    running = 0.0
    for t in reversed(range(steps)):
        not_done = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * not_done - values[t]
        running = delta + gamma * lam * not_done * running
        advantages[t] = running
    return advantages, advantages + values[:-1]


def normalize_advantages(advantages):
    advantages = np.asarray(advantages, dtype=np.float64)
    if len(advantages) == 0:
        return advantages
    centered = advantages - advantages.mean()
    std = centered.std()
    return centered / std if std > 0 else centered


def clipped_objective(ratio, advantages, clip_epsilon=config.CLIP_EPSILON):
    """min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A), per sample"""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    return np.minimum(ratio * advantages, clipped * advantages)


@dataclass
class RolloutBuffer:
    """Every agent transition of one iteration, flattened"""

    obs: np.ndarray
    raw_accels: np.ndarray
    lanes: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    episode_rewards: list = field(default_factory=list)

    def __len__(self):
        return len(self.rewards)

    @classmethod
    def from_trajectories(cls, trajectories, episode_rewards, obs_size,
                          gamma=config.GAMMA, lam=config.GAE_LAMBDA):
        parts = {key: [] for key in ("obs", "raw_accels", "lanes", "log_probs", "values",
                                     "rewards", "dones", "advantages", "returns")}
        for trajectory in trajectories:
            if not len(trajectory):
                continue
            values = list(trajectory.values) + [trajectory.bootstrap_value]
            advantages, returns = compute_gae(trajectory.rewards, values, trajectory.dones, gamma, lam)
            parts["obs"].append(np.asarray(trajectory.observations, dtype=np.float64))
            parts["raw_accels"].append(np.asarray(trajectory.raw_accels, dtype=np.float64))
            parts["lanes"].append(np.asarray(trajectory.lanes, dtype=np.int64))
            parts["log_probs"].append(np.asarray(trajectory.log_probs, dtype=np.float64))
            parts["values"].append(np.asarray(trajectory.values, dtype=np.float64))
            parts["rewards"].append(np.asarray(trajectory.rewards, dtype=np.float64))
            parts["dones"].append(np.asarray(trajectory.dones, dtype=bool))
            parts["advantages"].append(advantages)
            parts["returns"].append(returns)
        if not parts["rewards"]:
            empty = {key: np.zeros(0) for key in parts}
            empty["obs"] = np.zeros((0, obs_size))
            empty["lanes"] = np.zeros(0, dtype=np.int64)
            empty["dones"] = np.zeros(0, dtype=bool)
            return cls(**empty, episode_rewards=list(episode_rewards))
        return cls(**{key: np.concatenate(arrays) for key, arrays in parts.items()},
                   episode_rewards=list(episode_rewards))

    def minibatches(self, rng, size):
        order = rng.permutation(len(self))
        for start in range(0, len(order), size):
            yield order[start:start + size]


@dataclass
class LossStats:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float


def ppo_loss(params, obs, raw_accels, lanes, old_log_probs, advantages, returns, cfg):
    """Clipped-surrogate loss on one minibatch; returns (LossStats, gradients)"""
    n = len(advantages)
    dist = forward(params, obs)
    log_probs, entropy = log_prob_entropy(dist, raw_accels, lanes)
    log_ratio = log_probs - old_log_probs
    ratio = np.exp(log_ratio)
    if not np.all(np.isfinite(ratio)):
        raise TrainingFault("non-finite probability ratio", {
            "batch": n,
            "max_log_ratio": float(np.nanmax(np.abs(log_ratio))),
            "log_std": dist.accel_log_std,
        })

    unclipped = ratio * advantages
    objective = clipped_objective(ratio, advantages, cfg.clip_epsilon)
    policy_loss = -float(np.mean(objective))
    value_error = dist.values - returns
    value_loss = float(np.mean(value_error ** 2))
    mean_entropy = float(np.mean(entropy))
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * mean_entropy
    if not math.isfinite(loss):
        raise TrainingFault("non-finite loss", {
            "batch": n, "policy_loss": policy_loss, "value_loss": value_loss,
        })

    # d loss / d log_prob: only where the unclipped term is the active minimum
    d_log_prob = np.where(unclipped <= objective, -advantages * ratio / n, 0.0)
    d_mean, d_log_std, d_logits = log_prob_gradients(dist, raw_accels, lanes)
    e_log_std, e_logits = entropy_gradients(dist)
    entropy_scale = cfg.entropy_coef / n
    head_grads = HeadGradients(
        accel_mean=d_log_prob * d_mean,
        accel_log_std=float(np.sum(d_log_prob * d_log_std) - entropy_scale * np.sum(e_log_std)),
        lane_logits=d_log_prob[:, None] * d_logits - entropy_scale * e_logits,
        values=cfg.value_coef * 2.0 * value_error / n,
    )
    grads = backward(params, dist, head_grads)
    stats = LossStats(
        loss=loss,
        policy_loss=policy_loss,
        value_loss=value_loss,
        entropy=mean_entropy,
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > cfg.clip_epsilon)),
        approx_kl=float(np.mean((ratio - 1.0) - log_ratio)),
    )
    return stats, grads


def _rollout_episode(params, scenario, seed):
    result = run_episode(PolicyAgent(params), scenario, seed=seed)
    return result.trajectories, result.total_system_reward


def collect_rollouts(params, cfg, iteration, executor=None):
    """
    Run episodes until the agent-steps reach cfg.sample_size.

    Episodes are launched in waves of cfg.workers and consumed in index order,
    so the batch is the same for any worker count. An episode without agent
    steps ends collection early.
    """
    seeds = iteration_episode_seeds(cfg.seed, iteration, cfg.max_rollout_episodes)
    trajectories, episode_rewards, steps = [], [], 0
    wave = max(cfg.workers, 1) if executor is not None else 1
    for start in range(0, len(seeds), wave):
        batch = seeds[start:start + wave]
        if executor is not None:
            futures = [executor.submit(_rollout_episode, params, cfg.scenario, s) for s in batch]
            outcomes = [f.result() for f in futures]
        else:
            outcomes = [_rollout_episode(params, cfg.scenario, s) for s in batch]
        for episode_trajectories, system_reward in outcomes:
            episode_steps = sum(len(t) for t in episode_trajectories)
            trajectories.extend(episode_trajectories)
            episode_rewards.append(system_reward)
            steps += episode_steps
            if steps >= cfg.sample_size or episode_steps == 0:
                return trajectories, episode_rewards
    return trajectories, episode_rewards


@dataclass
class TrainerState:
    params: PolicyParams
    optimizer: Adam
    iteration: int = 0
    total_env_steps: int = 0


def train_iteration(state, cfg, executor=None):
    """Collect, estimate advantages, run the epochs of minibatch updates; returns the stats row"""
    iteration = state.iteration + 1
    trajectories, episode_rewards = collect_rollouts(state.params, cfg, iteration, executor)
    buffer = RolloutBuffer.from_trajectories(
        trajectories, episode_rewards, state.params.obs_size, cfg.gamma, cfg.gae_lambda
    )
    state.iteration = iteration
    state.total_env_steps += len(buffer)
    row = {
        "iteration": iteration,
        "total_env_steps": state.total_env_steps,
        "mean_system_reward": float(np.mean(episode_rewards)) if episode_rewards else 0.0,
        "clip_fraction": 0.0,
        "policy_loss": 0.0,
        "value_loss": 0.0,
    }
    if len(buffer) == 0:
        log_activity(TRAINER, "Empty batch", f"iteration {iteration}: no agent steps, update skipped")
        return {**row, "empty_batch": True}

    advantages = normalize_advantages(buffer.advantages)
    rng = iteration_shuffle_rng(cfg.seed, iteration)
    collected = []
    for _ in range(cfg.epochs):
        for idx in buffer.minibatches(rng, cfg.minibatch_size):
            stats, grads = ppo_loss(
                state.params, buffer.obs[idx], buffer.raw_accels[idx], buffer.lanes[idx],
                buffer.log_probs[idx], advantages[idx], buffer.returns[idx], cfg,
            )
            clip_grad_norm(grads, cfg.max_grad_norm)
            state.optimizer.step(state.params, grads)
            collected.append(stats)
    state.params.check_finite()

    row.update(
        clip_fraction=float(np.mean([s.clip_fraction for s in collected])),
        policy_loss=float(np.mean([s.policy_loss for s in collected])),
        value_loss=float(np.mean([s.value_loss for s in collected])),
    )
    loss = float(np.mean([s.loss for s in collected]))
    entropy = float(np.mean([s.entropy for s in collected]))
    approx_kl = float(np.mean([s.approx_kl for s in collected]))
    log_activity(
        TRAINER,
        "Iteration",
        f"{iteration}: reward {row['mean_system_reward']:.3f}, steps {len(buffer)}, "
        f"clip {row['clip_fraction']:.3f}, loss {loss:.4f}, policy {row['policy_loss']:.4f}, "
        f"value {row['value_loss']:.4f}, entropy {entropy:.4f}, kl {approx_kl:.5f}",
    )
    return {**row, "empty_batch": False}


@dataclass
class TrainResult:
    params: PolicyParams
    reward_curve: pd.DataFrame
    checkpoint: Path


def _write_curve(rows, out_dir):
    frame = pd.DataFrame(rows, columns=REWARD_CURVE_COLUMNS)
    frame.to_csv(Path(out_dir) / "reward_curve.csv", index=False)
    return frame


def train(cfg, out_dir, resume_from=None, progress=True):
    """
    Train for cfg.max_iterations iterations, checkpointing every
    cfg.checkpoint_every iterations and at the end. Iteration 0 is the
    initial network. resume_from continues from a checkpoint file with the
    same seed schedule.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    if resume_from is not None:
        params, iteration, optimizer, total_steps = load_checkpoint(resume_from, cfg.learning_rate)
        if params.hidden_units != cfg.hidden_units:
            raise StructuralError(
                f"checkpoint has {params.hidden_units} hidden units, config asks for {cfg.hidden_units}"
            )
        state = TrainerState(params, optimizer, iteration, total_steps)
        curve = Path(resume_from).parent / "reward_curve.csv"
        if curve.is_file():
            previous = pd.read_csv(curve, float_precision="round_trip")
            rows = previous[previous["iteration"] <= iteration].to_dict("records")
        last = Path(resume_from)
        log_activity(TRAINER, "Resumed", f"{resume_from} at iteration {iteration}")
    else:
        params = PolicyParams.initialize(init_rng(cfg.seed), hidden=cfg.hidden_units)
        state = TrainerState(params, Adam(cfg.learning_rate))
        last = save_checkpoint(checkpoint_path(out_dir, 0), state.params, 0, state.optimizer)

    executor = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        remaining = range(state.iteration, cfg.max_iterations)
        for _ in tqdm(remaining, desc="training", unit="iter", disable=not progress):
            row = train_iteration(state, cfg, executor)
            rows.append({key: row[key] for key in REWARD_CURVE_COLUMNS})
            _write_curve(rows, out_dir)
            if state.iteration % cfg.checkpoint_every == 0 or state.iteration == cfg.max_iterations:
                last = save_checkpoint(
                    checkpoint_path(out_dir, state.iteration), state.params, state.iteration,
                    state.optimizer, state.total_env_steps,
                )
    finally:
        if executor is not None:
            executor.shutdown()

    frame = _write_curve(rows, out_dir)
    return TrainResult(state.params, frame, last)
