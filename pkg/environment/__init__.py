"""
The weaving area as a multi-agent decision process: actions, observations,
rewards and the episode loop
"""

from .actions import AgentAction
from .observation import build_observation, build_observations
from .reward import RewardBreakdown, StepOutcome, compute_reward
from .weave_env import EpisodeResult, Trajectory, apply_actions, run_episode

__all__ = [
    'AgentAction',
    'build_observation',
    'build_observations',
    'RewardBreakdown',
    'StepOutcome',
    'compute_reward',
    'EpisodeResult',
    'Trajectory',
    'apply_actions',
    'run_episode',
]
