"""
Shared actor-critic network, its optimizer and checkpoints.

The PPO trainer lives in learning.ppo_trainer and is imported from there;
it drives episodes through agents.PolicyAgent, which itself builds on this
package's network.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .optimizer import Adam, clip_grad_norm
from .policy_net import (
    ActionDistribution,
    PolicyParams,
    backward,
    forward,
    log_prob_entropy,
    sample_action,
    sample_actions,
)

__all__ = [
    'load_checkpoint',
    'save_checkpoint',
    'Adam',
    'clip_grad_norm',
    'ActionDistribution',
    'PolicyParams',
    'backward',
    'forward',
    'log_prob_entropy',
    'sample_action',
    'sample_actions',
]
