from .base_agent import BaseAgent, PolicyStep
from .human_driver_agent import HumanDriverAgent
from .policy_agent import PolicyAgent, RandomAgent

__all__ = [
    'BaseAgent',
    'PolicyStep',
    'HumanDriverAgent',
    'PolicyAgent',
    'RandomAgent',
]
