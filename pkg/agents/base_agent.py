from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from utils.state_manager import log_activity


@dataclass
class PolicyStep:
    """Actions for one step, keyed by vehicle id, plus what the learner needs"""

    actions: dict
    log_probs: np.ndarray | None = None
    values: np.ndarray | None = None


class BaseAgent(ABC):
    """
    Base class for all driving policies in the weaving simulator.
    Provides common functionality and enforces an interface.
    """

    # False means the simulator's human driver model drives every vehicle
    controls_vehicles = True

    def __init__(self, name):
        self.name = name

    def log_activity(self, action, details=""):
        """Log agent activity for debugging and monitoring"""
        return log_activity(self.name, action, details)

    @abstractmethod
    def act(self, vehicle_ids, observations, world, rng):
        """
        Choose an AgentAction for every vehicle id.
        observations has one row per id, in the same order.
        """

    def value(self, observations):
        """State-value estimates; policies without a critic return zeros"""
        return np.zeros(len(observations))
