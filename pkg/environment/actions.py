"""
The hybrid action an agent sends each step
"""

from dataclasses import dataclass

import config
from simulation.road import LaneDecision


@dataclass(frozen=True)
class AgentAction:
    """
    Acceleration in [-MAX_DECEL, MAX_ACCEL] plus a lane decision.

    raw_accel keeps the unclamped Gaussian sample so the policy ratio can be
    evaluated on exactly what was drawn.
    """

    accel: float
    lane_decision: LaneDecision = LaneDecision.STAY
    raw_accel: float | None = None

    def __post_init__(self):
        if not -config.MAX_DECEL <= self.accel <= config.MAX_ACCEL:
            raise ValueError(f"accel {self.accel} outside [-{config.MAX_DECEL}, {config.MAX_ACCEL}]")

    @classmethod
    def clamped(cls, accel, lane_decision=LaneDecision.STAY, raw_accel=None):
        bounded = min(max(float(accel), -config.MAX_DECEL), config.MAX_ACCEL)
        return cls(bounded, lane_decision, raw_accel)
