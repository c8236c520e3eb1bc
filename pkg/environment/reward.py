"""
Per-agent reward: speed, lane position, lane-change, improper-intent,
emergency-brake and headway terms with their weights
"""

import math
from dataclasses import dataclass, field

import config
from simulation.road import Route


@dataclass(frozen=True)
class RewardBreakdown:
    v: float
    l: float
    c: float = 0.0
    s: float = 0.0
    b: float = 0.0
    h: float = 0.0
    weights: dict = field(default_factory=lambda: dict(config.REWARD_WEIGHTS))

    @property
    def total(self):
        w = self.weights
        return (w["v"] * self.v + w["l"] * self.l + w["c"] * self.c
                + w["s"] * self.s + w["b"] * self.b + w["h"] * self.h)

    def as_row(self):
        return {"v_i": self.v, "l_i": self.l, "c_i": self.c, "s_i": self.s,
                "b_i": self.b, "h_i": self.h, "total": self.total}


@dataclass(frozen=True)
class StepOutcome:
    """What happened to one agent during the step"""

    lane_changed: bool = False
    improper_intent: bool = False
    emergency_brake: bool = False


def desired_lanes(route, network):
    if route is Route.EXIT:
        return frozenset({0, network.aux_lane})
    return frozenset(range(network.mainline_lanes))


def lane_reward(d_i, on_desired_lane, d_max=config.WEAVE_LENGTH_M):
    """1 - d/d_max on a desired lane, -d/d_max otherwise; d clamped to [0, d_max]"""
    d = min(max(d_i, 0.0), d_max)
    return 1.0 - d / d_max if on_desired_lane else -d / d_max


def headway_penalty(t_i, t_min=config.MIN_TIME_HEADWAY_S):
    """min((t - t_min) / t_min, 0); no leader (t = inf) costs nothing"""
    if math.isinf(t_i):
        return 0.0
    return min((t_i - t_min) / t_min, 0.0)


def time_headway(gap, speed, speed_floor=config.HEADWAY_SPEED_FLOOR):
    if math.isinf(gap):
        return math.inf
    return max(gap, 0.0) / max(speed, speed_floor)


def compute_reward(vehicle, outcome, world, lanes=None, weights=None):
    """Reward of one agent from its post-step state and the step's events"""
    network = world.network
    d_i = vehicle.longitudinal_pos - network.on_ramp_gore
    on_desired = vehicle.lane in desired_lanes(vehicle.route, network)

    if vehicle.id in world.vehicles:
        lanes = lanes if lanes is not None else world.lane_index()
        gap, _, _ = world.gap_ahead(vehicle, vehicle.lane, lanes)
    else:
        gap = math.inf

    return RewardBreakdown(
        v=vehicle.speed,
        l=lane_reward(d_i, on_desired, network.weave_length),
        c=-1.0 if outcome.lane_changed else 0.0,
        s=-1.0 if outcome.improper_intent else 0.0,
        b=-1.0 if outcome.emergency_brake else 0.0,
        h=headway_penalty(time_headway(gap, vehicle.speed)),
        weights=dict(weights or config.REWARD_WEIGHTS),
    )
