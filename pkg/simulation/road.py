"""
Road geometry, vehicle state and the scenario parameters of the weaving area
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import config
from utils.errors import ConfigError

NO_LEADER_GAP = math.inf


class Route(Enum):
    THROUGH = "ThroughFreeway"
    EXIT = "ExitOffRamp"
    ENTER = "EnterFromOnRamp"


class Blinker(Enum):
    OFF = 0
    LEFT = 1
    RIGHT = 2


class LaneDecision(Enum):
    STAY = 0
    LEFT = 1
    RIGHT = 2


@dataclass(frozen=True)
class RoadNetwork:
    """
    Freeway weaving segment: mainline lanes plus one auxiliary lane joining
    the on-ramp gore to the off-ramp gore. Lane 0 is the rightmost mainline
    lane; the auxiliary lane has index ``mainline_lanes`` and lies right of lane 0.
    """

    upstream_length: float = config.UPSTREAM_LENGTH_M
    weave_length: float = config.WEAVE_LENGTH_M
    downstream_length: float = config.DOWNSTREAM_LENGTH_M
    mainline_lanes: int = config.MAINLINE_LANES
    freeway_speed_limit: float = config.FREEWAY_SPEED_LIMIT_MPH * config.MPH_TO_MPS
    ramp_speed_limit: float = config.RAMP_SPEED_LIMIT_MPH * config.MPH_TO_MPS
    control_upstream_margin: float = config.CONTROL_UPSTREAM_MARGIN_M
    control_downstream_margin: float = config.CONTROL_DOWNSTREAM_MARGIN_M

    def __post_init__(self):
        if min(self.upstream_length, self.weave_length, self.downstream_length) <= 0:
            raise ConfigError("segment lengths must be positive")
        if self.mainline_lanes < 1:
            raise ConfigError("MAINLINE_LANES must be at least 1")
        if self.freeway_speed_limit <= 0 or self.ramp_speed_limit <= 0:
            raise ConfigError("speed limits must be positive")
        start, end = self.control_zone
        if not 0.0 <= start < end <= self.mainline_length:
            raise ConfigError(
                f"control zone [{start}, {end}] must lie inside [0, {self.mainline_length}]"
            )

    @property
    def mainline_length(self):
        return self.upstream_length + self.weave_length + self.downstream_length

    @property
    def on_ramp_gore(self):
        return self.upstream_length

    @property
    def off_ramp_gore(self):
        return self.upstream_length + self.weave_length

    @property
    def aux_lane(self):
        return self.mainline_lanes

    @property
    def lane_count(self):
        return self.mainline_lanes + 1

    @property
    def control_zone(self):
        return (
            self.on_ramp_gore - self.control_upstream_margin,
            self.off_ramp_gore + self.control_downstream_margin,
        )

    def in_control_zone(self, pos):
        start, end = self.control_zone
        return start <= pos <= end

    def lane_exists(self, lane, front_pos, length=config.VEHICLE_LENGTH_M):
        """Whether a vehicle with its front at front_pos fits on the lane"""
        if 0 <= lane < self.mainline_lanes:
            return True
        if lane == self.aux_lane:
            return self.on_ramp_gore <= front_pos - length and front_pos <= self.off_ramp_gore
        return False

    def lateral_rank(self, lane):
        """Right-to-left lateral order: auxiliary lane 0, mainline lane k -> k + 1"""
        return 0 if lane == self.aux_lane else lane + 1

    def left_of(self, lane):
        if lane == self.aux_lane:
            return 0
        return lane + 1 if lane + 1 < self.mainline_lanes else None

    def right_of(self, lane):
        if lane == self.aux_lane:
            return None
        return lane - 1 if lane > 0 else self.aux_lane

    def adjacent_lane(self, lane, decision):
        if decision is LaneDecision.LEFT:
            return self.left_of(lane)
        if decision is LaneDecision.RIGHT:
            return self.right_of(lane)
        return lane

    def speed_limit(self, lane):
        return self.freeway_speed_limit


@dataclass(frozen=True)
class DriverParams:
    """IDM car-following and gap-acceptance parameters of the baseline human driver"""

    desired_speed: float = config.FREEWAY_SPEED_LIMIT_MPH * config.MPH_TO_MPS
    time_headway: float = config.IDM_TIME_HEADWAY_S
    min_gap: float = config.IDM_MIN_GAP_M
    accel: float = config.IDM_ACCEL
    comfort_decel: float = config.IDM_COMFORT_DECEL
    delta: float = config.IDM_DELTA
    lane_change_gain: float = config.LC_ACCEL_GAIN
    lead_margin: float = config.LC_LEAD_MARGIN_M
    lag_margin: float = config.LC_LAG_MARGIN_M
    exit_lookahead: float = config.LC_EXIT_LOOKAHEAD_M

    def __post_init__(self):
        positive = (self.desired_speed, self.min_gap, self.accel, self.comfort_decel, self.delta)
        if min(positive) <= 0:
            raise ConfigError("IDM parameters must be positive")
        if self.time_headway < 0.5:
            raise ConfigError("IDM_TIME_HEADWAY_S must be at least 0.5 s")
        if min(self.lead_margin, self.lag_margin, self.lane_change_gain) < 0:
            raise ConfigError("lane-change margins must be non-negative")


@dataclass(frozen=True)
class InflowSpec:
    freeway_rate: float = config.FREEWAY_INFLOW_VPHPL
    ramp_rate: float = config.RAMP_INFLOW_VPHPL
    exit_fraction: float = config.EXIT_FRACTION
    min_spawn_headway: float = config.MIN_SPAWN_HEADWAY_S

    def __post_init__(self):
        if self.freeway_rate < 0 or self.ramp_rate < 0:
            raise ConfigError("inflow rates must be non-negative")
        if not 0.0 <= self.exit_fraction <= 1.0:
            raise ConfigError("EXIT_FRACTION must lie in [0, 1]")
        if self.min_spawn_headway < 0:
            raise ConfigError("MIN_SPAWN_HEADWAY_S must be non-negative")

    def mean_headway(self, rate):
        return math.inf if rate <= 0 else 3600.0 / rate


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a world needs to be built and stepped"""

    network: RoadNetwork = field(default_factory=RoadNetwork)
    inflow: InflowSpec = field(default_factory=InflowSpec)
    driver: DriverParams = field(default_factory=DriverParams)
    seed: int = config.DEFAULT_SEED
    episode_steps: int = config.EPISODE_STEPS
    dt: float = config.TIME_STEP_S

    def __post_init__(self):
        if self.episode_steps < 0:
            raise ConfigError("EPISODE_STEPS must be non-negative")
        if self.dt <= 0:
            raise ConfigError("TIME_STEP_S must be positive")


@dataclass
class Vehicle:
    id: str
    longitudinal_pos: float
    lane: int
    speed: float
    route: Route
    spawn_time: float
    accel: float = 0.0
    length: float = config.VEHICLE_LENGTH_M
    blinker: Blinker = Blinker.OFF
    controlled: bool = False
    exit_time: float | None = None
    intent: LaneDecision = LaneDecision.STAY

    @property
    def rear_pos(self):
        return self.longitudinal_pos - self.length
