"""
Microscopic simulation of a freeway weaving area.

Geometry, vehicle kinematics, the baseline human driver, inflow generation
and the collision-prevention layer that bounds every command.
"""

from .driver_models import (
    baseline_acceleration,
    baseline_lane_decision,
    idm_acceleration,
    lane_change_feasible,
    safe_acceleration_bound,
)
from .episode_log import EpisodeLog
from .road import Blinker, DriverParams, InflowSpec, LaneDecision, RoadNetwork, Route, ScenarioConfig, Vehicle
from .world import Command, Event, EventKind, WorldState, spawn_inflow, step_world

__all__ = [
    'baseline_acceleration',
    'baseline_lane_decision',
    'idm_acceleration',
    'lane_change_feasible',
    'safe_acceleration_bound',
    'EpisodeLog',
    'Blinker',
    'DriverParams',
    'InflowSpec',
    'LaneDecision',
    'RoadNetwork',
    'Route',
    'ScenarioConfig',
    'Vehicle',
    'Command',
    'Event',
    'EventKind',
    'WorldState',
    'spawn_inflow',
    'step_world',
]
