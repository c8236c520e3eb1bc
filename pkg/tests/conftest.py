import pytest

from simulation.road import InflowSpec, RoadNetwork, Route, ScenarioConfig, Vehicle
from simulation.world import WorldState

FREEWAY_LIMIT = 65.0 * 0.44704


def place(world, vid, pos, lane, speed, route=Route.THROUGH, controlled=False):
    """Put a vehicle straight into a world"""
    vehicle = Vehicle(id=vid, longitudinal_pos=pos, lane=lane, speed=speed, route=route,
                      spawn_time=world.time, controlled=controlled)
    world.vehicles[vid] = vehicle
    world.generated_count += 1
    return vehicle


@pytest.fixture
def empty_scenario():
    """Default geometry, no inflow"""
    return ScenarioConfig(inflow=InflowSpec(freeway_rate=0.0, ramp_rate=0.0), episode_steps=20)


@pytest.fixture
def world(empty_scenario):
    return WorldState(empty_scenario)


@pytest.fixture
def short_scenario():
    """Moderate inflow, short episodes"""
    return ScenarioConfig(episode_steps=60, seed=7)


@pytest.fixture
def network():
    return RoadNetwork()
