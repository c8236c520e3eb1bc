"""
Per-agent observation: the ego vehicle and six neighbors, normalized to [0, 1]
"""

import numpy as np

import config
from simulation.road import Blinker, Route

# neighbor block order
SAME_LEADER, SAME_FOLLOWER, LEFT_FRONT, LEFT_REAR, RIGHT_FRONT, RIGHT_REAR = range(6)


def _vehicle_block(ego, other, speed_norm, detection_range):
    distance = abs(other.longitudinal_pos - ego.longitudinal_pos)
    return [
        distance / detection_range,
        other.speed / speed_norm,
        0.0 if other.blinker is Blinker.OFF else 1.0,
        1.0 if other.route is Route.EXIT else 0.0,
    ]


def _fill_block(front, speed_limit, speed_norm):
    # nothing detected: far away, at the speed limit if ahead, standing if behind
    return [1.0, speed_limit / speed_norm if front else 0.0, 0.0, 0.0]


def _lane_blocks(ego, lane, world, lanes, speed_norm, detection_range):
    network = world.network
    if lane is None or (lane != ego.lane and not network.lane_exists(lane, ego.longitudinal_pos, ego.length)):
        return [0.0] * 8
    blocks = []
    for front in (True, False):
        if front:
            other_id = lanes.leader(lane, ego.longitudinal_pos, ego.id)
        else:
            other_id = lanes.follower(lane, ego.longitudinal_pos, ego.id)
        other = world.vehicles[other_id] if other_id is not None else None
        if other is None or abs(other.longitudinal_pos - ego.longitudinal_pos) > detection_range:
            blocks.extend(_fill_block(front, network.speed_limit(lane), speed_norm))
        else:
            blocks.extend(_vehicle_block(ego, other, speed_norm, detection_range))
    return blocks


def build_observation(vehicle_id, world, lanes=None, detection_range=config.DETECTION_RANGE_M):
    """29 features: [speed, pos_x, pos_y, lane_index, destination] + 6 x [distance, speed, blinker, destination]"""
    ego = world.vehicle(vehicle_id)
    network = world.network
    lanes = lanes if lanes is not None else world.lane_index()
    speed_norm = network.freeway_speed_limit
    lateral_span = max(network.lane_count - 1, 1)

    features = [
        ego.speed / speed_norm,
        ego.longitudinal_pos / network.mainline_length,
        network.lateral_rank(ego.lane) / lateral_span,
        ego.lane / lateral_span,
        1.0 if ego.route is Route.EXIT else 0.0,
    ]
    features.extend(_lane_blocks(ego, ego.lane, world, lanes, speed_norm, detection_range))
    features.extend(_lane_blocks(ego, network.left_of(ego.lane), world, lanes, speed_norm, detection_range))
    features.extend(_lane_blocks(ego, network.right_of(ego.lane), world, lanes, speed_norm, detection_range))
    return np.clip(np.asarray(features, dtype=np.float64), 0.0, 1.0)


def build_observations(vehicle_ids, world, lanes=None):
    """Stacked observations, shape (len(vehicle_ids), OBSERVATION_SIZE)"""
    lanes = lanes if lanes is not None else world.lane_index()
    if not vehicle_ids:
        return np.zeros((0, config.OBSERVATION_SIZE))
    return np.stack([build_observation(vid, world, lanes) for vid in vehicle_ids])
