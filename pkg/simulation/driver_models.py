"""
Car-following, collision prevention and lane-change rules.

The baseline human driver follows the Intelligent Driver Model and changes
lanes by route need or acceleration incentive, subject to gap acceptance.
The same safe-speed rule bounds every command, human or learned.
"""

import math

import config
from simulation.road import LaneDecision, Route
from utils.errors import InputDomainError, StructuralError

MIN_IDM_GAP = 1e-3


def idm_acceleration(ego_speed, gap, leader_speed, params, max_decel=config.PHYSICAL_MAX_DECEL):
    """
    IDM acceleration a*(1 - (v/v0)^delta - (s*/gap)^2), clamped to [-max_decel, a].

    gap may be NO_LEADER_GAP (+inf) when nothing is ahead.
    """
    if not (math.isfinite(ego_speed) and math.isfinite(leader_speed)):
        raise InputDomainError(f"non-finite speed: ego={ego_speed}, leader={leader_speed}")
    if math.isnan(gap) or gap == -math.inf:
        raise InputDomainError(f"invalid gap: {gap}")
    if ego_speed < 0:
        raise InputDomainError(f"negative ego speed: {ego_speed}")

    free_road = (ego_speed / params.desired_speed) ** params.delta
    if math.isinf(gap):
        interaction = 0.0
    else:
        approach = ego_speed * (ego_speed - leader_speed) / (2.0 * math.sqrt(params.accel * params.comfort_decel))
        s_star = params.min_gap + max(0.0, ego_speed * params.time_headway + approach)
        interaction = (s_star / max(gap, MIN_IDM_GAP)) ** 2

    accel = params.accel * (1.0 - free_road - interaction)
    return min(max(accel, -max_decel), params.accel)


def stopping_distance(speed, decel, dt):
    """Distance covered while braking at decel under the semi-implicit update"""
    if speed <= 0:
        return 0.0
    n = math.floor(speed / (decel * dt))
    return dt * (n * speed - decel * dt * n * (n + 1) / 2.0)


def safe_speed(gap, leader_speed, min_gap, dt, decel=config.PHYSICAL_MAX_DECEL):
    """Largest next-step speed that can still stop min_gap behind a leader braking at decel"""
    if math.isinf(gap):
        return math.inf
    room = gap - min_gap + stopping_distance(leader_speed, decel, dt)
    if room <= 0:
        return 0.0
    brake_step = decel * dt
    return -brake_step + math.sqrt(brake_step * brake_step + 2.0 * decel * room)


def safe_acceleration_bound(ego, leader_gap, leader_speed, dt,
                            min_gap=config.IDM_MIN_GAP_M,
                            max_accel=config.MAX_ACCEL,
                            decel=config.PHYSICAL_MAX_DECEL):
    """Maximum acceleration after which ego can still stop behind its leader"""
    if math.isinf(leader_gap):
        return max_accel
    next_speed = safe_speed(leader_gap, leader_speed, min_gap, dt, decel)
    return min((next_speed - ego.speed) / dt, max_accel)


def lane_change_feasible(vehicle, target_lane, world, lanes=None):
    """
    Whether vehicle can move into target_lane right now without a collision.

    The target gap must hold the vehicle with min-gap margins, the vehicle must
    be able to stay safe behind its new leader, and the new follower must not
    need more than the action-space deceleration to stay safe behind it.
    """
    network = world.network
    if target_lane is None or target_lane not in (network.left_of(vehicle.lane), network.right_of(vehicle.lane)):
        raise StructuralError(f"lane {target_lane} is not adjacent to lane {vehicle.lane} for {vehicle.id}")
    if not network.lane_exists(target_lane, vehicle.longitudinal_pos, vehicle.length):
        raise StructuralError(f"lane {target_lane} does not exist at {vehicle.longitudinal_pos:.1f} m")

    lanes = lanes if lanes is not None else world.lane_index()
    min_gap = world.driver.min_gap

    gap, leader_speed, _ = world.gap_ahead(vehicle, target_lane, lanes)
    if gap < min_gap:
        return False
    if safe_acceleration_bound(vehicle, gap, leader_speed, world.dt, min_gap) < -config.PHYSICAL_MAX_DECEL:
        return False

    lag, follower_id = world.gap_behind(vehicle, target_lane, lanes)
    if follower_id is None:
        return True
    if lag < min_gap:
        return False
    follower = world.vehicles[follower_id]
    return safe_acceleration_bound(follower, lag, vehicle.speed, world.dt, min_gap) >= -config.MAX_DECEL


def baseline_acceleration(vehicle, world, params, lanes=None, lane=None):
    """IDM acceleration toward the leader on lane (default: its own), or the end of a closing lane"""
    lanes = lanes if lanes is not None else world.lane_index()
    gap, leader_speed, _ = world.gap_ahead(vehicle, vehicle.lane if lane is None else lane, lanes)
    return idm_acceleration(vehicle.speed, gap, leader_speed, params)


def _route_direction(vehicle, network, params):
    """Lane change the route forces on the vehicle, if any"""
    if vehicle.lane == network.aux_lane:
        return None if vehicle.route is Route.EXIT else LaneDecision.LEFT
    if vehicle.route is Route.EXIT:
        to_gore = network.off_ramp_gore - vehicle.longitudinal_pos
        if 0 <= to_gore <= params.exit_lookahead:
            return LaneDecision.RIGHT
    return None


def _gap_accepted(vehicle, target_lane, world, params, lanes):
    if not lane_change_feasible(vehicle, target_lane, world, lanes):
        return False
    lead, _, _ = world.gap_ahead(vehicle, target_lane, lanes)
    lag, _ = world.gap_behind(vehicle, target_lane, lanes)
    min_gap = world.driver.min_gap
    return lead >= min_gap + params.lead_margin and lag >= min_gap + params.lag_margin


def baseline_lane_decision(vehicle, world, params, lanes=None):
    """Human lane choice: route-forced changes first, then incentive-driven ones"""
    network = world.network
    lanes = lanes if lanes is not None else world.lane_index()
    pos = vehicle.longitudinal_pos

    forced = _route_direction(vehicle, network, params)
    if forced is not None:
        target = network.adjacent_lane(vehicle.lane, forced)
        if target is None or not network.lane_exists(target, pos, vehicle.length):
            return LaneDecision.STAY
        return forced if _gap_accepted(vehicle, target, world, params, lanes) else LaneDecision.STAY
    if vehicle.route is Route.EXIT and pos <= network.off_ramp_gore and vehicle.lane in (0, network.aux_lane):
        # already where the exit needs it
        return LaneDecision.STAY

    gap, leader_speed, _ = world.gap_ahead(vehicle, vehicle.lane, lanes)
    current = idm_acceleration(vehicle.speed, gap, leader_speed, params)
    best, best_gain = LaneDecision.STAY, params.lane_change_gain
    for decision in (LaneDecision.LEFT, LaneDecision.RIGHT):
        target = network.adjacent_lane(vehicle.lane, decision)
        if target is None or target == network.aux_lane:
            continue
        gap, leader_speed, _ = world.gap_ahead(vehicle, target, lanes)
        gain = idm_acceleration(vehicle.speed, gap, leader_speed, params) - current
        if gain > best_gain and _gap_accepted(vehicle, target, world, params, lanes):
            best, best_gain = decision, gain
    return best
