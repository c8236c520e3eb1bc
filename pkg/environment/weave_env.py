"""
Multi-agent episode loop around the weaving-area world.

Every vehicle inside the control zone is an agent acting through the shared
policy; vehicles outside it drive as baseline humans. All commands pass
through the same collision-prevention layer.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

import config
from environment.observation import build_observations
from environment.reward import StepOutcome, compute_reward
from simulation.driver_models import (
    baseline_acceleration,
    baseline_lane_decision,
    lane_change_feasible,
    safe_acceleration_bound,
)
from simulation.episode_log import EpisodeLog
from simulation.road import Blinker, LaneDecision
from simulation.world import Command, EventKind, WorldState, spawn_inflow, step_world
from utils.errors import StructuralError
from utils.seeding import episode_streams

_BLINKER_FOR = {LaneDecision.LEFT: Blinker.LEFT, LaneDecision.RIGHT: Blinker.RIGHT}


@dataclass
class Trajectory:
    """Transitions of one agent, in step order"""

    vehicle_id: str
    observations: list = field(default_factory=list)
    raw_accels: list = field(default_factory=list)
    lanes: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    bootstrap_value: float = 0.0

    def __len__(self):
        return len(self.rewards)

    @property
    def open(self):
        return bool(self.dones) and not self.dones[-1]


@dataclass
class EpisodeResult:
    log: EpisodeLog
    system_rewards: np.ndarray
    trajectories: list
    reward_rows: list = field(default_factory=list)

    @property
    def agent_steps(self):
        return sum(len(t) for t in self.trajectories)

    @property
    def total_system_reward(self):
        return float(self.system_rewards.sum())

    def reward_frame(self):
        return pd.DataFrame(self.reward_rows)


def _update_blinker(vehicle, decision):
    if decision is not LaneDecision.STAY:
        vehicle.blinker = _BLINKER_FOR[decision]
    elif vehicle.intent is LaneDecision.STAY:
        vehicle.blinker = Blinker.OFF
    vehicle.intent = decision


def apply_actions(world, actions, lanes=None):
    """
    Turn agent actions into safe step commands.

    Controlled vehicles use their action; everyone else uses the baseline
    driver. Lane changes are checked one at a time, downstream first, against
    a lane index that already holds earlier approvals. Returns the commands
    and the ids of controlled vehicles whose lane intent was improper.
    """
    network, driver = world.network, world.driver
    lanes = lanes if lanes is not None else world.lane_index()

    decisions, desired = {}, {}
    for vid, vehicle in world.vehicles.items():
        if vehicle.controlled:
            if vid not in actions:
                raise StructuralError(f"missing action for controlled vehicle {vid}")
            action = actions[vid]
            decisions[vid] = action.lane_decision
            desired[vid] = min(max(action.accel, -config.MAX_DECEL), config.MAX_ACCEL)
        else:
            decisions[vid] = baseline_lane_decision(vehicle, world, driver, lanes)

    for vid, vehicle in world.vehicles.items():
        _update_blinker(vehicle, decisions[vid])

    targets, improper = {}, set()
    order = sorted(world.vehicles.values(), key=lambda v: (-v.longitudinal_pos, v.id))
    for vehicle in order:
        decision = decisions[vehicle.id]
        if decision is LaneDecision.STAY:
            continue
        target = network.adjacent_lane(vehicle.lane, decision)
        if target is None or not network.lane_exists(target, vehicle.longitudinal_pos, vehicle.length):
            feasible = False
        else:
            feasible = lane_change_feasible(vehicle, target, world, lanes)
        if feasible:
            lanes.move(vehicle.id, target)
            targets[vehicle.id] = target
        elif vehicle.controlled:
            improper.add(vehicle.id)

    commands = {}
    for vid, vehicle in world.vehicles.items():
        lane = targets.get(vid, vehicle.lane)
        gap, leader_speed, _ = world.gap_ahead(vehicle, lane, lanes)
        if vid in desired:
            accel = desired[vid]
        else:
            accel = baseline_acceleration(vehicle, world, driver, lanes, lane)
        bound = safe_acceleration_bound(vehicle, gap, leader_speed, world.dt, driver.min_gap)
        speed_cap = (network.speed_limit(lane) - vehicle.speed) / world.dt
        accel = max(min(accel, bound, speed_cap), -config.PHYSICAL_MAX_DECEL)
        commands[vid] = Command(accel, targets.get(vid))
    return commands, improper


def _update_control(world, controlling):
    for vehicle in world.vehicles.values():
        vehicle.controlled = controlling and world.network.in_control_zone(vehicle.longitudinal_pos)


def _retired_this_step(world, events):
    count = sum(1 for e in events if e.kind is EventKind.VEHICLE_EXITED)
    return {v.id: v for v in world.exited[len(world.exited) - count:]} if count else {}


def run_episode(policy, scenario, seed=None, record_rewards=False):
    """
    Run one episode: spawn, observe agents, act, mediate, step, reward.

    Agents are the vehicles inside the control zone. A policy with
    ``controls_vehicles`` false (the human driver) leaves them to the baseline
    model; their rewards are still scored so both policies report alike.
    """
    seed = scenario.seed if seed is None else seed
    spawn_rng, policy_rng = episode_streams(seed)
    controlling = getattr(policy, "controls_vehicles", True)
    world = WorldState(scenario)
    log = EpisodeLog(network=scenario.network, dt=scenario.dt, seed=seed)
    trajectories = {}
    system_rewards = np.zeros(scenario.episode_steps)
    reward_rows = []

    for step in range(scenario.episode_steps):
        spawned = spawn_inflow(world, scenario.inflow, spawn_rng)
        _update_control(world, controlling)
        agent_ids = [vid for vid, v in world.vehicles.items() if world.network.in_control_zone(v.longitudinal_pos)]
        lanes = world.lane_index()
        decision = None
        if controlling:
            observations = build_observations(agent_ids, world, lanes)
            decision = policy.act(agent_ids, observations, world, policy_rng)

        commands, improper = apply_actions(world, decision.actions if decision else {}, lanes)
        world, events = step_world(world, commands, scenario.dt)

        changed = {e.vehicle_id for e in events if e.kind is EventKind.LANE_CHANGED}
        braked = {e.vehicle_id for e in events if e.kind is EventKind.EMERGENCY_BRAKE}
        retired = _retired_this_step(world, events)
        post_lanes = world.lane_index()

        for i, vid in enumerate(agent_ids):
            vehicle = world.vehicles.get(vid) or retired[vid]
            outcome = StepOutcome(vid in changed, vid in improper, vid in braked)
            breakdown = compute_reward(vehicle, outcome, world, post_lanes)
            system_rewards[step] += breakdown.total
            if record_rewards:
                reward_rows.append({"time_s": world.time, "vehicle_id": vid, **breakdown.as_row()})
            if decision is None:
                continue

            trajectory = trajectories.setdefault(vid, Trajectory(vid))
            action = decision.actions[vid]
            trajectory.observations.append(observations[i])
            trajectory.raw_accels.append(action.accel if action.raw_accel is None else action.raw_accel)
            trajectory.lanes.append(action.lane_decision.value)
            trajectory.log_probs.append(0.0 if decision.log_probs is None else float(decision.log_probs[i]))
            trajectory.values.append(0.0 if decision.values is None else float(decision.values[i]))
            trajectory.rewards.append(breakdown.total)
            trajectory.dones.append(vid in retired or not world.network.in_control_zone(vehicle.longitudinal_pos))

        log.record_step(world, events, spawned)

    still_running = [t for t in trajectories.values() if t.open]
    if still_running:
        running_ids = [t.vehicle_id for t in still_running]
        values = policy.value(build_observations(running_ids, world))
        for trajectory, value in zip(still_running, values):
            trajectory.bootstrap_value = float(value)

    return EpisodeResult(log, system_rewards, list(trajectories.values()), reward_rows)
