"""
Observation contract, reward terms, action mediation and the episode loop
"""

import math

import numpy as np
import pytest

import config
from agents import HumanDriverAgent, PolicyAgent, RandomAgent
from environment import weave_env
from environment.actions import AgentAction
from environment.observation import build_observation
from environment.reward import (
    RewardBreakdown,
    StepOutcome,
    compute_reward,
    headway_penalty,
    lane_reward,
    time_headway,
)
from environment.weave_env import apply_actions, run_episode
from learning.policy_net import PolicyParams
from simulation.road import Blinker, InflowSpec, LaneDecision, Route, ScenarioConfig
from simulation.world import census_holds, speed_within_limits, step_world
from utils.errors import StructuralError

from conftest import FREEWAY_LIMIT, place

FRONT_FILL = [1.0, 1.0, 0.0, 0.0]
REAR_FILL = [1.0, 0.0, 0.0, 0.0]


def test_lone_vehicle_in_left_lane_observation(world):
    place(world, "ego", 250.0, 2, FREEWAY_LIMIT / 2)
    obs = build_observation("ego", world)
    expected = [0.5, 0.5, 1.0, 2.0 / 3.0, 0.0] + FRONT_FILL + REAR_FILL + [0.0] * 8 + FRONT_FILL + REAR_FILL
    assert obs.shape == (config.OBSERVATION_SIZE,)
    np.testing.assert_allclose(obs, expected, atol=1e-12)


def test_neighbor_block_describes_the_leader(world):
    place(world, "ego", 250.0, 1, 20.0)
    leader = place(world, "lead", 300.0, 1, 10.0, route=Route.EXIT)
    leader.blinker = Blinker.RIGHT
    obs = build_observation("ego", world)
    np.testing.assert_allclose(obs[5:9], [0.25, 10.0 / FREEWAY_LIMIT, 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(obs[9:13], REAR_FILL)


def test_aux_lane_block_depends_on_position(world):
    place(world, "inside", 250.0, 0, 20.0)
    place(world, "before", 50.0, 0, 20.0)
    inside = build_observation("inside", world)
    before = build_observation("before", world)
    np.testing.assert_allclose(inside[21:29], FRONT_FILL + REAR_FILL)
    np.testing.assert_allclose(before[21:29], np.zeros(8))


def test_aux_lane_vehicle_sees_no_right_lane(world):
    place(world, "ramp", 250.0, world.network.aux_lane, 15.0, route=Route.ENTER)
    obs = build_observation("ramp", world)
    assert obs[2] == 0.0
    np.testing.assert_allclose(obs[21:29], np.zeros(8))


@pytest.mark.parametrize("cases", [200, pytest.param(10_000, marks=pytest.mark.slow)])
def test_fuzzed_worlds_give_bounded_observations(empty_scenario, cases):
    from simulation.world import WorldState

    rng = np.random.default_rng(42)
    for case in range(cases):
        world = WorldState(empty_scenario)
        for k in range(int(rng.integers(1, 25))):
            lane = int(rng.integers(0, 4))
            pos = float(rng.uniform(5.0, 500.0))
            if lane == 3 and not world.network.lane_exists(3, pos):
                lane = 0
            vehicle = place(world, f"c{case}_{k}", pos, lane, float(rng.uniform(0.0, FREEWAY_LIMIT)),
                            route=Route.EXIT if rng.random() < 0.5 else Route.THROUGH)
            vehicle.blinker = Blinker(int(rng.integers(0, 3)))
        lanes = world.lane_index()
        for vid in world.vehicles:
            obs = build_observation(vid, world, lanes)
            assert obs.shape == (29,)
            assert np.all(obs >= 0.0) and np.all(obs <= 1.0)


def test_lane_reward_boundaries():
    assert lane_reward(0.0, True) == 1.0
    assert lane_reward(200.0, False) == -1.0
    assert lane_reward(100.0, True) == pytest.approx(0.5, abs=1e-12)
    assert lane_reward(-30.0, False) == 0.0


def test_headway_penalty():
    assert headway_penalty(0.5) == pytest.approx(-0.5, abs=1e-12)
    assert headway_penalty(2.0) == 0.0
    assert headway_penalty(math.inf) == 0.0
    assert time_headway(10.0, 20.0) == pytest.approx(0.5)


def test_total_recomposes_from_breakdown():
    breakdown = RewardBreakdown(v=10.0, l=0.5, c=-1.0, s=-1.0, b=0.0, h=-0.2)
    expected = 0.1 * 10.0 + 1.0 * 0.5 + 1.0 * -1.0 + 5.0 * -1.0 + 1.0 * 0.0 + 1.0 * -0.2
    assert breakdown.total == pytest.approx(expected, abs=1e-12)
    assert breakdown.as_row()["total"] == breakdown.total


def test_stationary_vehicle_at_end_of_weave_on_desired_lane(world):
    vehicle = place(world, "ego", 400.0, 1, 0.0)
    breakdown = compute_reward(vehicle, StepOutcome(), world)
    assert breakdown.l == pytest.approx(0.0, abs=1e-12)
    assert breakdown.total == pytest.approx(0.0, abs=1e-12)


def test_event_penalties_fire_exactly_once(world):
    vehicle = place(world, "ego", 300.0, 2, 10.0, route=Route.EXIT)
    breakdown = compute_reward(vehicle, StepOutcome(True, True, True), world)
    assert (breakdown.c, breakdown.s, breakdown.b) == (-1.0, -1.0, -1.0)
    assert breakdown.l == pytest.approx(-0.5, abs=1e-12)


def test_close_follower_pays_headway_penalty(world):
    vehicle = place(world, "ego", 300.0, 1, 20.0)
    place(world, "lead", 315.0, 1, 20.0)
    breakdown = compute_reward(vehicle, StepOutcome(), world)
    assert breakdown.h == pytest.approx(-0.5, abs=1e-12)


def test_reward_ignores_vehicles_it_does_not_follow(world):
    vehicle = place(world, "ego", 300.0, 1, 20.0)
    place(world, "lead", 315.0, 1, 20.0)
    other = place(world, "other", 320.0, 2, 5.0)
    before = compute_reward(vehicle, StepOutcome(lane_changed=True), world).as_row()
    other.longitudinal_pos, other.lane, other.speed = 150.0, 0, 28.0
    assert compute_reward(vehicle, StepOutcome(lane_changed=True), world).as_row() == before


def test_action_outside_range_is_rejected():
    with pytest.raises(ValueError):
        AgentAction(5.0)
    assert AgentAction.clamped(-20.0).accel == -config.MAX_DECEL


def test_missing_action_for_controlled_vehicle(world):
    place(world, "ego", 250.0, 1, 20.0, controlled=True)
    with pytest.raises(StructuralError):
        apply_actions(world, {})


def test_lane_change_into_missing_lane_is_improper(world):
    place(world, "ego", 250.0, 2, 20.0, controlled=True)
    commands, improper = apply_actions(world, {"ego": AgentAction(0.0, LaneDecision.LEFT)})
    assert improper == {"ego"}
    assert commands["ego"].target_lane is None
    assert world.vehicles["ego"].blinker is Blinker.LEFT


def test_feasible_lane_change_is_approved(world):
    place(world, "ego", 250.0, 1, 20.0, controlled=True)
    commands, improper = apply_actions(world, {"ego": AgentAction(0.0, LaneDecision.LEFT)})
    assert improper == set()
    assert commands["ego"].target_lane == 2


def test_lane_changes_resolve_downstream_first(world):
    place(world, "right", 100.0, 0, 20.0, controlled=True)
    place(world, "left", 101.0, 2, 20.0, controlled=True)
    actions = {
        "right": AgentAction(0.0, LaneDecision.LEFT),
        "left": AgentAction(0.0, LaneDecision.RIGHT),
    }
    commands, improper = apply_actions(world, actions)
    assert commands["left"].target_lane == 1
    assert commands["right"].target_lane is None
    assert improper == {"right"}


def test_acceleration_capped_by_speed_limit(world):
    place(world, "ego", 250.0, 1, FREEWAY_LIMIT, controlled=True)
    commands, _ = apply_actions(world, {"ego": AgentAction(4.0)})
    assert commands["ego"].accel == pytest.approx(0.0, abs=1e-9)


def test_safety_layer_overrides_unsafe_command(world):
    place(world, "ego", 250.0, 1, 20.0, controlled=True)
    place(world, "stopped", 258.0, 1, 0.0)
    commands, _ = apply_actions(world, {"ego": AgentAction(4.0)})
    assert commands["ego"].accel == pytest.approx(-config.PHYSICAL_MAX_DECEL)


def test_blinker_clears_one_step_after_intent(world):
    vehicle = place(world, "ego", 250.0, 2, 20.0, controlled=True)
    apply_actions(world, {"ego": AgentAction(0.0, LaneDecision.LEFT)})
    apply_actions(world, {"ego": AgentAction(0.0)})
    assert vehicle.blinker is Blinker.LEFT
    apply_actions(world, {"ego": AgentAction(0.0)})
    assert vehicle.blinker is Blinker.OFF


def test_baseline_episode_controls_nobody(short_scenario):
    result = run_episode(HumanDriverAgent(), short_scenario)
    assert result.trajectories == []
    assert len(result.system_rewards) == short_scenario.episode_steps
    assert result.log.steps == short_scenario.episode_steps
    assert result.log.rows


def test_random_episode_trajectories_are_consistent(short_scenario):
    result = run_episode(RandomAgent(), short_scenario, record_rewards=True)
    assert result.agent_steps > 0
    for trajectory in result.trajectories:
        n = len(trajectory)
        assert len(trajectory.observations) == len(trajectory.dones) == len(trajectory.lanes) == n
        assert not any(trajectory.dones[:-1])
    assert len(result.reward_rows) == result.agent_steps
    assert result.total_system_reward == pytest.approx(sum(row["total"] for row in result.reward_rows))


def test_same_seed_same_episode(short_scenario):
    first = run_episode(RandomAgent(), short_scenario, seed=5)
    second = run_episode(RandomAgent(), short_scenario, seed=5)
    assert first.log.rows == second.log.rows
    np.testing.assert_array_equal(first.system_rewards, second.system_rewards)


def test_policy_episode_records_log_probs_and_bootstraps(short_scenario):
    params = PolicyParams.initialize(np.random.default_rng(0), hidden=8)
    result = run_episode(PolicyAgent(params), short_scenario)
    assert result.trajectories
    assert all(np.isfinite(t.log_probs).all() for t in result.trajectories)
    open_ones = [t for t in result.trajectories if t.open]
    assert all(t.bootstrap_value != 0.0 for t in open_ones)


def _checked_steps(monkeypatch):
    """Patch the episode loop so every step is checked for conservation and speed limits"""
    checked = []

    def stepping(world, commands, dt):
        world, events = step_world(world, commands, dt)
        assert census_holds(world), f"census broken at t={world.time:.1f}s"
        assert speed_within_limits(world), f"speed limit exceeded at t={world.time:.1f}s"
        checked.append(world.time)
        return world, events

    monkeypatch.setattr(weave_env, "step_world", stepping)
    return checked


def test_lane_change_and_improper_intent_never_coincide():
    scenario = ScenarioConfig(inflow=InflowSpec(freeway_rate=1500.0, ramp_rate=1500.0), episode_steps=200)
    rows = []
    for episode in range(3):
        rows += run_episode(RandomAgent(), scenario, seed=300 + episode, record_rewards=True).reward_rows
    assert any(r["c_i"] == -1.0 for r in rows)
    assert any(r["s_i"] == -1.0 for r in rows)
    assert not any(r["c_i"] == -1.0 and r["s_i"] == -1.0 for r in rows)


@pytest.mark.parametrize("agent", [HumanDriverAgent(), RandomAgent()], ids=["baseline", "random"])
def test_every_step_conserves_vehicles_and_respects_limits(monkeypatch, agent):
    checked = _checked_steps(monkeypatch)
    scenario = ScenarioConfig(inflow=InflowSpec(freeway_rate=1500.0, ramp_rate=1500.0), episode_steps=200)
    for episode in range(3):
        result = run_episode(agent, scenario, seed=500 + episode)
        assert result.log.steps == scenario.episode_steps
    assert len(checked) == 3 * scenario.episode_steps


@pytest.mark.slow
def test_safety_layer_holds_at_extreme_inflow(monkeypatch):
    checked = _checked_steps(monkeypatch)
    scenario = ScenarioConfig(inflow=InflowSpec(freeway_rate=1500.0, ramp_rate=1500.0))
    for episode in range(30):
        result = run_episode(RandomAgent(), scenario, seed=1000 + episode)
        assert result.log.steps == scenario.episode_steps
    assert len(checked) == 30 * scenario.episode_steps
