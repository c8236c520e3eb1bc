"""
World state of the weaving area and its fixed-step update
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import config
from simulation.driver_models import safe_speed
from simulation.lanes import LaneIndex
from simulation.road import NO_LEADER_GAP, Route, Vehicle
from utils.errors import OverlapFault, StructuralError

OVERLAP_TOLERANCE = 1e-9


class EventKind(Enum):
    LANE_CHANGED = "LaneChanged"
    EMERGENCY_BRAKE = "EmergencyBrake"
    VEHICLE_EXITED = "VehicleExited"
    VEHICLE_SPAWNED = "VehicleSpawned"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    vehicle_id: str
    time_s: float
    lane: int | None = None
    missed_exit: bool = False


@dataclass(frozen=True)
class Command:
    """Resolved command for one vehicle: acceleration and an optional lane move"""

    accel: float
    target_lane: int | None = None


@dataclass
class PendingSpawn:
    vehicle_id: str
    route: Route
    arrival_time: float


@dataclass
class EntryPoint:
    """Where an inflow stream enters: one per mainline lane plus the on-ramp"""

    name: str
    lane: int
    start_pos: float
    rate: float
    max_speed: float
    is_ramp: bool
    next_arrival: float | None = None
    queue: deque = field(default_factory=deque)


class WorldState:
    """All vehicles, the lane geometry and the simulation clock"""

    def __init__(self, scenario):
        self.scenario = scenario
        self.network = scenario.network
        self.driver = scenario.driver
        self.inflow = scenario.inflow
        self.dt = scenario.dt
        self.time = 0.0
        self.step_count = 0
        self.vehicles = {}
        self.exited = []
        self.generated_count = 0
        self.entries = self._build_entries()

    def _build_entries(self):
        network, inflow = self.network, self.inflow
        entries = [
            EntryPoint(f"lane{lane}", lane, 0.0, inflow.freeway_rate, network.freeway_speed_limit, False)
            for lane in range(network.mainline_lanes)
        ]
        entries.append(
            EntryPoint("ramp", network.aux_lane, network.on_ramp_gore, inflow.ramp_rate, network.ramp_speed_limit, True)
        )
        return entries

    @property
    def active_count(self):
        return len(self.vehicles)

    @property
    def exited_count(self):
        return len(self.exited)

    @property
    def queued_count(self):
        return sum(len(entry.queue) for entry in self.entries)

    def lane_index(self):
        return LaneIndex(self.vehicles.values())

    def vehicle(self, vehicle_id):
        try:
            return self.vehicles[vehicle_id]
        except KeyError:
            raise StructuralError(f"unknown vehicle id {vehicle_id!r}") from None

    def gap_ahead(self, vehicle, lane, lanes):
        """
        Bumper gap, leader speed and leader id on the given lane.

        A vehicle that cannot leave through the off-ramp sees the end of the
        auxiliary lane as a stopped obstacle.
        """
        pos = vehicle.longitudinal_pos
        gap, leader_speed, leader_id = NO_LEADER_GAP, self.network.speed_limit(lane), None
        leader_id = lanes.leader(lane, pos, vehicle.id)
        if leader_id is not None:
            leader = self.vehicles[leader_id]
            gap, leader_speed = leader.rear_pos - pos, leader.speed
        if lane == self.network.aux_lane and vehicle.route is not Route.EXIT:
            end_gap = self.network.off_ramp_gore - pos
            if end_gap < gap:
                return end_gap, 0.0, None
        return gap, leader_speed, leader_id

    def gap_behind(self, vehicle, lane, lanes):
        """Bumper gap to the nearest follower on the lane, and its id"""
        follower_id = lanes.follower(lane, vehicle.longitudinal_pos, vehicle.id)
        if follower_id is None:
            return NO_LEADER_GAP, None
        return vehicle.rear_pos - self.vehicles[follower_id].longitudinal_pos, follower_id


def _draw_headway(rate, inflow, rng):
    mean = inflow.mean_headway(rate)
    extra = mean - inflow.min_spawn_headway
    if extra <= 0:
        return max(mean, inflow.min_spawn_headway)
    return inflow.min_spawn_headway + rng.exponential(extra)


def _entry_speed(world, entry, lanes, length):
    """Insertion speed at an entry, or None while the entry cell is blocked"""
    front = entry.start_pos + length
    blocker_id = lanes.first_at_or_after(entry.lane, entry.start_pos)
    if blocker_id is None:
        return entry.max_speed
    blocker = world.vehicles[blocker_id]
    gap = blocker.rear_pos - front
    if gap < world.driver.min_gap:
        return None
    return min(entry.max_speed, safe_speed(gap, blocker.speed, world.driver.min_gap, world.dt))


def spawn_inflow(world, spec, rng):
    """
    Generate arrivals up to the current clock and insert queued vehicles.

    Headways are min_spawn_headway plus an exponential draw; freeway arrivals
    exit with probability exit_fraction, ramp arrivals all enter the freeway.
    An arrival waits in its entry queue while the entry cell is occupied.
    """
    for entry in world.entries:
        if entry.rate <= 0:
            continue
        if entry.next_arrival is None:
            entry.next_arrival = _draw_headway(entry.rate, spec, rng)
        while entry.next_arrival <= world.time + 1e-9:
            if entry.is_ramp:
                route = Route.ENTER
            else:
                route = Route.EXIT if rng.random() < spec.exit_fraction else Route.THROUGH
            entry.queue.append(PendingSpawn(f"v{world.generated_count:05d}", route, entry.next_arrival))
            world.generated_count += 1
            entry.next_arrival += _draw_headway(entry.rate, spec, rng)

    spawned = []
    lanes = world.lane_index()
    for entry in world.entries:
        while entry.queue:
            speed = _entry_speed(world, entry, lanes, config.VEHICLE_LENGTH_M)
            if speed is None:
                break
            pending = entry.queue.popleft()
            vehicle = Vehicle(
                id=pending.vehicle_id,
                longitudinal_pos=entry.start_pos + config.VEHICLE_LENGTH_M,
                lane=entry.lane,
                speed=speed,
                route=pending.route,
                spawn_time=world.time,
            )
            world.vehicles[vehicle.id] = vehicle
            lanes.add(vehicle)
            spawned.append(vehicle)
    return spawned


def check_no_overlap(world):
    """Raise OverlapFault if any two vehicles on a lane overlap"""
    by_lane = {}
    for vehicle in world.vehicles.values():
        by_lane.setdefault(vehicle.lane, []).append(vehicle)
    for lane, vehicles in by_lane.items():
        vehicles.sort(key=lambda v: (v.longitudinal_pos, v.id))
        for follower, leader in zip(vehicles, vehicles[1:]):
            if follower.longitudinal_pos > leader.rear_pos + OVERLAP_TOLERANCE:
                raise OverlapFault(
                    f"overlap on lane {lane} at t={world.time:.1f}s between {follower.id} and {leader.id}",
                    lane=lane,
                    vehicle_ids=(follower.id, leader.id),
                    time_s=world.time,
                )


def _retire(world, vehicle):
    network = world.network
    if vehicle.route is Route.EXIT and vehicle.lane == network.aux_lane:
        if vehicle.longitudinal_pos >= network.off_ramp_gore:
            return True, False
    if vehicle.longitudinal_pos >= network.mainline_length:
        return True, vehicle.route is Route.EXIT
    return False, False


def step_world(world, commands, dt):
    """
    Advance the world by one step.

    Lane moves are applied together first, then speeds and positions follow the
    semi-implicit Euler update v <- max(0, v + a*dt), x <- x + v*dt. Vehicles past
    the downstream end or the off-ramp end retire. Returns (world, events).
    """
    missing = [vid for vid in world.vehicles if vid not in commands]
    if missing:
        raise StructuralError(f"no command for vehicles {missing[:5]}")

    events = []
    next_time = world.time + dt
    for vid, vehicle in world.vehicles.items():
        target = commands[vid].target_lane
        if target is not None and target != vehicle.lane:
            vehicle.lane = target
            events.append(Event(EventKind.LANE_CHANGED, vid, next_time, lane=target))

    for vid, vehicle in world.vehicles.items():
        new_speed = max(0.0, vehicle.speed + commands[vid].accel * dt)
        vehicle.accel = (new_speed - vehicle.speed) / dt
        vehicle.speed = new_speed
        vehicle.longitudinal_pos += new_speed * dt
        if -vehicle.accel > config.EMERGENCY_DECEL:
            events.append(Event(EventKind.EMERGENCY_BRAKE, vid, next_time, lane=vehicle.lane))

    world.time = next_time
    world.step_count += 1

    for vid in list(world.vehicles):
        vehicle = world.vehicles[vid]
        retired, missed = _retire(world, vehicle)
        if retired:
            vehicle.exit_time = world.time
            vehicle.controlled = False
            world.exited.append(world.vehicles.pop(vid))
            events.append(Event(EventKind.VEHICLE_EXITED, vid, world.time, lane=vehicle.lane, missed_exit=missed))

    check_no_overlap(world)
    return world, events


def speed_within_limits(world, slack=1.05):
    return all(
        0.0 <= v.speed <= world.network.speed_limit(v.lane) * slack + 1e-9
        for v in world.vehicles.values()
    )


def census_holds(world):
    """generated = active + exited + queued"""
    return world.generated_count == world.active_count + world.exited_count + world.queued_count

