"""
Per-step, per-vehicle trace of an episode and its CSV form
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

import config
from simulation.road import RoadNetwork
from simulation.world import EventKind

LOG_COLUMNS = ["time_s", "vehicle_id", "lane", "pos_m", "speed_mps", "accel_mps2", "route", "event_flags"]

EVENT_FLAGS = {
    EventKind.VEHICLE_SPAWNED: "spawned",
    EventKind.LANE_CHANGED: "lane_changed",
    EventKind.EMERGENCY_BRAKE: "emergency_brake",
    EventKind.VEHICLE_EXITED: "exited",
}
MISSED_EXIT_FLAG = "missed_exit"


@dataclass
class EpisodeLog:
    """
    One row per (step, vehicle) holding the post-step state. A vehicle that
    retires during a step gets a final row flagged ``exited``.
    """

    network: RoadNetwork
    dt: float = config.TIME_STEP_S
    seed: int = config.DEFAULT_SEED
    steps: int = 0
    rows: list = field(default_factory=list)

    @property
    def duration(self):
        return self.steps * self.dt

    def record_step(self, world, events, spawned=()):
        """Append the rows of the step that just completed"""
        flags = {}
        for vehicle in spawned:
            flags.setdefault(vehicle.id, []).append(EVENT_FLAGS[EventKind.VEHICLE_SPAWNED])
        exited = set()
        for event in events:
            flags.setdefault(event.vehicle_id, []).append(EVENT_FLAGS[event.kind])
            if event.missed_exit:
                flags[event.vehicle_id].append(MISSED_EXIT_FLAG)
            if event.kind is EventKind.VEHICLE_EXITED:
                exited.add(event.vehicle_id)

        retired = world.exited[len(world.exited) - len(exited):] if exited else []
        for vehicle in list(world.vehicles.values()) + retired:
            self.rows.append((
                world.time,
                vehicle.id,
                vehicle.lane,
                vehicle.longitudinal_pos,
                vehicle.speed,
                vehicle.accel,
                vehicle.route.value,
                "|".join(flags.get(vehicle.id, ())),
            ))
        self.steps += 1

    def to_frame(self):
        frame = pd.DataFrame(self.rows, columns=LOG_COLUMNS)
        return frame.astype({"lane": "int64", "vehicle_id": "str", "route": "str", "event_flags": "str"})

    def exit_count(self):
        return sum(1 for row in self.rows if "exited" in row[7].split("|"))

    def step_indices(self):
        """Step number of every row (1-based, the step that produced it)"""
        times = np.array([row[0] for row in self.rows], dtype=float)
        return np.rint(times / self.dt).astype(int)

    def write(self, directory, name="log"):
        """Write <name>.csv and <name>_meta.json into directory"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(directory / f"{name}.csv", index=False)
        meta = {
            "schema_version": config.CSV_SCHEMA_VERSION,
            "dt": self.dt,
            "seed": self.seed,
            "steps": self.steps,
            "network": asdict(self.network),
        }
        (directory / f"{name}_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
        return directory / f"{name}.csv"

    @classmethod
    def read(cls, directory, name="log"):
        directory = Path(directory)
        meta = json.loads((directory / f"{name}_meta.json").read_text(encoding="utf-8"))
        frame = pd.read_csv(
            directory / f"{name}.csv",
            dtype={"vehicle_id": str, "route": str, "event_flags": str},
            keep_default_na=False,
            float_precision="round_trip",
        )
        log = cls(network=RoadNetwork(**meta["network"]), dt=meta["dt"], seed=meta["seed"], steps=meta["steps"])
        log.rows = [
            (float(r.time_s), r.vehicle_id, int(r.lane), float(r.pos_m), float(r.speed_mps),
             float(r.accel_mps2), r.route, r.event_flags)
            for r in frame.itertuples(index=False)
        ]
        return log
