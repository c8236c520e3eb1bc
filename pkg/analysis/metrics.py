"""
Episode metrics, the fuel/emission polynomial, the time-space density map
and the baseline-vs-policy comparison across scenarios
"""

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import pandas as pd

import config
from utils.errors import StructuralError

SECONDS_PER_HOUR = 3600.0
EXITED_FLAG = "exited"


@dataclass(frozen=True)
class EmissionCoefficients:
    """
    Six factors per output for e(v, a) = max(0, c0 + c1*v*a + c2*v*a^2 + c3*v + c4*v^2 + c5*v^3),
    v in m/s and a in m/s^2; fuel, CO2 and NOx rates are in mg/s.
    """

    fuel: tuple = tuple(config.EMISSION_COEFFICIENTS["fuel"])
    co2: tuple = tuple(config.EMISSION_COEFFICIENTS["co2"])
    nox: tuple = tuple(config.EMISSION_COEFFICIENTS["nox"])
    fuel_density_g_per_l: float = config.FUEL_DENSITY_G_PER_L

    def __post_init__(self):
        for name in ("fuel", "co2", "nox"):
            if len(getattr(self, name)) != 6:
                raise StructuralError(f"{name} emission polynomial needs 6 coefficients")


def emission_rate(v, a, coefficients):
    """Clamped emission polynomial; works elementwise on arrays"""
    c0, c1, c2, c3, c4, c5 = coefficients
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    rate = c0 + c1 * v * a + c2 * v * a * a + c3 * v + c4 * v * v + c5 * v ** 3
    rate = np.maximum(rate, 0.0)
    return float(rate) if rate.ndim == 0 else rate


@dataclass
class MetricsRecord:
    throughput_vph: float = 0.0
    mean_speed_mps: float = 0.0
    mean_travel_time_s: float = 0.0
    stops_per_vehicle: float = 0.0
    fuel_mpg: float = 0.0
    co2_g_per_mi: float = 0.0
    nox_mg_per_mi: float = 0.0
    empty: bool = False

    @classmethod
    def metric_names(cls):
        return [f.name for f in fields(cls) if f.name != "empty"]

    def as_dict(self):
        return asdict(self)


METRIC_LABELS = {
    "throughput_vph": "Throughput (vph)",
    "mean_speed_mps": "Mean speed (m/s)",
    "mean_travel_time_s": "Travel time (s)",
    "stops_per_vehicle": "Stops per vehicle",
    "fuel_mpg": "Fuel efficiency (mpg)",
    "co2_g_per_mi": "CO2 (g/mi)",
    "nox_mg_per_mi": "NOx (mg/mi)",
}


def count_stops(speeds, stop_speed=config.STOP_SPEED, rearm_speed=config.REARM_SPEED):
    """Stops in a speed trace: falling below stop_speed counts once, then waits for rearm_speed"""
    stops, armed = 0, False
    for speed in speeds:
        if armed and speed < stop_speed:
            stops += 1
            armed = False
        elif speed > rearm_speed:
            armed = True
    return stops


def _crossing_time(t, pos, i, boundary, dt):
    """Time the front passed boundary between rows i - 1 and i"""
    if i == 0:
        return t[0] - dt if pos[0] > boundary else t[0]
    travelled = pos[i] - pos[i - 1]
    if travelled <= 0:
        return t[i]
    return t[i - 1] + (boundary - pos[i - 1]) / travelled * (t[i] - t[i - 1])


def _travel_times(frame, network, dt):
    """Seconds each exited vehicle spent inside the control zone"""
    start, end = network.control_zone
    flagged = frame["event_flags"].str.split("|").apply(lambda f: EXITED_FLAG in f)
    exited_ids = set(frame.loc[flagged, "vehicle_id"])
    times = []
    for _, rows in frame[frame["vehicle_id"].isin(exited_ids)].groupby("vehicle_id", sort=True):
        t = rows["time_s"].to_numpy()
        pos = rows["pos_m"].to_numpy()
        inside = np.flatnonzero(pos >= start)
        if inside.size == 0:
            continue
        entered = _crossing_time(t, pos, inside[0], start, dt)
        beyond = np.flatnonzero(pos >= end)
        left = _crossing_time(t, pos, beyond[0], end, dt) if beyond.size else t[-1]
        times.append(left - entered)
    return times


def compute_metrics(log, coefficients=None):
    """Episode totals: throughput, speed, travel time, stops, mpg, CO2 and NOx per mile"""
    coefficients = coefficients or EmissionCoefficients()
    if not log.rows or log.steps == 0:
        return MetricsRecord(empty=True)
    frame = log.to_frame()
    dt = log.dt

    throughput = log.exit_count() * SECONDS_PER_HOUR / log.duration
    travel_times = _travel_times(frame, log.network, dt)

    stops = sum(count_stops(rows["speed_mps"].to_numpy()) for _, rows in frame.groupby("vehicle_id", sort=True))
    vehicles = frame["vehicle_id"].nunique()

    speed = frame["speed_mps"].to_numpy()
    accel = frame["accel_mps2"].to_numpy()
    miles = float(np.sum(speed) * dt) / config.METERS_PER_MILE
    fuel_mg = float(np.sum(emission_rate(speed, accel, coefficients.fuel)) * dt)
    co2_mg = float(np.sum(emission_rate(speed, accel, coefficients.co2)) * dt)
    nox_mg = float(np.sum(emission_rate(speed, accel, coefficients.nox)) * dt)
    gallons = fuel_mg / 1000.0 / coefficients.fuel_density_g_per_l / config.LITERS_PER_GALLON

    return MetricsRecord(
        throughput_vph=throughput,
        mean_speed_mps=float(np.mean(speed)),
        mean_travel_time_s=float(np.mean(travel_times)) if travel_times else 0.0,
        stops_per_vehicle=stops / vehicles,
        fuel_mpg=miles / gallons if gallons > 0 else 0.0,
        co2_g_per_mi=co2_mg / 1000.0 / miles if miles > 0 else 0.0,
        nox_mg_per_mi=nox_mg / miles if miles > 0 else 0.0,
    )


@dataclass
class DensityMap:
    """Vehicle counts per (step, bin) over the control area; row k is step k + 1"""

    counts: np.ndarray
    bin_m: float
    start_m: float
    dt: float

    @property
    def bin_edges(self):
        return self.start_m + self.bin_m * np.arange(self.counts.shape[1] + 1)

    def to_frame(self):
        columns = [f"{edge:g}" for edge in self.bin_edges[:-1]]
        frame = pd.DataFrame(self.counts, columns=columns)
        frame.insert(0, "time_s", self.dt * np.arange(1, len(self.counts) + 1))
        return frame


def _exited_rows(log):
    """Mask of the final rows written for vehicles that retired during their step"""
    return np.array([EXITED_FLAG in row[7].split("|") for row in log.rows], dtype=bool)


def density_map(log, bin_m=config.DENSITY_BIN_M):
    """Count vehicles by the bin holding their front position, at every step"""
    start, end = log.network.control_zone
    length = end - start
    bins = length / bin_m
    if bin_m <= 0 or not math.isclose(bins, round(bins)):
        raise StructuralError(f"density bin {bin_m} m does not divide the control area ({length} m)")
    bins = int(round(bins))
    counts = np.zeros((log.steps, bins), dtype=np.int64)
    if log.rows:
        steps = log.step_indices() - 1
        pos = np.array([row[3] for row in log.rows], dtype=np.float64)
        inside = (pos >= start) & (pos <= end) & ~_exited_rows(log)
        cols = np.minimum(((pos[inside] - start) // bin_m).astype(np.int64), bins - 1)
        np.add.at(counts, (steps[inside], cols), 1)
    return DensityMap(counts, bin_m, start, log.dt)


def control_area_census(log):
    """Vehicles still in the world and inside the control area at every step"""
    start, end = log.network.control_zone
    census = np.zeros(log.steps, dtype=np.int64)
    for step, row, exited in zip(log.step_indices(), log.rows, _exited_rows(log)):
        if start <= row[3] <= end and not exited:
            census[step - 1] += 1
    return census


def summarize_records(records):
    """Mean and sample standard deviation per metric"""
    frame = pd.DataFrame([r.as_dict() for r in records], columns=MetricsRecord.metric_names())
    return pd.DataFrame({"mean": frame.mean(), "std": frame.std(ddof=1).fillna(0.0)})


def percent_difference(policy_value, baseline_value):
    if baseline_value == 0:
        return math.nan
    return 100.0 * (policy_value - baseline_value) / baseline_value


@dataclass
class ComparisonReport:
    """Per scenario and metric: baseline and policy mean/std and the percent change"""

    table: pd.DataFrame
    scenarios: list = field(default_factory=list)

    def percent_table(self):
        """Rows are metrics, one column per scenario"""
        pivot = self.table.pivot(index="metric", columns="scenario", values="percent_change")
        return pivot.reindex(index=MetricsRecord.metric_names(), columns=self.scenarios)

    def to_text(self):
        pivot = self.percent_table()
        header = ["Metric"] + [str(s) for s in self.scenarios]
        lines = [[METRIC_LABELS[m]] + [_format_percent(pivot.at[m, s]) for s in self.scenarios]
                 for m in pivot.index]
        widths = [max(len(row[i]) for row in [header] + lines) for i in range(len(header))]

        def fmt(row):
            return "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))

        rule = "  ".join("-" * w for w in widths)
        return "\n".join([fmt(header), rule] + [fmt(row) for row in lines]) + "\n"


def _format_percent(value):
    return "n/a" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:+.1f}%"


def aggregate_runs(baseline, policy):
    """
    Compare record sets per scenario.

    baseline and policy map a scenario label to its list of MetricsRecords;
    both must name the same scenarios with the same number of episodes.
    """
    if set(baseline) != set(policy):
        missing = sorted(set(policy) - set(baseline), key=str)
        extra = sorted(set(baseline) - set(policy), key=str)
        raise StructuralError(f"scenario mismatch: no baseline for {missing}, no policy run for {extra}")
    scenarios = sorted(baseline, key=lambda s: (float(s) if _is_number(s) else math.inf, str(s)))
    rows = []
    for scenario in scenarios:
        if len(baseline[scenario]) != len(policy[scenario]):
            raise StructuralError(
                f"scenario {scenario}: {len(baseline[scenario])} baseline episodes vs {len(policy[scenario])} policy episodes"
            )
        base = summarize_records(baseline[scenario])
        ours = summarize_records(policy[scenario])
        for metric in MetricsRecord.metric_names():
            rows.append({
                "scenario": scenario,
                "metric": metric,
                "baseline_mean": base.at[metric, "mean"],
                "baseline_std": base.at[metric, "std"],
                "policy_mean": ours.at[metric, "mean"],
                "policy_std": ours.at[metric, "std"],
                "percent_change": percent_difference(ours.at[metric, "mean"], base.at[metric, "mean"]),
            })
    return ComparisonReport(pd.DataFrame(rows), scenarios)


def _is_number(value):
    try:
        float(value)
    except (TypeError, ValueError):
        return False
    return True
