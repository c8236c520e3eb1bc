"""
Run configuration: a versioned KEY=VALUE file read with python-dotenv,
command-line overrides on top, and the echo written into every run directory.
"""

from dataclasses import dataclass, field
from pathlib import Path

from dotenv import dotenv_values

import config
from analysis.metrics import EmissionCoefficients
from learning.ppo_trainer import TrainConfig
from simulation.road import DriverParams, InflowSpec, RoadNetwork, ScenarioConfig
from utils.errors import ConfigError, StructuralError

ECHO_FILE = "config_echo.env"
POLICIES = ("ppo", "baseline", "random")
RUN_KINDS = ("train", "evaluate")


def _float_list(raw):
    values = [float(part) for part in raw.split(",")]
    if len(values) != 6:
        raise ValueError("expected 6 comma-separated numbers")
    return values


def _choice(options):
    def parse(raw):
        value = raw.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return value
    return parse


# key -> (parser, default); order is the echo order
KEY_SCHEMA = {
    "CONFIG_VERSION": (int, config.CONFIG_VERSION),
    "UPSTREAM_LENGTH_M": (float, config.UPSTREAM_LENGTH_M),
    "WEAVE_LENGTH_M": (float, config.WEAVE_LENGTH_M),
    "DOWNSTREAM_LENGTH_M": (float, config.DOWNSTREAM_LENGTH_M),
    "MAINLINE_LANES": (int, config.MAINLINE_LANES),
    "CONTROL_UPSTREAM_MARGIN_M": (float, config.CONTROL_UPSTREAM_MARGIN_M),
    "CONTROL_DOWNSTREAM_MARGIN_M": (float, config.CONTROL_DOWNSTREAM_MARGIN_M),
    "FREEWAY_SPEED_LIMIT_MPH": (float, config.FREEWAY_SPEED_LIMIT_MPH),
    "RAMP_SPEED_LIMIT_MPH": (float, config.RAMP_SPEED_LIMIT_MPH),
    "FREEWAY_INFLOW_VPHPL": (float, config.FREEWAY_INFLOW_VPHPL),
    "RAMP_INFLOW_VPHPL": (float, config.RAMP_INFLOW_VPHPL),
    "EXIT_FRACTION": (float, config.EXIT_FRACTION),
    "MIN_SPAWN_HEADWAY_S": (float, config.MIN_SPAWN_HEADWAY_S),
    "SEED": (int, config.DEFAULT_SEED),
    "EPISODE_STEPS": (int, config.EPISODE_STEPS),
    "TIME_STEP_S": (float, config.TIME_STEP_S),
    "IDM_TIME_HEADWAY_S": (float, config.IDM_TIME_HEADWAY_S),
    "IDM_MIN_GAP_M": (float, config.IDM_MIN_GAP_M),
    "IDM_ACCEL": (float, config.IDM_ACCEL),
    "IDM_COMFORT_DECEL": (float, config.IDM_COMFORT_DECEL),
    "IDM_DELTA": (float, config.IDM_DELTA),
    "LC_ACCEL_GAIN": (float, config.LC_ACCEL_GAIN),
    "LC_LEAD_MARGIN_M": (float, config.LC_LEAD_MARGIN_M),
    "LC_LAG_MARGIN_M": (float, config.LC_LAG_MARGIN_M),
    "LC_EXIT_LOOKAHEAD_M": (float, config.LC_EXIT_LOOKAHEAD_M),
    "LEARNING_RATE": (float, config.LEARNING_RATE),
    "CLIP_EPSILON": (float, config.CLIP_EPSILON),
    "GAMMA": (float, config.GAMMA),
    "GAE_LAMBDA": (float, config.GAE_LAMBDA),
    "EPOCHS_PER_ITER": (int, config.EPOCHS_PER_ITER),
    "MINIBATCH_SIZE": (int, config.MINIBATCH_SIZE),
    "VALUE_COEF": (float, config.VALUE_COEF),
    "ENTROPY_COEF": (float, config.ENTROPY_COEF),
    "MAX_GRAD_NORM": (float, config.MAX_GRAD_NORM),
    "SAMPLE_SIZE": (int, config.SAMPLE_SIZE),
    "MAX_ITERATIONS": (int, config.MAX_ITERATIONS),
    "CHECKPOINT_EVERY": (int, config.CHECKPOINT_EVERY),
    "HIDDEN_UNITS": (int, config.HIDDEN_UNITS),
    "MAX_ROLLOUT_EPISODES": (int, config.MAX_ROLLOUT_EPISODES),
    "EPISODES": (int, config.EVALUATION_EPISODES),
    "WORKERS": (int, config.ROLLOUT_WORKERS),
    "RUN_POLICY": (_choice(POLICIES), "ppo"),
    "RUN_KIND": (_choice(RUN_KINDS), "evaluate"),
    "EMISSION_FUEL": (_float_list, list(config.EMISSION_COEFFICIENTS["fuel"])),
    "EMISSION_CO2": (_float_list, list(config.EMISSION_COEFFICIENTS["co2"])),
    "EMISSION_NOX": (_float_list, list(config.EMISSION_COEFFICIENTS["nox"])),
    "FUEL_DENSITY_G_PER_L": (float, config.FUEL_DENSITY_G_PER_L),
}

# written to the echo for reading convenience, ignored when loaded back
DERIVED_KEYS = ("FREEWAY_SPEED_LIMIT_MPS", "RAMP_SPEED_LIMIT_MPS")


def mph_to_mps(mph):
    return mph * config.MPH_TO_MPS


def parse_value(key, raw):
    if key not in KEY_SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    if raw is None:
        raise ConfigError(f"config key {key} has no value")
    parser, _ = KEY_SCHEMA[key]
    try:
        return parser(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key}={raw!r}: {exc}") from None


def parse_override(text):
    """'KEY=VALUE' -> (KEY, parsed value)"""
    key, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(f"override {text!r} is not KEY=VALUE")
    key = key.strip().upper()
    return key, parse_value(key, raw)


def resolve_inflow(value):
    """Preset name (no_congestion, moderate, extreme) or a number of vphpl"""
    if value in config.SCENARIO_PRESETS:
        return config.SCENARIO_PRESETS[value]
    try:
        rate = float(value)
    except (TypeError, ValueError):
        presets = ", ".join(config.SCENARIO_PRESETS)
        raise ConfigError(f"--inflow must be a number or one of {presets}, got {value!r}") from None
    if rate < 0:
        raise ConfigError(f"--inflow must be non-negative, got {rate}")
    return rate


@dataclass
class RunConfig:
    """Every setting of one run, defaults filled in"""

    values: dict = field(default_factory=lambda: {key: default for key, (_, default) in KEY_SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, value):
        if key not in KEY_SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = value
        return self

    def set_inflow(self, rate):
        self.values["FREEWAY_INFLOW_VPHPL"] = float(rate)
        self.values["RAMP_INFLOW_VPHPL"] = float(rate)
        return self

    @property
    def seed(self):
        return self.values["SEED"]

    @property
    def scenario_label(self):
        return f"{self.values['FREEWAY_INFLOW_VPHPL']:g}"

    def scenario(self):
        v = self.values
        network = RoadNetwork(
            upstream_length=v["UPSTREAM_LENGTH_M"],
            weave_length=v["WEAVE_LENGTH_M"],
            downstream_length=v["DOWNSTREAM_LENGTH_M"],
            mainline_lanes=v["MAINLINE_LANES"],
            freeway_speed_limit=mph_to_mps(v["FREEWAY_SPEED_LIMIT_MPH"]),
            ramp_speed_limit=mph_to_mps(v["RAMP_SPEED_LIMIT_MPH"]),
            control_upstream_margin=v["CONTROL_UPSTREAM_MARGIN_M"],
            control_downstream_margin=v["CONTROL_DOWNSTREAM_MARGIN_M"],
        )
        inflow = InflowSpec(
            freeway_rate=v["FREEWAY_INFLOW_VPHPL"],
            ramp_rate=v["RAMP_INFLOW_VPHPL"],
            exit_fraction=v["EXIT_FRACTION"],
            min_spawn_headway=v["MIN_SPAWN_HEADWAY_S"],
        )
        driver = DriverParams(
            desired_speed=network.freeway_speed_limit,
            time_headway=v["IDM_TIME_HEADWAY_S"],
            min_gap=v["IDM_MIN_GAP_M"],
            accel=v["IDM_ACCEL"],
            comfort_decel=v["IDM_COMFORT_DECEL"],
            delta=v["IDM_DELTA"],
            lane_change_gain=v["LC_ACCEL_GAIN"],
            lead_margin=v["LC_LEAD_MARGIN_M"],
            lag_margin=v["LC_LAG_MARGIN_M"],
            exit_lookahead=v["LC_EXIT_LOOKAHEAD_M"],
        )
        return ScenarioConfig(network, inflow, driver, v["SEED"], v["EPISODE_STEPS"], v["TIME_STEP_S"])

    def train_config(self):
        v = self.values
        return TrainConfig(
            learning_rate=v["LEARNING_RATE"],
            clip_epsilon=v["CLIP_EPSILON"],
            gamma=v["GAMMA"],
            gae_lambda=v["GAE_LAMBDA"],
            epochs=v["EPOCHS_PER_ITER"],
            minibatch_size=v["MINIBATCH_SIZE"],
            value_coef=v["VALUE_COEF"],
            entropy_coef=v["ENTROPY_COEF"],
            max_grad_norm=v["MAX_GRAD_NORM"],
            sample_size=v["SAMPLE_SIZE"],
            max_iterations=v["MAX_ITERATIONS"],
            checkpoint_every=v["CHECKPOINT_EVERY"],
            hidden_units=v["HIDDEN_UNITS"],
            max_rollout_episodes=v["MAX_ROLLOUT_EPISODES"],
            workers=v["WORKERS"],
            seed=v["SEED"],
            scenario=self.scenario(),
        )

    def emissions(self):
        v = self.values
        return EmissionCoefficients(
            fuel=tuple(v["EMISSION_FUEL"]),
            co2=tuple(v["EMISSION_CO2"]),
            nox=tuple(v["EMISSION_NOX"]),
            fuel_density_g_per_l=v["FUEL_DENSITY_G_PER_L"],
        )

    def echo_lines(self):
        lines = [f"# {config.APP_TITLE} run configuration"]
        for key in KEY_SCHEMA:
            lines.append(f"{key}={_format(self.values[key])}")
            if key == "FREEWAY_SPEED_LIMIT_MPH":
                lines.append(f"FREEWAY_SPEED_LIMIT_MPS={mph_to_mps(self.values[key]):.4f}")
            elif key == "RAMP_SPEED_LIMIT_MPH":
                lines.append(f"RAMP_SPEED_LIMIT_MPS={mph_to_mps(self.values[key]):.4f}")
        return lines

    def write_echo(self, directory):
        path = Path(directory) / ECHO_FILE
        path.write_text("\n".join(self.echo_lines()) + "\n", encoding="utf-8")
        return path


def _format(value):
    if isinstance(value, (list, tuple)):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config(path=None, overrides=()):
    """
    Defaults, then the file at path (if given), then KEY=VALUE overrides.
    Unknown keys and unparsable values raise ConfigError.
    """
    run_config = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for key, raw in dotenv_values(path).items():
            if key in DERIVED_KEYS:
                continue
            run_config.set(key, parse_value(key, raw))
        if run_config["CONFIG_VERSION"] != config.CONFIG_VERSION:
            raise ConfigError(
                f"{path} has CONFIG_VERSION={run_config['CONFIG_VERSION']}, expected {config.CONFIG_VERSION}"
            )
    for item in overrides:
        key, value = parse_override(item)
        run_config.set(key, value)
    return run_config


def load_run_echo(directory):
    path = Path(directory) / ECHO_FILE
    if not path.is_file():
        raise StructuralError(f"{directory} has no {ECHO_FILE}")
    return load_config(path)
