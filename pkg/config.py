"""
Configuration defaults for the weavelane weaving-area simulator and trainer
"""

# Format versions
CONFIG_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1
CSV_SCHEMA_VERSION = 1

# Unit conversions
MPH_TO_MPS = 0.44704
METERS_PER_MILE = 1609.344
LITERS_PER_GALLON = 3.785411784

# Network geometry (meters)
UPSTREAM_LENGTH_M = 200.0    # segment start to on-ramp gore
WEAVE_LENGTH_M = 200.0       # on-ramp gore to off-ramp gore
DOWNSTREAM_LENGTH_M = 100.0  # off-ramp gore to segment end
MAINLINE_LANES = 3
CONTROL_UPSTREAM_MARGIN_M = 100.0    # control starts this far before the on-ramp gore
CONTROL_DOWNSTREAM_MARGIN_M = 100.0  # and ends this far past the off-ramp gore

# Speed limits
FREEWAY_SPEED_LIMIT_MPH = 65.0
RAMP_SPEED_LIMIT_MPH = 40.0

# Vehicle kinematics
VEHICLE_LENGTH_M = 5.0
MAX_ACCEL = 4.0           # action-space ceiling, m/s^2
MAX_DECEL = 8.0           # action-space floor magnitude, m/s^2
PHYSICAL_MAX_DECEL = 9.81 # safety layer may brake this hard
EMERGENCY_DECEL = 9.0     # realized decel above this is an emergency brake

# Episode timing
TIME_STEP_S = 0.2
EPISODE_STEPS = 1000
DEFAULT_SEED = 2024

# Baseline driver (IDM + incentive/gap-acceptance lane changing)
IDM_TIME_HEADWAY_S = 1.2
IDM_MIN_GAP_M = 2.0
IDM_ACCEL = 2.0
IDM_COMFORT_DECEL = 3.0
IDM_DELTA = 4.0
LC_ACCEL_GAIN = 0.3        # discretionary change needs this much IDM gain, m/s^2
LC_LEAD_MARGIN_M = 3.0     # extra lead gap demanded by human drivers
LC_LAG_MARGIN_M = 5.0      # extra lag gap demanded by human drivers
LC_EXIT_LOOKAHEAD_M = 300.0

# Inflow
FREEWAY_INFLOW_VPHPL = 1200.0
RAMP_INFLOW_VPHPL = 1200.0
EXIT_FRACTION = 0.5
MIN_SPAWN_HEADWAY_S = 1.0

SCENARIO_PRESETS = {
    "no_congestion": 900.0,
    "moderate": 1200.0,
    "extreme": 1500.0,
}

# Observation
DETECTION_RANGE_M = 200.0
NEIGHBOR_BLOCKS = 6
OBSERVATION_SIZE = 5 + 4 * NEIGHBOR_BLOCKS

# Reward weights
REWARD_WEIGHTS = {
    "v": 0.1,
    "l": 1.0,
    "c": 1.0,
    "s": 5.0,
    "b": 1.0,
    "h": 1.0,
}
MIN_TIME_HEADWAY_S = 1.0
HEADWAY_SPEED_FLOOR = 0.1

# Policy network
HIDDEN_UNITS = 128
LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
INITIAL_LOG_STD = 0.0

# PPO training
LEARNING_RATE = 5e-5
CLIP_EPSILON = 0.2
GAMMA = 0.99
GAE_LAMBDA = 0.95
EPOCHS_PER_ITER = 10
MINIBATCH_SIZE = 2048
VALUE_COEF = 0.5
ENTROPY_COEF = 0.0
MAX_GRAD_NORM = 0.5
SAMPLE_SIZE = 16000
MAX_ITERATIONS = 200
CHECKPOINT_EVERY = 10
MAX_ROLLOUT_EPISODES = 64    # per iteration, stops collection on a starved environment
ROLLOUT_WORKERS = 1

# Evaluation
EVALUATION_EPISODES = 30
DENSITY_BIN_M = 10.0
STOP_SPEED = 0.3    # below this a vehicle is stopped
REARM_SPEED = 2.0   # must exceed this before the next stop counts

# Emission polynomial factors, HBEFA3 PC_G_EU4 form rescaled for v in m/s
# and a per-second output: mg/s for CO2, NOx and fuel
EMISSION_COEFFICIENTS = {
    "fuel": [3014 / 3.6, 299.3 / 3.6, 0.0, -149 / 3.6, 9.014 / 3.6, 0.0],
    "co2": [9449 / 3.6, 938.4 / 3.6, 0.0, -467.1 / 3.6, 28.26 / 3.6, 0.0],
    "nox": [4.336 / 3.6, 0.4428 / 3.6, 0.0, -0.3204 / 3.6, 0.01371 / 3.6, 0.0],
}
FUEL_DENSITY_G_PER_L = 742.0

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

APP_TITLE = "weavelane"
