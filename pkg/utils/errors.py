"""
Exception types shared across the simulator, environment, trainer and CLI
"""

from config import EXIT_DATA, EXIT_RUNTIME, EXIT_USAGE


class WeaveLaneError(Exception):
    """Base class for every error raised by weavelane"""

    exit_code = EXIT_RUNTIME


class ConfigError(WeaveLaneError):
    """Unknown key, unparsable value or unreadable config file"""

    exit_code = EXIT_USAGE


class InputDomainError(WeaveLaneError, ValueError):
    """A numeric input outside the domain a model accepts (e.g. NaN speeds)"""


class StructuralError(WeaveLaneError):
    """Inputs that do not fit together: unknown ids, bad lanes, shape mismatches"""

    exit_code = EXIT_DATA


class CheckpointVersionError(StructuralError):
    """Checkpoint written with a different format version"""


class OverlapFault(WeaveLaneError):
    """Two vehicles overlap on a lane after a step; the safety layer let something through"""

    def __init__(self, message, lane=None, vehicle_ids=None, time_s=None):
        super().__init__(message)
        self.lane = lane
        self.vehicle_ids = vehicle_ids or ()
        self.time_s = time_s


class TrainingFault(WeaveLaneError):
    """Non-finite ratio, loss or gradient during a PPO update"""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} ({details})"
