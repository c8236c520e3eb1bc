"""
Run state management: the activity log and run-directory bookkeeping
"""

import json
import logging
from datetime import datetime
from pathlib import Path

logger = logging.getLogger("weavelane")

_activity_log = []


def initialize_run_state(out_dir=None):
    """Reset the activity log and make sure the run directory exists"""
    _activity_log.clear()
    if out_dir is None:
        return None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def configure_logging(verbose=False):
    """Attach a console handler to the weavelane logger"""
    level = logging.DEBUG if verbose else logging.INFO
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        logger.addHandler(handler)
    return logger


def log_activity(agent_name, action, details="", level=logging.INFO):
    """Add an entry to the activity log and forward it to the logger"""
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    log_entry = {
        "timestamp": timestamp,
        "agent": agent_name,
        "action": action,
        "details": details,
    }
    _activity_log.append(log_entry)
    logger.log(level, "%s | %s | %s", agent_name, action, details)
    return log_entry


def get_activity_log():
    return list(_activity_log)


def save_activity_log(out_dir):
    """Write the activity log as JSON lines into the run directory"""
    path = Path(out_dir) / "activity_log.jsonl"
    with path.open("w", encoding="utf-8") as handle:
        for entry in _activity_log:
            handle.write(json.dumps(entry) + "\n")
    return path
