"""
Checkpoint files: one .npz archive per save.

Layout: ``format_version`` and ``iteration`` scalars, ``param/<name>`` for
every network tensor (the log-std included), ``adam/t`` and
``adam/{m,v}/<name>`` for the optimizer moments, and ``total_env_steps``.
Arrays keep their shapes and float64 values exactly.
"""

from pathlib import Path

import numpy as np

import config
from learning.optimizer import Adam
from learning.policy_net import PolicyParams
from utils.errors import CheckpointVersionError, StructuralError
from utils.state_manager import log_activity

PARAM_PREFIX = "param/"


def checkpoint_path(directory, iteration):
    return Path(directory) / f"checkpoint_{iteration:04d}.npz"


def save_checkpoint(path, params, iteration, optimizer=None, total_env_steps=0):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        "format_version": np.array(config.CHECKPOINT_FORMAT_VERSION, dtype=np.int64),
        "iteration": np.array(iteration, dtype=np.int64),
        "total_env_steps": np.array(total_env_steps, dtype=np.int64),
    }
    arrays.update({PARAM_PREFIX + name: array for name, array in params.arrays().items()})
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
    with path.open("wb") as handle:
        np.savez(handle, **arrays)
    log_activity("Checkpoint", "Saved", f"{path.name} (iteration {iteration})")
    return path


def load_checkpoint(path, learning_rate=config.LEARNING_RATE):
    """Returns (params, iteration, optimizer, total_env_steps)"""
    path = Path(path)
    if not path.is_file():
        raise StructuralError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as archive:
        arrays = {key: archive[key] for key in archive.files}
    if "format_version" not in arrays:
        raise StructuralError(f"{path} is not a weavelane checkpoint")
    version = int(arrays["format_version"])
    if version != config.CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path} has checkpoint format {version}, expected {config.CHECKPOINT_FORMAT_VERSION}"
        )
    params = PolicyParams.from_arrays(
        {key[len(PARAM_PREFIX):]: value for key, value in arrays.items() if key.startswith(PARAM_PREFIX)}
    )
    optimizer = Adam(learning_rate).load_state_arrays(arrays)
    return params, int(arrays["iteration"]), optimizer, int(arrays.get("total_env_steps", 0))


def latest_checkpoint(directory):
    candidates = sorted(Path(directory).glob("checkpoint_*.npz"))
    return candidates[-1] if candidates else None
