"""
SVG figures (density heat map, speed-colored trajectories, comparison chart)
and their CSV data
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from analysis.metrics import METRIC_LABELS, MetricsRecord, density_map  # noqa: E402

# fixed ids and no timestamp so reruns write identical files
plt.rcParams["svg.hashsalt"] = "weavelane"
plt.rcParams["svg.fonttype"] = "path"
SVG_METADATA = {"Date": None}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return path


def render_density_map(dmap, path, title="Traffic density"):
    """Distance on x, elapsed time on y; lighter cells hold more vehicles"""
    fig, ax = plt.subplots(figsize=(7, 5))
    steps, bins = dmap.counts.shape
    end = dmap.start_m + bins * dmap.bin_m
    if steps:
        image = ax.imshow(
            dmap.counts, cmap="gray", origin="lower", aspect="auto", interpolation="nearest",
            extent=(dmap.start_m, end, 0.0, steps * dmap.dt), vmin=0,
        )
        fig.colorbar(image, ax=ax, label="vehicles per bin")
    ax.set_xlim(dmap.start_m, end)
    ax.set_xlabel("Distance (m)")
    ax.set_ylabel("Time (s)")
    ax.set_title(title)
    return _save(fig, path)


def render_trajectories(log, path, title="Vehicle trajectories"):
    """Position over time per vehicle, green when fast and red when slow"""
    fig, ax = plt.subplots(figsize=(7, 5))
    limit = log.network.freeway_speed_limit
    if log.rows:
        frame = log.to_frame()
        segments, speeds = [], []
        for _, rows in frame.groupby("vehicle_id", sort=True):
            points = rows[["time_s", "pos_m"]].to_numpy()
            if len(points) < 2:
                continue
            segments.extend(np.stack([points[:-1], points[1:]], axis=1))
            speeds.extend(rows["speed_mps"].to_numpy()[1:])
        if segments:
            lines = LineCollection(segments, cmap="RdYlGn", linewidths=0.6)
            lines.set_array(np.asarray(speeds))
            lines.set_clim(0.0, limit)
            ax.add_collection(lines)
            fig.colorbar(lines, ax=ax, label="speed (m/s)")
    ax.set_xlim(0.0, max(log.duration, log.dt))
    ax.set_ylim(0.0, log.network.mainline_length)
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("Position (m)")
    ax.set_title(title)
    return _save(fig, path)


def render_comparison(report, path):
    """Mean +/- std per metric for baseline and policy across scenarios"""
    metrics = MetricsRecord.metric_names()
    fig, axes = plt.subplots(2, 4, figsize=(14, 6))
    x = np.arange(len(report.scenarios))
    for ax, metric in zip(axes.flat, metrics):
        rows = report.table[report.table["metric"] == metric].set_index("scenario").reindex(report.scenarios)
        ax.errorbar(x - 0.08, rows["baseline_mean"], yerr=rows["baseline_std"], fmt="o", capsize=3, label="baseline")
        ax.errorbar(x + 0.08, rows["policy_mean"], yerr=rows["policy_std"], fmt="s", capsize=3, label="policy")
        ax.set_xticks(x)
        ax.set_xticklabels([str(s) for s in report.scenarios])
        ax.set_title(METRIC_LABELS[metric], fontsize=9)
    for ax in list(axes.flat)[len(metrics):]:
        ax.axis("off")
    axes.flat[0].legend(fontsize=8)
    fig.supxlabel("Inflow scenario (vphpl)")
    fig.tight_layout()
    return _save(fig, path)


def render_reward_curve(frame, path, title="Training progress"):
    """Mean system reward per iteration against cumulative agent steps"""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(frame["total_env_steps"], frame["mean_system_reward"], marker="o", markersize=3, linewidth=1.2)
    ax.set_xlabel("Environment steps")
    ax.set_ylabel("Mean system reward per episode")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def write_density_csv(dmap, path):
    dmap.to_frame().to_csv(path, index=False)
    return Path(path)


def read_density_csv(path):
    """Counts matrix of a density CSV"""
    frame = pd.read_csv(path)
    return frame.drop(columns=["time_s"]).to_numpy(dtype=np.int64)


def render_episode(log, out_dir, name):
    """Density map and trajectory SVGs of one episode, with the density CSV"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dmap = density_map(log)
    write_density_csv(dmap, out_dir / f"{name}_density.csv")
    render_density_map(dmap, out_dir / f"{name}_density.svg")
    render_trajectories(log, out_dir / f"{name}_trajectories.svg")
    return dmap
