"""
Evaluation metrics, density maps, comparison reports and their figures
"""

from .metrics import (
    ComparisonReport,
    DensityMap,
    EmissionCoefficients,
    MetricsRecord,
    aggregate_runs,
    compute_metrics,
    density_map,
    emission_rate,
)
from .render import render_comparison, render_density_map, render_episode, render_trajectories

__all__ = [
    'ComparisonReport',
    'DensityMap',
    'EmissionCoefficients',
    'MetricsRecord',
    'aggregate_runs',
    'compute_metrics',
    'density_map',
    'emission_rate',
    'render_comparison',
    'render_density_map',
    'render_episode',
    'render_trajectories',
]
