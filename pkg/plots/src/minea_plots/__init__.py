"""Figure renderers for minea-ergo output files."""

from .figures import (
    gaussian_density,
    histogram_figure,
    phase_figure,
    render_histogram,
    render_phase,
    render_timeavg,
    running_time_average,
    save_figure,
    timeavg_figure,
)
from .io import (
    PhaseScan,
    SchemaError,
    TrajectoryTable,
    read_phase_scan,
    read_samples,
    read_trajectory,
)

__all__ = [
    "PhaseScan",
    "SchemaError",
    "TrajectoryTable",
    "gaussian_density",
    "histogram_figure",
    "phase_figure",
    "read_phase_scan",
    "read_samples",
    "read_trajectory",
    "render_histogram",
    "render_phase",
    "render_timeavg",
    "running_time_average",
    "save_figure",
    "timeavg_figure",
]
