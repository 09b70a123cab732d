"""Offline figure generation for the pendulum simulator's CSV/JSON outputs."""

from .figures import FigureRequest, plot_multipliers, plot_sphere, plot_timeseries, render
from .io import SchemaError, read_orbit_json, read_trajectory_csv, unit_sphere_residual

__version__ = "0.1.0"
