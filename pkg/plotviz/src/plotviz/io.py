"""Readers for the simulator's trajectory CSV and orbit JSON files.

plotviz never recomputes dynamics: it draws exactly what the files contain,
so any numeric disagreement with the simulator is a schema bug, not physics.
Both formats carry a ``format_version`` marker that must be recognized.
"""

from __future__ import annotations

import json

import numpy as np

FORMAT_VERSION = 1

TRAJECTORY_COLUMNS = ("t", "theta", "phi", "p_theta", "p_phi",
                      "x", "y", "z", "height", "energy")


class SchemaError(ValueError):
    """The input file is not a recognized trajectory CSV or orbit JSON."""


def read_trajectory_csv(path: str) -> dict:
    """Parse a trajectory CSV into a dict of named float arrays."""
    version = None
    rows = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "format_version" in line:
                    try:
                        version = int(line.split(":")[1])
                    except (IndexError, ValueError):
                        raise SchemaError(f"unreadable format_version line: {line!r}")
                continue
            if header is None:
                header = tuple(line.split(","))
                continue
            rows.append([float(v) for v in line.split(",")])
    if version != FORMAT_VERSION:
        raise SchemaError(f"trajectory file has format_version {version!r}, expected {FORMAT_VERSION}")
    if header != TRAJECTORY_COLUMNS:
        raise SchemaError(f"unexpected trajectory header {header!r}")
    if not rows:
        raise SchemaError("trajectory file contains no data rows")
    data = np.array(rows, dtype=float)
    return {name: data[:, i] for i, name in enumerate(TRAJECTORY_COLUMNS)}


def pivot_frame(traj: dict) -> tuple:
    """Pivot-frame coordinates (x, y - h, z); the height column is y - h."""
    return traj["x"], traj["height"], traj["z"]


def unit_sphere_residual(traj: dict) -> float:
    """Largest deviation of the pivot-frame points from the unit sphere."""
    x, y, z = pivot_frame(traj)
    return float(np.max(np.abs(x**2 + y**2 + z**2 - 1.0)))


def read_orbit_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise SchemaError("orbit file must contain a JSON object")
    if data.get("format_version") != FORMAT_VERSION:
        raise SchemaError(
            f"orbit file has format_version {data.get('format_version')!r}, expected {FORMAT_VERSION}")
    multipliers = data.get("multipliers")
    if (not isinstance(multipliers, list) or
            any(not isinstance(m, list) or len(m) != 2 for m in multipliers)):
        raise SchemaError("orbit file must list multipliers as [re, im] pairs")
    return data
