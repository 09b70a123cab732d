"""Figure builders: trajectory on the unit sphere, time series, multiplier map."""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import pivot_frame, read_orbit_json, read_trajectory_csv, unit_sphere_residual

SPHERE_RESIDUAL_WARN = 1e-6


@dataclass
class FigureRequest:
    """One figure job: input path, figure kind, output path, styling."""

    input_path: str
    kind: str  # sphere3d | timeseries | multipliers
    output_path: str
    elev: float = 20.0
    azim: float = -60.0
    stride: int = 1
    lab_frame: bool = False

    def __post_init__(self):
        if self.kind not in ("sphere3d", "timeseries", "multipliers"):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_sphere(request: FigureRequest) -> str:
    """Trajectory curve on a wireframe unit sphere, equator highlighted.

    By default the curve is drawn in the pivot frame (x, y - h, z), where the
    motion lies exactly on the sphere; --lab-frame plots the raw y instead.
    """
    traj = read_trajectory_csv(request.input_path)
    residual = unit_sphere_residual(traj)
    if request.lab_frame:
        xs, ys, zs = traj["x"], traj["y"], traj["z"]
    else:
        xs, ys, zs = pivot_frame(traj)
    s = slice(None, None, request.stride)

    fig = plt.figure(figsize=(7, 7))
    ax = fig.add_subplot(projection="3d")
    u = np.linspace(0.0, 2.0 * np.pi, 36)
    v = np.linspace(0.0, np.pi, 19)
    ax.plot_wireframe(np.outer(np.cos(u), np.sin(v)),
                      np.outer(np.sin(u), np.sin(v)),
                      np.outer(np.ones_like(u), np.cos(v)),
                      color="0.85", linewidth=0.4)
    # equator of the height observable: y' = 0 on the sphere
    ax.plot(np.cos(u), np.zeros_like(u), np.sin(u), color="0.4", linewidth=1.0,
            label="height = 0")
    if len(xs) > 1:
        ax.plot(xs[s], ys[s], zs[s], color="tab:red", linewidth=1.2, label="trajectory")
    else:
        ax.scatter(xs, ys, zs, color="tab:red", s=30, label="state")
    ax.scatter([xs[0]], [ys[0]], [zs[0]], color="tab:blue", s=25, label="start")
    if residual > SPHERE_RESIDUAL_WARN and not request.lab_frame:
        ax.text2D(0.02, 0.98, f"warning: unit-sphere residual {residual:.2e}",
                  transform=ax.transAxes, color="tab:orange", va="top")
    ax.set_xlabel("x")
    ax.set_ylabel("y (lab)" if request.lab_frame else "y - h")
    ax.set_zlabel("z")
    ax.set_box_aspect((1, 1, 1))
    ax.view_init(elev=request.elev, azim=request.azim)
    ax.legend(loc="lower left", fontsize=8)
    return _save(fig, request.output_path)


def plot_timeseries(request: FigureRequest) -> str:
    """theta, phi and the height observable against time."""
    traj = read_trajectory_csv(request.input_path)
    s = slice(None, None, request.stride)
    t = traj["t"][s]
    fig, axes = plt.subplots(3, 1, figsize=(8, 7), sharex=True)
    for ax, column, label in zip(axes, ("theta", "phi", "height"),
                                 (r"$\theta$", r"$\varphi$", "height")):
        ax.plot(t, traj[column][s], linewidth=0.9)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[2].axhline(0.0, color="0.4", linewidth=0.8)
    axes[2].set_xlabel("t")
    return _save(fig, request.output_path)


def plot_multipliers(request: FigureRequest) -> str:
    """Floquet multipliers in the complex plane with the unit circle."""
    orbit = read_orbit_json(request.input_path)
    mults = np.array([complex(re, im) for re, im in orbit["multipliers"]])
    fig, ax = plt.subplots(figsize=(6, 6))
    angle = np.linspace(0.0, 2.0 * np.pi, 256)
    ax.plot(np.cos(angle), np.sin(angle), color="0.4", linewidth=1.0)
    ax.scatter(mults.real, mults.imag, color="tab:red", zorder=3)
    for z in mults:
        ax.annotate(f"|{abs(z):.4f}|", (z.real, z.imag), textcoords="offset points",
                    xytext=(6, 6), fontsize=8)
    limit = max(1.15, 1.15 * float(np.max(np.abs(mults))) if len(mults) else 1.15)
    ax.set_xlim(-limit, limit)
    ax.set_ylim(-limit, limit)
    ax.set_aspect("equal")
    ax.axhline(0.0, color="0.85", linewidth=0.7)
    ax.axvline(0.0, color="0.85", linewidth=0.7)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    stable = orbit.get("stable")
    ax.set_title(f"Floquet multipliers (stable = {stable})")
    return _save(fig, request.output_path)


def render(request: FigureRequest) -> str:
    if request.kind == "sphere3d":
        return plot_sphere(request)
    if request.kind == "timeseries":
        return plot_timeseries(request)
    return plot_multipliers(request)
