import json
import math

import pytest


def _format_csv(rows):
    header = "t,theta,phi,p_theta,p_phi,x,y,z,height,energy"
    lines = ["# format_version: 1", header]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def _trajectory_row(t, theta, phi, p_theta=0.0, p_phi=0.0, h=0.0):
    x = math.cos(theta) * math.cos(phi)
    g = math.cos(theta) * math.sin(phi)
    z = math.sin(theta)
    energy = 0.5 * (p_theta**2 + (p_phi / math.cos(theta)) ** 2)
    return (t, theta, phi, p_theta, p_phi, x, h + g, z, g, energy)


@pytest.fixture
def csv_factory():
    """(format_csv, trajectory_row) helpers for building synthetic trajectory files."""
    return _format_csv, _trajectory_row


@pytest.fixture
def upright_csv(tmp_path):
    """Constant upright trajectory: a single point at (0, 1, 0)."""
    rows = [_trajectory_row(0.1 * i, 0.0, math.pi / 2.0) for i in range(20)]
    path = tmp_path / "upright.csv"
    path.write_text(_format_csv(rows))
    return str(path)


@pytest.fixture
def single_row_csv(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text(_format_csv([_trajectory_row(0.0, 0.2, 1.0)]))
    return str(path)


@pytest.fixture
def swing_csv(tmp_path):
    """A closed-looking non-falling loop strictly above the equator."""
    rows = []
    for i in range(200):
        t = 2.0 * math.pi * i / 199.0
        theta = 0.3 * math.sin(t)
        phi = math.pi / 2.0 + 0.4 * math.cos(t)
        rows.append(_trajectory_row(t, theta, phi, h=0.05 * math.sin(10 * t)))
    path = tmp_path / "swing.csv"
    path.write_text(_format_csv(rows))
    return str(path)


def _orbit_payload(multipliers, stable):
    return {
        "format_version": 1,
        "system": "full",
        "x0": [0.1, 1.2, 0.0, 0.0],
        "t0": 0.0,
        "period": 2.0 * math.pi,
        "residual": 1e-11,
        "multipliers": multipliers,
        "multiplier_moduli": [abs(complex(re, im)) for re, im in multipliers],
        "stable": stable,
        "min_height": 0.5,
        "k": 10,
        "params": {"a": 5.0, "epsilon": 0.1, "k": 10, "T": 2.0 * math.pi, "mu": 1.0,
                   "forcing": {"type": "rotating", "A": 6.0}},
    }


@pytest.fixture
def stable_orbit_json(tmp_path):
    payload = _orbit_payload([[0.2, 0.1], [0.2, -0.1], [-0.05, 0.0], [0.01, 0.0]], True)
    path = tmp_path / "orbit.json"
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture
def identity_orbit_json(tmp_path):
    payload = _orbit_payload([[1.0, 0.0]] * 4, False)
    path = tmp_path / "identity.json"
    path.write_text(json.dumps(payload))
    return str(path)
