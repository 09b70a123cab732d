"""Secondary acceptance: render real simulator outputs for the k=10, A=6 cell.

Produces the trajectory CSV and orbit JSON through the kwpend command line
(the only interface plotviz depends on), renders all three figure kinds, and
checks that the rendered multipliers sit inside the unit circle whenever the
orbit file claims stability.
"""

import json
import math
import shutil
import subprocess

import pytest

from plotviz import FigureRequest, read_orbit_json, read_trajectory_csv, render
from plotviz.io import unit_sphere_residual

pytestmark = pytest.mark.slow

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def fig4_outputs(tmp_path_factory):
    if shutil.which("kwpend") is None:
        pytest.skip("kwpend CLI not installed")
    tmp = tmp_path_factory.mktemp("fig4")
    config = {
        "format_version": 1,
        "system": "full",
        "params": {"a": 5.0, "k": 10, "T": TWO_PI, "mu": 1.0},
        "forcing": {"type": "rotating", "A": 6.0},
        "orbit": {"seed": {"strategy": "attractor"}},
    }
    cfg_orbit = tmp / "orbit_config.json"
    cfg_orbit.write_text(json.dumps(config))
    orbit_path = tmp / "orbit.json"
    proc = subprocess.run(["kwpend", "find-orbit", "--config", str(cfg_orbit),
                           "--out", str(orbit_path), "--quiet"])
    assert proc.returncode == 0
    orbit = json.loads(orbit_path.read_text())

    sim_config = dict(config)
    del sim_config["orbit"]
    sim_config["simulate"] = {"t0": 0.0, "x0": orbit["x0"], "t1": TWO_PI,
                              "sample_dt": TWO_PI / 2000.0}
    cfg_sim = tmp / "sim_config.json"
    cfg_sim.write_text(json.dumps(sim_config))
    traj_path = tmp / "orbit_trajectory.csv"
    proc = subprocess.run(["kwpend", "simulate", "--config", str(cfg_sim),
                           "--out", str(traj_path), "--quiet"])
    assert proc.returncode == 0
    return str(traj_path), str(orbit_path)


def test_renders_all_three_figures(fig4_outputs, tmp_path):
    traj_path, orbit_path = fig4_outputs
    outputs = {}
    for kind, source in (("sphere3d", traj_path), ("timeseries", traj_path),
                         ("multipliers", orbit_path)):
        out = tmp_path / f"{kind}.png"
        render(FigureRequest(source, kind, str(out)))
        assert out.exists() and out.stat().st_size > 0
        outputs[kind] = out
    print(f"ACCEPTANCE plotviz-figures: PASS (rendered {', '.join(outputs)})")


def test_orbit_trajectory_is_non_falling_and_on_sphere(fig4_outputs):
    traj_path, _ = fig4_outputs
    traj = read_trajectory_csv(traj_path)
    assert unit_sphere_residual(traj) < 1e-6
    assert min(traj["height"]) > 0.0


def test_stable_orbit_multipliers_inside_circle(fig4_outputs):
    _, orbit_path = fig4_outputs
    orbit = read_orbit_json(orbit_path)
    moduli = [abs(complex(re, im)) for re, im in orbit["multipliers"]]
    assert orbit["stable"] is True
    assert all(m < 1.0 for m in moduli)
    print(f"ACCEPTANCE plotviz-multipliers: PASS (moduli {[f'{m:.3f}' for m in moduli]})")
