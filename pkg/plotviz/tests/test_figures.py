import numpy as np
import pytest

from plotviz import FigureRequest, read_orbit_json, render
from plotviz.figures import plot_multipliers, plot_sphere, plot_timeseries


def test_sphere_from_constant_trajectory(upright_csv, tmp_path):
    out = tmp_path / "sphere.png"
    path = plot_sphere(FigureRequest(upright_csv, "sphere3d", str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert path == str(out)


def test_sphere_single_row(single_row_csv, tmp_path):
    out = tmp_path / "single.png"
    plot_sphere(FigureRequest(single_row_csv, "sphere3d", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_sphere_loop_and_lab_frame(swing_csv, tmp_path):
    for lab in (False, True):
        out = tmp_path / f"loop_{lab}.png"
        plot_sphere(FigureRequest(swing_csv, "sphere3d", str(out), lab_frame=lab, stride=2))
        assert out.exists() and out.stat().st_size > 0


def test_timeseries_non_falling_height(swing_csv, tmp_path):
    from plotviz import read_trajectory_csv

    traj = read_trajectory_csv(swing_csv)
    assert np.min(traj["height"]) > 0.0  # the fixture orbit never crosses 0
    out = tmp_path / "series.svg"
    plot_timeseries(FigureRequest(swing_csv, "timeseries", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_multipliers_stable_inside_circle(stable_orbit_json, tmp_path):
    orbit = read_orbit_json(stable_orbit_json)
    moduli = [abs(complex(re, im)) for re, im in orbit["multipliers"]]
    assert orbit["stable"] and all(m < 1.0 for m in moduli)
    out = tmp_path / "mult.png"
    plot_multipliers(FigureRequest(stable_orbit_json, "multipliers", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_multipliers_identity(identity_orbit_json, tmp_path):
    orbit = read_orbit_json(identity_orbit_json)
    assert all(re == 1.0 and im == 0.0 for re, im in orbit["multipliers"])
    out = tmp_path / "identity.png"
    plot_multipliers(FigureRequest(identity_orbit_json, "multipliers", str(out)))
    assert out.exists() and out.stat().st_size > 0


def test_render_dispatch(swing_csv, stable_orbit_json, tmp_path):
    for kind, source in (("sphere3d", swing_csv), ("timeseries", swing_csv),
                         ("multipliers", stable_orbit_json)):
        out = tmp_path / f"{kind}.png"
        render(FigureRequest(source, kind, str(out)))
        assert out.exists()


def test_invalid_kind_rejected(swing_csv, tmp_path):
    with pytest.raises(ValueError):
        FigureRequest(swing_csv, "hologram", str(tmp_path / "x.png"))
