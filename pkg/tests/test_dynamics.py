import math

import numpy as np
import pytest

from kwpend import (
    BumpConfig,
    ChartSingularity,
    ForcingSpec,
    Params,
    State,
    StepControl,
    SystemKind,
    bump_rho,
    bump_sigma,
    chi_cutoff,
    energy,
    energy_rate,
    forcing_eval,
    height,
    height_accel,
    height_rate,
    integrate,
    pivot_height,
    pivot_velocity,
    rhs_averaged,
    rhs_full,
    rhs_modified,
    state_to_cartesian,
    upright,
)
from kwpend.dynamics import _modified_terms

TWO_PI = 2.0 * math.pi


def rotating_params(k=10):
    return Params(a=5.0, epsilon=1.0 / k, T=TWO_PI, mu=1.0, forcing=ForcingSpec.rotating(6.0))


def random_states(rng, n, p_scale=3.0):
    return np.column_stack([
        rng.uniform(-1.2, 1.2, n),
        rng.uniform(0.0, TWO_PI, n),
        rng.uniform(-p_scale, p_scale, n),
        rng.uniform(-p_scale, p_scale, n),
    ])


# ---------------------------------------------------------------------------
# pivot motion and forcing
# ---------------------------------------------------------------------------


def test_pivot_velocity_examples():
    p = Params(a=5.0, epsilon=0.1, T=TWO_PI)
    assert pivot_velocity(0.0, p) == pytest.approx(5.0, abs=1e-15)
    assert pivot_height(0.0, p) == 0.0
    # quarter of the fast period: cos(pi/2) = 0
    t_quarter = p.epsilon * p.T / 4.0
    assert pivot_velocity(t_quarter, p) == pytest.approx(0.0, abs=1e-14)


def test_pivot_height_consistent_with_velocity():
    p = Params(a=3.0, epsilon=0.05, T=TWO_PI)
    h = 1e-7
    for t in (0.3, 1.7, 4.1):
        fd = (pivot_height(t + h, p) - pivot_height(t - h, p)) / (2 * h)
        assert fd == pytest.approx(pivot_velocity(t, p), rel=1e-6)


def test_forcing_examples():
    assert forcing_eval(0.0, ForcingSpec.rotating(6.0)) == pytest.approx((6.0, 0.0))
    assert forcing_eval(1.234, ForcingSpec.zero()) == (0.0, 0.0)
    px, pz = forcing_eval(0.0, ForcingSpec.oscillating_angle(1.5, math.pi))
    assert px == pytest.approx(1.5)
    assert pz == pytest.approx(0.0, abs=1e-15)


def test_forcing_fourier_matches_rotating():
    # A cos(s), A sin(s) written as a Fourier pair
    spec = ForcingSpec.fourier_pair(px_cos=[0.0, 6.0], pz_sin=[6.0])
    rot = ForcingSpec.rotating(6.0)
    for s in np.linspace(0.0, TWO_PI, 17):
        assert forcing_eval(s, spec) == pytest.approx(forcing_eval(s, rot), abs=1e-14)


# ---------------------------------------------------------------------------
# full system
# ---------------------------------------------------------------------------


def test_rhs_full_upright_equilibrium():
    p = Params(a=0.0, epsilon=0.1, T=TWO_PI, mu=0.0)
    deriv = rhs_full(0.0, upright(), p)
    assert np.max(np.abs(deriv)) < 1e-15


def test_rhs_full_gravity_torque_only():
    p = Params(a=0.0, epsilon=0.1, T=TWO_PI, mu=0.0)
    deriv = rhs_full(0.0, State(0.0, 0.0, 0.0, 0.0), p)
    assert deriv == pytest.approx([0.0, 0.0, 0.0, -1.0])


def test_rhs_full_guard():
    p = rotating_params()
    with pytest.raises(ChartSingularity):
        rhs_full(0.0, State(math.pi / 2.0, 1.0, 0.1, 0.0), p)


def test_rhs_full_against_lagrange_oracle(lagrange_oracle):
    """Independent symbolic Euler-Lagrange derivation, 1000 random points."""
    oracle = lagrange_oracle
    rng = np.random.default_rng(2024)
    p = rotating_params(k=10)
    pts = random_states(rng, 1000)
    ts = rng.uniform(0.0, TWO_PI, 1000)
    worst = 0.0
    for x, t in zip(pts, ts):
        hdot = 5.0 * (TWO_PI / TWO_PI) * math.cos((TWO_PI / TWO_PI) * t / 0.1)
        px, pz = 6.0 * math.cos(t), 6.0 * math.sin(t)
        expected = oracle(*x, hdot, px, pz, 1.0)
        got = rhs_full(t, x, p)
        rel = np.max(np.abs(got - expected) / (1.0 + np.abs(expected)))
        worst = max(worst, rel)
    assert worst < 1e-10


# ---------------------------------------------------------------------------
# modified system and cutoffs
# ---------------------------------------------------------------------------


def test_modified_coincides_with_full_when_chi_one():
    rng = np.random.default_rng(5)
    p = rotating_params()
    bump = BumpConfig(c=40.0, delta=0.01, Delta=1e-3)
    count = 0
    for x in random_states(rng, 400):
        if chi_cutoff(*x, bump) != 1.0:
            continue
        t = rng.uniform(0.0, TWO_PI)
        full = rhs_full(t, x, p)
        mod = rhs_modified(t, x, p, bump)
        assert np.max(np.abs(full - mod) / (1.0 + np.abs(full))) < 1e-14
        count += 1
    assert count > 300


def test_modified_on_face_uses_cutoff_free_velocities():
    # sigma = 0 on the face, so theta' = p_theta and phi' = p_phi/cos^2 theta
    p = rotating_params()
    bump = BumpConfig(c=40.0, delta=0.3, Delta=0.1)
    theta = 0.4
    phi = math.asin(bump.delta / math.cos(theta))
    x = State(theta, phi, 0.7, -0.2)
    assert bump_sigma(theta, phi, bump.delta, bump.Delta) == 0.0
    deriv = rhs_modified(1.3, x, p, bump)
    assert deriv[0] == pytest.approx(0.7, abs=1e-15)
    assert deriv[1] == pytest.approx(-0.2 / math.cos(theta) ** 2, abs=1e-14)


def test_modified_smooth_in_transition_shell():
    p = rotating_params()
    bump = BumpConfig(c=2.0, delta=0.4, Delta=0.15)
    # defect 1.5*Delta: inside the transition band
    theta = 0.2
    g_target = bump.delta + 1.5 * bump.Delta
    phi = math.asin(g_target / math.cos(theta))
    x = np.array([theta, phi, 0.3, 0.1])
    t = 0.1369  # moderate pivot velocity, so the cutoff gradient dominates
    base = rhs_modified(t, x, p, bump)
    rng = np.random.default_rng(8)
    for _ in range(20):
        dx = rng.normal(size=4)
        dx *= 1e-8 / np.linalg.norm(dx)
        moved = rhs_modified(t, x + dx, p, bump)
        assert np.max(np.abs(moved - base)) < 1e-6


def test_bump_zones_and_monotonicity():
    delta, Delta = 0.3, 0.05
    theta = 0.2
    # exactly on the face
    phi_face = math.asin(delta / math.cos(theta))
    assert bump_sigma(theta, phi_face, delta, Delta) == 0.0
    # defect 3*Delta: outside the transition
    phi_out = math.asin((delta + 3 * Delta) / math.cos(theta))
    assert bump_sigma(theta, phi_out, delta, Delta) == 1.0
    # nondecreasing along a ray of increasing defect
    values = []
    for defect in np.linspace(0.0, 3 * Delta, 100):
        phi = math.asin((delta + defect) / math.cos(theta))
        values.append(bump_sigma(theta, phi, delta, Delta))
    diffs = np.diff(values)
    assert np.all(diffs >= -1e-15)
    assert all(0.0 <= v <= 1.0 for v in values)


def test_bump_rho_zones():
    c, Delta = 2.0, 0.1
    # exactly on the shell: E = c^2
    x = State(0.3, 1.0, math.sqrt(2.0) * c * math.cos(0.7), 0.0)
    pth = math.sqrt(2.0) * c
    assert bump_rho(0.0, pth, 0.0, c, Delta) == 0.0
    assert bump_rho(0.0, 0.1, 0.0, c, Delta) == 1.0  # E = 0.005, defect ~ 4 >> 2*Delta


def test_bump_config_validation():
    with pytest.raises(ValueError):
        BumpConfig(c=1.0, delta=0.1, Delta=0.06)  # 2*Delta > delta
    with pytest.raises(ValueError):
        BumpConfig(c=0.05, delta=0.5, Delta=0.03)  # 2*Delta > c


# ---------------------------------------------------------------------------
# averaged system
# ---------------------------------------------------------------------------


def test_averaged_upright_equilibrium():
    p = Params(a=5.0, epsilon=1.0, T=TWO_PI, mu=1.0)
    deriv = rhs_averaged(upright(), 0.87, p)
    assert np.max(np.abs(deriv[:4])) < 1e-15
    assert deriv[4] == 1.0


def test_averaged_equals_substitution_identity():
    """rhs_averaged == modified core with hdot = 0, hdot^2 -> a^2 omega^2 / 2, chi = 1 (exact)."""
    rng = np.random.default_rng(11)
    p = rotating_params()
    for x in random_states(rng, 100):
        s = rng.uniform(0.0, TWO_PI)
        got = rhs_averaged(x, s, p)
        px, pz = forcing_eval(s, p.forcing)
        expected = _modified_terms(
            math.sin(x[0]), math.cos(x[0]), math.sin(x[1]), math.cos(x[1]),
            x[2], x[3], 0.0, 0.5 * (p.a * p.omega) ** 2, 1.0, px, pz, p.mu,
        )
        assert np.all(got[:4] == np.array(expected))


def test_averaged_is_fast_time_average_zero_forcing():
    """Gauss-Legendre average of the full field over one period equals the
    averaged field exactly when the forcing is constant (zero)."""
    p = Params(a=5.0, epsilon=0.1, T=TWO_PI, mu=1.0, forcing=ForcingSpec.zero())
    x = np.array([0.4, 1.1, 0.3, -0.2])
    nodes, weights = np.polynomial.legendre.leggauss(30)
    k = p.k
    total = np.zeros(4)
    for j in range(k):
        a, b = j * p.T / k, (j + 1) * p.T / k
        ts = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        ws = 0.5 * (b - a) * weights
        for t, w in zip(ts, ws):
            total += w * rhs_full(t, x, p)
    avg = total / p.T
    expected = rhs_averaged(x, 0.0, p)[:4]
    assert np.max(np.abs(avg - expected)) < 1e-11


def test_averaged_is_fast_period_average_rotating():
    """With slowly varying forcing, the one-fast-period mean of the full field
    matches the averaged field at the midpoint phase to second order."""
    p = Params(a=5.0, epsilon=0.01, T=TWO_PI, mu=1.0, forcing=ForcingSpec.rotating(6.0))
    x = np.array([0.4, 1.1, 0.3, -0.2])
    t_bar = 1.3
    span = p.epsilon * p.T
    nodes, weights = np.polynomial.legendre.leggauss(40)
    ts = 0.5 * span * nodes + t_bar + 0.5 * span
    mean = sum(w * rhs_full(t, x, p) for t, w in zip(ts, weights)) * 0.5
    expected = rhs_averaged(x, t_bar + span / 2.0, p)[:4]
    assert np.max(np.abs(mean - expected) / (1.0 + np.abs(expected))) < 2e-3


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def test_height_and_rate_at_upright():
    assert height(upright()) == pytest.approx(1.0)
    assert height_rate(upright()) == pytest.approx(0.0, abs=1e-15)


def test_height_accel_tangency_value():
    """Unforced tangency sample with p = 0: second derivative is -1 + delta^2."""
    p = Params(a=0.0, epsilon=1.0, T=TWO_PI, mu=1.0, forcing=ForcingSpec.zero())
    delta = 0.1
    theta = 0.25
    phi = math.asin(delta / math.cos(theta))
    x = State(theta, phi, 0.0, 0.0)
    for kind in (SystemKind.averaged(), SystemKind.modified(BumpConfig(40.0, delta, 1e-3))):
        value = height_accel(x, 0.0, p, kind)
        assert value == pytest.approx(-1.0 + delta**2, abs=1e-12)


def test_energy_example():
    assert energy(State(0.0, 0.3, 3.0, 4.0)) == pytest.approx(12.5)


def test_energy_rate_zero_momentum():
    p = rotating_params()
    x = State(0.4, 1.0, 0.0, 0.0)
    assert energy_rate(x, 0.3, p, SystemKind.averaged()) == 0.0


def _fd_window(kind, params, x0, dt=1e-4, n=40):
    traj = integrate(kind, 0.0, x0, dt * n, params,
                     StepControl(rtol=1e-12, atol=1e-14), sample_dt=dt)
    assert traj.status.completed
    return traj


def test_height_accel_matches_finite_differences():
    """Second difference of g(t) along a cutoff-free modified trajectory."""
    params = rotating_params(k=10)
    bump = BumpConfig(c=3.0, delta=0.5, Delta=0.2)
    kind = SystemKind.modified(bump)
    theta0 = 0.2
    phi0 = math.asin(bump.delta / math.cos(theta0))  # start on the face: sigma = 0
    traj = _fd_window(kind, params, State(theta0, phi0, 0.1, -0.05))
    g = np.cos(traj.states[:, 0]) * np.sin(traj.states[:, 1])
    dt = traj.times[1] - traj.times[0]
    for i in range(5, len(traj) - 5):
        x = traj.states[i]
        assert abs(np.cos(x[0]) * np.sin(x[1]) - bump.delta) < bump.Delta  # still chi = 0
        fd = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / dt**2
        closed = height_accel(x, traj.times[i], params, kind)
        assert abs(fd - closed) / abs(closed) < 1e-5


def test_energy_rate_matches_finite_differences():
    """First difference of E(t) along a cutoff-free modified trajectory."""
    params = rotating_params(k=10)
    bump = BumpConfig(c=1.0, delta=0.3, Delta=0.14)  # rho = 0 near E = 1
    kind = SystemKind.modified(bump)
    x0 = State(0.3, 1.2, math.sqrt(2.0) * math.cos(1.0), math.sqrt(2.0) * math.sin(1.0) * math.cos(0.3))
    assert energy(x0) == pytest.approx(1.0, abs=1e-12)
    traj = _fd_window(kind, params, x0)
    E = 0.5 * (traj.states[:, 2] ** 2 + (traj.states[:, 3] / np.cos(traj.states[:, 0])) ** 2)
    dt = traj.times[1] - traj.times[0]
    for i in range(5, len(traj) - 5):
        assert abs(E[i] - bump.c**2) < bump.Delta  # still rho = 0
        fd = (E[i + 1] - E[i - 1]) / (2.0 * dt)
        closed = energy_rate(traj.states[i], traj.times[i], params, kind)
        assert abs(fd - closed) / max(abs(closed), 1e-6) < 1e-5


def test_energy_shell_bound_constants():
    """On the shell E = c^2 the rate obeys -2 mu c^2 + 2 c B with B = 1 + 2A + (a w)^2."""
    p = rotating_params()
    c = 40.0
    bound = 1.0 + 2.0 * 6.0 + (5.0 * 1.0) ** 2  # 38
    rng = np.random.default_rng(17)
    kinds = [SystemKind.averaged(), SystemKind.modified(BumpConfig(c, 0.01, 1e-3))]
    for _ in range(200):
        theta = rng.uniform(-1.2, 1.2)
        phi = rng.uniform(0.05, math.pi - 0.05)
        beta = rng.uniform(0.0, TWO_PI)
        x = State(theta, phi, math.sqrt(2) * c * math.cos(beta),
                  math.sqrt(2) * c * math.sin(beta) * math.cos(theta))
        t = rng.uniform(0.0, TWO_PI)
        for kind in kinds:
            assert energy_rate(x, t, p, kind) <= -2.0 * p.mu * c**2 + 2.0 * c * bound + 1e-9


def test_state_to_cartesian():
    p = Params(a=5.0, epsilon=0.1, T=TWO_PI)
    assert state_to_cartesian(State(0.0, math.pi / 2, 0.0, 0.0), 0.0, p) == pytest.approx(
        (0.0, 1.0, 0.0), abs=1e-15)
    x, y, z = state_to_cartesian(State(math.pi / 2, 0.7, 0.0, 0.0), 0.3, p)
    assert (x, z) == pytest.approx((0.0, 1.0), abs=1e-12)
    assert y == pytest.approx(p.pivot_height(0.3), abs=1e-12)


def test_params_k_property():
    assert Params(epsilon=0.1).k == 10
    assert Params(epsilon=1.0 / 50.0).k == 50
    assert Params(epsilon=0.123).k is None
    assert Params.with_k(7).epsilon == pytest.approx(1.0 / 7.0)
