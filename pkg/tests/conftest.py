import math

import numpy as np
import pytest

from kwpend import (
    ForcingSpec,
    Params,
    State,
    StepControl,
    SystemKind,
    find_orbit_newton,
    integrate,
)

TWO_PI = 2.0 * math.pi


def build_lagrange_oracle():
    """Equations of motion derived symbolically from the energies.

    Position r = (cos(th)cos(ph), h + cos(th)sin(ph), sin(th)), potential the
    height of the point, drag -mu * velocity relative to the sphere, and a
    horizontal force (Px, 0, Pz).  Momenta p_q = dT/dq_dot; the momentum
    equations are p_q' = d(T - Pi)/dq + Q_q.  Fully independent of the
    hand-written right-hand sides.
    """
    import sympy as sp

    th, ph, pth, pph = sp.symbols("theta phi p_theta p_phi")
    thd, phd = sp.symbols("theta_dot phi_dot")
    hdot, p_x, p_z, mu = sp.symbols("hdot P_x P_z mu")

    kinetic = sp.Rational(1, 2) * (
        thd**2 + phd**2 * sp.cos(th) ** 2
        - 2 * hdot * thd * sp.sin(th) * sp.sin(ph)
        + 2 * hdot * phd * sp.cos(th) * sp.cos(ph)
    )
    potential = sp.cos(th) * sp.sin(ph)

    sol = sp.solve(
        [sp.Eq(pth, sp.diff(kinetic, thd)), sp.Eq(pph, sp.diff(kinetic, phd))],
        [thd, phd], dict=True,
    )[0]

    r = sp.Matrix([sp.cos(th) * sp.cos(ph), sp.cos(th) * sp.sin(ph), sp.sin(th)])
    dr_th, dr_ph = r.diff(th), r.diff(ph)
    v_rel = dr_th * thd + dr_ph * phd
    force = -mu * v_rel + sp.Matrix([p_x, 0, p_z])
    q_th = force.dot(dr_th)
    q_ph = force.dot(dr_ph)

    lagr = kinetic - potential
    exprs = [
        sol[thd],
        sol[phd],
        (sp.diff(lagr, th) + q_th).subs(sol),
        (sp.diff(lagr, ph) + q_ph).subs(sol),
    ]
    fn = sp.lambdify((th, ph, pth, pph, hdot, p_x, p_z, mu),
                     [sp.simplify(e) for e in exprs], modules="numpy")
    return lambda *args: np.array(fn(*args), dtype=float)


@pytest.fixture(scope="session")
def lagrange_oracle():
    return build_lagrange_oracle()


def fig4_params(k=10, forcing=None):
    """The reference configuration: T = 2*pi, mu = 1, a = 5, strong rotating force."""
    return Params(
        a=5.0,
        epsilon=1.0 / k,
        T=TWO_PI,
        mu=1.0,
        forcing=forcing if forcing is not None else ForcingSpec.rotating(6.0),
    )


@pytest.fixture(scope="session")
def fig4_transient():
    """100-period transient of the k=10 rotating cell from the upright start."""
    params = fig4_params(k=10)
    traj = integrate(
        SystemKind.full(), 0.0, State(0.0, math.pi / 2.0, 0.0, 0.0), 100.0 * TWO_PI,
        params, StepControl(rtol=1e-9, atol=1e-11), sample_dt=TWO_PI / 8.0,
    )
    return params, traj


@pytest.fixture(scope="session")
def fig4_orbit(fig4_transient):
    """Converged periodic orbit of the k=10 rotating cell, Newton-refined from the transient."""
    params, traj = fig4_transient
    assert traj.status.completed
    return find_orbit_newton(SystemKind.full(), params, traj.final_state())
