"""Period-T maps, Newton shooting, Floquet analysis and parameter continuation.

Fixed points of the stroboscopic map over one forcing period are the
T-periodic orbits.  They are located by damped Newton iteration with a
finite-difference Jacobian of the map, classified through the eigenvalues of
the monodromy matrix, and continued in the fast-scale parameter (or in the
forcing amplitude) with automatic step bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import Params, State, SystemKind
from .integrate import (
    IntegrationFailure,
    StepControl,
    Trajectory,
    TrajectoryStatus,
    flow,
    integrate,
    make_field,
    _rk_step,
)

__all__ = [
    "OrbitError",
    "NoConvergence",
    "SingularJacobian",
    "GuardHit",
    "ContinuationStuck",
    "NewtonOptions",
    "PeriodicOrbit",
    "ContinuationPlan",
    "strobe_map",
    "find_orbit_newton",
    "attractor_seed",
    "monodromy_fd",
    "monodromy_var",
    "floquet",
    "non_falling_check",
    "continuation",
]


class OrbitError(RuntimeError):
    pass


class NoConvergence(OrbitError):
    def __init__(self, message, residual=None, x_last=None):
        super().__init__(message)
        self.residual = residual
        self.x_last = x_last


class SingularJacobian(OrbitError):
    pass


class GuardHit(OrbitError):
    """The propagated trajectory entered the chart-guard band."""


class ContinuationStuck(OrbitError):
    def __init__(self, message, orbits):
        super().__init__(message)
        self.orbits = orbits


@dataclass(frozen=True)
class NewtonOptions:
    """Shooting options.  Integrator tolerances are kept well below tol_res."""

    tol_res: float = 1e-10
    max_iter: int = 30
    fd_step: float = 1e-7
    max_backtrack: int = 20
    rtol: float = 1e-11
    atol: float = 1e-13
    cond_max: float = 1e12
    stability_margin: float = 1e-9
    n_height_samples: int = 1000
    mono_step: float = 1e-5
    mono_rtol: float = 1e-12
    mono_atol: float = 1e-14

    def control(self) -> StepControl:
        return StepControl(rtol=self.rtol, atol=self.atol, max_steps=3_000_000)

    def mono_control(self) -> StepControl:
        return StepControl(rtol=self.mono_rtol, atol=self.mono_atol, max_steps=3_000_000)


@dataclass
class PeriodicOrbit:
    """Converged fixed point of the period-T map with its stability data.

    ``residual`` is the max-norm of Phi_T(x0) - x0, re-verified with a
    tighter integration than the one used inside Newton.  ``stable`` means
    every Floquet multiplier modulus is below 1 minus the configured margin,
    and ``min_height`` is the minimum of cos(theta)sin(phi) over a dense
    sampling of one period (positive for a non-falling orbit).
    """

    kind: SystemKind
    params: Params
    x0: State
    period: float
    residual: float
    multipliers: np.ndarray
    stable: bool
    min_height: float
    monodromy: np.ndarray
    t0: float = 0.0
    trajectory: Trajectory | None = None


def _check_full_kind(kind: SystemKind, params: Params):
    if kind.tag in ("full", "modified") and params.k is None:
        raise ValueError(
            "period maps of the fast-forced systems need epsilon = 1/k with integer k "
            f"(epsilon = {params.epsilon})"
        )


def strobe_map(x, t0: float, kind: SystemKind, params: Params, control: StepControl | None = None) -> State:
    """Advance the state over exactly one period T starting at t0."""
    _check_full_kind(kind, params)
    try:
        return flow(kind, t0, x, params.T, params, control)
    except IntegrationFailure as exc:
        if exc.status.kind == "singular":
            raise GuardHit(f"trajectory hit the chart guard at t = {exc.status.time}") from exc
        raise


def _strobe_array(y, t0, kind, params, control) -> np.ndarray:
    return strobe_map(State.from_array(y), t0, kind, params, control).as_array()


def _newton_core(kind, params, guess, opts, t0) -> tuple:
    """Damped Newton iteration on F(x) = Phi_T(x) - x; returns (x, residual).

    The residual is re-verified with a 10x tighter integration before the
    point is accepted.  Trial points whose strobe integration fails count as
    failed backtracking steps rather than aborting the solve.
    """
    control = opts.control()
    x = guess.as_array() if isinstance(guess, State) else np.array(guess, dtype=float)

    fx = _strobe_array(x, t0, kind, params, control) - x
    res = float(np.max(np.abs(fx)))
    stalls = 0
    for _ in range(opts.max_iter):
        if res < opts.tol_res:
            break
        jac = np.empty((4, 4))
        step = opts.fd_step * (1.0 + float(np.linalg.norm(x)))
        for j in range(4):
            xp = x.copy()
            xp[j] += step
            jac[:, j] = (_strobe_array(xp, t0, kind, params, control) - xp - fx) / step
        if np.linalg.cond(jac) > opts.cond_max:
            raise SingularJacobian(f"strobe-map Jacobian condition exceeds {opts.cond_max:.1e}")
        direction = np.linalg.solve(jac, -fx)
        lam = 1.0
        for _ in range(opts.max_backtrack + 1):
            x_try = x + lam * direction
            try:
                fx_try = _strobe_array(x_try, t0, kind, params, control) - x_try
            except (GuardHit, IntegrationFailure):
                lam *= 0.5
                continue
            res_try = float(np.max(np.abs(fx_try)))
            if res_try <= (1.0 - 1e-4 * lam) * res:
                break
            lam *= 0.5
        else:
            raise NoConvergence(
                f"backtracking stalled at residual {res:.3e}", residual=res, x_last=State.from_array(x)
            )
        # a contraction slower than 0.9 per step cannot reach tol_res within
        # max_iter anyway; give up early instead of burning strobe evaluations
        stalls = stalls + 1 if res_try > 0.9 * res else 0
        x, fx, res = x_try, fx_try, res_try
        if stalls >= 5:
            raise NoConvergence(f"Newton progress stalled at residual {res:.3e}",
                                residual=res, x_last=State.from_array(x))
    else:
        raise NoConvergence(f"no convergence after {opts.max_iter} iterations (residual {res:.3e})",
                            residual=res, x_last=State.from_array(x))

    # Independent re-verification at tighter tolerance.
    tight = StepControl(rtol=opts.rtol / 10.0, atol=opts.atol / 10.0, max_steps=6_000_000)
    res_verified = float(np.max(np.abs(_strobe_array(x, t0, kind, params, tight) - x)))
    if res_verified >= 10.0 * opts.tol_res:
        raise NoConvergence(
            f"re-verified residual {res_verified:.3e} exceeds 10*tol_res", residual=res_verified,
            x_last=State.from_array(x),
        )
    return x, res_verified


def find_orbit_newton(
    kind: SystemKind,
    params: Params,
    guess,
    opts: NewtonOptions | None = None,
    t0: float = 0.0,
) -> PeriodicOrbit:
    """Damped Newton iteration on F(x) = Phi_T(x) - x from a starting guess.

    The Jacobian uses forward differences of the strobe map with step
    fd_step*(1 + |x|) per coordinate, and the Newton direction is backtracked
    (halving, Armijo-style) until the residual decreases.  Convergence means
    ||F||_inf < tol_res; the converged point is then re-verified with a
    10x tighter integration and equipped with monodromy, multipliers and the
    minimum height over one period.

    Raises NoConvergence, SingularJacobian or GuardHit.
    """
    opts = opts or NewtonOptions()
    control = opts.control()
    x, res_verified = _newton_core(kind, params, guess, opts, t0)
    x0 = State.from_array(x)
    mono = monodromy_fd_point(x, t0, kind, params, opts)
    mults = floquet(mono)
    stable = bool(np.all(np.abs(mults) < 1.0 - opts.stability_margin))
    traj = integrate(kind, t0, x0, t0 + params.T, params, control,
                     sample_dt=params.T / max(opts.n_height_samples, 1000))
    min_h = float(np.min(np.cos(traj.states[:, 0]) * np.sin(traj.states[:, 1])))
    return PeriodicOrbit(
        kind=kind, params=params, x0=x0, period=params.T, residual=res_verified,
        multipliers=mults, stable=stable, min_height=min_h, monodromy=mono, t0=t0,
        trajectory=traj,
    )


def attractor_seed(
    kind: SystemKind,
    params: Params,
    t_transient: float | None = None,
    x_start: State | None = None,
    control: StepControl | None = None,
) -> State:
    """Run the transient and return the state at the first multiple of T after it.

    Defaults: 100 periods of transient from the upright rest point.  Useful
    as a Newton seed when the target orbit is asymptotically stable.
    """
    _check_full_kind(kind, params)
    if t_transient is None:
        t_transient = 100.0 * params.T
    if x_start is None:
        x_start = State(0.0, math.pi / 2.0, 0.0, 0.0)
    control = control or StepControl(rtol=1e-9, atol=1e-11)
    n_periods = max(1, math.ceil(t_transient / params.T - 1e-12))
    try:
        return flow(kind, 0.0, x_start, n_periods * params.T, params, control)
    except IntegrationFailure as exc:
        if exc.status.kind == "singular":
            raise GuardHit(f"transient hit the chart guard at t = {exc.status.time}") from exc
        raise


def monodromy_fd_point(y0: np.ndarray, t0: float, kind: SystemKind, params: Params,
                       opts: NewtonOptions | None = None, period: float | None = None) -> np.ndarray:
    """Centered-difference derivative of the period map at an arbitrary point.

    ``period`` defaults to params.T; period 0 gives the identity exactly.
    """
    opts = opts or NewtonOptions()
    control = opts.mono_control()
    if period is None:
        _check_full_kind(kind, params)
        period = params.T
    step = opts.mono_step * (1.0 + float(np.linalg.norm(y0)))
    mono = np.empty((4, 4))
    for j in range(4):
        yp = y0.copy(); yp[j] += step
        ym = y0.copy(); ym[j] -= step
        fp = flow(kind, t0, yp, period, params, control).as_array()
        fm = flow(kind, t0, ym, period, params, control).as_array()
        mono[:, j] = (fp - fm) / (2.0 * step)
    return mono


def monodromy_fd(orbit: PeriodicOrbit, opts: NewtonOptions | None = None) -> np.ndarray:
    """Monodromy matrix by centered finite differences of the period map."""
    return monodromy_fd_point(orbit.x0.as_array(), orbit.t0, orbit.kind, orbit.params, opts)


def monodromy_var(orbit: PeriodicOrbit, opts: NewtonOptions | None = None,
                  jac_step: float = 1e-6) -> np.ndarray:
    """Monodromy matrix by integrating the variational equations along the orbit.

    The 4x4 state-transition matrix is propagated together with the orbit as
    a 20-dimensional system; the Jacobian of the vector field is formed by
    centered differences at every stage evaluation.
    """
    opts = opts or NewtonOptions()
    control = opts.mono_control()
    f = make_field(orbit.kind, orbit.params)

    def field_jacobian(t, y):
        jac = np.empty((4, 4))
        for j in range(4):
            dq = jac_step * (1.0 + abs(float(y[j])))
            yp = y.copy(); yp[j] += dq
            ym = y.copy(); ym[j] -= dq
            jac[:, j] = (f(t, yp) - f(t, ym)) / (2.0 * dq)
        return jac

    def extended(t, z):
        y = z[:4]
        phi = z[4:].reshape(4, 4)
        dy = f(t, y)
        dphi = field_jacobian(t, y) @ phi
        return np.concatenate([dy, dphi.ravel()])

    z0 = np.concatenate([orbit.x0.as_array(), np.eye(4).ravel()])
    z = _adaptive_endpoint(extended, orbit.t0, z0, orbit.period, orbit.kind, orbit.params, control)
    return z[4:].reshape(4, 4)


def _adaptive_endpoint(f, t0, z0, dt, kind, params, control):
    """Endpoint of an arbitrary-dimension field with the shared step kernel."""
    from .integrate import _effective_h_max, _error_norm, _initial_step

    t1 = t0 + dt
    h_max = min(_effective_h_max(kind, params, control), dt)
    t, z = t0, z0.copy()
    k1 = f(t, z)
    h = min(_initial_step(f, t, z, k1, 1.0, control, h_max), h_max)
    err_prev = 1.0
    n_steps = 0
    while t < t1:
        if n_steps >= control.max_steps:
            raise IntegrationFailure(TrajectoryStatus("max_steps", t))
        last = t + h >= t1
        if last:
            h = t1 - t
        z_new, k_last, err_vec, _ = _rk_step(f, t, z, h, k1)
        err = _error_norm(err_vec, z, z_new, control)
        n_steps += 1
        if err <= 1.0:
            t = t1 if last else t + h
            z, k1 = z_new, k_last
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** (-0.14) * err_prev ** 0.08))
            err_prev = max(err, 1e-10)
            h = min(h * factor, h_max)
        else:
            h = h * max(0.2, 0.9 * err ** (-0.2))
    return z


def floquet(monodromy: np.ndarray) -> np.ndarray:
    """Eigenvalues of the monodromy matrix, sorted by modulus descending."""
    mults = np.linalg.eigvals(np.asarray(monodromy, dtype=float))
    order = np.lexsort((-mults.imag, -mults.real, -np.abs(mults)))
    return mults[order]


def non_falling_check(orbit: PeriodicOrbit, n_samples: int = 1000) -> float:
    """Minimum of cos(theta)sin(phi) over >= 1000 dense samples of one period."""
    n = max(int(n_samples), 1000)
    traj = integrate(orbit.kind, orbit.t0, orbit.x0, orbit.t0 + orbit.period, orbit.params,
                     StepControl(rtol=1e-10, atol=1e-12), sample_dt=orbit.period / n)
    return float(np.min(np.cos(traj.states[:, 0]) * np.sin(traj.states[:, 1])))


@dataclass(frozen=True)
class Snapshot:
    """One continuation target: a system kind plus its parameter set."""

    kind: SystemKind
    params: Params


@dataclass
class ContinuationPlan:
    """Ordered parameter schedule walked by Newton, seeded from the previous orbit.

    Consecutive snapshots must differ in a single continuation parameter
    (epsilon -- including the averaged-to-full transition -- or the forcing
    amplitude A, its angle alpha, or the pivot amplitude a).
    """

    schedule: list
    seed: State
    newton: NewtonOptions = field(default_factory=NewtonOptions)
    max_bisections: int = 8

    def __post_init__(self):
        if not self.schedule:
            raise ValueError("continuation schedule must be nonempty")
        for prev, nxt in zip(self.schedule, self.schedule[1:]):
            if _changed_parameter(prev, nxt) is None:
                raise ValueError("consecutive snapshots must differ in exactly one parameter")


def _changed_parameter(lo: Snapshot, hi: Snapshot):
    """Name of the single differing parameter, or None if the step is invalid."""
    changes = []
    if lo.kind.tag != hi.kind.tag:
        if {lo.kind.tag, hi.kind.tag} == {"averaged", "full"}:
            changes.append("epsilon")
        else:
            return None
    pl, ph = lo.params, hi.params
    if lo.kind.tag == hi.kind.tag and pl.epsilon != ph.epsilon:
        changes.append("epsilon")
    for name in ("a", "mu", "T"):
        if getattr(pl, name) != getattr(ph, name):
            changes.append(name)
    fl, fh = pl.forcing, ph.forcing
    if fl.variant != fh.variant:
        return None
    if fl.A != fh.A:
        changes.append("A")
    if fl.alpha != fh.alpha:
        changes.append("alpha")
    changes = sorted(set(changes))
    return changes[0] if len(changes) == 1 else None


def _midpoint_snapshot(lo: Snapshot, hi: Snapshot, name: str) -> Snapshot | None:
    """Halve the continuation step; epsilon midpoints are rounded to 1/integer."""
    if name == "epsilon":
        eps_lo = 0.0 if lo.kind.tag == "averaged" else lo.params.epsilon
        eps_mid = 0.5 * (eps_lo + hi.params.epsilon)
        k_mid = round(1.0 / eps_mid)
        k_hi = hi.params.k
        if k_hi is not None and k_mid <= k_hi:
            k_mid = k_hi + 1
        if lo.kind.tag == "full" and lo.params.k is not None and k_mid >= round(1.0 / lo.params.epsilon):
            return None
        return Snapshot(hi.kind, replace(hi.params, epsilon=1.0 / k_mid))
    if name == "A":
        mid = 0.5 * (lo.params.forcing.A + hi.params.forcing.A)
        if mid in (lo.params.forcing.A, hi.params.forcing.A):
            return None
        return Snapshot(hi.kind, replace(hi.params, forcing=replace(hi.params.forcing, A=mid)))
    if name == "alpha":
        mid = 0.5 * (lo.params.forcing.alpha + hi.params.forcing.alpha)
        if mid in (lo.params.forcing.alpha, hi.params.forcing.alpha):
            return None
        return Snapshot(hi.kind, replace(hi.params, forcing=replace(hi.params.forcing, alpha=mid)))
    mid = 0.5 * (getattr(lo.params, name) + getattr(hi.params, name))
    if mid in (getattr(lo.params, name), getattr(hi.params, name)):
        return None
    return Snapshot(hi.kind, replace(hi.params, **{name: mid}))


def continuation(plan: ContinuationPlan) -> list:
    """Walk the schedule, seeding each Newton solve from the previous orbit.

    When a snapshot fails, the parameter step from the last converged
    snapshot is bisected (up to plan.max_bisections times in total for that
    step).  Raises ContinuationStuck carrying the orbits found so far.
    """
    orbits = []
    current = None  # last converged snapshot
    seed = plan.seed

    for target in plan.schedule:
        if current is None:
            orbit = find_orbit_newton(target.kind, target.params, seed, plan.newton)
        else:
            orbit = _continue_step(current, target, seed, plan, orbits)
        orbits.append(orbit)
        current = Snapshot(target.kind, target.params)
        seed = orbit.x0
    return orbits


def _continue_step(current: Snapshot, target: Snapshot, seed: State,
                   plan: ContinuationPlan, partial: list) -> PeriodicOrbit:
    name = _changed_parameter(current, target)
    budget = plan.max_bisections
    lo, x = current, seed
    pending = [target]
    while pending:
        snap = pending[-1]
        is_target = len(pending) == 1
        try:
            if is_target:
                orbit = find_orbit_newton(snap.kind, snap.params, x, plan.newton)
                x_new = orbit.x0
            else:
                # intermediate rung: converge the point, skip the diagnostics
                y, _ = _newton_core(snap.kind, snap.params, x, plan.newton, 0.0)
                x_new = State.from_array(y)
        except (OrbitError, IntegrationFailure):
            if budget == 0:
                raise ContinuationStuck(
                    f"bisection budget exhausted between snapshots while varying {name}",
                    partial,
                )
            mid = _midpoint_snapshot(lo, snap, name)
            if mid is None:
                raise ContinuationStuck(
                    f"cannot refine the {name} step any further", partial
                )
            budget -= 1
            pending.append(mid)
            continue
        pending.pop()
        lo, x = snap, x_new
        if not pending:
            return orbit
    raise ContinuationStuck("empty continuation step", partial)  # pragma: no cover
