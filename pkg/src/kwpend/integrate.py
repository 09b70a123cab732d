"""Adaptive Dormand-Prince 5(4) integration of the three pendulum systems.

The stepper is the classic embedded pair with PI step-size control and the
standard quartic dense output, specialised to the 4-dimensional chart state.
It monitors the chart guard |cos(theta)| >= 1e-6 and reports a ``singular``
status with the crossing time bracketed to 1e-9 when a trajectory is caught
entering the band.  A fixed-step driver shares the same step kernel so the
convergence order of the scheme can be measured directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    GUARD_COS_THETA,
    Params,
    State,
    SystemKind,
    _forcing_fn,
    _modified_terms,
    chi_cutoff,
)

__all__ = [
    "StepControl",
    "TrajectoryStatus",
    "Trajectory",
    "IntegrationFailure",
    "ConvergenceCase",
    "integrate",
    "flow",
    "fixed_step_endpoint",
    "convergence_order",
    "make_field",
]

# Dormand-Prince 5(4) tableau (FSAL: the 7th stage is the next step's first).
_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
# Fifth-order weights coincide with the last A row; E = B5 - B4.
_E = (
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
# Dense-output weights for the quartic interpolant.
_D = (
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents (order-5 error estimate).
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0


@dataclass(frozen=True)
class StepControl:
    """Step-size control for the adaptive integrator.

    ``h_init=None`` selects the starting step automatically.  For the full
    system the effective maximum step is additionally capped at eps*T/20 so
    the fast pivot oscillation is always resolved.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float | None = None
    h_max: float = math.inf
    h_min: float = 1e-13
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ValueError("tolerances must be positive")
        if not (0.0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if self.h_init is not None and not (self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need h_min <= h_init <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class TrajectoryStatus:
    """Outcome of an integration: ``completed``, ``singular``, ``step_underflow`` or ``max_steps``.

    For the non-completed outcomes ``time`` records where the run stopped; for
    ``singular`` it is the guard-crossing time, bracketed to 1e-9.
    """

    kind: str
    time: float | None = None

    @property
    def completed(self) -> bool:
        return self.kind == "completed"


@dataclass
class Trajectory:
    """Sampled solution: times (n,), states (n, 4), every stored row inside the guard."""

    times: np.ndarray
    states: np.ndarray
    kind: SystemKind
    params: Params
    status: TrajectoryStatus

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> State:
        return State.from_array(self.states[i])

    def final_state(self) -> State:
        return State.from_array(self.states[-1])


class IntegrationFailure(RuntimeError):
    """Raised by flow() when the underlying integration does not complete."""

    def __init__(self, status: TrajectoryStatus):
        super().__init__(f"integration ended with status {status.kind} at t={status.time}")
        self.status = status


def make_field(kind: SystemKind, params: Params):
    """Build the scalar-math vector field f(t, y) -> ndarray(4) for one system.

    These closures skip the chart-guard check (the integrator monitors the
    guard itself) and hoist all parameter lookups out of the hot loop.
    """
    mu = params.mu
    forcing = _forcing_fn(params.forcing)
    a_omega = params.a * params.omega
    phase_rate = params.omega / params.epsilon

    if kind.tag == "averaged":
        hdot_sq = 0.5 * a_omega * a_omega

        def f_avg(t, y):
            th, ph, pth, pph = y[0], y[1], y[2], y[3]
            p_x, p_z = forcing(t)
            terms = _modified_terms(
                math.sin(th), math.cos(th), math.sin(ph), math.cos(ph),
                pth, pph, 0.0, hdot_sq, 1.0, p_x, p_z, mu,
            )
            return np.array(terms)

        return f_avg

    if kind.tag == "modified":
        bump = kind.bump

        def f_mod(t, y):
            th, ph, pth, pph = y[0], y[1], y[2], y[3]
            hdot = a_omega * math.cos(phase_rate * t)
            p_x, p_z = forcing(t)
            chi = chi_cutoff(th, ph, pth, pph, bump)
            terms = _modified_terms(
                math.sin(th), math.cos(th), math.sin(ph), math.cos(ph),
                pth, pph, hdot, hdot * hdot, chi, p_x, p_z, mu,
            )
            return np.array(terms)

        return f_mod

    def f_full(t, y):
        th, ph, pth, pph = y[0], y[1], y[2], y[3]
        sth, cth = math.sin(th), math.cos(th)
        sph, cph = math.sin(ph), math.cos(ph)
        hdot = a_omega * math.cos(phase_rate * t)
        p_x, p_z = forcing(t)
        th_dot = pth + hdot * sth * sph
        ph_dot = (pph - hdot * cth * cph) / (cth * cth)
        dpth = (
            -ph_dot * ph_dot * cth * sth
            - hdot * th_dot * cth * sph
            - hdot * ph_dot * sth * cph
            - mu * th_dot
            + sth * sph
            - p_x * sth * cph
            + p_z * cth
        )
        dpph = (
            -hdot * th_dot * sth * cph
            - hdot * ph_dot * cth * sph
            - cth * cph
            - mu * ph_dot * cth * cth
            - p_x * cth * sph
        )
        return np.array([th_dot, ph_dot, dpth, dpph])

    return f_full


def _effective_h_max(kind: SystemKind, params: Params, control: StepControl) -> float:
    if kind.tag == "full":
        return min(control.h_max, params.epsilon * params.T / 20.0)
    return control.h_max


def _rk_step(f, t, y, h, k1):
    """One Dormand-Prince step; returns (y_new, k_new, err_vec, stages)."""
    K = np.empty((7, y.size))
    K[0] = k1
    for i in range(1, 7):
        a = _A[i]
        dy = a[0] * K[0]
        for j in range(1, i):
            dy = dy + a[j] * K[j]
        stage_y = y + h * dy
        K[i] = f(t + _C[i] * h, stage_y)
    # FSAL: stage 7 was evaluated at the 5th-order solution point.
    y_new = y + h * (
        _A[6][0] * K[0] + _A[6][2] * K[2] + _A[6][3] * K[3] + _A[6][4] * K[4] + _A[6][5] * K[5]
    )
    err = h * (
        _E[0] * K[0] + _E[2] * K[2] + _E[3] * K[3] + _E[4] * K[4] + _E[5] * K[5] + _E[6] * K[6]
    )
    return y_new, K[6], err, K


def _dense_coeffs(y_old, y_new, K, h):
    ydiff = y_new - y_old
    bspl = h * K[0] - ydiff
    r4 = ydiff - h * K[6] - bspl
    r5 = h * (_D[0] * K[0] + _D[2] * K[2] + _D[3] * K[3] + _D[4] * K[4] + _D[5] * K[5] + _D[6] * K[6])
    return y_old, ydiff, bspl, r4, r5


def _dense_eval(coeffs, theta):
    r1, r2, r3, r4, r5 = coeffs
    return r1 + theta * (r2 + (1.0 - theta) * (r3 + theta * (r4 + (1.0 - theta) * r5)))


def _error_norm(err, y_old, y_new, control):
    scale = control.atol + control.rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return math.sqrt(float(np.mean((err / scale) ** 2)))


def _initial_step(f, t0, y0, f0, direction, control, h_max):
    """Hairer-style automatic initial step selection."""
    scale = control.atol + control.rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, h_max)
    y1 = y0 + direction * h0 * f0
    f1 = f(t0 + direction * h0, y1)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return max(control.h_min, min(100.0 * h0, h1, h_max))


def _guard_margin(y) -> float:
    return abs(math.cos(y[0])) - GUARD_COS_THETA


def _bracket_guard_crossing(coeffs, t, h):
    """Bisect the dense output for the first guard crossing inside a step.

    Returns (t_cross, theta_inside) where the state at theta_inside still
    satisfies the guard and t_cross brackets the crossing to 1e-9.
    """
    lo, hi = 0.0, 1.0
    while (hi - lo) * h > 1e-9:
        mid = 0.5 * (lo + hi)
        if _guard_margin(_dense_eval(coeffs, mid)) >= 0.0:
            lo = mid
        else:
            hi = mid
    return t + hi * h, lo


class _Recorder:
    """Collects samples at multiples of sample_dt (or every step when None)."""

    def __init__(self, t0, y0, sample_dt):
        self.sample_dt = sample_dt
        self.times = [t0]
        self.states = [y0.copy()]
        self._t0 = t0
        self._next_index = 1

    def _emit(self, t, y):
        if t - self.times[-1] > 0.0 and _guard_margin(y) >= 0.0:
            self.times.append(t)
            self.states.append(np.asarray(y, dtype=float))

    def on_step(self, t_old, t_new, coeffs, h):
        if self.sample_dt is None:
            self._emit(t_new, _dense_eval(coeffs, 1.0))
            return
        while True:
            ts = self._t0 + self._next_index * self.sample_dt
            if ts > t_new + 1e-12 * max(1.0, abs(t_new)):
                break
            theta = (ts - t_old) / h
            self._emit(ts, _dense_eval(coeffs, min(max(theta, 0.0), 1.0)))
            self._next_index += 1

    def on_partial_step(self, t_old, coeffs, h, theta_max):
        """Emit samples that fall before a mid-step truncation point."""
        if self.sample_dt is None:
            return
        t_stop = t_old + theta_max * h
        while True:
            ts = self._t0 + self._next_index * self.sample_dt
            if ts > t_stop:
                break
            self._emit(ts, _dense_eval(coeffs, (ts - t_old) / h))
            self._next_index += 1

    def finish(self, t_end, y_end):
        self._emit(t_end, y_end)
        return np.array(self.times), np.array(self.states)


def integrate(
    kind: SystemKind,
    t0: float,
    x0,
    t1: float,
    params: Params,
    control: StepControl | None = None,
    sample_dt: float | None = None,
) -> Trajectory:
    """Integrate one system from t0 to t1 and sample the solution.

    Parameters
    ----------
    kind : SystemKind
        Which vector field to integrate.  For the averaged system the phase
        variable s is identified with t (s0 = t0).
    t0, t1 : float
        Time span, t1 > t0.
    x0 : State or array of shape (4,)
        Initial chart state, inside the guard.
    params : Params
    control : StepControl, optional
    sample_dt : float or None
        Record the dense solution at t0 + j*sample_dt; None records every
        accepted step.  The endpoints are always recorded.

    Returns
    -------
    Trajectory with status ``completed``, or truncated with status
    ``singular`` (guard band entered), ``step_underflow`` or ``max_steps``.
    """
    control = control or StepControl()
    if not t1 > t0:
        raise ValueError("integrate requires t1 > t0")
    if sample_dt is not None and not sample_dt > 0.0:
        raise ValueError("sample_dt must be positive or None")
    y0 = x0.as_array() if isinstance(x0, State) else np.array(x0, dtype=float)
    if _guard_margin(y0) < 0.0:
        raise ValueError("initial state violates the chart guard")

    f = make_field(kind, params)
    h_max = min(_effective_h_max(kind, params, control), t1 - t0)
    recorder = _Recorder(t0, y0, sample_dt)

    t, y = t0, y0.copy()
    k1 = f(t, y)
    h = control.h_init if control.h_init is not None else _initial_step(f, t, y, k1, 1.0, control, h_max)
    h = min(h, h_max)
    err_prev = 1.0
    status = None
    n_steps = 0

    while t < t1:
        if n_steps >= control.max_steps:
            status = TrajectoryStatus("max_steps", t)
            break
        last = t + h >= t1
        if last:
            h = t1 - t
        y_new, k_last, err_vec, K = _rk_step(f, t, y, h, k1)
        err = _error_norm(err_vec, y, y_new, control)
        n_steps += 1

        if err <= 1.0:
            coeffs = _dense_coeffs(y, y_new, K, h)
            if _guard_margin(y_new) < 0.0:
                t_cross, theta_in = _bracket_guard_crossing(coeffs, t, h)
                recorder.on_partial_step(t, coeffs, h, theta_in)
                y_stop = _dense_eval(coeffs, theta_in)
                recorder.finish(t + theta_in * h, y_stop)
                status = TrajectoryStatus("singular", t_cross)
                break
            recorder.on_step(t, t + h, coeffs, h)
            t = t1 if last else t + h
            y = y_new
            k1 = k_last
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** (_PI_BETA)
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(err, 1e-10)
            h = min(h * factor, h_max)
        else:
            factor = max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
            h = h * factor
        if h < control.h_min and t < t1:
            status = TrajectoryStatus("step_underflow", t)
            break

    if status is None:
        status = TrajectoryStatus("completed")
        times, states = recorder.finish(t1, y)
    else:
        times, states = recorder.finish(recorder.times[-1], recorder.states[-1])
    return Trajectory(times, states, kind, params, status)


def flow(
    kind: SystemKind,
    t0: float,
    x0,
    dt: float,
    params: Params,
    control: StepControl | None = None,
) -> State:
    """Endpoint of the flow map over dt (dt < 0 integrates the reversed field).

    Raises IntegrationFailure unless the integration completes.
    """
    y0 = x0.as_array() if isinstance(x0, State) else np.array(x0, dtype=float)
    if dt == 0.0:
        return State.from_array(y0)
    if dt < 0.0:
        forward = make_field(kind, params)

        def reversed_field(tau, y):
            return -forward(t0 - tau, y)

        y_end, status = _propagate_raw(reversed_field, 0.0, y0, -dt, kind, params, control)
    else:
        y_end, status = _propagate_raw(make_field(kind, params), t0, y0, dt, kind, params, control)
    if not status.completed:
        raise IntegrationFailure(status)
    return State.from_array(y_end)


def _propagate_raw(f, t0, y0, dt, kind, params, control):
    """Endpoint-only adaptive propagation used by flow(); no sampling overhead."""
    control = control or StepControl()
    if _guard_margin(y0) < 0.0:
        raise ValueError("initial state violates the chart guard")
    t1 = t0 + dt
    h_max = min(_effective_h_max(kind, params, control), dt)
    t, y = t0, y0.copy()
    k1 = f(t, y)
    h = control.h_init if control.h_init is not None else _initial_step(f, t, y, k1, 1.0, control, h_max)
    h = min(h, h_max)
    err_prev = 1.0
    n_steps = 0
    while t < t1:
        if n_steps >= control.max_steps:
            return y, TrajectoryStatus("max_steps", t)
        last = t + h >= t1
        if last:
            h = t1 - t
        y_new, k_last, err_vec, K = _rk_step(f, t, y, h, k1)
        err = _error_norm(err_vec, y, y_new, control)
        n_steps += 1
        if err <= 1.0:
            if _guard_margin(y_new) < 0.0:
                coeffs = _dense_coeffs(y, y_new, K, h)
                t_cross, _ = _bracket_guard_crossing(coeffs, t, h)
                return y, TrajectoryStatus("singular", t_cross)
            t = t1 if last else t + h
            y = y_new
            k1 = k_last
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** (_PI_BETA)
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(err, 1e-10)
            h = min(h * factor, h_max)
        else:
            h = h * max(_MIN_FACTOR, _SAFETY * err ** (-0.2))
        if h < control.h_min and t < t1:
            return y, TrajectoryStatus("step_underflow", t)
    return y, TrajectoryStatus("completed")


def fixed_step_endpoint(kind: SystemKind, t0: float, x0, t1: float, params: Params, n_steps: int) -> np.ndarray:
    """Endpoint after n_steps equal Dormand-Prince steps (no error control)."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    f = make_field(kind, params)
    y = x0.as_array() if isinstance(x0, State) else np.array(x0, dtype=float)
    h = (t1 - t0) / n_steps
    t = t0
    k1 = f(t, y)
    for i in range(n_steps):
        y, k1, _, _ = _rk_step(f, t, y, h, k1)
        t = t0 + (i + 1) * h
    return y


@dataclass(frozen=True)
class ConvergenceCase:
    """Smooth test problem for measuring the observed order of the stepper."""

    t0: float
    x0: State
    t1: float
    params: Params
    step_counts: tuple = (50, 71, 100, 141, 200)


def convergence_order(kind: SystemKind, case: ConvergenceCase) -> float:
    """Fit the slope of log(endpoint error) against log(h) over fixed-step runs.

    The reference endpoint comes from the adaptive integrator at rtol 1e-13.
    """
    ref = flow(kind, case.t0, case.x0, case.t1 - case.t0, case.params,
               StepControl(rtol=1e-13, atol=1e-14)).as_array()
    hs, errors = [], []
    for n in case.step_counts:
        y = fixed_step_endpoint(kind, case.t0, case.x0, case.t1, case.params, n)
        err = float(np.max(np.abs(y - ref)))
        hs.append((case.t1 - case.t0) / n)
        errors.append(max(err, 1e-16))
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    return float(slope)
