"""Command-line interface: JSON run configurations in, CSV/JSON artifacts out.

Commands
--------
simulate      integrate one system and write a trajectory CSV
find-orbit    locate a periodic orbit and write its JSON record
floquet       recompute multipliers for a stored orbit JSON
check-lemmas  run the sampled sign checks and write their reports
avg-compare   full-vs-averaged gap table over a list of epsilons
sweep         orbit search over (k, forcing) cells, CSV table output
seed          run a transient and write the attractor seed state
certify       end-to-end trapping-region certificate for a k schedule

Exit codes: 0 ok, 2 config error, 3 fall/singularity, 4 integrator failure,
5 no convergence / failed certificate.  All outputs are deterministic given
the configuration; numbers are written with 17 significant digits so that
round-trips through the files are lossless.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import BumpConfig, ForcingSpec, Params, State, SystemKind
from .integrate import IntegrationFailure, StepControl, Trajectory, integrate
from .orbits import (
    ContinuationPlan,
    ContinuationStuck,
    GuardHit,
    NewtonOptions,
    NoConvergence,
    OrbitError,
    PeriodicOrbit,
    Snapshot,
    attractor_seed,
    continuation,
    find_orbit_newton,
    floquet,
    monodromy_fd,
    monodromy_var,
)
from .verify import CertificateFailed, RegionSpec, avg_compare, check_lemma, theorem1_certificate

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "load_orbit_json",
    "cmd_simulate",
    "cmd_find_orbit",
    "cmd_floquet",
    "cmd_check_lemmas",
    "cmd_avg_compare",
    "cmd_sweep",
    "cmd_seed",
    "cmd_certify",
    "main",
]

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_INTEGRATOR = 4
EXIT_NO_CONVERGENCE = 5

TRAJECTORY_HEADER = "t,theta,phi,p_theta,p_phi,x,y,z,height,energy"
SWEEP_HEADER = "k,A,alpha,converged,stable,min_height,max_multiplier_modulus"


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(f"config error at '{field}': {message}")
        self.field = field
        self.reason = message


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

_TOP_KEYS = {
    "format_version", "system", "params", "forcing", "region", "integrator",
    "simulate", "orbit", "lemma", "avg", "sweep", "floquet", "seed", "certify",
}
_PARAM_KEYS = {"a", "epsilon", "k", "T", "mu"}
_FORCING_KEYS = {"type", "A", "alpha", "px_cos", "px_sin", "pz_cos", "pz_sin", "omega0"}
_REGION_KEYS = {"c", "delta", "Delta"}
_INTEGRATOR_KEYS = {"rtol", "atol", "h_init", "h_max", "h_min", "max_steps"}
_SIMULATE_KEYS = {"t0", "x0", "t1", "sample_dt"}
_ORBIT_KEYS = {"seed", "tol_res", "max_iter", "t0", "rtol"}
_ORBIT_SEED_KEYS = {"strategy", "x0", "x_start", "t_transient", "k_schedule"}
_LEMMA_KEYS = {"ids", "n", "seed", "phase_grid"}
_AVG_KEYS = {"x0", "horizon", "epsilons"}
_SWEEP_KEYS = {"k", "cells", "t_transient", "x_start", "tol_res"}
_FLOQUET_KEYS = {"orbit", "method"}
_SEED_KEYS = {"x_start", "t_transient"}
_CERTIFY_KEYS = {"k_schedule", "lemma_n", "lemma_seed", "t_transient"}

_FORCING_TYPES = {"zero", "rotating", "oscillating", "fourier"}


def _reject_unknown(block: dict, allowed: set, path: str):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _number(block: dict, key: str, path: str, *, required=False, default=None, positive=False,
            nonnegative=False):
    if key not in block:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    value = float(value)
    if positive and not value > 0.0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    if nonnegative and value < 0.0:
        raise ConfigError(f"{path}.{key}", "must be nonnegative")
    return value


def _integer(block: dict, key: str, path: str, *, required=False, default=None, minimum=None):
    if key not in block:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}")
    return value


def _state(block: dict, key: str, path: str, *, required=False) -> State | None:
    if key not in block:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return None
    value = block[key]
    if not isinstance(value, list) or len(value) != 4 or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
    ):
        raise ConfigError(f"{path}.{key}", "expected a list of 4 numbers [theta, phi, p_theta, p_phi]")
    return State(*[float(v) for v in value])


def _float_list(block: dict, key: str, path: str, *, required=False, default=()):
    if key not in block:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return list(default)
    value = block[key]
    if not isinstance(value, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
    ):
        raise ConfigError(f"{path}.{key}", "expected a list of numbers")
    return [float(v) for v in value]


def _parse_forcing(block, path="forcing") -> ForcingSpec:
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(block, _FORCING_KEYS, path)
    ftype = block.get("type")
    if ftype not in _FORCING_TYPES:
        raise ConfigError(f"{path}.type", f"expected one of {sorted(_FORCING_TYPES)}, got {ftype!r}")
    if ftype == "zero":
        return ForcingSpec.zero()
    if ftype == "rotating":
        return ForcingSpec.rotating(_number(block, "A", path, required=True))
    if ftype == "oscillating":
        return ForcingSpec.oscillating_angle(
            _number(block, "A", path, required=True),
            _number(block, "alpha", path, required=True),
        )
    return ForcingSpec.fourier_pair(
        px_cos=_float_list(block, "px_cos", path),
        px_sin=_float_list(block, "px_sin", path),
        pz_cos=_float_list(block, "pz_cos", path),
        pz_sin=_float_list(block, "pz_sin", path),
        omega0=_number(block, "omega0", path, default=1.0, positive=True),
    )


def _parse_params(block, forcing: ForcingSpec, path="params") -> Params:
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(block, _PARAM_KEYS, path)
    if "epsilon" in block and "k" in block:
        raise ConfigError(f"{path}.k", "give either epsilon or k, not both")
    if "k" in block:
        k = _integer(block, "k", path, minimum=1)
        epsilon = 1.0 / k
    else:
        epsilon = _number(block, "epsilon", path, default=1.0, positive=True)
    try:
        return Params(
            a=_number(block, "a", path, default=0.0, nonnegative=True),
            epsilon=epsilon,
            T=_number(block, "T", path, default=2.0 * math.pi, positive=True),
            mu=_number(block, "mu", path, default=0.0, nonnegative=True),
            forcing=forcing,
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_integrator(block, path="integrator") -> StepControl:
    if block is None:
        return StepControl()
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(block, _INTEGRATOR_KEYS, path)
    try:
        return StepControl(
            rtol=_number(block, "rtol", path, default=1e-10, positive=True),
            atol=_number(block, "atol", path, default=1e-12, positive=True),
            h_init=_number(block, "h_init", path, default=None, positive=True),
            h_max=_number(block, "h_max", path, default=math.inf, positive=True),
            h_min=_number(block, "h_min", path, default=1e-13, positive=True),
            max_steps=_integer(block, "max_steps", path, default=10_000_000, minimum=1),
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_region(block, path="region"):
    if block is None:
        return None, None
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(block, _REGION_KEYS, path)
    c = _number(block, "c", path, required=True, positive=True)
    delta = _number(block, "delta", path, required=True, positive=True)
    Delta = _number(block, "Delta", path, default=1e-3, positive=True)
    try:
        region = RegionSpec(c=c, delta=delta)
        bump = BumpConfig(c=c, delta=delta, Delta=Delta)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc
    return region, bump


@dataclass
class RunConfig:
    """Validated run configuration (one JSON file per run)."""

    system: str
    params: Params
    control: StepControl
    region: RegionSpec | None
    bump: BumpConfig | None
    raw: dict

    def kind(self) -> SystemKind:
        if self.system == "full":
            return SystemKind.full()
        if self.system == "averaged":
            return SystemKind.averaged()
        if self.bump is None:
            raise ConfigError("region", "the modified system needs a region block (c, delta, Delta)")
        return SystemKind.modified(self.bump)

    def block(self, name: str) -> dict:
        value = self.raw.get(name)
        if value is None:
            raise ConfigError(name, "missing command block")
        if not isinstance(value, dict):
            raise ConfigError(name, "expected an object")
        return value


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be an object")
    _reject_unknown(raw, _TOP_KEYS, "")
    version = raw.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError("format_version", f"unknown version {version!r} (expected {FORMAT_VERSION})")
    system = raw.get("system", "full")
    if system not in ("full", "modified", "averaged"):
        raise ConfigError("system", f"expected full|modified|averaged, got {system!r}")
    forcing = _parse_forcing(raw.get("forcing", {"type": "zero"}))
    params = _parse_params(raw.get("params", {}), forcing)
    control = _parse_integrator(raw.get("integrator"))
    region, bump = _parse_region(raw.get("region"))
    return RunConfig(system=system, params=params, control=control, region=region, bump=bump, raw=raw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _params_echo(params: Params) -> dict:
    forcing = params.forcing
    echo = {"a": params.a, "epsilon": params.epsilon, "k": params.k, "T": params.T, "mu": params.mu,
            "forcing": {"type": forcing.variant}}
    if forcing.variant in ("rotating", "oscillating_angle"):
        echo["forcing"]["A"] = forcing.A
    if forcing.variant == "oscillating_angle":
        echo["forcing"]["alpha"] = forcing.alpha
    if forcing.variant == "fourier_pair":
        echo["forcing"].update(
            px_cos=list(forcing.px_cos), px_sin=list(forcing.px_sin),
            pz_cos=list(forcing.pz_cos), pz_sin=list(forcing.pz_sin), omega0=forcing.omega0,
        )
    return echo


def _forcing_from_echo(block: dict) -> ForcingSpec:
    ftype = block.get("type", "zero")
    if ftype == "zero":
        return ForcingSpec.zero()
    if ftype == "rotating":
        return ForcingSpec.rotating(block["A"])
    if ftype == "oscillating_angle":
        return ForcingSpec.oscillating_angle(block["A"], block["alpha"])
    return ForcingSpec.fourier_pair(
        px_cos=block.get("px_cos", ()), px_sin=block.get("px_sin", ()),
        pz_cos=block.get("pz_cos", ()), pz_sin=block.get("pz_sin", ()),
        omega0=block.get("omega0", 1.0),
    )


def write_trajectory_csv(path: str, traj: Trajectory):
    """Trajectory table: 17-significant-digit decimals, UNIX newlines."""
    params = traj.params
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        fh.write(TRAJECTORY_HEADER + "\n")
        for t, row in zip(traj.times, traj.states):
            theta, phi, p_theta, p_phi = row
            cth = math.cos(theta)
            g = cth * math.sin(phi)
            lab_x = cth * math.cos(phi)
            lab_y = params.pivot_height(t) + g
            lab_z = math.sin(theta)
            energy_val = 0.5 * (p_theta**2 + (p_phi / cth) ** 2)
            fh.write(",".join(_fmt(v) for v in (t, theta, phi, p_theta, p_phi,
                                                lab_x, lab_y, lab_z, g, energy_val)) + "\n")


def orbit_to_json(orbit: PeriodicOrbit) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "system": orbit.kind.tag,
        "x0": [float(v) for v in orbit.x0.as_array()],
        "t0": orbit.t0,
        "period": orbit.period,
        "residual": orbit.residual,
        "multipliers": [[z.real, z.imag] for z in orbit.multipliers],
        "multiplier_moduli": [float(abs(z)) for z in orbit.multipliers],
        "stable": orbit.stable,
        "min_height": orbit.min_height,
        "k": orbit.params.k if orbit.kind.tag == "full" else None,
        "params": _params_echo(orbit.params),
    }


def load_orbit_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError("format_version", f"orbit file has unknown version {version!r}")
    return data


def _write_json(path: str, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _say(quiet: bool, message: str):
    if not quiet:
        print(message)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(config: RunConfig, out_path: str, t0=None, x0=None, t1=None, quiet=True) -> int:
    block = config.block("simulate")
    _reject_unknown(block, _SIMULATE_KEYS, "simulate")
    t0 = _number(block, "t0", "simulate", default=0.0) if t0 is None else t0
    t1 = _number(block, "t1", "simulate", required=t1 is None, default=t1) if t1 is None else t1
    x0 = _state(block, "x0", "simulate", required=x0 is None) if x0 is None else x0
    sample_dt = _number(block, "sample_dt", "simulate", positive=True,
                        default=(t1 - t0) / 1000.0)
    if not t1 > t0:
        raise ConfigError("simulate.t1", "must be greater than t0")
    traj = integrate(config.kind(), t0, x0, t1, config.params, config.control, sample_dt)
    write_trajectory_csv(out_path, traj)
    _say(quiet, f"simulate: {len(traj)} samples, status {traj.status.kind} -> {out_path}")
    if traj.status.kind == "singular":
        return EXIT_SINGULAR
    if traj.status.kind in ("step_underflow", "max_steps"):
        return EXIT_INTEGRATOR
    return EXIT_OK


def _newton_options(block: dict, path: str) -> NewtonOptions:
    opts = NewtonOptions()
    tol_res = _number(block, "tol_res", path, default=opts.tol_res, positive=True)
    max_iter = _integer(block, "max_iter", path, default=opts.max_iter, minimum=1)
    rtol = _number(block, "rtol", path, default=opts.rtol, positive=True)
    return replace(opts, tol_res=tol_res, max_iter=max_iter, rtol=rtol)


def _resolve_orbit(config: RunConfig, block: dict, opts: NewtonOptions) -> PeriodicOrbit:
    seed_block = block.get("seed")
    if not isinstance(seed_block, dict):
        raise ConfigError("orbit.seed", "missing seed block with a 'strategy' field")
    _reject_unknown(seed_block, _ORBIT_SEED_KEYS, "orbit.seed")
    strategy = seed_block.get("strategy")
    kind = config.kind()
    t0 = _number(block, "t0", "orbit", default=0.0)
    if strategy == "explicit":
        guess = _state(seed_block, "x0", "orbit.seed", required=True)
        return find_orbit_newton(kind, config.params, guess, opts, t0=t0)
    if strategy == "attractor":
        x_start = _state(seed_block, "x_start", "orbit.seed")
        t_transient = _number(seed_block, "t_transient", "orbit.seed", positive=True)
        guess = attractor_seed(kind, config.params, t_transient=t_transient, x_start=x_start)
        return find_orbit_newton(kind, config.params, guess, opts, t0=t0)
    if strategy == "continuation":
        ks = seed_block.get("k_schedule")
        if not isinstance(ks, list) or not ks or any(
            isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in ks
        ):
            raise ConfigError("orbit.seed.k_schedule", "expected a nonempty list of positive integers")
        if kind.tag != "full":
            raise ConfigError("orbit.seed.strategy", "continuation seeding targets the full system")
        x_start = _state(seed_block, "x_start", "orbit.seed")
        t_transient = _number(seed_block, "t_transient", "orbit.seed", positive=True)
        params_avg = replace(config.params, epsilon=1.0)
        seed = attractor_seed(SystemKind.averaged(), params_avg, t_transient=t_transient, x_start=x_start)
        schedule = [Snapshot(SystemKind.averaged(), params_avg)]
        schedule += [Snapshot(SystemKind.full(), replace(config.params, epsilon=1.0 / k)) for k in ks]
        return continuation(ContinuationPlan(schedule=schedule, seed=seed, newton=opts))[-1]
    raise ConfigError("orbit.seed.strategy", f"expected explicit|attractor|continuation, got {strategy!r}")


def cmd_find_orbit(config: RunConfig, out_path: str, quiet=True) -> int:
    block = config.block("orbit")
    _reject_unknown(block, _ORBIT_KEYS, "orbit")
    opts = _newton_options(block, "orbit")
    try:
        orbit = _resolve_orbit(config, block, opts)
    except (NoConvergence, ContinuationStuck) as exc:
        _say(quiet, f"find-orbit: {exc}")
        return EXIT_NO_CONVERGENCE
    _write_json(out_path, orbit_to_json(orbit))
    _say(quiet, f"find-orbit: residual {orbit.residual:.3e}, stable={orbit.stable}, "
                f"min_height={orbit.min_height:.6f} -> {out_path}")
    return EXIT_OK


def cmd_floquet(config: RunConfig, out_path: str, quiet=True) -> int:
    block = config.block("floquet")
    _reject_unknown(block, _FLOQUET_KEYS, "floquet")
    orbit_path = block.get("orbit")
    if not isinstance(orbit_path, str):
        raise ConfigError("floquet.orbit", "expected a path to an orbit JSON file")
    method = block.get("method", "fd")
    if method not in ("fd", "var", "both"):
        raise ConfigError("floquet.method", f"expected fd|var|both, got {method!r}")
    data = load_orbit_json(orbit_path)
    echo = data["params"]
    params = Params(a=echo["a"], epsilon=echo["epsilon"], T=echo["T"], mu=echo["mu"],
                    forcing=_forcing_from_echo(echo["forcing"]))
    kind = SystemKind.full() if data["system"] == "full" else SystemKind.averaged()
    orbit = PeriodicOrbit(
        kind=kind, params=params, x0=State(*data["x0"]), period=data["period"],
        residual=data["residual"], multipliers=np.array([complex(re, im) for re, im in data["multipliers"]]),
        stable=data["stable"], min_height=data["min_height"],
        monodromy=np.eye(4), t0=data.get("t0", 0.0),
    )
    payload = {"format_version": FORMAT_VERSION, "orbit": orbit_path, "method": method}
    if method in ("fd", "both"):
        m_fd = monodromy_fd(orbit)
        mult_fd = floquet(m_fd)
        payload["fd"] = {
            "monodromy": m_fd.tolist(),
            "multipliers": [[z.real, z.imag] for z in mult_fd],
            "moduli": [float(abs(z)) for z in mult_fd],
        }
    if method in ("var", "both"):
        m_var = monodromy_var(orbit)
        mult_var = floquet(m_var)
        payload["var"] = {
            "monodromy": m_var.tolist(),
            "multipliers": [[z.real, z.imag] for z in mult_var],
            "moduli": [float(abs(z)) for z in mult_var],
        }
    if method == "both":
        num = float(np.max(np.abs(np.array(payload["fd"]["monodromy"]) - np.array(payload["var"]["monodromy"]))))
        den = float(np.max(np.abs(np.array(payload["var"]["monodromy"]))))
        payload["cross_rel_diff"] = num / den
    moduli = payload.get("fd", payload.get("var"))["moduli"]
    payload["stable"] = bool(max(moduli) < 1.0)
    _write_json(out_path, payload)
    _say(quiet, f"floquet: moduli {', '.join(f'{m:.4f}' for m in moduli)} -> {out_path}")
    return EXIT_OK


def cmd_check_lemmas(config: RunConfig, out_path: str, quiet=True) -> int:
    block = config.block("lemma")
    _reject_unknown(block, _LEMMA_KEYS, "lemma")
    if config.region is None:
        raise ConfigError("region", "check-lemmas needs a region block (c, delta)")
    ids = block.get("ids", [1, 2, 3, 4])
    if not isinstance(ids, list) or any(i not in (1, 2, 3, 4) for i in ids):
        raise ConfigError("lemma.ids", "expected a list drawn from [1, 2, 3, 4]")
    seed = _integer(block, "seed", "lemma", required=True, minimum=0)
    n = _integer(block, "n", "lemma", default=10_000, minimum=1)
    phase_grid = _integer(block, "phase_grid", "lemma", default=32, minimum=1)
    reports = [check_lemma(i, config.region, config.params, n=n, seed=seed, phase_grid=phase_grid)
               for i in ids]
    payload = {
        "format_version": FORMAT_VERSION,
        "reports": [rep.to_dict() for rep in reports],
        "all_pass": bool(all(rep.passed for rep in reports)),
    }
    _write_json(out_path, payload)
    _say(quiet, "check-lemmas: " + ", ".join(
        f"lemma {rep.lemma_id} {'pass' if rep.passed else 'FAIL'} (worst {rep.worst_margin:.4g})"
        for rep in reports) + f" -> {out_path}")
    return EXIT_OK


def cmd_avg_compare(config: RunConfig, out_path: str, quiet=True) -> int:
    block = config.block("avg")
    _reject_unknown(block, _AVG_KEYS, "avg")
    x0 = _state(block, "x0", "avg", required=True)
    horizon = _number(block, "horizon", "avg", positive=True)
    epsilons = _float_list(block, "epsilons", "avg",
                           default=(1 / 10, 1 / 20, 1 / 40, 1 / 80))
    if any(not 0.0 < e for e in epsilons) or len(epsilons) < 2:
        raise ConfigError("avg.epsilons", "expected at least two positive values")
    report = avg_compare(config.params, x0, horizon=horizon, eps_list=epsilons,
                         control=config.control)
    payload = {"format_version": FORMAT_VERSION, **report.to_dict()}
    _write_json(out_path, payload)
    _say(quiet, f"avg-compare: observed order {report.observed_order:.3f} -> {out_path}")
    return EXIT_OK


def _sweep_cell(args) -> tuple:
    """One (k, forcing cell) orbit search; runs in a worker process."""
    k, cell, params, t_transient, x_start, tol_res = args
    forcing = (ForcingSpec.rotating(cell["A"]) if "alpha" not in cell
               else ForcingSpec.oscillating_angle(cell["A"], cell["alpha"]))
    p = replace(params, epsilon=1.0 / k, forcing=forcing)
    opts = replace(NewtonOptions(), tol_res=tol_res)
    try:
        seed = attractor_seed(SystemKind.full(), p, t_transient=t_transient, x_start=x_start)
        orbit = find_orbit_newton(SystemKind.full(), p, seed, opts)
    except OrbitError:
        return (k, cell.get("A"), cell.get("alpha"), False, False, None, None)
    max_mod = float(np.max(np.abs(orbit.multipliers)))
    return (k, cell.get("A"), cell.get("alpha"), True, orbit.stable, orbit.min_height, max_mod)


def cmd_sweep(config: RunConfig, out_path: str, jobs: int = 1, quiet=True) -> int:
    block = config.block("sweep")
    _reject_unknown(block, _SWEEP_KEYS, "sweep")
    ks = block.get("k")
    if not isinstance(ks, list) or not ks or any(
        isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in ks
    ):
        raise ConfigError("sweep.k", "expected a nonempty list of positive integers")
    cells = block.get("cells")
    if not isinstance(cells, list) or not cells:
        raise ConfigError("sweep.cells", "expected a nonempty list of {A[, alpha]} objects")
    for i, cell in enumerate(cells):
        if not isinstance(cell, dict):
            raise ConfigError(f"sweep.cells[{i}]", "expected an object")
        _reject_unknown(cell, {"A", "alpha"}, f"sweep.cells[{i}]")
        _number(cell, "A", f"sweep.cells[{i}]", required=True)
    t_transient = _number(block, "t_transient", "sweep", positive=True)
    x_start = _state(block, "x_start", "sweep")
    tol_res = _number(block, "tol_res", "sweep", default=1e-10, positive=True)

    tasks = [(k, cell, config.params, t_transient, x_start, tol_res)
             for k in ks for cell in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(task) for task in tasks]
    rows.sort(key=lambda r: (r[0], r[1], -math.inf if r[2] is None else r[2]))

    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        fh.write(SWEEP_HEADER + "\n")
        for k, A, alpha, converged, stable, min_h, max_mod in rows:
            fh.write(",".join([
                str(k), _fmt(A), "" if alpha is None else _fmt(alpha),
                "true" if converged else "false",
                "true" if stable else "false",
                "" if min_h is None else _fmt(min_h),
                "" if max_mod is None else _fmt(max_mod),
            ]) + "\n")
    n_conv = sum(1 for r in rows if r[3])
    _say(quiet, f"sweep: {n_conv}/{len(rows)} cells converged -> {out_path}")
    return EXIT_OK if n_conv == len(rows) else EXIT_NO_CONVERGENCE


def cmd_seed(config: RunConfig, out_path: str, quiet=True) -> int:
    block = config.block("seed")
    _reject_unknown(block, _SEED_KEYS, "seed")
    x_start = _state(block, "x_start", "seed")
    t_transient = _number(block, "t_transient", "seed", positive=True)
    state = attractor_seed(config.kind(), config.params, t_transient=t_transient, x_start=x_start)
    t_sample = math.ceil((t_transient if t_transient is not None else 100.0 * config.params.T)
                         / config.params.T - 1e-12) * config.params.T
    payload = {
        "format_version": FORMAT_VERSION,
        "x0": [float(v) for v in state.as_array()],
        "t": t_sample,
        "params": _params_echo(config.params),
    }
    _write_json(out_path, payload)
    _say(quiet, f"seed: x0 = {payload['x0']} at t = {t_sample:.6f} -> {out_path}")
    return EXIT_OK


def cmd_certify(config: RunConfig, out_path: str, quiet=True) -> int:
    block = config.block("certify")
    _reject_unknown(block, _CERTIFY_KEYS, "certify")
    if config.region is None or config.bump is None:
        raise ConfigError("region", "certify needs a region block (c, delta, Delta)")
    ks = block.get("k_schedule")
    if not isinstance(ks, list) or not ks or any(
        isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in ks
    ):
        raise ConfigError("certify.k_schedule", "expected a nonempty list of positive integers")
    lemma_n = _integer(block, "lemma_n", "certify", default=10_000, minimum=1)
    lemma_seed = _integer(block, "lemma_seed", "certify", default=0, minimum=0)
    t_transient = _number(block, "t_transient", "certify", positive=True)
    try:
        report = theorem1_certificate(
            config.params, config.region, ks, Delta=config.bump.Delta,
            lemma_n=lemma_n, lemma_seed=lemma_seed, seed_transient=t_transient,
        )
    except CertificateFailed as exc:
        _write_json(out_path, exc.report)
        _say(quiet, f"certify: FAILED clause {exc.clause} -> {out_path}")
        return EXIT_NO_CONVERGENCE
    _write_json(out_path, report)
    _say(quiet, f"certify: pass (smallest non-falling k = {report['smallest_non_falling_k']}) -> {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kwpend", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "find-orbit", "floquet", "check-lemmas", "avg-compare",
                 "sweep", "seed", "certify"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the JSON run configuration")
        cmd.add_argument("--out", required=True, help="output file path")
        cmd.add_argument("--jobs", type=int, default=1, help="worker processes (sweep only)")
        cmd.add_argument("--quiet", action="store_true", help="suppress the status line")
        if name == "simulate":
            cmd.add_argument("--t0", type=float, default=None)
            cmd.add_argument("--t1", type=float, default=None)
            cmd.add_argument("--x0", type=str, default=None,
                             help="comma-separated theta,phi,p_theta,p_phi (overrides config)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "simulate":
            x0 = None
            if args.x0 is not None:
                parts = args.x0.split(",")
                if len(parts) != 4:
                    raise ConfigError("--x0", "expected 4 comma-separated numbers")
                x0 = State(*[float(p) for p in parts])
            return cmd_simulate(config, args.out, t0=args.t0, x0=x0, t1=args.t1, quiet=args.quiet)
        if args.command == "find-orbit":
            return cmd_find_orbit(config, args.out, quiet=args.quiet)
        if args.command == "floquet":
            return cmd_floquet(config, args.out, quiet=args.quiet)
        if args.command == "check-lemmas":
            return cmd_check_lemmas(config, args.out, quiet=args.quiet)
        if args.command == "avg-compare":
            return cmd_avg_compare(config, args.out, quiet=args.quiet)
        if args.command == "sweep":
            return cmd_sweep(config, args.out, jobs=args.jobs, quiet=args.quiet)
        if args.command == "seed":
            return cmd_seed(config, args.out, quiet=args.quiet)
        return cmd_certify(config, args.out, quiet=args.quiet)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except GuardHit as exc:
        print(f"fall/singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except IntegrationFailure as exc:
        if exc.status.kind == "singular":
            print(f"fall/singularity: {exc}", file=sys.stderr)
            return EXIT_SINGULAR
        print(f"integrator failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    except (NoConvergence, ContinuationStuck) as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
