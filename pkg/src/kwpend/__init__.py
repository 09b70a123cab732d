"""Simulation and periodic-orbit toolkit for the forced spherical pendulum on a vibrating support."""

from .dynamics import (
    GUARD_COS_THETA,
    BumpConfig,
    ChartSingularity,
    ForcingSpec,
    Params,
    State,
    SystemKind,
    bump_rho,
    bump_sigma,
    chi_cutoff,
    energy,
    energy_rate,
    forcing_eval,
    forcing_magnitude,
    hanging,
    height,
    height_accel,
    height_rate,
    pivot_height,
    pivot_velocity,
    rhs_averaged,
    rhs_full,
    rhs_modified,
    state_to_cartesian,
    upright,
)
from .integrate import (
    ConvergenceCase,
    IntegrationFailure,
    StepControl,
    Trajectory,
    TrajectoryStatus,
    convergence_order,
    fixed_step_endpoint,
    flow,
    integrate,
)
from .orbits import (
    ContinuationPlan,
    ContinuationStuck,
    GuardHit,
    NewtonOptions,
    NoConvergence,
    PeriodicOrbit,
    SingularJacobian,
    Snapshot,
    attractor_seed,
    continuation,
    find_orbit_newton,
    floquet,
    monodromy_fd,
    monodromy_var,
    non_falling_check,
    strobe_map,
)
from .verify import (
    AvgCompareReport,
    BoundsEstimate,
    CertificateFailed,
    DegenerateFriction,
    EmptySet,
    LemmaReport,
    NotOnBoundary,
    RegionSpec,
    avg_compare,
    check_lemma,
    egress_classify,
    estimate_bounds,
    sample_boundary,
    theorem1_certificate,
)

__version__ = "0.1.0"
