"""Numerical laboratory for a degenerately forced Navier-Stokes-type system.

Two models share one noise source on a single component: a three-dimensional
quadratic SDE whose nonlinearity has the Navier-Stokes energy cancellation,
and a divergence-free spectral truncation of the 2D torus Navier-Stokes
equations forced on one Stokes eigenmode.  The package simulates both,
classifies the uniqueness regime of the invariant measure against the
threshold kappa = lam1*min(lam2, lam3), and ships the statistical machinery
(occupation measures, KS tests, dual-basin and phase-scan experiments) used
to exhibit the dichotomy numerically.
"""

from .errors import (
    BlowUpError,
    ConfigError,
    InvalidParameterError,
    InvalidStateError,
    MineaErgoError,
)
from .measure_lab import (
    WORKERS_ENV_VAR,
    DualBasinResult,
    E55Result,
    EmpiricalMeasure1D,
    OccupationMeasure,
    PhaseScanRow,
    dual_basin_experiment,
    e55_check,
    endpoint_states,
    ensemble_law,
    ensemble_trajectories,
    iter_phase_scan,
    ks_critical_value,
    ks_distance,
    ks_two_sample,
    ks_two_sample_critical,
    phase_scan,
    point_mass_distance,
    time_average_X,
    worker_count,
)
from .minea_core import (
    BLOWUP_CAP,
    MineaParams,
    ProductInvariantLaw,
    RegimeClassification,
    StationaryBranch,
    StationarySet,
    Trajectory,
    b_form,
    bilinear_b,
    drift,
    gaussian_invariant,
    lyapunov_ceiling,
    simulate,
    simulate_with_gaussians,
    stationary_points,
    step_em,
    step_exp,
    uniqueness_regime,
)
from .noise import (
    BrownianIncrements,
    GaussianLaw1D,
    RngStream,
    abs_moment,
    brownian_increments,
    make_stream,
    ou_stationary_law,
    ou_step,
)
from .spectral_nse import (
    EigenmodeConsistency,
    IdentityReport,
    NseParams,
    SmallNoiseResult,
    SpectralField,
    apply_A,
    b_spectral_form,
    bilinear_B_spectral,
    eigenmode_consistency,
    energy_bound_ensemble,
    forced_amplitude,
    identity_suite,
    mode_basis,
    nse_lyapunov_ceiling,
    random_field,
    small_noise_convergence,
    step_nse,
    stokes_eigenmode,
)

__version__ = "0.1.0"

__all__ = [
    "BLOWUP_CAP",
    "BlowUpError",
    "BrownianIncrements",
    "ConfigError",
    "DualBasinResult",
    "E55Result",
    "EigenmodeConsistency",
    "EmpiricalMeasure1D",
    "GaussianLaw1D",
    "IdentityReport",
    "InvalidParameterError",
    "InvalidStateError",
    "MineaErgoError",
    "MineaParams",
    "NseParams",
    "OccupationMeasure",
    "PhaseScanRow",
    "ProductInvariantLaw",
    "RegimeClassification",
    "RngStream",
    "SmallNoiseResult",
    "SpectralField",
    "StationaryBranch",
    "StationarySet",
    "Trajectory",
    "WORKERS_ENV_VAR",
    "abs_moment",
    "apply_A",
    "b_form",
    "b_spectral_form",
    "bilinear_B_spectral",
    "bilinear_b",
    "brownian_increments",
    "drift",
    "dual_basin_experiment",
    "e55_check",
    "eigenmode_consistency",
    "endpoint_states",
    "energy_bound_ensemble",
    "ensemble_law",
    "ensemble_trajectories",
    "forced_amplitude",
    "gaussian_invariant",
    "identity_suite",
    "iter_phase_scan",
    "ks_critical_value",
    "ks_distance",
    "ks_two_sample",
    "ks_two_sample_critical",
    "lyapunov_ceiling",
    "make_stream",
    "mode_basis",
    "nse_lyapunov_ceiling",
    "ou_stationary_law",
    "ou_step",
    "phase_scan",
    "point_mass_distance",
    "random_field",
    "simulate",
    "simulate_with_gaussians",
    "small_noise_convergence",
    "stationary_points",
    "step_em",
    "step_exp",
    "step_nse",
    "stokes_eigenmode",
    "time_average_X",
    "uniqueness_regime",
    "worker_count",
]
