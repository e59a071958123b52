//! Steady subsonic Euler-Poisson flow with vorticity in a two-dimensional
//! convergent nozzle.
//!
//! The radial background flow comes from an ODE in `(M^2, E)`. Perturbations
//! are found by a fixed-point iteration: entropy and pseudo-Bernoulli
//! perturbations are transported along characteristics, a curl correction is
//! removed with an auxiliary Poisson solve, and the remaining potential pair
//! `(varphi, Psi)` solves a coupled elliptic system.

pub mod background;
pub mod coefficients;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod gas;
pub mod grid;
pub mod io;
pub mod iteration;
mod par;
pub mod profile;
pub mod transport;

pub use background::{
    check_lemma_condition, find_threshold_e, integrate_background, BackgroundState, ThresholdFailure,
    ThresholdReport,
};
pub use diagnostics::{
    conservation_report, nonlinear_residual, stability_sweep, ResidualReport, SweepTable, TotalFields,
};
pub use elliptic::{coercivity_check, recover_velocity, AuxPoissonSolver, PotentialSystemSolver};
pub use error::{Error, Result};
pub use gas::{density_from_bernoulli, sound_speed_sq, GasParams, InletState, NozzleGeometry, ThermoSample};
pub use grid::{Field2D, Grid2D};
pub use iteration::{
    compute_sigma, fixed_point_solve, make_bump_boundary_data, BoundaryData, BumpAmplitudes, FixedPointConfig,
    PerturbationState, SolveReport,
};
pub use profile::Profile;
