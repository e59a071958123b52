use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Bernoulli closure argument `K + Φ − |u|²/2` hit the vacuum guard.
    #[error("non-positive enthalpy argument {argument:e}")]
    NonPositiveEnthalpy { argument: f64 },

    #[error("r = {r} lies outside [0, {length}]")]
    OutOfDomain { r: f64, length: f64 },

    #[error("Mach number squared {msq} is too close to sonic")]
    SonicDegenerate { msq: f64 },

    #[error("background left the subsonic range at r = {r} (Mach^2 = {msq})")]
    SonicBreakdown { r: f64, msq: f64 },

    #[error("background density became non-positive at r = {r} (rho = {rho})")]
    VacuumBreakdown { r: f64, rho: f64 },

    #[error("bisection bracket [{lo}, {hi}] does not straddle the threshold")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("stagnation at (r, theta) = ({r}, {theta}): radial speed {speed}")]
    Stagnation { r: f64, theta: f64, speed: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("linear solve stalled at relative residual {residual:e} (tolerance {tolerance:e})")]
    NonConvergedLinearSolve { residual: f64, tolerance: f64 },

    #[error("fixed-point iteration diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV: {0}")]
    Csv(String),
}
