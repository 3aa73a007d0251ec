//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("flux {0} Phi0 is off the principal branch (-0.5, 0.5)")]
    OffBranchFlux(f64),

    #[error("qubit-coupler detuning vanishes at flux {0} Phi0; dispersive formula diverges")]
    ZeroDetuning(f64),

    #[error("no sign change of {quantity} on [{lo}, {hi}]; cannot bracket a root")]
    NoSignChange { quantity: &'static str, lo: f64, hi: f64 },

    #[error("eigenstate labeling is ambiguous: eigenstate {eigenstate} claims bare labels {a} and {b}")]
    DegenerateLabels { eigenstate: usize, a: usize, b: usize },

    #[error("input state set is rank deficient (rank {rank} < {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("integration step size underflow at t = {t:.3e} s (dt = {dt:.3e} s)")]
    StepSizeUnderflow { t: f64, dt: f64 },

    #[error("integration accuracy failure: trace drift {drift:.3e} exceeds {limit:.3e}")]
    TraceDrift { drift: f64, limit: f64 },

    #[error("fit did not converge after {0} iterations")]
    FitDidNotConverge(usize),

    #[error("degenerate fit data: {0}")]
    DegenerateData(String),

    #[error("no oscillation detected: {0}")]
    NoOscillation(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
