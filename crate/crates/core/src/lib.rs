//! Simulator and solvers for joint base-station activation and beamforming
//! coordination in cell-free ISAC (integrated sensing and communication)
//! networks.
//!
//! The crate is organized around a deterministic scenario generator
//! ([`scenario`]), exact metric evaluation for sensing accuracy, user rates
//! and the spatial radiation footprint ([`sensing`], [`metrics`]), a conic
//! formulation of the coordination problem ([`problem`], [`conic`]), and
//! three solver families:
//!
//! * [`brb`] — globally optimal branch-and-bound over binary activations,
//!   bounding each branch with the monotonic-optimization solver in [`mo`];
//! * [`sca`] — a low-complexity successive convex approximation solver;
//! * [`baselines`] — fixed activation heuristics combined with SCA
//!   beamforming.
//!
//! The [`harness`] module drives Monte Carlo sweeps and emits CSV tables;
//! the `isacopt` binary is the command-line front end.

pub mod baselines;
pub mod brb;
pub mod conic;
pub mod harness;
pub mod metrics;
pub mod mo;
pub mod problem;
pub mod report;
pub mod sca;
pub mod scenario;
pub mod sensing;

pub use report::{SolveOutcome, SolveReport};
pub use scenario::{ChannelSet, ScenarioConfig, ScenarioSpec};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;

/// Convert a power level in dBm to linear watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert linear watts to dBm, flooring at -200 dBm for zero/negative input.
pub fn watts_to_dbm(watts: f64) -> f64 {
    if watts <= 0.0 {
        -200.0
    } else {
        (10.0 * watts.log10() + 30.0).max(-200.0)
    }
}

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("conic program construction: {0}")]
    Conic(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
