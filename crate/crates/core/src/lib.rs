//! Empirical pair-copula estimation on regular vines.
//!
//! The library estimates the pair-copulas of a regular-vine decomposition
//! without assuming parametric families: ground-level pairs are turned into
//! normalized ranks, conditional distribution functions are estimated by a
//! nearest-neighbour finite difference of the empirical copula, and the
//! resulting conditional pseudo-observations are rank-normalized again and
//! fed to the next tree level. On top of the estimator sit
//!
//! * vine-structure selection by maximum spanning trees weighted with
//!   absolute conditional Spearman correlations ([`select`]),
//! * multiplier-bootstrap confidence intervals for pair-copula values and
//!   conditional Spearman's rho, plus Cramér-von Mises independence and
//!   goodness-of-fit tests ([`inference`]),
//! * a parametric vine simulator (Gaussian / Student t / Gumbel /
//!   independence pair-copulas) used for validation studies ([`families`]).
//!
//! Variable indices are 0-based throughout the Rust API; serialized formats
//! (JSON, dot, edge labels) use 1-based indices.

pub mod estimator;
pub mod experiments;
pub mod families;
pub mod inference;
pub mod math;
pub mod rank;
pub mod rng;
pub mod select;
pub mod vine;

use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user input failed (sizes, ranges, etc.).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The moving window of the conditional-cdf estimator caught no sample.
    #[error("empty estimation window around u = {center} (bandwidth {bandwidth})")]
    EmptyWindow { center: f64, bandwidth: f64 },

    /// A copula parameter lies outside its admissible range.
    #[error("invalid {family} parameter: {detail}")]
    InvalidParameter { family: &'static str, detail: String },

    /// Mismatched dimensions between data and structure.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A vine structure violates the regular-vine conditions.
    #[error("invalid vine structure: {0}")]
    InvalidStructure(String),

    /// Serialized input (JSON, edge label, ...) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// An iterative numeric routine failed to reach its tolerance.
    #[error("{what} did not converge (tolerance {tolerance:e})")]
    NonConvergence { what: &'static str, tolerance: f64 },

    /// A computation produced values it cannot proceed with (NaN, ...).
    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
