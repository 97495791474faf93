//! Crate-wide error type. Values entering error variants are converted to
//! `f64` so the enum stays independent of the scalar parameter.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {x} lies outside the domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("point {x} hits the singular set")]
    AtSingularity { x: f64 },

    #[error("non-finite value at orbit index {index}")]
    NonFinite { index: usize },

    #[error("operation not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("trace delta {trace_delta} does not match params delta {params_delta}")]
    DeltaMismatch { trace_delta: f64, params_delta: f64 },

    #[error("index {n} out of range for trace of length {len}")]
    OutOfRange { n: usize, len: usize },

    #[error("trace invalid (truncated at index {truncated_at})")]
    InvalidTrace { truncated_at: usize },

    #[error("sampling failed after {attempts} resample attempts")]
    Sampling { attempts: usize },

    #[error("partition cell {cell} received no valid samples")]
    EmptyCell { cell: usize },

    #[error("power iteration did not converge: residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("insufficient data: needed {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("pair tracking inconclusive: separation underflowed before orbits stayed comparable")]
    Inconclusive,
}

pub type Result<T> = std::result::Result<T, Error>;
