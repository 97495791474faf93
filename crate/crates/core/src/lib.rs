//! `hyptime`: hyperbolic-time detection and statistics for one-dimensional
//! maps with singular sets.
//!
//! The crate simulates orbits of interval and circle maps whose derivative
//! blows up like a power of the distance to a finite singular set, decides
//! which iterates are hyperbolic times, and estimates the quantities that
//! organize the non-uniformly hyperbolic picture: the distribution and
//! moments of the first hyperbolic time, the frequency of hyperbolic times
//! along orbits, push-forward and invariant densities, and Birkhoff
//! averages of expansion and recurrence observables.
//!
//! Floating kernels are generic over the scalar (see [`scalar::Real`]);
//! production code uses the `f64` aliases exported at the crate root. The
//! square-root circle map ships with an exact-rational companion
//! ([`exact`]) for the sequences whose divergence certifies a
//! non-integrable first hyperbolic time.

#![forbid(unsafe_code)]

pub mod detect;
pub mod error;
pub mod exact;
pub mod map;
pub mod measures;
pub mod numeric;
pub mod orbit;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};

/// Concrete `f64` aliases for the generic core types.
pub type Map64 = map::MapModel<f64>;
pub type Trace64 = orbit::OrbitTrace<f64>;
pub type Params64 = detect::HTParams<f64>;
pub type Histogram64 = measures::DensityHistogram<f64>;
pub type Ulam64 = measures::UlamOperator<f64>;
pub type HHistogram64 = stats::HHistogram<f64>;
