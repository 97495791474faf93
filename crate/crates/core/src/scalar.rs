//! Scalar abstraction: every floating kernel in this crate is generic over
//! [`Real`], instantiated as `f64` in production and `f32` in a few tests.
//! Exact-rational code paths live in [`crate::exact`] and use
//! `num_rational::BigRational` directly.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Shorthand for lossless-enough constants; panics only on NaN inputs,
/// which never appear in the call sites below.
#[inline]
pub(crate) fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("literal conversion")
}

#[inline]
pub(crate) fn two<F: Real>() -> F {
    F::one() + F::one()
}

#[inline]
pub(crate) fn half<F: Real>() -> F {
    F::one() / two()
}
