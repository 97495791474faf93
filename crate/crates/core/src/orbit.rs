//! Orbit generation and the derived log-sequences consumed by the
//! hyperbolic-time detector.

use crate::error::{Error, Result};
use crate::map::MapModel;
use crate::scalar::{lit, Real};

/// Orbit points within this distance of the singular set invalidate the
/// trace from that index on (a Lebesgue-null event; callers resample).
pub const SINGULAR_HIT_TOL: f64 = 1e-15;

/// A finite orbit `x_0 .. x_M` together with
/// `a_j = log ||Df(f^j x)^{-1}|| = -log |f'(x_j)|` and
/// `c_j = log dist_delta(x_j, S) <= 0`.
///
/// `M` equals the requested length unless the orbit hit the singular set,
/// in which case the trace is truncated there and `valid` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace<F> {
    x: Vec<F>,
    a: Vec<F>,
    c: Vec<F>,
    delta: F,
    valid: bool,
    has_singular_set: bool,
}

impl<F: Real> OrbitTrace<F> {
    pub fn x(&self) -> &[F] {
        &self.x
    }

    pub fn a(&self) -> &[F] {
        &self.a
    }

    pub fn c(&self) -> &[F] {
        &self.c
    }

    pub fn delta(&self) -> F {
        self.delta
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn has_singular_set(&self) -> bool {
        self.has_singular_set
    }

    /// Number of steps carried by the trace (`a` and `c` have this length,
    /// `x` one more).
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Test-support constructor for synthetic sequences.
    pub fn from_raw(
        x: Vec<F>,
        a: Vec<F>,
        c: Vec<F>,
        delta: F,
        valid: bool,
        has_singular_set: bool,
    ) -> Self {
        assert_eq!(x.len(), a.len() + 1, "x must be one longer than a");
        assert_eq!(a.len(), c.len(), "a and c must have equal length");
        OrbitTrace { x, a, c, delta, valid, has_singular_set }
    }
}

/// Generate the orbit of `x0` for `n` steps and record the log-sequences.
pub fn orbit_trace<F: Real>(
    map: &MapModel<F>,
    x0: F,
    n: usize,
    delta: F,
) -> Result<OrbitTrace<F>> {
    if !(delta > F::zero()) {
        return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
    }
    if !map.domain().contains(x0) {
        return Err(Error::OutsideDomain {
            x: x0.to_f64().unwrap_or(f64::NAN),
            lo: map.domain().lo().to_f64().unwrap_or(f64::NAN),
            hi: map.domain().hi().to_f64().unwrap_or(f64::NAN),
        });
    }
    let hit_tol = lit::<F>(SINGULAR_HIT_TOL);
    let has_singular_set = !map.singular_set().is_empty();
    let near_singular = |x: F| -> bool {
        has_singular_set && map.dist_to_singular(x).is_some_and(|d| d <= hit_tol)
    };

    let mut x = Vec::with_capacity(n + 1);
    let mut a = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut cur = map.domain().canonicalize(x0);
    x.push(cur);
    if near_singular(cur) {
        return Ok(OrbitTrace { x, a, c, delta, valid: false, has_singular_set });
    }
    for j in 0..n {
        a.push(map.inv_deriv_norm(cur)?.ln());
        c.push(map.dist_delta(cur, delta).ln());
        let next = map.eval(cur)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { index: j + 1 });
        }
        x.push(next);
        if near_singular(next) {
            return Ok(OrbitTrace { x, a, c, delta, valid: false, has_singular_set });
        }
        cur = next;
    }
    Ok(OrbitTrace { x, a, c, delta, valid: true, has_singular_set })
}
