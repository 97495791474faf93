//! Small numeric helpers shared across modules.

use crate::scalar::Real;

/// Running (Welford) mean. Update error does not accumulate across the sum
/// magnitude, and a constant input sequence is reproduced bit-exactly at
/// every length.
#[derive(Debug, Clone, Copy)]
pub struct RunningMean<F> {
    mean: F,
    count: usize,
}

impl<F: Real> RunningMean<F> {
    pub fn new() -> Self {
        RunningMean { mean: F::zero(), count: 0 }
    }

    pub fn push(&mut self, x: F) {
        self.count += 1;
        let n = F::from_usize(self.count).expect("count fits scalar");
        self.mean = self.mean + (x - self.mean) / n;
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

impl<F: Real> Default for RunningMean<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Slope of the least-squares line through `(xs[i], ys[i])`.
///
/// Returns `None` when fewer than two points are given or the xs are all
/// identical.
pub fn least_squares_slope<F: Real>(xs: &[F], ys: &[F]) -> Option<F> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = F::from_usize(xs.len())?;
    let mut mx = RunningMean::new();
    let mut my = RunningMean::new();
    for (&x, &y) in xs.iter().zip(ys) {
        mx.push(x);
        my.push(y);
    }
    let (mx, my) = (mx.mean(), my.mean());
    let mut sxx = F::zero();
    let mut sxy = F::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    let _ = n;
    if sxx == F::zero() {
        return None;
    }
    Some(sxy / sxx)
}
