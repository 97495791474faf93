//! Hyperbolic-time detection.
//!
//! A time `n` qualifies for the orbit of `x` when, for every `1 <= k <= n`,
//! the backward window accumulates enough expansion,
//!
//! ```text
//! sum_{j=n-k}^{n-1} a_j <= k * log(sigma),
//! ```
//!
//! and the orbit has not approached the singular set too fast,
//!
//! ```text
//! c_{n-k} >= b * k * log(sigma).
//! ```
//!
//! With an empty singular set only the first condition applies.
//!
//! [`is_hyperbolic_time_naive`] evaluates the window sums directly and is
//! the oracle; [`scan_hyperbolic_times`] answers all `n` in one O(N) pass
//! over two running minima and must match the oracle flag for flag. Both
//! sides accumulate their comparison operands incrementally so that exact
//! boundary ties (constant-derivative maps at the critical `sigma`) resolve
//! identically.

use crate::error::{Error, Result};
use crate::map::MapModel;
use crate::orbit::{OrbitTrace, SINGULAR_HIT_TOL};
use crate::scalar::{half, lit, Real};

/// Detection parameters `(sigma, delta, b)` plus the map's exponent `beta`
/// that bounds the admissible `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HTParams<F> {
    sigma: F,
    delta: F,
    b: F,
    beta: F,
}

/// Largest admissible recurrence exponent: `min(1/2, 1/(4 beta))`.
pub fn b_bound<F: Real>(beta: F) -> F {
    let quarter = half::<F>() * half::<F>();
    half::<F>().min(F::one() / (quarter.recip() * beta))
}

/// Default `b`: 99% of the admissible bound (the recurrence condition is
/// most tolerant at the top of the range).
pub fn default_b<F: Real>(beta: F) -> F {
    lit::<F>(0.99) * b_bound(beta)
}

impl<F: Real> HTParams<F> {
    pub fn new(sigma: F, delta: F, b: F, beta: F) -> Result<Self> {
        if !(sigma > F::zero() && sigma < F::one()) {
            return Err(Error::InvalidParams(format!(
                "sigma must lie in (0,1), got {sigma}"
            )));
        }
        if !(delta > F::zero()) {
            return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
        }
        if !(beta > F::zero()) {
            return Err(Error::InvalidParams(format!("beta must be positive, got {beta}")));
        }
        let bound = b_bound(beta);
        if !(b > F::zero() && b < bound) {
            return Err(Error::InvalidParams(format!(
                "b must lie in (0, min(1/2, 1/(4*beta))) = (0, {bound}), got {b}"
            )));
        }
        Ok(HTParams { sigma, delta, b, beta })
    }

    /// Parameters for `map`, copying its `beta`; `b` defaults to
    /// [`default_b`] when not given.
    pub fn for_map(map: &MapModel<F>, sigma: F, delta: F, b: Option<F>) -> Result<Self> {
        let beta = map.beta();
        HTParams::new(sigma, delta, b.unwrap_or_else(|| default_b(beta)), beta)
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn delta(&self) -> F {
        self.delta
    }

    pub fn b(&self) -> F {
        self.b
    }

    pub fn beta(&self) -> F {
        self.beta
    }

    fn log_sigma(&self) -> F {
        self.sigma.ln()
    }
}

/// First hyperbolic time, or censoring at the scanned horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstHt {
    Time(usize),
    Censored(usize),
}

impl FirstHt {
    pub fn value(&self) -> Option<usize> {
        match *self {
            FirstHt::Time(n) => Some(n),
            FirstHt::Censored(_) => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, FirstHt::Censored(_))
    }
}

/// Per-step diagnostics emitted by the incremental scanner.
#[derive(Debug, Clone, Copy)]
pub struct ScanStep<F> {
    /// Time index `n` the flag refers to.
    pub n: usize,
    pub flag: bool,
    /// Prefix value `P_n = sum_{j<n} (a_j - log sigma)`; condition 1 holds
    /// iff this is a running minimum.
    pub p_n: F,
    /// Slack of condition 2: `min_{j<n} Q_j - b*n*log(sigma)`, `None` when
    /// the singular set is empty and the condition is vacuous.
    pub cond2_margin: Option<F>,
}

/// O(1)-per-step hyperbolic-time scanner over two running minima.
#[derive(Debug, Clone)]
pub struct HtScanner<F> {
    log_sigma: F,
    b_log_sigma: F,
    use_recurrence: bool,
    steps: usize,
    p_sum: F,
    p_min: F,
    q_min: F,
}

impl<F: Real> HtScanner<F> {
    pub fn new(params: &HTParams<F>, has_singular_set: bool) -> Self {
        HtScanner {
            log_sigma: params.log_sigma(),
            b_log_sigma: params.b() * params.log_sigma(),
            use_recurrence: has_singular_set,
            steps: 0,
            p_sum: F::zero(),
            p_min: F::zero(),
            q_min: F::infinity(),
        }
    }

    /// Feed `(a_j, c_j)` for `j = steps`; returns the flag and diagnostics
    /// for time `n = steps + 1`. `c` is ignored when the singular set is
    /// empty.
    pub fn push(&mut self, a: F, c: F) -> ScanStep<F> {
        let n = self.steps + 1;
        let p_next = self.p_sum + (a - self.log_sigma);
        let cond1 = p_next <= self.p_min;

        let (cond2, margin) = if self.use_recurrence {
            let j = lit::<F>(self.steps as f64);
            let q_j = c + self.b_log_sigma * j;
            if q_j < self.q_min {
                self.q_min = q_j;
            }
            let threshold = self.b_log_sigma * lit::<F>(n as f64);
            (self.q_min >= threshold, Some(self.q_min - threshold))
        } else {
            (true, None)
        };

        if p_next < self.p_min {
            self.p_min = p_next;
        }
        self.p_sum = p_next;
        self.steps = n;

        ScanStep { n, flag: cond1 && cond2, p_n: p_next, cond2_margin: margin }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Flags over `n = 1..=N` plus the extracted hyperbolic-time indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HTScanResult {
    flags: Vec<bool>,
    times: Vec<usize>,
    first: FirstHt,
}

impl HTScanResult {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let times: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i + 1))
            .collect();
        let first = match times.first() {
            Some(&n) => FirstHt::Time(n),
            None => FirstHt::Censored(flags.len()),
        };
        HTScanResult { flags, times, first }
    }

    /// Scan horizon `N`.
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Flag for time `n` (1-based).
    pub fn flag(&self, n: usize) -> bool {
        self.flags[n - 1]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// Strictly increasing hyperbolic-time indices `n_1 < n_2 < ...`.
    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn first(&self) -> FirstHt {
        self.first
    }
}

fn check_delta<F: Real>(trace: &OrbitTrace<F>, params: &HTParams<F>) -> Result<()> {
    if trace.delta() != params.delta() {
        return Err(Error::DeltaMismatch {
            trace_delta: trace.delta().to_f64().unwrap_or(f64::NAN),
            params_delta: params.delta().to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Direct evaluation of both window conditions for a single time `n`.
///
/// Each side of each inequality is accumulated term by term so the
/// comparison is reproducible at exact boundary ties; the prefix scan must
/// agree with this function on every input.
pub fn is_hyperbolic_time_naive<F: Real>(
    trace: &OrbitTrace<F>,
    n: usize,
    params: &HTParams<F>,
) -> Result<bool> {
    check_delta(trace, params)?;
    if n == 0 || n > trace.len() {
        return Err(Error::OutOfRange { n, len: trace.len() });
    }
    let log_sigma = params.log_sigma();
    let b_log_sigma = params.b() * log_sigma;
    let use_recurrence = trace.has_singular_set();
    let (a, c) = (trace.a(), trace.c());

    let mut lhs = F::zero();
    let mut rhs = F::zero();
    let mut rhs_rec = F::zero();
    for k in 1..=n {
        lhs = lhs + a[n - k];
        rhs = rhs + log_sigma;
        if !(lhs <= rhs) {
            return Ok(false);
        }
        if use_recurrence {
            rhs_rec = rhs_rec + b_log_sigma;
            if !(c[n - k] >= rhs_rec) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All flags for `n = 1..=len` in one pass over the trace.
pub fn scan_hyperbolic_times<F: Real>(
    trace: &OrbitTrace<F>,
    params: &HTParams<F>,
) -> Result<HTScanResult> {
    check_delta(trace, params)?;
    let mut scanner = HtScanner::new(params, trace.has_singular_set());
    let flags: Vec<bool> = trace
        .a()
        .iter()
        .zip(trace.c())
        .map(|(&a, &c)| scanner.push(a, c).flag)
        .collect();
    Ok(HTScanResult::from_flags(flags))
}

/// Smallest hyperbolic time of the trace, censored at the trace length.
///
/// A trace that was truncated by a singular-set hit before any hyperbolic
/// time appeared propagates the invalidity instead of reporting a censored
/// value.
pub fn first_ht<F: Real>(trace: &OrbitTrace<F>, params: &HTParams<F>) -> Result<FirstHt> {
    let scan = scan_hyperbolic_times(trace, params)?;
    match scan.first() {
        FirstHt::Time(n) => Ok(FirstHt::Time(n)),
        FirstHt::Censored(len) => {
            if trace.is_valid() {
                Ok(FirstHt::Censored(len))
            } else {
                Err(Error::InvalidTrace { truncated_at: len })
            }
        }
    }
}

/// Outcome of a streaming first-hyperbolic-time pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFirstHt {
    Time(usize),
    Censored(usize),
    /// Orbit landed on the singular set (within tolerance) at this index
    /// before a hyperbolic time appeared.
    SingularHit(usize),
}

/// First hyperbolic time of `x0` up to horizon `t_max`, generating the
/// orbit lazily and stopping at the first flag. Flags agree exactly with
/// scanning a fully materialized trace.
pub fn first_ht_streaming<F: Real>(
    map: &MapModel<F>,
    x0: F,
    params: &HTParams<F>,
    t_max: usize,
) -> Result<StreamFirstHt> {
    if !map.domain().contains(x0) {
        return Err(Error::OutsideDomain {
            x: x0.to_f64().unwrap_or(f64::NAN),
            lo: map.domain().lo().to_f64().unwrap_or(f64::NAN),
            hi: map.domain().hi().to_f64().unwrap_or(f64::NAN),
        });
    }
    let hit_tol = lit::<F>(SINGULAR_HIT_TOL);
    let has_singular = !map.singular_set().is_empty();
    let near_singular = |x: F| -> bool {
        has_singular && map.dist_to_singular(x).is_some_and(|d| d <= hit_tol)
    };
    let mut scanner = HtScanner::new(params, has_singular);
    let mut cur = map.domain().canonicalize(x0);
    if near_singular(cur) {
        return Ok(StreamFirstHt::SingularHit(0));
    }
    for j in 0..t_max {
        let a = map.inv_deriv_norm(cur)?.ln();
        let c = map.dist_delta(cur, params.delta()).ln();
        if scanner.push(a, c).flag {
            return Ok(StreamFirstHt::Time(j + 1));
        }
        let next = map.eval(cur)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { index: j + 1 });
        }
        if near_singular(next) {
            return Ok(StreamFirstHt::SingularHit(j + 1));
        }
        cur = next;
    }
    Ok(StreamFirstHt::Censored(t_max))
}

/// Finite-horizon frequency summary. `theta_at_n` is the point estimate
/// `#{n_k <= N} / N`; `trailing_min` is the minimum of the same ratio over
/// `M` in `[N/2, N]`, a finite-N stand-in for the liminf in the frequency
/// definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyReport {
    pub theta_at_n: f64,
    pub trailing_min: f64,
}

pub fn frequency_estimate(result: &HTScanResult, n: usize) -> Result<FrequencyReport> {
    if n == 0 {
        return Err(Error::InvalidParams("frequency horizon N must be positive".into()));
    }
    if n > result.len() {
        return Err(Error::OutOfRange { n, len: result.len() });
    }
    let times = result.times();
    let count_up_to = |m: usize| times.partition_point(|&t| t <= m);

    let theta_at_n = count_up_to(n) as f64 / n as f64;
    let m_lo = n.div_ceil(2);
    let mut trailing_min = f64::INFINITY;
    let mut idx = count_up_to(m_lo);
    for m in m_lo..=n {
        if m > m_lo {
            while idx < times.len() && times[idx] <= m {
                idx += 1;
            }
        }
        let ratio = idx as f64 / m as f64;
        if ratio < trailing_min {
            trailing_min = ratio;
        }
    }
    Ok(FrequencyReport { theta_at_n, trailing_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapModel;
    use crate::orbit::orbit_trace;
    use proptest::prelude::*;
    use rand::Rng;

    fn params_for<F: Real>(map: &MapModel<F>, sigma: f64, delta: f64) -> HTParams<F> {
        HTParams::for_map(map, lit(sigma), lit(delta), None).unwrap()
    }

    #[test]
    fn b_bound_and_validation() {
        assert_eq!(b_bound(0.5f64), 0.5); // min(1/2, 1/2)
        assert_eq!(b_bound(1.0f64), 0.25);
        assert!(HTParams::new(0.5, 0.1, 0.6, 0.5).is_err()); // b over the bound
        assert!(HTParams::new(1.0, 0.1, 0.1, 0.5).is_err()); // sigma = 1
        assert!(HTParams::new(0.5, 0.0, 0.1, 0.5).is_err()); // delta = 0
        assert!(HTParams::new(0.5, 0.1, 0.4999, 0.5).is_ok());
    }

    #[test]
    fn naive_doubling_boundary_sigma_is_all_true() {
        // At sigma = 1/2 the expansion condition holds with equality at
        // every k; the tie must resolve as a pass for all n.
        let map = MapModel::<f64>::doubling();
        let trace = orbit_trace(&map, 0.3123, 200, 0.1).unwrap();
        let params = params_for(&map, 0.5, 0.1);
        for n in 1..=trace.len() {
            assert!(is_hyperbolic_time_naive(&trace, n, &params).unwrap(), "n = {n}");
        }
    }

    #[test]
    fn naive_doubling_small_sigma_fails_at_once() {
        let map = MapModel::<f64>::doubling();
        let trace = orbit_trace(&map, 0.3123, 10, 0.1).unwrap();
        let params = params_for(&map, 0.4, 0.1);
        assert!(!is_hyperbolic_time_naive(&trace, 1, &params).unwrap());
    }

    #[test]
    fn naive_matches_displayed_product_inequalities() {
        // Independent oracle: recompute the orbit from scratch and test the
        // product/power forms of both displayed inequalities per (n, k).
        let map = MapModel::<f64>::sqrt_circle();
        let (x0, sigma, delta) = (0.7, 0.78, 0.1);
        let n_max = 50;
        let trace = orbit_trace(&map, x0, n_max, delta).unwrap();
        let params = params_for(&map, sigma, delta);
        let b = params.b();

        let mut orbit = vec![x0];
        for _ in 0..n_max {
            orbit.push(map.eval(*orbit.last().unwrap()).unwrap());
        }
        for n in 1..=n_max {
            let mut expected = true;
            for k in 1..=n {
                let mut product = 1.0f64;
                for j in n - k..n {
                    product *= map.inv_deriv_norm(orbit[j]).unwrap();
                }
                if product > sigma.powi(k as i32) {
                    expected = false;
                    break;
                }
                if map.dist_delta(orbit[n - k], delta) < sigma.powf(b * k as f64) {
                    expected = false;
                    break;
                }
            }
            let got = is_hyperbolic_time_naive(&trace, n, &params).unwrap();
            assert_eq!(got, expected, "disagreement at n = {n}");
        }
    }

    #[test]
    fn scan_matches_naive_on_random_orbits() {
        let maps: Vec<MapModel<f64>> = vec![
            MapModel::sqrt_circle(),
            MapModel::doubling(),
            MapModel::tent(),
        ];
        let mut rng = crate::rng::substream(11, 0);
        for map in &maps {
            for &sigma in &[0.4, 0.5, 0.9] {
                for _ in 0..4 {
                    let x0 = map.sample_point(&mut rng);
                    let trace = orbit_trace(map, x0, 400, 0.1).unwrap();
                    let params = params_for(map, sigma, 0.1);
                    let scan = scan_hyperbolic_times(&trace, &params).unwrap();
                    for n in 1..=trace.len() {
                        assert_eq!(
                            scan.flag(n),
                            is_hyperbolic_time_naive(&trace, n, &params).unwrap(),
                            "{} sigma={sigma} n={n}",
                            map.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn scan_doubling_boundary_sigma_flags_every_time() {
        let map = MapModel::<f64>::doubling();
        let trace = orbit_trace(&map, 0.777, 300, 0.1).unwrap();
        let scan = scan_hyperbolic_times(&trace, &params_for(&map, 0.5, 0.1)).unwrap();
        assert!(scan.flags().iter().all(|&f| f));
        let expected: Vec<usize> = (1..=300).collect();
        assert_eq!(scan.times(), &expected[..]);
        assert_eq!(scan.first(), FirstHt::Time(1));
    }

    #[test]
    fn empty_trace_scans_to_censored() {
        let map = MapModel::<f64>::doubling();
        let trace = orbit_trace(&map, 0.3, 0, 0.1).unwrap();
        let scan = scan_hyperbolic_times(&trace, &params_for(&map, 0.5, 0.1)).unwrap();
        assert!(scan.is_empty());
        assert_eq!(scan.first(), FirstHt::Censored(0));
    }

    #[test]
    fn first_ht_examples() {
        let map = MapModel::<f64>::doubling();
        let trace = orbit_trace(&map, 0.3, 100, 0.1).unwrap();
        assert_eq!(first_ht(&trace, &params_for(&map, 0.5, 0.1)).unwrap(), FirstHt::Time(1));
        assert_eq!(
            first_ht(&trace, &params_for(&map, 0.4, 0.1)).unwrap(),
            FirstHt::Censored(100)
        );
    }

    #[test]
    fn first_ht_matches_naive_first_true() {
        let map = MapModel::<f64>::sqrt_circle();
        let params = params_for(&map, 0.78, 0.1);
        let mut rng = crate::rng::substream(12, 0);
        for _ in 0..24 {
            let x0 = map.sample_point(&mut rng);
            let trace = orbit_trace(&map, x0, 300, 0.1).unwrap();
            if !trace.is_valid() {
                continue;
            }
            let oracle = (1..=trace.len())
                .find(|&n| is_hyperbolic_time_naive(&trace, n, &params).unwrap());
            match first_ht(&trace, &params).unwrap() {
                FirstHt::Time(n) => assert_eq!(Some(n), oracle),
                FirstHt::Censored(_) => assert_eq!(None, oracle),
            }
        }
    }

    #[test]
    fn first_ht_propagates_invalid_traces() {
        let map = MapModel::<f64>::sqrt_circle();
        // Orbit of 1/4 dies on S at step 1; sigma small enough that no
        // hyperbolic time appears first.
        let trace = orbit_trace(&map, 0.25, 50, 0.1).unwrap();
        assert!(!trace.is_valid());
        let params = HTParams::for_map(&map, 0.05, 0.1, None).unwrap();
        assert!(matches!(
            first_ht(&trace, &params),
            Err(Error::InvalidTrace { truncated_at: 1 })
        ));
    }

    #[test]
    fn streaming_agrees_with_batch_scan() {
        let maps: Vec<MapModel<f64>> =
            vec![MapModel::sqrt_circle(), MapModel::doubling(), MapModel::tent()];
        let mut rng = crate::rng::substream(13, 0);
        for map in &maps {
            let params = params_for(map, 0.8, 0.1);
            for _ in 0..20 {
                let x0 = map.sample_point(&mut rng);
                let trace = orbit_trace(map, x0, 256, 0.1).unwrap();
                let streamed = first_ht_streaming(map, x0, &params, 256).unwrap();
                if trace.is_valid() {
                    let batch = first_ht(&trace, &params).unwrap();
                    match (streamed, batch) {
                        (StreamFirstHt::Time(a), FirstHt::Time(b)) => assert_eq!(a, b),
                        (StreamFirstHt::Censored(a), FirstHt::Censored(b)) => assert_eq!(a, b),
                        other => panic!("mismatch: {other:?}"),
                    }
                } else {
                    match streamed {
                        StreamFirstHt::Time(n) => {
                            assert!(n <= trace.len());
                            assert_eq!(
                                first_ht(&trace, &params).unwrap(),
                                FirstHt::Time(n)
                            );
                        }
                        StreamFirstHt::SingularHit(at) => assert_eq!(at, trace.len()),
                        StreamFirstHt::Censored(_) => panic!("invalid trace cannot censor"),
                    }
                }
            }
        }
    }

    #[test]
    fn empty_singular_set_never_reads_c() {
        // Poison the c-sequence: flags must be driven by condition 1 alone.
        let map = MapModel::<f64>::doubling();
        let trace = orbit_trace(&map, 0.3123, 50, 0.1).unwrap();
        let poisoned = OrbitTrace::from_raw(
            trace.x().to_vec(),
            trace.a().to_vec(),
            vec![f64::NAN; trace.len()],
            trace.delta(),
            true,
            false,
        );
        let params = params_for(&map, 0.7, 0.1);
        let clean = scan_hyperbolic_times(&trace, &params).unwrap();
        let dirty = scan_hyperbolic_times(&poisoned, &params).unwrap();
        assert_eq!(clean, dirty);
        for n in 1..=poisoned.len() {
            assert_eq!(
                is_hyperbolic_time_naive(&poisoned, n, &params).unwrap(),
                clean.flag(n)
            );
        }
    }

    #[test]
    fn delta_mismatch_is_rejected() {
        let map = MapModel::<f64>::sqrt_circle();
        let trace = orbit_trace(&map, 0.7, 10, 0.2).unwrap();
        let params = params_for(&map, 0.78, 0.1);
        assert!(matches!(
            scan_hyperbolic_times(&trace, &params),
            Err(Error::DeltaMismatch { .. })
        ));
    }

    #[test]
    fn concatenation_closure_on_detected_times() {
        // If n is hyperbolic for x and k is hyperbolic for f^n(x), then
        // n + k is hyperbolic for x.
        let maps: Vec<MapModel<f64>> =
            vec![MapModel::sqrt_circle(), MapModel::doubling(), MapModel::tent()];
        let mut rng = crate::rng::substream(14, 0);
        let total_len = 300;
        for map in &maps {
            let params = params_for(map, 0.85, 0.1);
            for _ in 0..8 {
                let x0 = map.sample_point(&mut rng);
                let trace = orbit_trace(map, x0, total_len, 0.1).unwrap();
                if !trace.is_valid() {
                    continue;
                }
                let scan = scan_hyperbolic_times(&trace, &params).unwrap();
                for &n in scan.times().iter().take(5) {
                    let suffix = orbit_trace(map, trace.x()[n], total_len - n, 0.1).unwrap();
                    if !suffix.is_valid() {
                        continue;
                    }
                    let suffix_scan = scan_hyperbolic_times(&suffix, &params).unwrap();
                    for &k in suffix_scan.times() {
                        assert!(
                            scan.flag(n + k),
                            "{}: concatenation broke at n={n}, k={k}",
                            map.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn frequency_examples() {
        let all_true = HTScanResult::from_flags(vec![true; 100]);
        let rep = frequency_estimate(&all_true, 100).unwrap();
        assert_eq!(rep.theta_at_n, 1.0);
        assert_eq!(rep.trailing_min, 1.0);

        let none = HTScanResult::from_flags(vec![false; 100]);
        let rep = frequency_estimate(&none, 100).unwrap();
        assert_eq!(rep.theta_at_n, 0.0);
        assert_eq!(rep.trailing_min, 0.0);

        let even = HTScanResult::from_flags((1..=100).map(|n| n % 2 == 0).collect());
        let rep = frequency_estimate(&even, 100).unwrap();
        assert_eq!(rep.theta_at_n, 0.5);
        // Odd M in the trailing window dips just below 1/2.
        assert!(rep.trailing_min <= 0.5 && rep.trailing_min > 0.49);

        assert!(frequency_estimate(&even, 0).is_err());
        assert!(frequency_estimate(&even, 101).is_err());
    }

    #[test]
    fn trailing_min_is_min_over_window() {
        // Hyperbolic times only early on: ratios decay over the window.
        let mut flags = vec![false; 100];
        for f in flags.iter_mut().take(10) {
            *f = true;
        }
        let res = HTScanResult::from_flags(flags);
        let rep = frequency_estimate(&res, 100).unwrap();
        assert_eq!(rep.theta_at_n, 0.1);
        assert_eq!(rep.trailing_min, 0.1); // minimum attained at M = N
    }

    proptest! {
        #[test]
        fn scan_equals_naive_on_synthetic_sequences(
            a in prop::collection::vec(-2.0f64..0.5, 1..120),
            c_raw in prop::collection::vec(-6.0f64..0.0, 1..120),
            sigma in 0.05f64..0.95,
            b_frac in 0.05f64..0.95,
            with_singular in any::<bool>(),
        ) {
            let n = a.len().min(c_raw.len());
            let a = &a[..n];
            let c = &c_raw[..n];
            let trace = OrbitTrace::from_raw(
                vec![0.0; n + 1],
                a.to_vec(),
                c.to_vec(),
                0.1,
                true,
                with_singular,
            );
            let beta = 0.5f64;
            let b = b_frac * b_bound(beta) * 0.999;
            let params = HTParams::new(sigma, 0.1, b, beta).unwrap();
            let scan = scan_hyperbolic_times(&trace, &params).unwrap();
            for n in 1..=trace.len() {
                prop_assert_eq!(
                    scan.flag(n),
                    is_hyperbolic_time_naive(&trace, n, &params).unwrap()
                );
            }
        }

        #[test]
        fn sigma_monotonicity_without_singular_set(
            seed in 0u64..500,
            s1 in 0.3f64..0.9,
            bump in 0.0f64..0.09,
        ) {
            // Larger sigma weakens the expansion condition; with S empty
            // that is the whole definition.
            let map = MapModel::<f64>::doubling();
            let mut rng = crate::rng::substream(seed, 0);
            let x0: f64 = rng.gen();
            let trace = orbit_trace(&map, x0, 64, 0.1).unwrap();
            let p1 = HTParams::for_map(&map, s1, 0.1, None).unwrap();
            let p2 = HTParams::for_map(&map, s1 + bump, 0.1, None).unwrap();
            let scan1 = scan_hyperbolic_times(&trace, &p1).unwrap();
            let scan2 = scan_hyperbolic_times(&trace, &p2).unwrap();
            for &n in scan1.times() {
                prop_assert!(scan2.flag(n));
            }
        }
    }
}
