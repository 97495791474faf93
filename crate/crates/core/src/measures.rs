//! Push-forward measures, the discretized transfer operator, Birkhoff
//! averages, and the numerical contraction/distortion checks at hyperbolic
//! times.

use rand::Rng;

use crate::detect::{HTParams, HtScanner};
use crate::error::{Error, Result};
use crate::map::MapModel;
use crate::numeric::RunningMean;
use crate::orbit::{OrbitTrace, SINGULAR_HIT_TOL};
use crate::rng::substream;
use crate::scalar::{lit, Real};

/// Retry budget for orbits invalidated by singular-set hits.
const RESAMPLE_CAP: usize = 100;

/// Probability histogram over a uniform partition of a domain interval.
/// Masses are the source of truth; densities are mass over bin width
/// (units 1/length).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram<F> {
    edges: Vec<F>,
    mass: Vec<F>,
}

impl<F: Real> DensityHistogram<F> {
    /// Normalize integer counts into a probability histogram.
    pub fn from_counts(lo: F, hi: F, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let total_f = lit::<F>(total as f64);
        let mass = counts.iter().map(|&c| lit::<F>(c as f64) / total_f).collect();
        Ok(DensityHistogram { edges: uniform_edges(lo, hi, counts.len()), mass })
    }

    /// Wrap already-normalized masses.
    pub fn from_masses(lo: F, hi: F, mass: Vec<F>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let mut sum = F::zero();
        for &m in &mass {
            if !(m >= F::zero()) {
                return Err(Error::InvalidParams("histogram masses must be >= 0".into()));
            }
            sum = sum + m;
        }
        if (sum - F::one()).abs() > lit(1e-9) {
            return Err(Error::InvalidParams(format!(
                "histogram masses must sum to 1, got {sum}"
            )));
        }
        Ok(DensityHistogram { edges: uniform_edges(lo, hi, mass.len()), mass })
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn edges(&self) -> &[F] {
        &self.edges
    }

    pub fn mass(&self) -> &[F] {
        &self.mass
    }

    pub fn width(&self, i: usize) -> F {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn density(&self, i: usize) -> F {
        self.mass[i] / self.width(i)
    }

    pub fn densities(&self) -> Vec<F> {
        (0..self.bins()).map(|i| self.density(i)).collect()
    }

    pub fn sup_density(&self) -> F {
        (0..self.bins()).fold(F::zero(), |acc, i| acc.max(self.density(i)))
    }

    /// L1 distance between the mass vectors of two equal partitions.
    pub fn l1_distance(&self, other: &DensityHistogram<F>) -> F {
        assert_eq!(self.bins(), other.bins());
        self.mass
            .iter()
            .zip(&other.mass)
            .fold(F::zero(), |acc, (&a, &b)| acc + (a - b).abs())
    }
}

fn uniform_edges<F: Real>(lo: F, hi: F, bins: usize) -> Vec<F> {
    let len = hi - lo;
    let bins_f = lit::<F>(bins as f64);
    (0..=bins)
        .map(|i| {
            if i == bins {
                hi
            } else {
                lo + len * lit::<F>(i as f64) / bins_f
            }
        })
        .collect()
}

pub(crate) fn bin_index<F: Real>(lo: F, hi: F, bins: usize, x: F) -> usize {
    let t = (x - lo) / (hi - lo) * lit::<F>(bins as f64);
    let i = t.floor().to_usize().unwrap_or(0);
    i.min(bins - 1)
}

/// Row-stochastic discretization of the transfer operator on `k` uniform
/// cells: entry `(i, j)` is the fraction of cell `i` mapping into cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamOperator<F> {
    edges: Vec<F>,
    k: usize,
    rows: Vec<F>,
}

impl<F: Real> UlamOperator<F> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[F] {
        &self.edges
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    pub fn entry(&self, i: usize, j: usize) -> F {
        self.rows[i * self.k + j]
    }
}

fn near_singular<F: Real>(map: &MapModel<F>, x: F) -> bool {
    !map.singular_set().is_empty()
        && map.dist_to_singular(x).is_some_and(|d| d <= lit(SINGULAR_HIT_TOL))
}

/// Histogram of the Cesàro average of the first `n` push-forwards of the
/// uniform measure: every accepted sample contributes its first `n` orbit
/// points with weight `1/n`.
pub fn pushforward_histogram<F: Real>(
    map: &MapModel<F>,
    n: usize,
    n_samples: usize,
    bins: usize,
    seed: u64,
) -> Result<DensityHistogram<F>> {
    if n == 0 {
        return Err(Error::InvalidParams("pushforward horizon n must be >= 1".into()));
    }
    if bins == 0 || n_samples < bins {
        return Err(Error::InvalidParams(
            "need bins >= 1 and n_samples >= bins".into(),
        ));
    }
    let (lo, hi) = (map.domain().lo(), map.domain().hi());
    let mut counts = vec![0u64; bins];
    let mut scratch: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n_samples {
        let mut rng = substream(seed, i as u64);
        let mut accepted = false;
        for _ in 0..RESAMPLE_CAP {
            scratch.clear();
            let mut cur = map.sample_point(&mut rng);
            let mut ok = true;
            for j in 0..n {
                if near_singular(map, cur) {
                    ok = false;
                    break;
                }
                scratch.push(bin_index(lo, hi, bins, cur));
                if j + 1 < n {
                    let next = map.eval(cur)?;
                    if !next.is_finite() {
                        return Err(Error::NonFinite { index: j + 1 });
                    }
                    cur = next;
                }
            }
            if ok {
                for &b in &scratch {
                    counts[b] += 1;
                }
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Sampling { attempts: RESAMPLE_CAP });
        }
    }
    DensityHistogram::from_counts(lo, hi, &counts)
}

/// Transfer-operator matrix via exact intersection of the map's monotone
/// branches with the partition.
pub fn ulam_matrix_analytic<F: Real>(map: &MapModel<F>, k: usize) -> Result<UlamOperator<F>> {
    if k < 2 {
        return Err(Error::InvalidParams("ulam partition needs k >= 2".into()));
    }
    let (lo, hi) = (map.domain().lo(), map.domain().hi());
    let edges = uniform_edges(lo, hi, k);
    let mut rows = vec![F::zero(); k * k];
    for (idx, br) in map.branches().iter().enumerate() {
        for j in 0..k {
            let y_a = edges[j].max(br.y_lo);
            let y_b = edges[j + 1].min(br.y_hi);
            if !(y_b > y_a) {
                continue;
            }
            let (u, v) = {
                let gu = map.branch_inverse(idx, y_a);
                let gv = map.branch_inverse(idx, y_b);
                if br.increasing {
                    (gu, gv)
                } else {
                    (gv, gu)
                }
            };
            let u = u.max(br.x_lo);
            let v = v.min(br.x_hi);
            if !(v > u) {
                continue;
            }
            let i_lo = bin_index(lo, hi, k, u);
            let i_hi = bin_index(lo, hi, k, v);
            for i in i_lo..=i_hi {
                let a = u.max(edges[i]);
                let b = v.min(edges[i + 1]);
                if b > a {
                    let cell_len = edges[i + 1] - edges[i];
                    rows[i * k + j] = rows[i * k + j] + (b - a) / cell_len;
                }
            }
        }
    }
    Ok(UlamOperator { edges, k, rows })
}

/// Transfer-operator matrix by Monte Carlo: each cell is sampled uniformly
/// and the landing cells are tallied.
pub fn ulam_matrix_monte_carlo<F: Real>(
    map: &MapModel<F>,
    k: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamOperator<F>> {
    if k < 2 {
        return Err(Error::InvalidParams("ulam partition needs k >= 2".into()));
    }
    if samples_per_cell == 0 {
        return Err(Error::InvalidParams("samples_per_cell must be >= 1".into()));
    }
    let (lo, hi) = (map.domain().lo(), map.domain().hi());
    let edges = uniform_edges(lo, hi, k);
    let mut rows = vec![F::zero(); k * k];
    for i in 0..k {
        let mut rng = substream(seed, i as u64);
        let mut counts = vec![0u64; k];
        let mut valid = 0u64;
        for _ in 0..samples_per_cell {
            let u: f64 = rng.gen();
            let x = edges[i] + (edges[i + 1] - edges[i]) * lit::<F>(u);
            let y = match map.eval(x) {
                Ok(y) if y.is_finite() => y,
                _ => continue,
            };
            counts[bin_index(lo, hi, k, y)] += 1;
            valid += 1;
        }
        if valid == 0 {
            return Err(Error::EmptyCell { cell: i });
        }
        for (j, &c) in counts.iter().enumerate() {
            rows[i * k + j] = lit::<F>(c as f64) / lit::<F>(valid as f64);
        }
    }
    Ok(UlamOperator { edges, k, rows })
}

/// Default construction: analytic branch intersection when the map declares
/// monotone branches (every builtin does), with
/// [`ulam_matrix_monte_carlo`] as the map-agnostic fallback engine.
pub fn ulam_matrix<F: Real>(
    map: &MapModel<F>,
    k: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamOperator<F>> {
    if map.branches().is_empty() {
        ulam_matrix_monte_carlo(map, k, samples_per_cell, seed)
    } else {
        ulam_matrix_analytic(map, k)
    }
}

/// Left fixed vector of the operator by power iteration, returned as a
/// probability histogram over the operator's partition.
pub fn stationary_density<F: Real>(
    op: &UlamOperator<F>,
    tol: F,
    max_iter: usize,
) -> Result<DensityHistogram<F>> {
    let k = op.k();
    let uniform = F::one() / lit::<F>(k as f64);
    let mut v = vec![uniform; k];
    let mut next = vec![F::zero(); k];
    let mut residual = F::infinity();
    for _ in 0..max_iter {
        for x in next.iter_mut() {
            *x = F::zero();
        }
        for i in 0..k {
            let vi = v[i];
            if vi == F::zero() {
                continue;
            }
            for (j, &p) in op.row(i).iter().enumerate() {
                next[j] = next[j] + vi * p;
            }
        }
        let sum = next.iter().fold(F::zero(), |acc, &x| acc + x);
        for x in next.iter_mut() {
            *x = *x / sum;
        }
        residual = v
            .iter()
            .zip(&next)
            .fold(F::zero(), |acc, (&a, &b)| acc + (a - b).abs());
        std::mem::swap(&mut v, &mut next);
        if residual <= tol {
            let lo = op.edges()[0];
            let hi = *op.edges().last().unwrap();
            return DensityHistogram::from_masses(lo, hi, v);
        }
    }
    Err(Error::NoConvergence {
        residual: residual.to_f64().unwrap_or(f64::NAN),
        iterations: max_iter,
    })
}

/// Histogram of `f^n` over the subsample of points for which `n` is a
/// hyperbolic time.
#[derive(Debug, Clone)]
pub struct HtDensityReport<F> {
    /// Probability histogram of the selected image points; `None` when the
    /// subsample is empty.
    pub histogram: Option<DensityHistogram<F>>,
    /// Empirical bound on `d/dm f^n_*(m | H_n)`: the histogram's supremum
    /// density scaled by the subsample's Lebesgue mass. Zero when empty.
    pub sup_density: F,
    /// Fraction of samples with `n` hyperbolic (the Lebesgue mass of `H_n`).
    pub subsample_fraction: F,
    pub selected: usize,
    pub n_samples: usize,
}

pub fn ht_density_bound<F: Real>(
    map: &MapModel<F>,
    params: &HTParams<F>,
    n: usize,
    n_samples: usize,
    bins: usize,
    seed: u64,
) -> Result<HtDensityReport<F>> {
    if n == 0 || bins == 0 || n_samples == 0 {
        return Err(Error::InvalidParams(
            "ht_density_bound needs n, bins, n_samples >= 1".into(),
        ));
    }
    let (lo, hi) = (map.domain().lo(), map.domain().hi());
    let mut counts = vec![0u64; bins];
    let mut selected = 0usize;
    for i in 0..n_samples {
        let mut rng = substream(seed, i as u64);
        let mut accepted = false;
        for _ in 0..RESAMPLE_CAP {
            let x0 = map.sample_point(&mut rng);
            match flag_at_n_and_image(map, params, x0, n)? {
                PairOutcome::Invalid => continue,
                PairOutcome::Done { flagged, image } => {
                    if flagged {
                        counts[bin_index(lo, hi, bins, image)] += 1;
                        selected += 1;
                    }
                    accepted = true;
                    break;
                }
            }
        }
        if !accepted {
            return Err(Error::Sampling { attempts: RESAMPLE_CAP });
        }
    }
    if selected == 0 {
        return Ok(HtDensityReport {
            histogram: None,
            sup_density: F::zero(),
            subsample_fraction: F::zero(),
            selected: 0,
            n_samples,
        });
    }
    let histogram = DensityHistogram::from_counts(lo, hi, &counts)?;
    let fraction = lit::<F>(selected as f64) / lit::<F>(n_samples as f64);
    let sup_density = histogram.sup_density() * fraction;
    Ok(HtDensityReport {
        histogram: Some(histogram),
        sup_density,
        subsample_fraction: fraction,
        selected,
        n_samples,
    })
}

enum PairOutcome<F> {
    Invalid,
    Done { flagged: bool, image: F },
}

fn flag_at_n_and_image<F: Real>(
    map: &MapModel<F>,
    params: &HTParams<F>,
    x0: F,
    n: usize,
) -> Result<PairOutcome<F>> {
    let mut scanner = HtScanner::new(params, !map.singular_set().is_empty());
    let mut cur = map.domain().canonicalize(x0);
    if near_singular(map, cur) {
        return Ok(PairOutcome::Invalid);
    }
    let mut flagged = false;
    for j in 0..n {
        let a = map.inv_deriv_norm(cur)?.ln();
        let c = map.dist_delta(cur, params.delta()).ln();
        flagged = scanner.push(a, c).flag;
        let next = map.eval(cur)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { index: j + 1 });
        }
        cur = next;
        if j + 1 < n && near_singular(map, cur) {
            return Ok(PairOutcome::Invalid);
        }
    }
    Ok(PairOutcome::Done { flagged, image: cur })
}

/// `n^{-1} sum_{j<n} a_j`: the Birkhoff average of `log ||Df^{-1}||`. A
/// running mean keeps constant sequences exact at every length.
pub fn birkhoff_expansion<F: Real>(trace: &OrbitTrace<F>, n: usize) -> Result<F> {
    if n == 0 || n > trace.len() {
        return Err(Error::OutOfRange { n, len: trace.len() });
    }
    let mut mean = RunningMean::new();
    for &a in &trace.a()[..n] {
        mean.push(a);
    }
    Ok(mean.mean())
}

/// `n^{-1} sum_{j<n} (-c_j) >= 0`: the Birkhoff average of
/// `-log dist_delta(., S)`.
pub fn birkhoff_recurrence<F: Real>(trace: &OrbitTrace<F>, n: usize) -> Result<F> {
    if n == 0 || n > trace.len() {
        return Err(Error::OutOfRange { n, len: trace.len() });
    }
    let mut mean = RunningMean::new();
    for &c in &trace.c()[..n] {
        mean.push(-c);
    }
    Ok(mean.mean())
}

const MAX_HALVINGS: usize = 48;
const TRACK_SEPARATION_CAP: f64 = 0.25;

struct TrackedPair<F> {
    /// Separations `dist(f^j y, f^j z)` for `j = 0..=n`.
    separations: Vec<F>,
    log_deriv_diff: F,
}

/// Walk the pair `(y0, z0)` for `n` steps; `None` when the pair straddles a
/// singular point or the separation stops being small.
fn track_pair<F: Real>(
    map: &MapModel<F>,
    y0: F,
    z0: F,
    n: usize,
) -> Result<Option<TrackedPair<F>>> {
    let cap = map.domain().length() * lit::<F>(TRACK_SEPARATION_CAP);
    let mut y = map.domain().canonicalize(y0);
    let mut z = map.domain().canonicalize(z0);
    let mut separations = Vec::with_capacity(n + 1);
    let mut log_deriv_diff = F::zero();
    for j in 0..=n {
        let sep = map.domain().dist(y, z);
        if sep > cap {
            return Ok(None);
        }
        let straddles = map.singular_set().iter().any(|&s| {
            map.domain().dist(y, s) + map.domain().dist(s, z) <= sep * lit::<F>(1.0 + 1e-9)
        });
        if straddles || near_singular(map, y) || near_singular(map, z) {
            return Ok(None);
        }
        separations.push(sep);
        if j < n {
            log_deriv_diff =
                log_deriv_diff + map.deriv(y)?.abs().ln() - map.deriv(z)?.abs().ln();
            y = map.eval(y)?;
            z = map.eval(z)?;
            if !y.is_finite() || !z.is_finite() {
                return Err(Error::NonFinite { index: j + 1 });
            }
        }
    }
    Ok(Some(TrackedPair { separations, log_deriv_diff }))
}

/// Numerical check of backward contraction at a hyperbolic time `n`:
/// the maximum over `k = 1..n-1` of
/// `dist(f^{n-k} y, f^{n-k} z) / (sigma^{k/2} dist(f^n y, f^n z))` for the
/// pair `y = x`, `z = x + eps`. Values `<= 1` mean the contraction
/// inequality held; the window excludes `k = n`. `eps` is bisected down
/// while the pair fails to track.
pub fn contraction_check<F: Real>(
    map: &MapModel<F>,
    x: F,
    n: usize,
    params: &HTParams<F>,
    eps: F,
) -> Result<F> {
    if n == 0 {
        return Err(Error::InvalidParams("contraction check needs n >= 1".into()));
    }
    let sigma = params.sigma();
    let mut eps_cur = eps;
    for _ in 0..MAX_HALVINGS {
        if eps_cur == F::zero() {
            break;
        }
        let pair = track_pair(map, x, map.domain().canonicalize(x + eps_cur), n)?;
        if let Some(p) = pair {
            let end_sep = p.separations[n];
            if end_sep == F::zero() {
                return Err(Error::Inconclusive);
            }
            let mut max_ratio = F::zero();
            for k in 1..n {
                let scale = sigma.powf(lit::<F>(k as f64) / lit::<F>(2.0));
                let ratio = p.separations[n - k] / (scale * end_sep);
                max_ratio = max_ratio.max(ratio);
            }
            return Ok(max_ratio);
        }
        eps_cur = eps_cur / lit::<F>(2.0);
    }
    Err(Error::Inconclusive)
}

/// Observed distortion of `f^n` over the symmetric pairs `(x, x + eps)` and
/// `(x - eps, x)`: the larger of the derivative-product ratios, always
/// `>= 1`.
pub fn distortion_check<F: Real>(
    map: &MapModel<F>,
    x: F,
    n: usize,
    _params: &HTParams<F>,
    eps: F,
) -> Result<F> {
    if n == 0 {
        return Err(Error::InvalidParams("distortion check needs n >= 1".into()));
    }
    let mut eps_cur = eps;
    for _ in 0..MAX_HALVINGS {
        if eps_cur == F::zero() {
            break;
        }
        let right = track_pair(map, x, map.domain().canonicalize(x + eps_cur), n)?;
        let left = track_pair(map, map.domain().canonicalize(x - eps_cur), x, n)?;
        if let (Some(r), Some(l)) = (right, left) {
            let mut c1 = F::one();
            for diff in [r.log_deriv_diff, l.log_deriv_diff] {
                let ratio = diff.exp();
                c1 = c1.max(ratio.max(ratio.recip()));
            }
            return Ok(c1);
        }
        eps_cur = eps_cur / lit::<F>(2.0);
    }
    Err(Error::Inconclusive)
}

/// Monte Carlo Lyapunov estimate and the derived sigma suggestion
/// `exp(-lambda/2)`: an expansion exponent halfway (in log scale) between
/// no contraction requirement and the observed expansion rate.
#[derive(Debug, Clone, Copy)]
pub struct SigmaSuggestion<F> {
    pub lambda_hat: F,
    pub sigma: F,
}

pub fn suggest_sigma<F: Real>(
    map: &MapModel<F>,
    n_steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<SigmaSuggestion<F>> {
    if n_steps == 0 || n_samples == 0 {
        return Err(Error::InvalidParams(
            "suggest_sigma needs n_steps, n_samples >= 1".into(),
        ));
    }
    let mut over_samples = RunningMean::new();
    for i in 0..n_samples {
        let mut rng = substream(seed, i as u64);
        let mut accepted = false;
        for _ in 0..RESAMPLE_CAP {
            let x0 = map.sample_point(&mut rng);
            if let Some(orbit_mean) = expansion_mean(map, x0, n_steps)? {
                over_samples.push(-orbit_mean);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Sampling { attempts: RESAMPLE_CAP });
        }
    }
    let lambda_hat = over_samples.mean();
    Ok(SigmaSuggestion { lambda_hat, sigma: (-lambda_hat / lit::<F>(2.0)).exp() })
}

fn expansion_mean<F: Real>(map: &MapModel<F>, x0: F, n: usize) -> Result<Option<F>> {
    let mut cur = map.domain().canonicalize(x0);
    if near_singular(map, cur) {
        return Ok(None);
    }
    let mut mean = RunningMean::new();
    for j in 0..n {
        mean.push(map.inv_deriv_norm(cur)?.ln());
        let next = map.eval(cur)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { index: j + 1 });
        }
        if j + 1 < n && near_singular(map, next) {
            return Ok(None);
        }
        cur = next;
    }
    Ok(Some(mean.mean()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{scan_hyperbolic_times, HTParams};
    use crate::map::{MapConfig, MapConfigKind, MapModel};
    use crate::orbit::orbit_trace;

    fn identity_map() -> MapModel<f64> {
        MapConfig {
            name: "identity".into(),
            kind: MapConfigKind::Piecewise,
            params: vec![0.0, 0.0, 1.0, 1.0],
            beta: Some(1.0),
            singular_points: vec![],
        }
        .build()
        .unwrap()
    }

    #[test]
    fn histogram_mass_sums_to_one_and_density_recovers_mass() {
        let counts: Vec<u64> = (1..=64).collect();
        let hist = DensityHistogram::from_counts(-1.0f64, 1.0, &counts).unwrap();
        let sum: f64 = hist.mass().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for i in 0..hist.bins() {
            // 64 power-of-two bins over a length-2 domain: exact widths.
            assert_eq!(hist.density(i) * hist.width(i), hist.mass()[i]);
        }
    }

    #[test]
    fn pushforward_doubling_is_uniform() {
        let map = MapModel::<f64>::doubling();
        let hist = pushforward_histogram(&map, 20, 20_000, 16, 3).unwrap();
        for i in 0..hist.bins() {
            assert!((hist.density(i) - 1.0).abs() < 0.05, "bin {i}: {}", hist.density(i));
        }
    }

    #[test]
    fn pushforward_sqrt_circle_is_half() {
        let map = MapModel::<f64>::sqrt_circle();
        let hist = pushforward_histogram(&map, 50, 10_000, 8, 3).unwrap();
        for i in 0..hist.bins() {
            assert!((hist.density(i) - 0.5).abs() < 0.03, "bin {i}: {}", hist.density(i));
        }
    }

    #[test]
    fn pushforward_identity_reproduces_sampled_histogram() {
        let map = identity_map();
        let (n_samples, bins, seed) = (2_000usize, 10usize, 9u64);
        let hist = pushforward_histogram(&map, 1, n_samples, bins, seed).unwrap();
        let mut counts = vec![0u64; bins];
        for i in 0..n_samples {
            let mut rng = substream(seed, i as u64);
            let x = map.sample_point(&mut rng);
            counts[bin_index(0.0, 1.0, bins, x)] += 1;
        }
        let direct = DensityHistogram::from_counts(0.0, 1.0, &counts).unwrap();
        assert_eq!(hist, direct);
    }

    #[test]
    fn ulam_doubling_rows_split_in_half() {
        let map = MapModel::<f64>::doubling();
        let op = ulam_matrix(&map, 4, 0, 0).unwrap();
        let expected = [
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.5],
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.5],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((op.entry(i, j) - expected[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ulam_tent_two_cells() {
        let map = MapModel::<f64>::tent();
        let op = ulam_matrix(&map, 2, 0, 0).unwrap();
        for i in 0..2 {
            assert!((op.entry(i, 0) - 0.5).abs() < 1e-14);
            assert!((op.entry(i, 1) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn ulam_rows_are_stochastic() {
        let map = MapModel::<f64>::sqrt_circle();
        let op = ulam_matrix(&map, 64, 0, 0).unwrap();
        for i in 0..64 {
            let sum: f64 = op.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
            assert!(op.row(i).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn monte_carlo_matches_analytic_ulam() {
        let map = MapModel::<f64>::sqrt_circle();
        let analytic = ulam_matrix_analytic(&map, 8).unwrap();
        let mc = ulam_matrix_monte_carlo(&map, 8, 20_000, 5).unwrap();
        for i in 0..8 {
            let sum: f64 = mc.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for j in 0..8 {
                assert!(
                    (mc.entry(i, j) - analytic.entry(i, j)).abs() < 0.02,
                    "entry ({i},{j}): mc {} vs analytic {}",
                    mc.entry(i, j),
                    analytic.entry(i, j)
                );
            }
        }
    }

    #[test]
    fn stationary_density_uniform_cases() {
        for map in [MapModel::<f64>::doubling(), MapModel::<f64>::tent()] {
            let op = ulam_matrix(&map, 64, 0, 0).unwrap();
            let dens = stationary_density(&op, 1e-13, 10_000).unwrap();
            for i in 0..dens.bins() {
                assert!((dens.density(i) - 1.0).abs() < 1e-10, "{}", map.name());
            }
        }
        let map = MapModel::<f64>::sqrt_circle();
        let op = ulam_matrix(&map, 64, 0, 0).unwrap();
        let dens = stationary_density(&op, 1e-13, 10_000).unwrap();
        for i in 0..dens.bins() {
            assert!((dens.density(i) - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_density_reports_non_convergence() {
        let map = MapModel::<f64>::sqrt_circle();
        let op = ulam_matrix(&map, 16, 0, 0).unwrap();
        assert!(matches!(
            stationary_density(&op, 1e-13, 0),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn stationary_density_is_fixed_by_operator() {
        let map = MapModel::<f64>::sqrt_circle();
        let op = ulam_matrix(&map, 32, 0, 0).unwrap();
        let tol = 1e-12;
        let dens = stationary_density(&op, tol, 10_000).unwrap();
        // Apply the operator once more; the L1 movement stays within the
        // convergence tolerance.
        let mut image = vec![0.0f64; 32];
        for i in 0..32 {
            for j in 0..32 {
                image[j] += dens.mass()[i] * op.entry(i, j);
            }
        }
        let l1: f64 = image.iter().zip(dens.mass()).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 <= tol * 2.0, "L1 residual {l1}");
    }

    #[test]
    fn ht_density_bound_doubling_full_selection() {
        let map = MapModel::<f64>::doubling();
        let params = HTParams::for_map(&map, 0.5, 0.1, None).unwrap();
        let report = ht_density_bound(&map, &params, 5, 20_000, 16, 7).unwrap();
        assert_eq!(report.selected, report.n_samples);
        assert_eq!(report.subsample_fraction, 1.0);
        let hist = report.histogram.unwrap();
        for i in 0..hist.bins() {
            assert!((hist.density(i) - 1.0).abs() < 0.1);
        }
        assert!((report.sup_density - 1.0).abs() < 0.1);
    }

    #[test]
    fn ht_density_bound_empty_subsample() {
        let map = MapModel::<f64>::doubling();
        let params = HTParams::for_map(&map, 0.4, 0.1, None).unwrap();
        let report = ht_density_bound(&map, &params, 5, 1_000, 8, 7).unwrap();
        assert_eq!(report.selected, 0);
        assert!(report.histogram.is_none());
        assert_eq!(report.sup_density, 0.0);
    }

    #[test]
    fn birkhoff_doubling_is_exact_at_every_length() {
        let map = MapModel::<f64>::doubling();
        let trace = orbit_trace(&map, 0.3123, 1_000, 0.1).unwrap();
        for n in [1usize, 2, 3, 25, 47, 100, 999, 1_000] {
            assert_eq!(birkhoff_expansion(&trace, n).unwrap(), (0.5f64).ln());
            assert_eq!(birkhoff_recurrence(&trace, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn birkhoff_constant_derivative_three() {
        let map = MapModel::<f64>::linear(3).unwrap();
        let trace = orbit_trace(&map, 0.1723, 500, 0.1).unwrap();
        let avg = birkhoff_expansion(&trace, 500).unwrap();
        assert_eq!(avg, (1.0f64 / 3.0).ln());
    }

    #[test]
    fn birkhoff_sqrt_circle_near_closed_form() {
        let map = MapModel::<f64>::sqrt_circle();
        let trace = orbit_trace(&map, 0.437, 20_000, 0.1).unwrap();
        assert!(trace.is_valid());
        let avg = birkhoff_expansion(&trace, 20_000).unwrap();
        assert!((avg + 0.5).abs() < 0.05, "avg = {avg}");
        let rec = birkhoff_recurrence(&trace, 20_000).unwrap();
        assert!(rec > 0.0);
    }

    #[test]
    fn birkhoff_is_length_weighted_additive() {
        let map = MapModel::<f64>::sqrt_circle();
        let trace = orbit_trace(&map, 0.437, 400, 0.1).unwrap();
        let head = birkhoff_expansion(&trace, 150).unwrap();
        let suffix = orbit_trace(&map, trace.x()[150], 250, 0.1).unwrap();
        let tail = birkhoff_expansion(&suffix, 250).unwrap();
        let full = birkhoff_expansion(&trace, 400).unwrap();
        let weighted = (150.0 * head + 250.0 * tail) / 400.0;
        assert!((full - weighted).abs() < 1e-12);
    }

    #[test]
    fn contraction_doubling_geometric() {
        // Linear map: exact geometric contraction, ratio maximal at k = 1.
        let map = MapModel::<f64>::doubling();
        let params = HTParams::for_map(&map, 0.5, 0.1, None).unwrap();
        let excess = contraction_check(&map, 0.3123, 10, &params, 1e-9).unwrap();
        assert!(excess <= 1.0);
        assert!((excess - 0.5f64.sqrt()).abs() < 1e-6, "excess = {excess}");
    }

    #[test]
    fn contraction_at_detected_hyperbolic_time() {
        // Small delta keeps the recurrence condition permissive enough for
        // late hyperbolic times to exist on a single orbit.
        let map = MapModel::<f64>::sqrt_circle();
        let params = HTParams::for_map(&map, 0.78, 0.01, None).unwrap();
        let trace = orbit_trace(&map, 0.437, 200, 0.01).unwrap();
        let scan = scan_hyperbolic_times(&trace, &params).unwrap();
        let n = scan.times().iter().copied().find(|&n| n >= 10).unwrap();
        let excess = contraction_check(&map, 0.437, n, &params, 1e-9).unwrap();
        assert!(excess <= 1.05, "excess = {excess} at n = {n}");
    }

    #[test]
    fn distortion_doubling_is_one() {
        let map = MapModel::<f64>::doubling();
        let params = HTParams::for_map(&map, 0.5, 0.1, None).unwrap();
        let c1 = distortion_check(&map, 0.3123, 12, &params, 1e-9).unwrap();
        assert_eq!(c1, 1.0);
    }

    #[test]
    fn distortion_shrinks_with_eps() {
        let map = MapModel::<f64>::sqrt_circle();
        let params = HTParams::for_map(&map, 0.78, 0.1, None).unwrap();
        let coarse = distortion_check(&map, 0.437, 10, &params, 1e-6).unwrap();
        let fine = distortion_check(&map, 0.437, 10, &params, 1e-12).unwrap();
        assert!(coarse >= 1.0 && fine >= 1.0);
        assert!(fine - 1.0 <= coarse - 1.0 + 1e-12);
        assert!(fine - 1.0 < 1e-4, "fine = {fine}");
    }

    #[test]
    fn suggest_sigma_sqrt_circle() {
        let map = MapModel::<f64>::sqrt_circle();
        let s = suggest_sigma(&map, 20_000, 20, 21).unwrap();
        assert!((s.lambda_hat - 0.5).abs() < 0.02, "lambda = {}", s.lambda_hat);
        assert!((s.sigma - (-0.25f64).exp()).abs() < 0.01, "sigma = {}", s.sigma);
    }
}
