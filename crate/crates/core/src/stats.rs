//! Empirical distribution, moments, and tail diagnostics of the first
//! hyperbolic time map over Lebesgue-random ensembles.

use crate::detect::{first_ht_streaming, HTParams, StreamFirstHt};
use crate::error::{Error, Result};
use crate::map::MapModel;
use crate::numeric::{least_squares_slope, RunningMean};
use crate::rng::substream;
use crate::scalar::{lit, Real};

const RESAMPLE_CAP: usize = 100;

/// Empirical masses of `h = k` for `k = 1..=T` plus the censored fraction
/// `h > T`. Censored mass is tracked separately and never imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct HHistogram<F> {
    cutoff: usize,
    mass: Vec<F>,
    censored: F,
    n_samples: usize,
    seed: u64,
}

impl<F: Real> HHistogram<F> {
    /// Normalize per-value counts (index `k - 1` holds the count of
    /// `h = k`) and a censored count.
    pub fn from_counts(
        counts: &[u64],
        censored_count: u64,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let total: u64 = counts.iter().sum::<u64>() + censored_count;
        if counts.is_empty() || total == 0 || total as usize != n_samples {
            return Err(Error::InvalidParams(
                "histogram counts must be nonempty and sum to n_samples".into(),
            ));
        }
        let total_f = lit::<F>(n_samples as f64);
        Ok(HHistogram {
            cutoff: counts.len(),
            mass: counts.iter().map(|&c| lit::<F>(c as f64) / total_f).collect(),
            censored: lit::<F>(censored_count as f64) / total_f,
            n_samples,
            seed,
        })
    }

    /// Wrap already-normalized masses (synthetic tails, calibration).
    pub fn from_masses(mass: Vec<F>, censored: F, n_samples: usize, seed: u64) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let mut sum = censored;
        for &m in &mass {
            if !(m >= F::zero()) {
                return Err(Error::InvalidParams("masses must be >= 0".into()));
            }
            sum = sum + m;
        }
        if (sum - F::one()).abs() > lit(1e-9) {
            return Err(Error::InvalidParams(format!(
                "masses plus censored must sum to 1, got {sum}"
            )));
        }
        Ok(HHistogram { cutoff: mass.len(), mass, censored, n_samples, seed })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Mass of `h = k` (1-based, `k <= cutoff`).
    pub fn mass(&self, k: usize) -> F {
        self.mass[k - 1]
    }

    pub fn masses(&self) -> &[F] {
        &self.mass
    }

    pub fn censored(&self) -> F {
        self.censored
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Distribution of the first hyperbolic time over `n_samples` uniform
/// initial points, with orbits scanned up to horizon `t`.
pub fn h_histogram<F: Real>(
    map: &MapModel<F>,
    params: &HTParams<F>,
    n_samples: usize,
    t: usize,
    seed: u64,
) -> Result<HHistogram<F>> {
    if t == 0 || n_samples == 0 {
        return Err(Error::InvalidParams(
            "h_histogram needs T >= 1 and n_samples >= 1".into(),
        ));
    }
    let mut counts = vec![0u64; t];
    let mut censored_count = 0u64;
    for i in 0..n_samples {
        let mut rng = substream(seed, i as u64);
        let mut accepted = false;
        for _ in 0..RESAMPLE_CAP {
            let x0 = map.sample_point(&mut rng);
            match first_ht_streaming(map, x0, params, t)? {
                StreamFirstHt::Time(k) => {
                    counts[k - 1] += 1;
                    accepted = true;
                    break;
                }
                StreamFirstHt::Censored(_) => {
                    censored_count += 1;
                    accepted = true;
                    break;
                }
                StreamFirstHt::SingularHit(_) => continue,
            }
        }
        if !accepted {
            return Err(Error::Sampling { attempts: RESAMPLE_CAP });
        }
    }
    HHistogram::from_counts(&counts, censored_count, n_samples, seed)
}

/// Truncated `p`-th moment of `h`. When censored mass exists the truncated
/// value is only a lower bound; the censored contribution is at least
/// `T^p * censored` and is reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpMoment<F> {
    pub truncated: F,
    pub censored_floor: F,
    pub is_lower_bound: bool,
}

pub fn lp_moment<F: Real>(hist: &HHistogram<F>, p: F) -> Result<LpMoment<F>> {
    if !(p >= F::one()) {
        return Err(Error::InvalidParams(format!("moment order p must be >= 1, got {p}")));
    }
    let mut truncated = F::zero();
    for k in 1..=hist.cutoff() {
        let m = hist.mass(k);
        if m > F::zero() {
            truncated = truncated + lit::<F>(k as f64).powf(p) * m;
        }
    }
    let censored = hist.censored();
    Ok(LpMoment {
        truncated,
        censored_floor: lit::<F>(hist.cutoff() as f64).powf(p) * censored,
        is_lower_bound: censored > F::zero(),
    })
}

/// Truncated tail double sum
/// `sum_{i=2}^{i_max} (i+1) * sum_{k=i}^{T} k * mass(k)`,
/// the quantity whose finiteness drives integrability of the log-distance
/// observable for heavy-tailed `h`.
pub fn tail_double_sum<F: Real>(hist: &HHistogram<F>, i_max: usize) -> Result<F> {
    if i_max > hist.cutoff() {
        return Err(Error::OutOfRange { n: i_max, len: hist.cutoff() });
    }
    let t = hist.cutoff();
    // suffix[i] = sum_{k=i}^{T} k * mass(k), 1-based.
    let mut suffix = vec![F::zero(); t + 2];
    for k in (1..=t).rev() {
        suffix[k] = suffix[k + 1] + lit::<F>(k as f64) * hist.mass(k);
    }
    let mut total = F::zero();
    for i in 2..=i_max {
        total = total + lit::<F>((i + 1) as f64) * suffix[i];
    }
    Ok(total)
}

/// Least-squares slope of `log mass(k)` against `log k` for `k >= k_min`;
/// returns the empirical tail exponent `p = -slope`. Needs at least five
/// nonzero masses above the threshold.
pub fn tail_exponent_fit<F: Real>(hist: &HHistogram<F>, k_min: usize) -> Result<F> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in k_min.max(1)..=hist.cutoff() {
        let m = hist.mass(k);
        if m > F::zero() {
            xs.push(lit::<F>(k as f64).ln());
            ys.push(m.ln());
        }
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData { needed: 5, got: xs.len() });
    }
    let slope = least_squares_slope(&xs, &ys)
        .ok_or(Error::InsufficientData { needed: 5, got: xs.len() })?;
    Ok(-slope)
}

/// Truncated means `E[min(h, T)]` over one shared ensemble for every `T`
/// in the grid; monotone non-decreasing in `T` by construction.
pub fn growth_diagnostic<F: Real>(
    map: &MapModel<F>,
    params: &HTParams<F>,
    n_samples: usize,
    t_grid: &[usize],
    seed: u64,
) -> Result<Vec<(usize, F)>> {
    if t_grid.is_empty() || n_samples == 0 {
        return Err(Error::InvalidParams(
            "growth diagnostic needs samples and a grid".into(),
        ));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParams("T grid must be strictly increasing".into()));
        }
    }
    if t_grid[0] == 0 {
        return Err(Error::InvalidParams("T grid entries must be >= 1".into()));
    }
    let t_max = *t_grid.last().unwrap();
    // h per sample, with censoring encoded as t_max + 1 so that
    // min(h, T) = T for every grid value.
    let mut h_values = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mut rng = substream(seed, i as u64);
        let mut accepted = false;
        for _ in 0..RESAMPLE_CAP {
            let x0 = map.sample_point(&mut rng);
            match first_ht_streaming(map, x0, params, t_max)? {
                StreamFirstHt::Time(k) => {
                    h_values.push(k);
                    accepted = true;
                    break;
                }
                StreamFirstHt::Censored(_) => {
                    h_values.push(t_max + 1);
                    accepted = true;
                    break;
                }
                StreamFirstHt::SingularHit(_) => continue,
            }
        }
        if !accepted {
            return Err(Error::Sampling { attempts: RESAMPLE_CAP });
        }
    }
    let table = t_grid
        .iter()
        .map(|&t| {
            let mut mean = RunningMean::new();
            for &h in &h_values {
                mean.push(lit::<F>(h.min(t) as f64));
            }
            (t, mean.mean())
        })
        .collect();
    Ok(table)
}
