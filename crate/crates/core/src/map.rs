//! One-dimensional map models: domain geometry, builtin kernels, singular
//! sets, and monotone-branch metadata.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::least_squares_slope;
use crate::scalar::{half, lit, two, Real};

/// Interval or circle geometry. Circle points are kept canonical in
/// `[lo, hi)`; the circumference is `hi - lo` and distances use the arc
/// metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<F> {
    Interval { lo: F, hi: F },
    Circle { lo: F, hi: F },
}

impl<F: Real> Domain<F> {
    pub fn lo(&self) -> F {
        match *self {
            Domain::Interval { lo, .. } | Domain::Circle { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> F {
        match *self {
            Domain::Interval { hi, .. } | Domain::Circle { hi, .. } => hi,
        }
    }

    pub fn length(&self) -> F {
        self.hi() - self.lo()
    }

    pub fn contains(&self, x: F) -> bool {
        x.is_finite() && x >= self.lo() && x <= self.hi()
    }

    /// Wrap circle points into `[lo, hi)`; the identity for points already
    /// there (no spurious rounding), and on intervals.
    pub fn canonicalize(&self, x: F) -> F {
        match *self {
            Domain::Interval { .. } => x,
            Domain::Circle { lo, hi } => {
                if x >= lo && x < hi {
                    return x;
                }
                let len = hi - lo;
                let mut t = (x - lo) % len;
                if t < F::zero() {
                    t = t + len;
                }
                if t >= len {
                    t = F::zero();
                }
                lo + t
            }
        }
    }

    /// Distance between two points (arc metric on circles).
    pub fn dist(&self, a: F, b: F) -> F {
        match *self {
            Domain::Interval { .. } => (a - b).abs(),
            Domain::Circle { .. } => {
                let len = self.length();
                let raw = (self.canonicalize(a) - self.canonicalize(b)).abs();
                raw.min(len - raw)
            }
        }
    }
}

/// One monotone branch of a piecewise-monotone map: the domain piece, its
/// image interval, and the orientation. Inverse values come from
/// [`MapModel::branch_inverse`].
#[derive(Debug, Clone, Copy)]
pub struct Branch<F> {
    pub x_lo: F,
    pub x_hi: F,
    pub y_lo: F,
    pub y_hi: F,
    pub increasing: bool,
}

/// The map formulas. All kernels are piecewise monotone with closed-form
/// inverse branches, used by the analytic transfer-operator discretization.
#[derive(Debug, Clone, PartialEq)]
pub enum MapKernel<F> {
    /// `f(x) = 2*sqrt(x) - 1` for `x >= 0`, `1 - 2*sqrt(|x|)` otherwise, on
    /// the circle obtained from `[-1, 1]` by gluing the endpoints. Singular
    /// at 0, neutral fixed point at the glued endpoint.
    SqrtCircle,
    /// `x -> 2x mod 1` on the unit circle.
    Doubling,
    /// Tent map `x -> 1 - |2x - 1|` on `[0, 1]`.
    Tent,
    /// `x -> c*x mod 1` on the unit circle, integer `c >= 2`.
    Linear { c: u32 },
    /// Piecewise-linear interpolation through strictly increasing nodes
    /// `xs` with values `ys`.
    PiecewiseLinear { xs: Vec<F>, ys: Vec<F> },
}

/// A 1D dynamical system: evaluation, derivative, singular set `S`, power
/// exponent `beta` and domain geometry.
#[derive(Debug, Clone)]
pub struct MapModel<F> {
    name: String,
    domain: Domain<F>,
    kernel: MapKernel<F>,
    singular: Vec<F>,
    beta: F,
}

impl<F: Real> MapModel<F> {
    /// The square-root circle map with `S = {0}` and `beta = 1/2`.
    pub fn sqrt_circle() -> Self {
        MapModel {
            name: "sqrt-circle".into(),
            domain: Domain::Circle { lo: -F::one(), hi: F::one() },
            kernel: MapKernel::SqrtCircle,
            singular: vec![F::zero()],
            beta: half(),
        }
    }

    /// The doubling map; empty singular set.
    pub fn doubling() -> Self {
        MapModel {
            name: "doubling".into(),
            domain: Domain::Circle { lo: F::zero(), hi: F::one() },
            kernel: MapKernel::Doubling,
            singular: vec![],
            beta: F::one(),
        }
    }

    /// The tent map. The kink at 1/2 is the single singular point; the
    /// derivative stays bounded there, so `beta` is nominal.
    pub fn tent() -> Self {
        MapModel {
            name: "tent".into(),
            domain: Domain::Interval { lo: F::zero(), hi: F::one() },
            kernel: MapKernel::Tent,
            singular: vec![half()],
            beta: F::one(),
        }
    }

    /// `x -> c*x mod 1` for integer `c >= 2`; empty singular set.
    pub fn linear(c: u32) -> Result<Self> {
        if c < 2 {
            return Err(Error::InvalidParams(format!(
                "linear factor must be an integer >= 2, got {c}"
            )));
        }
        Ok(MapModel {
            name: format!("linear-{c}"),
            domain: Domain::Circle { lo: F::zero(), hi: F::one() },
            kernel: MapKernel::Linear { c },
            singular: vec![],
            beta: F::one(),
        })
    }

    /// Piecewise-linear map through `(xs[i], ys[i])` on the interval
    /// spanned by `xs`. Interior kinks must be listed in `singular`.
    pub fn piecewise_linear(
        name: impl Into<String>,
        xs: Vec<F>,
        ys: Vec<F>,
        singular: Vec<F>,
        beta: F,
    ) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidParams(
                "piecewise map needs matching xs/ys with at least two nodes".into(),
            ));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParams(
                    "piecewise nodes must be strictly increasing".into(),
                ));
            }
        }
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        let model = MapModel {
            name: name.into(),
            domain: Domain::Interval { lo, hi },
            kernel: MapKernel::PiecewiseLinear { xs: xs.clone(), ys: ys.clone() },
            singular,
            beta,
        };
        for (i, w) in xs.windows(2).enumerate() {
            let slope = (ys[i + 1] - ys[i]) / (w[1] - w[0]);
            if slope == F::zero() {
                return Err(Error::InvalidParams(format!(
                    "piecewise segment {i} has zero slope"
                )));
            }
            if !model.domain.contains(ys[i]) || !model.domain.contains(ys[i + 1]) {
                return Err(Error::InvalidParams(
                    "piecewise values must stay inside the domain".into(),
                ));
            }
        }
        // Every kink must be declared singular; off S the map is a local
        // diffeomorphism, which a silent kink would break.
        for i in 1..xs.len() - 1 {
            let sl = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            let sr = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            if sl != sr && !model.singular.contains(&xs[i]) {
                return Err(Error::InvalidParams(format!(
                    "kink at node {} must be listed in singular_points",
                    xs[i].to_f64().unwrap_or(f64::NAN)
                )));
            }
        }
        for &s in &model.singular {
            if !model.domain.contains(s) {
                return Err(Error::InvalidParams(
                    "singular point outside the domain".into(),
                ));
            }
        }
        Ok(model)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain<F> {
        &self.domain
    }

    pub fn beta(&self) -> F {
        self.beta
    }

    pub fn singular_set(&self) -> &[F] {
        &self.singular
    }

    /// Override the declared blow-up exponent.
    pub fn with_beta(mut self, beta: F) -> Result<Self> {
        if !(beta > F::zero()) {
            return Err(Error::InvalidParams(format!(
                "beta must be positive, got {beta}"
            )));
        }
        self.beta = beta;
        Ok(self)
    }

    fn check_in_domain(&self, x: F) -> Result<F> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain {
                x: x.to_f64().unwrap_or(f64::NAN),
                lo: self.domain.lo().to_f64().unwrap_or(f64::NAN),
                hi: self.domain.hi().to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.domain.canonicalize(x))
    }

    /// One application of the map; circle outputs land in `[lo, hi)`.
    pub fn eval(&self, x: F) -> Result<F> {
        let x = self.check_in_domain(x)?;
        let y = match &self.kernel {
            MapKernel::SqrtCircle => {
                if x >= F::zero() {
                    two::<F>() * x.sqrt() - F::one()
                } else {
                    F::one() - two::<F>() * (-x).sqrt()
                }
            }
            MapKernel::Doubling => two::<F>() * x,
            MapKernel::Tent => {
                if x <= half() {
                    two::<F>() * x
                } else {
                    two::<F>() * (F::one() - x)
                }
            }
            MapKernel::Linear { c } => lit::<F>(f64::from(*c)) * x,
            MapKernel::PiecewiseLinear { xs, ys } => {
                let i = piece_index(xs, x);
                let slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
                ys[i] + (x - xs[i]) * slope
            }
        };
        Ok(self.domain.canonicalize(y))
    }

    /// `f'(x)`, defined off the singular set. An exact hit of `S` is an
    /// error; near-hits are the orbit layer's concern.
    pub fn deriv(&self, x: F) -> Result<F> {
        let x = self.check_in_domain(x)?;
        if self.singular.iter().any(|&s| s == x) {
            return Err(Error::AtSingularity { x: x.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(match &self.kernel {
            MapKernel::SqrtCircle => {
                // d/dx [2*sqrt(|x|)*sign-pattern] = |x|^{-1/2} on both sides.
                F::one() / x.abs().sqrt()
            }
            MapKernel::Doubling => two(),
            MapKernel::Tent => {
                if x < half() {
                    two()
                } else {
                    -two::<F>()
                }
            }
            MapKernel::Linear { c } => lit(f64::from(*c)),
            MapKernel::PiecewiseLinear { xs, ys } => {
                let i = piece_index(xs, x);
                (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
            }
        })
    }

    /// `1 / |f'(x)|`, via the closed form where one exists so that exact
    /// derivative values (powers of two, square roots) stay exact.
    pub fn inv_deriv_norm(&self, x: F) -> Result<F> {
        let x = self.check_in_domain(x)?;
        if self.singular.iter().any(|&s| s == x) {
            return Err(Error::AtSingularity { x: x.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(match &self.kernel {
            MapKernel::SqrtCircle => x.abs().sqrt(),
            MapKernel::Doubling | MapKernel::Tent => half(),
            MapKernel::Linear { c } => F::one() / lit::<F>(f64::from(*c)),
            MapKernel::PiecewiseLinear { .. } => F::one() / self.deriv(x)?.abs(),
        })
    }

    /// Distance from `x` to the singular set, `None` when `S` is empty.
    pub fn dist_to_singular(&self, x: F) -> Option<F> {
        let x = self.domain.canonicalize(x);
        self.singular
            .iter()
            .map(|&s| self.domain.dist(x, s))
            .fold(None, |acc: Option<F>, d| Some(acc.map_or(d, |a| a.min(d))))
    }

    /// Truncated distance: `dist(x, S)` when that is `<= delta`, else 1.
    /// Identically 1 when `S` is empty.
    pub fn dist_delta(&self, x: F, delta: F) -> F {
        match self.dist_to_singular(x) {
            None => F::one(),
            Some(d) => {
                if d <= delta {
                    d
                } else {
                    F::one()
                }
            }
        }
    }

    /// Uniform point of the domain from the given stream.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> F {
        let u: f64 = rng.gen();
        self.domain.lo() + self.domain.length() * lit::<F>(u)
    }

    /// Monotone branches, ordered by domain piece.
    pub fn branches(&self) -> Vec<Branch<F>> {
        match &self.kernel {
            MapKernel::SqrtCircle => vec![
                Branch {
                    x_lo: -F::one(),
                    x_hi: F::zero(),
                    y_lo: -F::one(),
                    y_hi: F::one(),
                    increasing: true,
                },
                Branch {
                    x_lo: F::zero(),
                    x_hi: F::one(),
                    y_lo: -F::one(),
                    y_hi: F::one(),
                    increasing: true,
                },
            ],
            MapKernel::Doubling => (0..2).map(|m| branch_mod(m, 2)).collect(),
            MapKernel::Tent => vec![
                Branch {
                    x_lo: F::zero(),
                    x_hi: half(),
                    y_lo: F::zero(),
                    y_hi: F::one(),
                    increasing: true,
                },
                Branch {
                    x_lo: half(),
                    x_hi: F::one(),
                    y_lo: F::zero(),
                    y_hi: F::one(),
                    increasing: false,
                },
            ],
            MapKernel::Linear { c } => (0..*c).map(|m| branch_mod(m, *c)).collect(),
            MapKernel::PiecewiseLinear { xs, ys } => (0..xs.len() - 1)
                .map(|i| Branch {
                    x_lo: xs[i],
                    x_hi: xs[i + 1],
                    y_lo: ys[i].min(ys[i + 1]),
                    y_hi: ys[i].max(ys[i + 1]),
                    increasing: ys[i + 1] > ys[i],
                })
                .collect(),
        }
    }

    /// Inverse of branch `idx` at `y`; callers keep `y` inside the branch
    /// image.
    pub fn branch_inverse(&self, idx: usize, y: F) -> F {
        match &self.kernel {
            MapKernel::SqrtCircle => {
                let one = F::one();
                let four = two::<F>() + two::<F>();
                if idx == 1 {
                    (one + y) * (one + y) / four
                } else {
                    -((one - y) * (one - y)) / four
                }
            }
            MapKernel::Doubling => (y + lit(idx as f64)) / two(),
            MapKernel::Tent => {
                if idx == 0 {
                    y / two()
                } else {
                    F::one() - y / two()
                }
            }
            MapKernel::Linear { c } => (y + lit(idx as f64)) / lit(f64::from(*c)),
            MapKernel::PiecewiseLinear { xs, ys } => {
                let slope = (ys[idx + 1] - ys[idx]) / (xs[idx + 1] - xs[idx]);
                xs[idx] + (y - ys[idx]) / slope
            }
        }
    }

    /// Grid check that the map sends the domain into itself (tolerance
    /// 1e-12) and is a local diffeomorphism off `S`.
    pub fn check_invariants(&self, grid: usize) -> Result<()> {
        let tol = lit::<F>(1e-12);
        let n = grid.max(2);
        for i in 0..=n {
            let t = lit::<F>(i as f64 / n as f64);
            let x = self.domain.lo() + self.domain.length() * t;
            let x = self.domain.canonicalize(x);
            let y = self.eval(x)?;
            if !(y >= self.domain.lo() - tol && y <= self.domain.hi() + tol) {
                return Err(Error::InvalidParams(format!(
                    "map escapes the domain at x = {}",
                    x.to_f64().unwrap_or(f64::NAN)
                )));
            }
            if self.singular.iter().all(|&s| s != x) {
                let d = self.deriv(x)?;
                if !(d.abs() > F::zero()) {
                    return Err(Error::InvalidParams(format!(
                        "zero derivative off S at x = {}",
                        x.to_f64().unwrap_or(f64::NAN)
                    )));
                }
            }
        }
        Ok(())
    }
}

fn branch_mod<F: Real>(m: u32, c: u32) -> Branch<F> {
    let c_f = lit::<F>(f64::from(c));
    Branch {
        x_lo: lit::<F>(f64::from(m)) / c_f,
        x_hi: lit::<F>(f64::from(m + 1)) / c_f,
        y_lo: F::zero(),
        y_hi: F::one(),
        increasing: true,
    }
}

fn piece_index<F: Real>(xs: &[F], x: F) -> usize {
    // Last piece owns its right endpoint.
    let mut i = xs.partition_point(|&node| node <= x);
    if i == 0 {
        return 0;
    }
    i -= 1;
    i.min(xs.len() - 2)
}

/// Config block from which map models are constructed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MapConfig {
    pub name: String,
    pub kind: MapConfigKind,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub singular_points: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MapConfigKind {
    Builtin,
    Piecewise,
}

impl MapConfig {
    pub fn builtin(name: &str) -> Self {
        MapConfig {
            name: name.into(),
            kind: MapConfigKind::Builtin,
            params: vec![],
            beta: None,
            singular_points: vec![],
        }
    }

    pub fn build<F: Real>(&self) -> Result<MapModel<F>> {
        let mut model = match self.kind {
            MapConfigKind::Builtin => match self.name.as_str() {
                "sqrt-circle" => MapModel::sqrt_circle(),
                "doubling" => MapModel::doubling(),
                "tent" => MapModel::tent(),
                "linear" => {
                    let c = *self.params.first().ok_or_else(|| {
                        Error::InvalidParams("linear map needs params = [c]".into())
                    })?;
                    if c.fract() != 0.0 || !(2.0..=1e6).contains(&c) {
                        return Err(Error::InvalidParams(format!(
                            "linear factor must be an integer >= 2, got {c}"
                        )));
                    }
                    MapModel::linear(c as u32)?
                }
                other => {
                    return Err(Error::InvalidParams(format!(
                        "unknown builtin map '{other}' \
                         (expected sqrt-circle, doubling, tent or linear)"
                    )))
                }
            },
            MapConfigKind::Piecewise => {
                if self.params.len() < 4 || self.params.len() % 2 != 0 {
                    return Err(Error::InvalidParams(
                        "piecewise map needs params = [x0, y0, x1, y1, ...]".into(),
                    ));
                }
                let xs: Vec<F> = self.params.iter().step_by(2).map(|&v| lit(v)).collect();
                let ys: Vec<F> =
                    self.params.iter().skip(1).step_by(2).map(|&v| lit(v)).collect();
                let singular: Vec<F> =
                    self.singular_points.iter().map(|&v| lit(v)).collect();
                let beta = lit(self.beta.unwrap_or(1.0));
                let model =
                    MapModel::piecewise_linear(self.name.clone(), xs, ys, singular, beta)?;
                model.check_invariants(512)?;
                model
            }
        };
        if let Some(beta) = self.beta {
            model = model.with_beta(lit(beta))?;
        }
        Ok(model)
    }
}

/// Pooled slope of `log|f'|` against `-log dist(., S)` on deterministic
/// log-spaced radii around each singular point: the empirical blow-up
/// exponent.
pub fn estimate_beta<F: Real>(map: &MapModel<F>, n_samples: usize, radius: F) -> Result<F> {
    if map.singular_set().is_empty() {
        return Err(Error::NotApplicable("beta estimation needs a nonempty singular set"));
    }
    if n_samples < 2 || !(radius > F::zero()) {
        return Err(Error::InvalidParams(
            "beta estimation needs n_samples >= 2 and a positive radius".into(),
        ));
    }
    let span = lit::<F>(1e-6f64.ln().abs());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let singular: Vec<F> = map.singular_set().to_vec();
    for &s in &singular {
        for i in 0..n_samples {
            let t = lit::<F>(i as f64 / (n_samples - 1) as f64);
            let r = radius * (-span * t).exp();
            for &x in &[s + r, s - r] {
                if !map.domain().contains(x) {
                    continue;
                }
                let d = match map.dist_to_singular(x) {
                    Some(d) if d > F::zero() => d,
                    _ => continue,
                };
                let fp = match map.deriv(x) {
                    Ok(fp) => fp.abs(),
                    Err(_) => continue,
                };
                xs.push(-d.ln());
                ys.push(fp.ln());
            }
        }
    }
    beta_regression(&xs, &ys)
}

pub(crate) fn beta_regression<F: Real>(neg_log_dist: &[F], log_deriv: &[F]) -> Result<F> {
    least_squares_slope(neg_log_dist, log_deriv).ok_or(Error::InsufficientData {
        needed: 2,
        got: neg_log_dist.len(),
    })
}
