//! Experiment configuration: plain `key = value` files merged with CLI
//! flag overrides (flags win), validated with every violation reported.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use hyptime::detect::b_bound;
use hyptime::map::{MapConfig, MapConfigKind, MapModel};

#[derive(Debug, thiserror::Error)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesMode {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityMethod {
    Pushforward,
    Stationary,
}

/// Fully resolved experiment configuration with defaults applied.
/// Serialized verbatim into run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub map: String,
    pub map_params: Vec<f64>,
    pub beta: Option<f64>,
    pub singular_points: Vec<f64>,
    pub sigma: Option<f64>,
    pub delta: f64,
    pub b: Option<f64>,
    pub x0: f64,
    pub n: usize,
    pub t: usize,
    pub samples: usize,
    pub sigma_samples: usize,
    pub n_steps: usize,
    pub bins: usize,
    pub k: usize,
    pub seed: u64,
    pub mode: SeriesMode,
    pub method: DensityMethod,
    pub p: f64,
    pub k_min: usize,
    pub i_max: Option<usize>,
    pub t_grid: Option<Vec<usize>>,
    pub tol: f64,
    pub max_iter: usize,
    pub out: String,
    pub summary_out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map: "doubling".into(),
            map_params: vec![],
            beta: None,
            singular_points: vec![],
            sigma: None,
            delta: 0.1,
            b: None,
            x0: 0.3,
            n: 1000,
            t: 16384,
            samples: 100_000,
            sigma_samples: 50,
            n_steps: 100_000,
            bins: 64,
            k: 256,
            seed: 1,
            mode: SeriesMode::Float,
            method: DensityMethod::Pushforward,
            p: 1.0,
            k_min: 8,
            i_max: None,
            t_grid: None,
            tol: 1e-10,
            max_iter: 20_000,
            out: "-".into(),
            summary_out: "-".into(),
        }
    }
}

/// Raw overrides: unresolved string values from a config file or flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    entries: BTreeMap<String, String>,
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    /// Later sources win key by key.
    pub fn merge(mut self, other: Overrides) -> Overrides {
        self.entries.extend(other.entries);
        self
    }

    /// Parse `key = value` lines; `#` starts a comment, blank lines are
    /// skipped. All malformed lines are reported together.
    pub fn from_file_text(text: &str) -> Result<Overrides, ConfigError> {
        let mut overrides = Overrides::default();
        let mut violations = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((key, value)) => {
                    let key = key.trim();
                    if KNOWN_KEYS.contains(&key) {
                        overrides.set(key, value.trim().to_string());
                    } else {
                        violations.push(format!(
                            "line {}: unknown key '{key}'",
                            lineno + 1
                        ));
                    }
                }
                None => violations.push(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )),
            }
        }
        if violations.is_empty() {
            Ok(overrides)
        } else {
            Err(ConfigError { violations })
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "map",
    "map_params",
    "beta",
    "singular_points",
    "sigma",
    "delta",
    "b",
    "x0",
    "n",
    "t",
    "samples",
    "sigma_samples",
    "n_steps",
    "bins",
    "k",
    "seed",
    "mode",
    "method",
    "p",
    "k_min",
    "i_max",
    "t_grid",
    "tol",
    "max_iter",
    "out",
    "summary_out",
];

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    if value.trim().is_empty() {
        return Ok(vec![]);
    }
    value
        .split(',')
        .map(|item| item.trim().parse::<T>().map_err(|e| format!("'{item}': {e}")))
        .collect()
}

impl ExperimentConfig {
    /// Apply overrides to the defaults and validate; every violation is
    /// collected, not just the first.
    pub fn resolve(overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut violations = Vec::new();

        macro_rules! scalar {
            ($key:literal, $field:ident, $ty:ty) => {
                if let Some(v) = overrides.entries.get($key) {
                    match v.parse::<$ty>() {
                        Ok(parsed) => cfg.$field = parsed,
                        Err(e) => violations.push(format!("{}: {e}", $key)),
                    }
                }
            };
        }
        macro_rules! optional {
            ($key:literal, $field:ident, $ty:ty) => {
                if let Some(v) = overrides.entries.get($key) {
                    match v.parse::<$ty>() {
                        Ok(parsed) => cfg.$field = Some(parsed),
                        Err(e) => violations.push(format!("{}: {e}", $key)),
                    }
                }
            };
        }

        if let Some(v) = overrides.entries.get("map") {
            cfg.map = v.clone();
        }
        if let Some(v) = overrides.entries.get("map_params") {
            match parse_list::<f64>(v) {
                Ok(list) => cfg.map_params = list,
                Err(e) => violations.push(format!("map_params: {e}")),
            }
        }
        if let Some(v) = overrides.entries.get("singular_points") {
            match parse_list::<f64>(v) {
                Ok(list) => cfg.singular_points = list,
                Err(e) => violations.push(format!("singular_points: {e}")),
            }
        }
        if let Some(v) = overrides.entries.get("t_grid") {
            match parse_list::<usize>(v) {
                Ok(list) => cfg.t_grid = Some(list),
                Err(e) => violations.push(format!("t_grid: {e}")),
            }
        }
        optional!("beta", beta, f64);
        optional!("sigma", sigma, f64);
        optional!("b", b, f64);
        optional!("i_max", i_max, usize);
        scalar!("delta", delta, f64);
        scalar!("x0", x0, f64);
        scalar!("n", n, usize);
        scalar!("t", t, usize);
        scalar!("samples", samples, usize);
        scalar!("sigma_samples", sigma_samples, usize);
        scalar!("n_steps", n_steps, usize);
        scalar!("bins", bins, usize);
        scalar!("k", k, usize);
        scalar!("seed", seed, u64);
        scalar!("p", p, f64);
        scalar!("k_min", k_min, usize);
        scalar!("tol", tol, f64);
        scalar!("max_iter", max_iter, usize);
        if let Some(v) = overrides.entries.get("mode") {
            match v.as_str() {
                "exact" => cfg.mode = SeriesMode::Exact,
                "float" => cfg.mode = SeriesMode::Float,
                other => violations.push(format!("mode: expected exact|float, got '{other}'")),
            }
        }
        if let Some(v) = overrides.entries.get("method") {
            match v.as_str() {
                "pushforward" => cfg.method = DensityMethod::Pushforward,
                "stationary" => cfg.method = DensityMethod::Stationary,
                other => violations.push(format!(
                    "method: expected pushforward|stationary, got '{other}'"
                )),
            }
        }
        if let Some(v) = overrides.entries.get("out") {
            cfg.out = v.clone();
        }
        if let Some(v) = overrides.entries.get("summary_out") {
            cfg.summary_out = v.clone();
        }

        cfg.validate(&mut violations);
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError { violations })
        }
    }

    fn validate(&self, violations: &mut Vec<String>) {
        if let Some(sigma) = self.sigma {
            if !(sigma > 0.0 && sigma < 1.0) {
                violations.push(format!("sigma must lie in (0,1), got {sigma}"));
            }
        }
        if !(self.delta > 0.0) {
            violations.push(format!("delta must be positive, got {}", self.delta));
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0) {
                violations.push(format!("beta must be positive, got {beta}"));
            }
        }
        // The admissible range for b depends on beta; check against the
        // value that will actually be used (explicit beta, else the map's).
        if let Some(b) = self.b {
            let beta = self.beta.or_else(|| {
                self.map_config().build::<f64>().ok().map(|m| m.beta())
            });
            if let Some(beta) = beta {
                let bound = b_bound(beta);
                if !(b > 0.0 && b < bound) {
                    violations.push(format!(
                        "b must lie in (0, min(1/2, 1/(4*beta))) = (0, {bound}), got {b}"
                    ));
                }
            } else if !(b > 0.0 && b < 0.5) {
                violations.push(format!("b must lie in (0, 1/2), got {b}"));
            }
        }
        if !(self.p >= 1.0) {
            violations.push(format!("p must be >= 1, got {}", self.p));
        }
        if !(self.tol > 0.0) {
            violations.push(format!("tol must be positive, got {}", self.tol));
        }
        if let Some(grid) = &self.t_grid {
            if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] == 0 {
                violations.push("t_grid must be strictly increasing positive integers".into());
            }
        }
        if self.map != "piecewise" && !self.singular_points.is_empty() {
            violations.push("singular_points only applies to piecewise maps".into());
        }
    }

    pub fn map_config(&self) -> MapConfig {
        MapConfig {
            name: self.map.clone(),
            kind: if self.map == "piecewise" {
                MapConfigKind::Piecewise
            } else {
                MapConfigKind::Builtin
            },
            params: self.map_params.clone(),
            beta: self.beta,
            singular_points: self.singular_points.clone(),
        }
    }

    pub fn build_map(&self) -> Result<MapModel<f64>, ConfigError> {
        self.map_config()
            .build::<f64>()
            .map_err(|e| ConfigError { violations: vec![format!("map: {e}")] })
    }

    pub fn require_sigma(&self) -> Result<f64, ConfigError> {
        self.sigma.ok_or_else(|| ConfigError {
            violations: vec!["sigma is required for this subcommand".into()],
        })
    }
}
