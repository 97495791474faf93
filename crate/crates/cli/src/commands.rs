//! Subcommand pipelines. Every pipeline writes plot-ready CSV (comma
//! separator, `.` decimals, LF endings, header row) and returns a JSON
//! summary for the run report.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::{json, Value};

use hyptime::detect::{frequency_estimate, FirstHt, HTParams, HTScanResult, HtScanner};
use hyptime::exact::{
    inverse_branch, preimage_sequence, ratio, series_table_f64, verification_suite,
    DEFAULT_DENOM_BIT_BUDGET,
};
use hyptime::map::MapModel;
use hyptime::measures::{
    pushforward_histogram, stationary_density, suggest_sigma, ulam_matrix, DensityHistogram,
};
use hyptime::numeric::RunningMean;
use hyptime::orbit::orbit_trace;
use hyptime::stats::{growth_diagnostic, h_histogram, lp_moment, tail_exponent_fit};

use crate::config::{ConfigError, DensityMethod, ExperimentConfig, SeriesMode};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] hyptime::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("invariant suite reported {0} failing check(s)")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
            CliError::VerifyFailed(_) => 4,
        }
    }
}

fn open_out(path: &str) -> Result<Box<dyn Write>, CliError> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn write_summary(cfg: &ExperimentConfig, summary: &Value) -> Result<(), CliError> {
    let mut out = open_out(&cfg.summary_out)?;
    writeln!(out, "{summary}")?;
    out.flush()?;
    Ok(())
}

fn params_for(cfg: &ExperimentConfig, map: &MapModel<f64>) -> Result<HTParams<f64>, CliError> {
    let sigma = cfg.require_sigma()?;
    Ok(HTParams::for_map(map, sigma, cfg.delta, cfg.b)?)
}

fn valid_trace(
    map: &MapModel<f64>,
    cfg: &ExperimentConfig,
) -> Result<hyptime::Trace64, CliError> {
    let trace = orbit_trace(map, cfg.x0, cfg.n, cfg.delta)?;
    if !trace.is_valid() {
        return Err(CliError::Core(hyptime::Error::InvalidTrace {
            truncated_at: trace.len(),
        }));
    }
    Ok(trace)
}

/// `scan`: per-time flags and scan diagnostics for one orbit.
pub fn run_scan(cfg: &ExperimentConfig) -> Result<(Value, u64), CliError> {
    let map = cfg.build_map()?;
    let params = params_for(cfg, &map)?;
    let trace = valid_trace(&map, cfg)?;

    let mut out = open_out(&cfg.out)?;
    writeln!(out, "n,flag,p_n,cond2_margin")?;
    let mut scanner = HtScanner::new(&params, trace.has_singular_set());
    let mut flags = Vec::with_capacity(trace.len());
    for (&a, &c) in trace.a().iter().zip(trace.c()) {
        let step = scanner.push(a, c);
        let margin = match step.cond2_margin {
            Some(m) => m.to_string(),
            None => String::new(),
        };
        writeln!(out, "{},{},{},{}", step.n, u8::from(step.flag), step.p_n, margin)?;
        flags.push(step.flag);
    }
    out.flush()?;

    let result = HTScanResult::from_flags(flags);
    let freq = frequency_estimate(&result, result.len()).ok();
    let summary = json!({
        "n": result.len(),
        "hyperbolic_count": result.times().len(),
        "first": match result.first() {
            FirstHt::Time(n) => json!(n),
            FirstHt::Censored(_) => Value::Null,
        },
        "theta_at_n": freq.map(|f| f.theta_at_n),
        "trailing_min": freq.map(|f| f.trailing_min),
    });
    let steps = trace.len() as u64;
    write_summary(cfg, &summary)?;
    Ok((summary, steps))
}

/// `h-stats`: first-hyperbolic-time histogram, moments, and tail
/// diagnostics over a uniform ensemble.
pub fn run_h_stats(cfg: &ExperimentConfig) -> Result<(Value, u64), CliError> {
    let map = cfg.build_map()?;
    let params = params_for(cfg, &map)?;
    let hist = h_histogram(&map, &params, cfg.samples, cfg.t, cfg.seed)?;

    let mut out = open_out(&cfg.out)?;
    writeln!(out, "k,mass")?;
    for k in 1..=hist.cutoff() {
        writeln!(out, "{},{}", k, hist.mass(k))?;
    }
    out.flush()?;

    let moment = lp_moment(&hist, cfg.p)?;
    let tail_fit = tail_exponent_fit(&hist, cfg.k_min).ok();
    let i_max = cfg.i_max.unwrap_or(hist.cutoff()).min(hist.cutoff());
    let double_sum = hyptime::stats::tail_double_sum(&hist, i_max)?;
    let growth = match &cfg.t_grid {
        Some(grid) => {
            let table = growth_diagnostic(&map, &params, cfg.samples, grid, cfg.seed)?;
            Value::Array(
                table.into_iter().map(|(t, mean)| json!([t, mean])).collect(),
            )
        }
        None => Value::Null,
    };
    let summary = json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "moment_p": {
            "p": cfg.p,
            "truncated": moment.truncated,
            "censored_floor": moment.censored_floor,
            "is_lower_bound": moment.is_lower_bound,
        },
        "censored": hist.censored(),
        "tail_fit_p": tail_fit,
        "double_sum": double_sum,
        "i_max": i_max,
        "growth": growth,
    });
    write_summary(cfg, &summary)?;
    // Nominal step budget: every sample may scan up to T steps.
    Ok((summary, (cfg.samples * cfg.t) as u64))
}

fn write_density_csv(
    cfg: &ExperimentConfig,
    hist: &DensityHistogram<f64>,
) -> Result<(), CliError> {
    let mut out = open_out(&cfg.out)?;
    writeln!(out, "bin_lo,bin_hi,mass,density")?;
    for i in 0..hist.bins() {
        writeln!(
            out,
            "{},{},{},{}",
            hist.edges()[i],
            hist.edges()[i + 1],
            hist.mass()[i],
            hist.density(i)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `density`: push-forward Cesàro histogram or the stationary density of
/// the discretized transfer operator.
pub fn run_density(cfg: &ExperimentConfig) -> Result<(Value, u64), CliError> {
    let map = cfg.build_map()?;
    let (hist, label, steps) = match cfg.method {
        DensityMethod::Pushforward => {
            let hist = pushforward_histogram(&map, cfg.n, cfg.samples, cfg.bins, cfg.seed)?;
            (hist, "pushforward", (cfg.n * cfg.samples) as u64)
        }
        DensityMethod::Stationary => {
            let samples_per_cell = (cfg.samples / cfg.k).max(1);
            let op = ulam_matrix(&map, cfg.k, samples_per_cell, cfg.seed)?;
            let hist = stationary_density(&op, cfg.tol, cfg.max_iter)?;
            (hist, "stationary", (cfg.k * samples_per_cell) as u64)
        }
    };
    write_density_csv(cfg, &hist)?;
    let summary = json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "method": label,
        "bins": hist.bins(),
        "sup_density": hist.sup_density(),
    });
    write_summary(cfg, &summary)?;
    Ok((summary, steps))
}

/// `birkhoff`: running expansion/recurrence averages along one orbit.
pub fn run_birkhoff(cfg: &ExperimentConfig) -> Result<(Value, u64), CliError> {
    let map = cfg.build_map()?;
    let trace = valid_trace(&map, cfg)?;
    let mut out = open_out(&cfg.out)?;
    writeln!(out, "n,expansion_avg,recurrence_avg")?;
    let mut expansion = RunningMean::new();
    let mut recurrence = RunningMean::new();
    for j in 0..trace.len() {
        expansion.push(trace.a()[j]);
        recurrence.push(-trace.c()[j]);
        writeln!(out, "{},{},{}", j + 1, expansion.mean(), recurrence.mean())?;
    }
    out.flush()?;
    let summary = json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "n": trace.len(),
        "expansion_avg": expansion.mean(),
        "recurrence_avg": recurrence.mean(),
    });
    write_summary(cfg, &summary)?;
    Ok((summary, trace.len() as u64))
}

/// `example-series`: the escape-time series of the square-root circle
/// map's inverse-branch iterates, exact while the denominators fit the
/// bit budget.
pub fn run_example_series(cfg: &ExperimentConfig) -> Result<(Value, u64), CliError> {
    let n_max = cfg.n;
    let mut out = open_out(&cfg.out)?;
    writeln!(out, "n,x_n,partial_sum")?;
    let mut switched_at: Option<usize> = None;
    match cfg.mode {
        SeriesMode::Float => {
            for (n, x_n, partial) in series_table_f64(n_max) {
                writeln!(out, "{n},{x_n},{partial}")?;
            }
        }
        SeriesMode::Exact => {
            // Row n needs x_{n+1}; the exact prefix therefore ends one
            // short of the budgeted sequence length.
            let seq = preimage_sequence(n_max + 1, DEFAULT_DENOM_BIT_BUDGET);
            let exact_rows = seq.len().saturating_sub(1).min(n_max);
            let mut total = ratio(0, 1);
            for n in 1..=exact_rows {
                let term = ratio(n as i64, 1) * (seq.value(n + 1) - seq.value(n));
                total += term;
                writeln!(out, "{},{},{}", n, seq.value(n), total)?;
            }
            if exact_rows < n_max {
                switched_at = Some(exact_rows + 1);
                eprintln!(
                    "note: denominator bit budget ({DEFAULT_DENOM_BIT_BUDGET}) exhausted; \
                     switching to the float recurrence from n = {}",
                    exact_rows + 1
                );
                for (n, x_n, partial) in series_table_f64(n_max) {
                    if n > exact_rows {
                        writeln!(out, "{n},{x_n},{partial}")?;
                    }
                }
            }
        }
    }
    out.flush()?;
    let summary = json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "n": n_max,
        "mode": match cfg.mode { SeriesMode::Exact => "exact", SeriesMode::Float => "float" },
        "float_from": switched_at,
        "partial_sum_final": hyptime::exact::series_partial_f64(n_max),
    });
    write_summary(cfg, &summary)?;
    Ok((summary, n_max as u64))
}

/// `example-verify`: the invariant suite for the square-root circle map.
/// Exits nonzero when any hard check fails; informational diagnostics are
/// reported but do not fail the run.
pub fn run_example_verify(cfg: &ExperimentConfig) -> Result<(Value, u64), CliError> {
    let checks = verification_suite(cfg.seed);
    let mut out = open_out(&cfg.out)?;
    let mut failed = 0usize;
    let mut informational = 0usize;
    for check in &checks {
        let status = if check.informational {
            informational += 1;
            "INFO"
        } else if check.passed {
            "PASS"
        } else {
            failed += 1;
            "FAIL"
        };
        writeln!(out, "{status} {} - {}", check.name, check.detail)?;
    }
    writeln!(
        out,
        "{} checks: {} passed, {failed} failed, {informational} informational",
        checks.len(),
        checks.len() - failed - informational,
    )?;
    out.flush()?;
    let summary = json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "checks": checks.len(),
        "failed": failed,
        "informational": informational,
    });
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    write_summary(cfg, &summary)?;
    Ok((summary, 0))
}

/// `suggest-sigma`: Monte Carlo Lyapunov estimate and the derived
/// contraction-rate suggestion.
pub fn run_suggest_sigma(cfg: &ExperimentConfig) -> Result<(Value, u64), CliError> {
    let map = cfg.build_map()?;
    let suggestion = suggest_sigma(&map, cfg.n_steps, cfg.sigma_samples, cfg.seed)?;
    let summary = json!({
        "schema_version": crate::report::SCHEMA_VERSION,
        "lambda_hat": suggestion.lambda_hat,
        "sigma": suggestion.sigma,
    });
    let mut out = open_out(&cfg.out)?;
    writeln!(out, "{summary}")?;
    out.flush()?;
    Ok((summary, (cfg.n_steps * cfg.sigma_samples) as u64))
}
