//! Run reports: a serializable record of what ran and what came out.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Summary of one experiment run. The data outputs (CSV/JSON written to
/// `out`/`summary_out`) are byte-deterministic for a fixed config and
/// seed; the report additionally carries wall-clock time, so it is the one
/// artifact excluded from that contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config: ExperimentConfig,
    pub summary: serde_json::Value,
    pub wall_clock_ms: u64,
    pub steps: u64,
}

impl RunReport {
    pub fn new(
        command: &str,
        config: &ExperimentConfig,
        summary: serde_json::Value,
        wall_clock_ms: u64,
        steps: u64,
    ) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config: config.clone(),
            summary,
            wall_clock_ms,
            steps,
        }
    }
}
