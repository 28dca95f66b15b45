use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use coarse_switch::objective::ChargeTime;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Which instant of each interval the running-cost comb charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeConvention {
    pub label: String,
    pub description: String,
}

impl ChargeConvention {
    pub fn of(charge: ChargeTime) -> Self {
        let description = match charge {
            ChargeTime::IntervalStart => "decision p_i is charged at t = (i-1)T, the start of its interval",
            ChargeTime::IntervalEnd => "decision p_i is charged at t = iT, the end of its interval",
        };
        Self {
            label: charge.label().into(),
            description: description.into(),
        }
    }
}

/// Everything needed to rerun a command bit-exactly on the same build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    /// Configuration with every default filled in.
    pub config: RunConfig,
    pub code_version: String,
    pub master_seed: u64,
    /// Derived seeds keyed by `label/index`.
    pub seeds: BTreeMap<String, u64>,
    pub charge_convention: ChargeConvention,
    pub threads: Option<usize>,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        command: Command,
        config: RunConfig,
        seeds: BTreeMap<String, u64>,
        threads: Option<usize>,
        elapsed: Duration,
        outputs: Vec<String>,
    ) -> Self {
        Self {
            command,
            master_seed: config.master_seed,
            charge_convention: ChargeConvention::of(config.problem.charge_time),
            config,
            code_version: env!("CARGO_PKG_VERSION").into(),
            seeds,
            threads,
            elapsed_seconds: elapsed.as_secs_f64(),
            outputs,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
