//! Command-line front end for coarse switching-policy studies.
//!
//! Every command reads a [`RunConfig`], writes plain CSV/JSON files into an
//! output directory and finishes with a `manifest.json` from which
//! `coarse-switch replay` reproduces the run.

// NaN-rejecting checks are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

use crate::commands::Run;
use crate::output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "coarse-switch", version, about = "Coarse-grained switching-policy search for bistable surface reactions")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Shipped configuration: no, no-kmc, co, co-kmc, co-multigrid.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Overrides master_seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Overrides output_dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for replica ensembles; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Steady states over a range of one parameter.
    Bifurcation {
        /// Parameter to vary; defaults to the manipulated one.
        #[arg(long)]
        param: Option<String>,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
    },
    /// One trajectory (mean-field ODE or a single KMC realization) sampled every `sample_dt`.
    Simulate {
        /// `legacy` or `kmc`; defaults to the configured stepper kind.
        #[arg(long)]
        mode: Option<String>,
        /// Policy to apply; the nominal parameter is held otherwise.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Defaults to the policy horizon.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        sample_dt: f64,
        /// Initial coverages, comma separated; defaults to the start state.
        #[arg(long, value_delimiter = ',')]
        initial: Option<Vec<f64>>,
        /// Also write every KMC event to events.csv.
        #[arg(long)]
        events: bool,
    },
    /// Coarse rollout of a policy with the configured stepper.
    Rollout {
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Policy search, optionally over a multigrid schedule.
    Optimize {
        /// Overrides optimizer.max_evals.
        #[arg(long)]
        max_evals: Option<usize>,
    },
    /// Resamples a policy onto a finer interval length.
    Refine {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long = "new-t")]
        new_t: f64,
    },
    /// Saddle, attractors and separatrix polyline of a 2-D model.
    Separatrix,
    /// Objective statistics over independent seeds.
    Evaluate {
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Stepper to evaluate with; defaults to the configured one.
        #[arg(long)]
        stepper: Option<String>,
    },
    /// Prints the JSON Schema of the run configuration.
    #[serde(skip)]
    Schema,
    /// Reruns the command recorded in a manifest with its configuration snapshot.
    #[serde(skip)]
    Replay {
        manifest: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bifurcation { .. } => "bifurcation",
            Command::Simulate { .. } => "simulate",
            Command::Rollout { .. } => "rollout",
            Command::Optimize { .. } => "optimize",
            Command::Refine { .. } => "refine",
            Command::Separatrix => "separatrix",
            Command::Evaluate { .. } => "evaluate",
            Command::Schema => "schema",
            Command::Replay { .. } => "replay",
        }
    }
}

fn install_thread_pool(threads: Option<usize>) {
    if let Some(n) = threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Runs one parsed invocation; returns the manifest of a computing command.
pub fn run(cli: Cli) -> CliResult<Option<RunManifest>> {
    install_thread_pool(cli.threads);
    let (command, mut config) = match cli.command {
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&config::schema()).expect("schema serializes"));
            return Ok(None);
        }
        Command::Replay { manifest } => {
            let m = RunManifest::load(&manifest)?;
            m.config.validate()?;
            (m.command, m.config)
        }
        command => {
            let overrides = config::env_overrides();
            let config = match (&cli.config, &cli.preset) {
                (Some(path), _) => RunConfig::from_file(path, &overrides)?,
                (None, Some(name)) => RunConfig::from_preset(name, &overrides)?,
                (None, None) => {
                    return Err(CliError::Config("one of --config PATH or --preset NAME is required".into()))
                }
            };
            (command, config)
        }
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    execute(command, config, cli.threads).map(Some)
}

/// Runs `command` under a resolved configuration and writes its manifest.
pub fn execute(command: Command, config: RunConfig, threads: Option<usize>) -> CliResult<RunManifest> {
    let started = Instant::now();
    let mut run = Run::new(config.clone(), OutDir::new(config.output_dir.clone()));
    commands::dispatch(&command, &mut run)?;
    let manifest = RunManifest::new(command, config, run.seeds.clone(), threads, started.elapsed(), run.out.files());
    output::write_json(&run.out.path(manifest::MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
