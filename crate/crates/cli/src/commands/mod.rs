mod analysis;
mod search;
mod simulate;

use std::collections::BTreeMap;

use coarse_switch::seed;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::OutDir;
use crate::Command;

pub use search::{OptimizeSummary, StageSummary};

/// State shared by one command invocation.
pub struct Run {
    pub config: RunConfig,
    pub out: OutDir,
    pub seeds: BTreeMap<String, u64>,
}

impl Run {
    pub fn new(config: RunConfig, out: OutDir) -> Self {
        Self {
            config,
            out,
            seeds: BTreeMap::new(),
        }
    }

    /// Derives and records the seed of item `index` of stage `label`.
    pub fn seed(&mut self, label: &str, index: u64) -> u64 {
        let s = seed::derive(self.config.master_seed, label, index);
        self.seeds.insert(format!("{label}/{index}"), s);
        s
    }
}

pub fn dispatch(command: &Command, run: &mut Run) -> CliResult<()> {
    match command {
        Command::Bifurcation { param, from, to, points } => {
            analysis::bifurcation(run, param.as_deref(), *from, *to, *points)
        }
        Command::Separatrix => analysis::separatrix(run),
        Command::Simulate {
            mode,
            policy,
            t_end,
            sample_dt,
            initial,
            events,
        } => simulate::simulate(
            run,
            &simulate::SimulateArgs {
                mode: mode.clone(),
                policy: policy.clone(),
                t_end: *t_end,
                sample_dt: *sample_dt,
                initial: initial.clone(),
                events: *events,
            },
        ),
        Command::Rollout { policy } => search::rollout(run, policy.as_deref()),
        Command::Optimize { max_evals } => search::optimize(run, *max_evals),
        Command::Refine { policy, new_t } => search::refine(run, policy, *new_t),
        Command::Evaluate {
            policy,
            repeats,
            stepper,
        } => search::evaluate(run, policy.as_deref(), *repeats, stepper.as_deref()),
        Command::Schema | Command::Replay { .. } => Err(CliError::Config(format!(
            "`{}` takes no configuration",
            command.name()
        ))),
    }
}
