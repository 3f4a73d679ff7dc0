//! Batch runner: many seeded trials per cell, aggregated per cell.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{Protocol, ProtocolParams};
use crate::stats::{mean, sample_std};

use super::engine::{run_trial, SimConfig, TrialRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub protocol: Protocol,
    pub params: ProtocolParams,
    pub n_trials: usize,
    /// Mean over converged trials of each trial's mean per-node cycle count.
    pub mean_cycles: f64,
    /// Sample standard deviation (`n - 1`) of the same per-trial values.
    pub std_cycles: f64,
    pub non_converged: usize,
    pub trials: Vec<TrialRecord>,
}

/// Runs `config` once per seed. Trials run in parallel on the current rayon
/// pool; the output keeps the seed order.
pub fn run_trials(config: &SimConfig, seeds: &[u64]) -> Result<Vec<TrialRecord>> {
    seeds
        .par_iter()
        .map(|&s| run_trial(&config.with_seed(s)))
        .collect()
}

pub fn summarize(config: &SimConfig, trials: Vec<TrialRecord>) -> GridSummary {
    let values: Vec<f64> = trials
        .iter()
        .filter_map(TrialRecord::mean_node_cycles)
        .collect();
    GridSummary {
        protocol: config.protocol,
        params: config.params,
        n_trials: trials.len(),
        mean_cycles: mean(&values),
        std_cycles: sample_std(&values),
        non_converged: trials.len() - values.len(),
        trials,
    }
}

/// Every cell runs `trials_per_cell` trials seeded `base_seed + trial index`.
/// Cells and trials are scheduled together on the rayon pool; results come
/// back in input order whatever the worker count.
pub fn run_grid(
    cells: &[SimConfig],
    trials_per_cell: usize,
    base_seed: u64,
) -> Result<Vec<GridSummary>> {
    if trials_per_cell < 2 {
        return Err(Error::InvalidConfig(
            "trials_per_cell must be at least 2".into(),
        ));
    }
    for c in cells {
        c.validate()?;
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..trials_per_cell as u64).map(move |t| (c, base_seed.wrapping_add(t))))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(c, seed)| run_trial(&cells[c].with_seed(seed)))
        .collect::<Result<_>>()?;
    let mut records = records.into_iter();
    Ok(cells
        .iter()
        .map(|cell| summarize(cell, records.by_ref().take(trials_per_cell).collect()))
        .collect())
}
