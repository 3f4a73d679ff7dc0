//! Empirical distribution of a node's phase across independent trials.
//!
//! The observed quantity is the phase a node holds right after its k-th
//! update, i.e. the value the update rule writes (elapsed time since the
//! node's adjusted firing, over `T`). Index 0 stands for the initial phase.

use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::analytic::first_cycle_updates;
use crate::error::{Error, Result};
use crate::params::Protocol;
use crate::stats::{excess_kurtosis, ks_normal, ks_uniform, mean, sample_std, skewness};

use super::engine::{initial_phases, run_trial_observed, Event, SimConfig};

/// Node whose phase is sampled.
const OBSERVED_NODE: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityReport {
    pub update_index: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// KS distance to a normal with the sample mean and std.
    pub ks_normal: f64,
    /// KS distance to a uniform with the sample mean and std.
    pub ks_uniform: f64,
}

/// Phases of the observed node after updates `1..=k_max` in one trial.
/// Shorter than `k_max` if the trial ended first.
fn phase_trace(config: &SimConfig, k_max: usize) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(k_max);
    let mut obs = |ev: &Event| {
        if let Event::Update {
            node: OBSERVED_NODE,
            phase_after,
            ..
        } = *ev
        {
            trace.push(phase_after);
            if trace.len() >= k_max {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    };
    run_trial_observed(config, &mut obs)?;
    Ok(trace)
}

/// The observed node's phase after its `k`-th update (`k = 0`: initial phase).
pub fn phase_after_update(config: &SimConfig, k: usize) -> Result<Option<f64>> {
    if k == 0 {
        config.validate()?;
        return Ok(Some(initial_phases(config)[OBSERVED_NODE]));
    }
    Ok(phase_trace(config, k)?.get(k - 1).copied())
}

fn seeds(config: &SimConfig, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| config.seed.wrapping_add(i)).collect()
}

pub fn normality_diagnostic(
    config: &SimConfig,
    update_index: usize,
    n_samples: usize,
) -> Result<NormalityReport> {
    if n_samples < 1000 {
        return Err(Error::InvalidConfig(
            "normality diagnostic needs at least 1000 samples".into(),
        ));
    }
    let samples: Vec<f64> = seeds(config, n_samples)
        .par_iter()
        .map(|&s| phase_after_update(&config.with_seed(s), update_index))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let (m, s) = (mean(&samples), sample_std(&samples));
    let half = s * 3f64.sqrt();
    Ok(NormalityReport {
        update_index,
        n_samples: samples.len(),
        mean: m,
        std: s,
        skewness: skewness(&samples),
        excess_kurtosis: excess_kurtosis(&samples),
        ks_normal: ks_normal(&samples, m, s),
        ks_uniform: ks_uniform(&samples, m - half, m + half),
    })
}

/// Sample standard deviation of the observed node's phase after each of its
/// first `k_max` updates, over `n_trials` seeds starting at `config.seed`.
pub fn bridge_sigmas(config: &SimConfig, k_max: usize, n_trials: usize) -> Result<Vec<f64>> {
    let traces: Vec<Vec<f64>> = seeds(config, n_trials)
        .par_iter()
        .map(|&s| phase_trace(&config.with_seed(s), k_max))
        .collect::<Result<_>>()?;
    Ok((0..k_max)
        .map(|k| {
            let xs: Vec<f64> = traces.iter().filter_map(|t| t.get(k).copied()).collect();
            sample_std(&xs)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstCycleReport {
    pub n_trials: usize,
    pub mean: f64,
    pub std_err: f64,
    pub expected: f64,
}

impl FirstCycleReport {
    pub fn z_score(&self) -> f64 {
        (self.mean - self.expected) / self.std_err
    }
}

/// PCO updates applied by the observed node between its first and second
/// firing, averaged over trials.
pub fn pco_first_cycle_updates(config: &SimConfig, n_trials: usize) -> Result<FirstCycleReport> {
    if config.protocol != Protocol::Pco {
        return Err(Error::InvalidConfig(
            "first-cycle update count applies to PCO only".into(),
        ));
    }
    let counts: Vec<f64> = seeds(config, n_trials)
        .par_iter()
        .map(|&s| {
            let mut count = 0usize;
            let mut obs = |ev: &Event| match *ev {
                Event::Update {
                    node: OBSERVED_NODE,
                    fires: 1,
                    ..
                } => {
                    count += 1;
                    ControlFlow::Continue(())
                }
                Event::Fire {
                    node: OBSERVED_NODE,
                    fires: 2,
                    ..
                } => ControlFlow::Break(()),
                _ => ControlFlow::Continue(()),
            };
            run_trial_observed(&config.with_seed(s), &mut obs).map(|_| count as f64)
        })
        .collect::<Result<_>>()?;
    let n = counts.len();
    Ok(FirstCycleReport {
        n_trials: n,
        mean: mean(&counts),
        std_err: sample_std(&counts) / (n as f64).sqrt(),
        expected: first_cycle_updates(config.params.w),
    })
}
