//! Convergence-iteration estimators for DESYNC and PCO desynchronization.
//!
//! Both estimators pick the firing cycle at which the standard deviation of a
//! node's phase is closest to `b_thres / (sqrt(2) erf^-1(c_conf))`, the spread
//! that keeps the phase within `b_thres` of its mean with probability `c_conf`.
//! The argmin over all cycles is realized as a forward scan that stops at the
//! first index where the objective stops decreasing; both sigma trajectories
//! fall monotonically toward a noise-driven floor, so that index is global.

use std::f64::consts::SQRT_2;

use super::erf::{erf, erf_inv};
use super::kernel::CouplingKernel;
use crate::error::{Error, Result};
use crate::params::ProtocolParams;

/// Spread of a uniformly random initial phase, 1/sqrt(12).
pub const INITIAL_SIGMA: f64 = 0.288_675_134_594_812_9;

/// Hard cap on every forward scan.
pub const SCAN_CAP: usize = 100_000;

/// Phase spread that meets the threshold with the requested confidence.
pub fn target_sigma(b_thres: f64, c_conf: f64) -> Result<f64> {
    if !(b_thres > 0.0) {
        return Err(Error::OutOfRange {
            name: "b_thres",
            value: b_thres,
            range: "(0, inf)",
        });
    }
    Ok(b_thres / (SQRT_2 * erf_inv(c_conf)?))
}

/// A sigma sequence indexed from 1 (cycles for DESYNC, phase updates for PCO).
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaTrajectory {
    pub values: Vec<f64>,
    pub params: ProtocolParams,
}

impl SigmaTrajectory {
    /// `sigma_k` for 1-based `k`.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Firing cycles to steady state.
    pub cycles: usize,
    /// Sigma at the selected index (for PCO, at `l_SSupd`).
    pub achieved_sigma: f64,
    pub target_sigma: f64,
    /// The sigma floor sits above the target: `c_conf` is unattainable and
    /// `cycles` is the index where the floor is reached.
    pub noise_limited: bool,
    pub trajectory: SigmaTrajectory,
    /// PCO only: phase updates to steady state (`l_SSupd`).
    pub phase_updates: Option<usize>,
    /// PCO only: expected cumulative phase updates after cycles 1, 2, ...
    pub update_totals: Vec<f64>,
}

/// How the cycle-matching sum indexes `sigma_PCO`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcoIndexMode {
    /// Cycle `m` uses `sigma_PCO,m`, reading the summation index literally.
    #[default]
    Cycle,
    /// Cycle `m` uses `sigma_PCO` at the number of updates expected so far,
    /// `max(1, ceil(u(m - 1)))`.
    Cumulative,
}

impl std::str::FromStr for PcoIndexMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cycle" | "cycle-indexed" => Ok(PcoIndexMode::Cycle),
            "cumulative" => Ok(PcoIndexMode::Cumulative),
            other => Err(format!(
                "unknown PCO index mode '{other}' (expected cycle or cumulative)"
            )),
        }
    }
}

/// Lazily evaluated DESYNC sigma trajectory.
pub struct DesyncSigmas {
    powers: super::kernel::KernelPowers,
    noise_var: f64,
    noise_acc: f64,
}

impl DesyncSigmas {
    pub fn new(params: &ProtocolParams) -> Self {
        let s = params.sigma_delta();
        DesyncSigmas {
            powers: CouplingKernel::new(params.alpha, params.w).powers(),
            noise_var: s * s,
            noise_acc: 0.0,
        }
    }
}

impl Iterator for DesyncSigmas {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let v = self.powers.next()?;
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        self.noise_acc += norm2 * self.noise_var;
        Some((norm2 * INITIAL_SIGMA * INITIAL_SIGMA + self.noise_acc).sqrt())
    }
}

/// `sigma_desync,k = sqrt(||v^(k)||^2 / 12 + sum_{j<=k} ||v^(j)||^2 sigma_delta^2)`.
pub fn sigma_desync(params: &ProtocolParams, k: usize) -> f64 {
    assert!(k >= 1, "cycle index starts at 1");
    DesyncSigmas::new(params)
        .nth(k - 1)
        .expect("infinite iterator")
}

pub fn desync_sigma_trajectory(params: &ProtocolParams, len: usize) -> SigmaTrajectory {
    SigmaTrajectory {
        values: DesyncSigmas::new(params).take(len).collect(),
        params: *params,
    }
}

/// Closed-form phase spread after `l` PCO updates.
pub fn sigma_pco(params: &ProtocolParams, l: usize) -> f64 {
    sigma_pco_raw(params.alpha, params.sigma_delta(), l)
}

fn sigma_pco_raw(alpha: f64, sigma_delta: f64, l: usize) -> f64 {
    let decay = (1.0 - alpha).powi(2 * l as i32);
    let gain = (alpha - 1.0).powi(2) / (alpha * (alpha - 2.0));
    let var =
        decay * INITIAL_SIGMA * INITIAL_SIGMA + gain * (decay - 1.0) * sigma_delta * sigma_delta;
    var.max(0.0).sqrt()
}

pub fn pco_sigma_trajectory(params: &ProtocolParams, len: usize) -> SigmaTrajectory {
    SigmaTrajectory {
        values: (1..=len).map(|l| sigma_pco(params, l)).collect(),
        params: *params,
    }
}

/// Expected number of PCO phase updates during one firing cycle (cycle 2 on)
/// when the firing phases around the node have spread `sigma`:
/// `erf((floor(W/2) + 1) / (W sigma sqrt 2)) - erf(1 / (W sigma sqrt 2)) / 2`.
pub fn expected_updates_per_cycle(w: usize, sigma: f64) -> f64 {
    let scale = w as f64 * sigma * SQRT_2;
    let reach = (w / 2) as f64 + 1.0;
    erf(reach / scale) - 0.5 * erf(1.0 / scale)
}

/// Expected updates in the first cycle, `1 - 1/W`.
pub fn first_cycle_updates(w: usize) -> f64 {
    1.0 - 1.0 / w as f64
}

/// Result of a forward argmin scan over a monotone-ish sequence.
#[derive(Debug, Clone)]
pub(crate) struct Turning {
    /// 1-based index of the first local minimum.
    pub index: usize,
    pub values: Vec<f64>,
}

/// Smallest 1-based `k` with `objective(x_{k+1}) >= objective(x_k)`, where the
/// sequence is drawn from `xs`. Every value seen (through `k + 1`) is kept.
pub(crate) fn first_turning_point<I, F>(
    xs: I,
    objective: F,
    cap: usize,
    what: &'static str,
) -> Result<Turning>
where
    I: IntoIterator<Item = f64>,
    F: Fn(f64) -> f64,
{
    let mut iter = xs.into_iter();
    let mut values = Vec::new();
    let Some(first) = iter.next() else {
        return Err(Error::CapExceeded { what, cap });
    };
    values.push(first);
    let mut best = objective(first);
    for x in iter.take(cap) {
        values.push(x);
        let o = objective(x);
        if o >= best {
            return Ok(Turning {
                index: values.len() - 1,
                values,
            });
        }
        best = o;
    }
    Err(Error::CapExceeded { what, cap })
}

fn sigma_argmin(
    sigmas: impl Iterator<Item = f64>,
    target: f64,
    what: &'static str,
) -> Result<(usize, f64, bool, Vec<f64>)> {
    let turn = first_turning_point(sigmas, |s| (s - target).abs(), SCAN_CAP, what)?;
    let k = turn.index;
    let here = turn.values[k - 1];
    let after = turn.values[k];
    // Stopped because sigma itself stopped falling, not because it crossed the target.
    let noise_limited = here > target && after >= here;
    Ok((k, here, noise_limited, turn.values))
}

pub fn estimate_desync_cycles(params: &ProtocolParams) -> Result<EstimateResult> {
    let target = target_sigma(params.b_thres, params.c_conf)?;
    let (k, sigma, noise_limited, values) =
        sigma_argmin(DesyncSigmas::new(params), target, "DESYNC sigma scan")?;
    Ok(EstimateResult {
        cycles: k,
        achieved_sigma: sigma,
        target_sigma: target,
        noise_limited,
        trajectory: SigmaTrajectory {
            values,
            params: *params,
        },
        phase_updates: None,
        update_totals: Vec::new(),
    })
}

pub fn estimate_pco_cycles(params: &ProtocolParams, mode: PcoIndexMode) -> Result<EstimateResult> {
    let target = target_sigma(params.b_thres, params.c_conf)?;
    let alpha = params.alpha;
    let sd = params.sigma_delta();
    let (l_ss, sigma, noise_limited, values) = sigma_argmin(
        (1..).map(|l| sigma_pco_raw(alpha, sd, l)),
        target,
        "PCO sigma scan",
    )?;

    // Match l_SSupd updates to cycles: u(1) = 1 - 1/W, u(k) = u(k-1) + E_k,
    // k_PCO = argmin_{k >= 2} |u(k) - l_SSupd|.
    let w = params.w;
    let goal = l_ss as f64;
    let mut totals = vec![first_cycle_updates(w)];
    let mut cycle = 1usize;
    let next_total = |cycle: usize, prev: f64| {
        let index = match mode {
            PcoIndexMode::Cycle => cycle,
            PcoIndexMode::Cumulative => (prev.ceil() as usize).max(1),
        };
        prev + expected_updates_per_cycle(w, sigma_pco_raw(alpha, sd, index))
    };
    let mut best = {
        cycle += 1;
        let u = next_total(cycle, totals[0]);
        totals.push(u);
        (u - goal).abs()
    };
    loop {
        if cycle > SCAN_CAP {
            return Err(Error::CapExceeded {
                what: "PCO cycle matching",
                cap: SCAN_CAP,
            });
        }
        let u = next_total(cycle + 1, *totals.last().unwrap());
        let o = (u - goal).abs();
        if o >= best {
            break;
        }
        totals.push(u);
        cycle += 1;
        best = o;
    }

    Ok(EstimateResult {
        cycles: cycle,
        achieved_sigma: sigma,
        target_sigma: target,
        noise_limited,
        trajectory: SigmaTrajectory {
            values,
            params: *params,
        },
        phase_updates: Some(l_ss),
        update_totals: totals,
    })
}

/// Order-of-convergence conjecture for DESYNC, `scale * W^2 ln(1/b) / alpha`.
pub fn desync_order_conjecture(alpha: f64, w: usize, b_thres: f64, scale: f64) -> f64 {
    let w = w as f64;
    scale / alpha * w * w * (1.0 / b_thres).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcoBound {
    /// Ceiling of the bound; frequently negative.
    pub cycles: i64,
    /// The bound assumes `1 - 1/W > alpha`.
    pub assumption_violated: bool,
}

/// `ceil((ln b - ln[2 + 2/(alpha^W (1 - alpha))]) / (ln(1 - alpha) + ln W))`.
pub fn pco_lower_bound(alpha: f64, w: usize, b_thres: f64) -> Result<PcoBound> {
    let wf = w as f64;
    let denom = (1.0 - alpha).ln() + wf.ln();
    if denom.abs() < 1e-12 {
        return Err(Error::SingularBound);
    }
    // ln[2 + 2/x] with x = alpha^W (1 - alpha), evaluated in log space.
    let ln_x = wf * alpha.ln() + (1.0 - alpha).ln();
    let ln_term = std::f64::consts::LN_2 - ln_x + ln_x.exp().ln_1p();
    let value = ((b_thres.ln() - ln_term) / denom).ceil();
    Ok(PcoBound {
        cycles: value as i64,
        assumption_violated: !(1.0 - 1.0 / wf > alpha),
    })
}
