//! Bandwidth per node under membership churn, and firing-period selection.

use rand::Rng;

use crate::analytic::{estimate_cycles, PcoIndexMode};
use crate::error::{Error, Result};
use crate::params::{Protocol, ProtocolParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChurnScenario {
    pub w: usize,
    /// Application-layer bandwidth of the whole network, bits per second.
    pub b_wsn_bps: f64,
    pub period_s: f64,
    /// Mean time between membership changes, seconds.
    pub t_swap_s: f64,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub bps: f64,
    pub cycles: usize,
    /// `k T >= T_swap`: the network never settles, bandwidth clamped to 0.
    pub clamped: bool,
    pub noise_limited: bool,
}

/// `(1 - k T / T_swap) B / W`, clamped at zero.
pub fn bandwidth_for_cycles(k: usize, s: &ChurnScenario) -> (f64, bool) {
    let busy = k as f64 * s.period_s / s.t_swap_s;
    if busy >= 1.0 {
        (0.0, true)
    } else {
        ((1.0 - busy) * s.b_wsn_bps / s.w as f64, false)
    }
}

/// Bandwidth with `k` taken from the estimator of the scenario's protocol.
/// `params.w` and `params.period_s` are replaced by the scenario's values.
pub fn bandwidth_per_node(
    s: &ChurnScenario,
    params: &ProtocolParams,
    mode: PcoIndexMode,
) -> Result<Bandwidth> {
    let mut p = *params;
    p.w = s.w;
    p.period_s = s.period_s;
    p.validate()?;
    let est = estimate_cycles(s.protocol, &p, mode)?;
    let (bps, clamped) = bandwidth_for_cycles(est.cycles, s);
    Ok(Bandwidth {
        bps,
        cycles: est.cycles,
        clamped,
        noise_limited: est.noise_limited,
    })
}

/// Mean of `(1 - k T / T_swap) B / W` with `T_swap ~ U[lo, hi]`, in closed form.
/// Uses `E[1/T_swap] = ln(hi/lo) / (hi - lo)`; no clamping.
pub fn bandwidth_uniform_swap(k: usize, s: &ChurnScenario, lo: f64, hi: f64) -> f64 {
    let inv = if hi > lo {
        (hi / lo).ln() / (hi - lo)
    } else {
        1.0 / lo
    };
    (1.0 - k as f64 * s.period_s * inv) * s.b_wsn_bps / s.w as f64
}

/// Monte-Carlo counterpart of [`bandwidth_uniform_swap`], clamping each draw at zero.
pub fn bandwidth_monte_carlo<R: Rng + ?Sized>(
    k: usize,
    s: &ChurnScenario,
    lo: f64,
    hi: f64,
    draws: usize,
    rng: &mut R,
) -> f64 {
    let total: f64 = (0..draws)
        .map(|_| {
            let t_swap = rng.random_range(lo..=hi);
            bandwidth_for_cycles(
                k,
                &ChurnScenario {
                    t_swap_s: t_swap,
                    ..*s
                },
            )
            .0
        })
        .sum();
    total / draws as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodSolution {
    pub period_s: f64,
    pub cycles: usize,
    pub iterations: usize,
    pub converged: bool,
    /// The iterate before the last one; equal to `period_s` on a one-step solve.
    pub previous_s: f64,
}

const PERIOD_TOL_S: f64 = 1e-3;
const PERIOD_MAX_ITER: usize = 50;

/// Firing period `T` with `k(T) T = T_sstate`.
///
/// With `renormalize`, the phase noise is `sigma_delta_s / T`, so `k` depends
/// on `T` and the equation is solved by fixed-point iteration from
/// `T_sstate / k(1 s)`. Without it, `T = T_sstate / k(1 s)` directly.
pub fn solve_period(
    t_sstate_s: f64,
    params: &ProtocolParams,
    protocol: Protocol,
    mode: PcoIndexMode,
    renormalize: bool,
) -> Result<PeriodSolution> {
    if !(t_sstate_s > 0.0 && t_sstate_s.is_finite()) {
        return Err(Error::OutOfRange {
            name: "T_sstate",
            value: t_sstate_s,
            range: "(0, inf)",
        });
    }
    let k_at = |t: f64| -> Result<usize> {
        Ok(estimate_cycles(protocol, &params.with_period(t), mode)?
            .cycles
            .max(1))
    };
    let k1 = k_at(1.0)?;
    let mut t = t_sstate_s / k1 as f64;
    if !renormalize || params.sigma_delta_s == 0.0 {
        return Ok(PeriodSolution {
            period_s: t,
            cycles: k1,
            iterations: 1,
            converged: true,
            previous_s: t,
        });
    }
    let mut prev = t;
    let mut k = k_at(t)?;
    for iter in 1..=PERIOD_MAX_ITER {
        prev = t;
        t = t_sstate_s / k as f64;
        k = k_at(t)?;
        if (t - prev).abs() < PERIOD_TOL_S {
            return Ok(PeriodSolution {
                period_s: t,
                cycles: k,
                iterations: iter,
                converged: true,
                previous_s: prev,
            });
        }
    }
    Ok(PeriodSolution {
        period_s: t,
        cycles: k,
        iterations: PERIOD_MAX_ITER,
        converged: false,
        previous_s: prev,
    })
}
