//! Single-trial event loop.
//!
//! Every node carries the time of its last (possibly virtual) firing and the
//! time of its next scheduled firing. A phase update at time `t` that yields
//! phase `p` moves the last firing to `t - p T`, so the node next fires at
//! `t + (1 - p) T`. Delivery is instantaneous and reaches every other node.

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{NoiseModel, Protocol, ProtocolParams};
use crate::phase::Phase;
use crate::protocols::{
    convergence_check, desync_update, pco_in_listening_interval, pco_update, DesyncNodeState,
    PcoNodeState,
};

pub const DEFAULT_DETECTION_WINDOW: usize = 10;
pub const DEFAULT_MAX_CYCLES: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: ProtocolParams,
    pub protocol: Protocol,
    pub detection_window: usize,
    pub max_cycles: usize,
    pub seed: u64,
    /// Explicit starting phases, one per node. Drawn from `U[0, 1)` when absent.
    pub initial_phases: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(protocol: Protocol, params: ProtocolParams, seed: u64) -> Self {
        SimConfig {
            params,
            protocol,
            detection_window: DEFAULT_DETECTION_WINDOW,
            max_cycles: DEFAULT_MAX_CYCLES,
            seed,
            initial_phases: None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_initial_phases(mut self, phases: Vec<f64>) -> Self {
        self.initial_phases = Some(phases);
        self
    }

    pub fn misfire_prob(&self) -> f64 {
        self.params.misfire_prob
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.detection_window < 1 {
            return Err(Error::InvalidConfig(
                "detection_window must be at least 1".into(),
            ));
        }
        if self.max_cycles <= self.detection_window {
            return Err(Error::InvalidConfig(format!(
                "max_cycles ({}) must exceed detection_window ({})",
                self.max_cycles, self.detection_window
            )));
        }
        if let Some(p) = &self.initial_phases {
            if p.len() != self.params.w {
                return Err(Error::InvalidConfig(format!(
                    "{} initial phases given for W = {}",
                    p.len(),
                    self.params.w
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Cycles until each node declared convergence, already reduced by
    /// `detection_window - 1`. `None` when the trial hit `max_cycles`.
    pub per_node_cycles: Option<Vec<usize>>,
    pub network_cycles: Option<usize>,
    pub converged: bool,
    pub seed: u64,
}

impl TrialRecord {
    /// Mean of the per-node counts, the per-trial statistic the batch runner aggregates.
    pub fn mean_node_cycles(&self) -> Option<f64> {
        self.per_node_cycles
            .as_ref()
            .map(|c| c.iter().sum::<usize>() as f64 / c.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Fire {
        time: f64,
        node: usize,
        /// Number of firings by this node so far, this one included.
        fires: usize,
        broadcast: bool,
        /// Elapsed time since the last heard firing over `T`, when one was heard.
        gap: Option<f64>,
    },
    Update {
        time: f64,
        node: usize,
        /// Own firings completed before this update.
        fires: usize,
        /// 1-based count of updates applied by this node.
        update_index: usize,
        phase_before: f64,
        phase_after: f64,
    },
    Declared {
        node: usize,
        cycles: usize,
    },
}

pub trait Observer {
    fn on_event(&mut self, event: &Event) -> ControlFlow<()>;
}

pub struct NoopObserver;

impl Observer for NoopObserver {
    fn on_event(&mut self, _: &Event) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl<F: FnMut(&Event) -> ControlFlow<()>> Observer for F {
    fn on_event(&mut self, event: &Event) -> ControlFlow<()> {
        self(event)
    }
}

#[derive(Debug, Clone)]
struct Node {
    last_fire: f64,
    next_fire: f64,
    last_heard: Option<f64>,
    /// DESYNC: previous firing recorded at our own firing, pending the next one.
    pending_prev: Option<f64>,
    fires: usize,
    cycles: usize,
    streak: usize,
    updates: usize,
    declared: Option<usize>,
}

fn draw_initial_phases(config: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match &config.initial_phases {
        Some(v) => v.iter().map(|&x| Phase::new(x).value()).collect(),
        None => (0..config.params.w).map(|_| rng.random::<f64>()).collect(),
    }
}

/// The starting phases a trial with this config uses.
pub fn initial_phases(config: &SimConfig) -> Vec<f64> {
    draw_initial_phases(config, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

pub fn run_trial(config: &SimConfig) -> Result<TrialRecord> {
    run_trial_observed(config, &mut NoopObserver)
}

/// Runs one trial, reporting every firing, update and declaration to `observer`.
/// The observer may stop the trial early; the record then reports no convergence
/// unless every node had already declared.
pub fn run_trial_observed(config: &SimConfig, observer: &mut dyn Observer) -> Result<TrialRecord> {
    config.validate()?;
    let p = &config.params;
    let w = p.w;
    let period = p.period_s;
    let noise: NoiseModel = p.noise();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let phases = draw_initial_phases(config, &mut rng);
    let mut nodes: Vec<Node> = phases
        .iter()
        .map(|&phi| Node {
            last_fire: -phi * period,
            next_fire: (1.0 - phi) * period,
            last_heard: None,
            pending_prev: None,
            fires: 0,
            cycles: 0,
            streak: 0,
            updates: 0,
            declared: None,
        })
        .collect();

    let mut undeclared = w;
    let mut stopped = false;

    'events: loop {
        let i = (0..w)
            .min_by(|&a, &b| nodes[a].next_fire.total_cmp(&nodes[b].next_fire))
            .expect("W >= 2");
        let t = nodes[i].next_fire;
        let broadcast = rng.random::<f64>() >= p.misfire_prob;

        let node = &mut nodes[i];
        node.fires += 1;
        let gap = node.last_heard.map(|h| (t - h) / period);
        if let Some(g) = gap {
            node.cycles += 1;
            if convergence_check(g, w, p.b_thres) {
                node.streak += 1;
            } else {
                node.streak = 0;
            }
        }
        node.last_fire = t;
        node.next_fire = t + period;
        if config.protocol == Protocol::Desync {
            node.pending_prev = node.last_heard;
        }
        let fires = node.fires;
        let over_cap = node.fires > config.max_cycles;
        let newly_declared = if node.declared.is_none() && node.streak >= config.detection_window {
            let c = node.cycles + 1 - config.detection_window;
            node.declared = Some(c);
            Some(c)
        } else {
            None
        };

        let fire = Event::Fire {
            time: t,
            node: i,
            fires,
            broadcast,
            gap,
        };
        if observer.on_event(&fire).is_break() {
            stopped = true;
            break;
        }
        if let Some(cycles) = newly_declared {
            undeclared -= 1;
            if observer
                .on_event(&Event::Declared { node: i, cycles })
                .is_break()
            {
                stopped = true;
                break;
            }
            if undeclared == 0 {
                break;
            }
        }
        if over_cap {
            break;
        }

        if broadcast {
            for j in (0..w).filter(|&j| j != i) {
                let listener = &mut nodes[j];
                let update = match config.protocol {
                    Protocol::Desync => hear_desync(listener, t, p, &noise, &mut rng),
                    Protocol::Pco => hear_pco(listener, t, p, &noise, &mut rng),
                };
                listener.last_heard = Some(t);
                if let Some((before, after)) = update {
                    listener.updates += 1;
                    let ev = Event::Update {
                        time: t,
                        node: j,
                        fires: listener.fires,
                        update_index: listener.updates,
                        phase_before: before,
                        phase_after: after,
                    };
                    if observer.on_event(&ev).is_break() {
                        stopped = true;
                        break 'events;
                    }
                }
            }
        }
    }

    let converged = undeclared == 0 && !(stopped && nodes.iter().any(|n| n.declared.is_none()));
    let per_node_cycles = converged.then(|| {
        nodes
            .iter()
            .map(|n| n.declared.unwrap())
            .collect::<Vec<_>>()
    });
    let network_cycles = per_node_cycles.as_ref().map(|c| *c.iter().max().unwrap());
    Ok(TrialRecord {
        per_node_cycles,
        network_cycles,
        converged,
        seed: config.seed,
    })
}

fn apply_phase(node: &mut Node, t: f64, phase: f64, period: f64) {
    node.last_fire = t - phase * period;
    node.next_fire = node.last_fire + period;
}

fn hear_desync(
    node: &mut Node,
    t: f64,
    p: &ProtocolParams,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, f64)> {
    if node.fires == 0 {
        return None;
    }
    // Only the first firing after our own triggers an update, and only once
    // both neighbours have been heard.
    let prev = node.pending_prev.take()?;
    let own = (t - node.last_fire) / p.period_s;
    let phi_prev = (t - prev) / p.period_s;
    let samples = [noise.sample(rng), noise.sample(rng), noise.sample(rng)];
    let state = DesyncNodeState {
        own_phase: Phase::new(own),
        prev_fire_phase: Some(phi_prev),
        streak: node.streak as u32,
    };
    let after = desync_update(&state, phi_prev, 0.0, p.alpha, samples)
        .own_phase
        .value();
    apply_phase(node, t, after, p.period_s);
    Some((own, after))
}

fn hear_pco(
    node: &mut Node,
    t: f64,
    p: &ProtocolParams,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Option<(f64, f64)> {
    let own = (t - node.last_fire) / p.period_s;
    if !pco_in_listening_interval(own, p.w) {
        return None;
    }
    let state = PcoNodeState {
        own_phase: Phase::new(own),
        streak: node.streak as u32,
    };
    let after = pco_update(&state, p.alpha, p.w, noise.sample(rng))
        .own_phase
        .value();
    apply_phase(node, t, after, p.period_s);
    Some((own, after))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(w: usize, alpha: f64, b: f64) -> ProtocolParams {
        ProtocolParams::new(w, alpha, b)
            .with_sigma_delta_s(0.0)
            .with_misfire_prob(0.0)
    }

    /// Noise-free two-node DESYNC iterated by hand: node 1 trails node 0 by
    /// `g` of a period; each update moves the updating node by `alpha/2` of
    /// the error towards the antipode.
    fn two_node_oracle(alpha: f64, g0: f64, b: f64) -> usize {
        // Updates alternate between the two nodes; each maps the gap g to
        // g + (alpha / 2)(1 - 2 g) on the relevant side.
        let mut g = g0;
        let mut k = 0;
        while (g - 0.5).abs() > b {
            g = (1.0 - alpha) * g + alpha * 0.5;
            k += 1;
            if k > 1000 {
                break;
            }
        }
        k
    }

    #[test]
    fn two_nodes_reach_antipodes() {
        let cfg = SimConfig::new(Protocol::Desync, quiet(2, 0.95, 0.02), 1)
            .with_initial_phases(vec![0.0, 0.01]);
        let rec = run_trial(&cfg).unwrap();
        assert!(rec.converged);
        assert!(rec.network_cycles.unwrap() <= 15, "{rec:?}");
        assert!(two_node_oracle(0.95, 0.01, 0.02) <= 3);
    }

    #[test]
    fn equidistant_start_declares_at_one() {
        for protocol in [Protocol::Desync, Protocol::Pco] {
            let w = 4;
            let phases = (0..w).map(|i| i as f64 / w as f64).collect();
            let cfg = SimConfig::new(protocol, quiet(w, 0.5, 0.02), 3).with_initial_phases(phases);
            let rec = run_trial(&cfg).unwrap();
            assert_eq!(rec.per_node_cycles, Some(vec![1; w]), "{protocol}");
        }
    }

    #[test]
    fn identical_seed_identical_record() {
        for protocol in [Protocol::Desync, Protocol::Pco] {
            let cfg = SimConfig::new(protocol, ProtocolParams::new(8, 0.5, 0.02), 42);
            assert_eq!(run_trial(&cfg).unwrap(), run_trial(&cfg).unwrap());
        }
    }

    #[test]
    fn events_are_time_ordered_and_fully_delivered() {
        let cfg = SimConfig::new(Protocol::Desync, ProtocolParams::new(6, 0.3, 0.02), 9);
        let mut last = f64::NEG_INFINITY;
        let mut broadcasts = 0usize;
        let mut ok = true;
        let mut obs = |ev: &Event| {
            if let Event::Fire {
                time, broadcast, ..
            } = *ev
            {
                ok &= time >= last;
                last = time;
                broadcasts += broadcast as usize;
            }
            ControlFlow::Continue(())
        };
        let rec = run_trial_observed(&cfg, &mut obs).unwrap();
        assert!(ok);
        assert!(rec.converged);
        assert!(broadcasts > 0);
    }

    #[test]
    fn pco_updates_only_inside_listening_interval() {
        for seed in 0..20 {
            let cfg = SimConfig::new(Protocol::Pco, ProtocolParams::new(8, 0.4, 0.02), seed);
            let mut bad = 0;
            let mut obs = |ev: &Event| {
                if let Event::Update { phase_before, .. } = *ev {
                    if !(phase_before > 1.0 - 1.0 / 8.0 && phase_before < 1.0) {
                        bad += 1;
                    }
                }
                ControlFlow::Continue(())
            };
            run_trial_observed(&cfg, &mut obs).unwrap();
            assert_eq!(bad, 0);
        }
    }

    #[test]
    fn noise_free_converged_ring_is_fair() {
        let w = 8;
        let cfg = SimConfig::new(Protocol::Desync, quiet(w, 0.5, 0.02), 5);
        let mut gaps: Vec<f64> = Vec::new();
        let mut obs = |ev: &Event| {
            if let Event::Fire { gap: Some(g), .. } = *ev {
                gaps.push(g);
            }
            ControlFlow::Continue(())
        };
        let rec = run_trial_observed(&cfg, &mut obs).unwrap();
        assert!(rec.converged);
        // the last W firings form one full round of the converged ring
        for g in &gaps[gaps.len() - w..] {
            assert!((g - 1.0 / w as f64).abs() <= 0.02, "{g}");
        }
    }

    #[test]
    fn cap_reported_as_non_convergence() {
        // alpha tiny and threshold tight: cannot converge within 20 cycles
        let mut cfg = SimConfig::new(Protocol::Desync, ProtocolParams::new(8, 0.01, 0.001), 2);
        cfg.max_cycles = 20;
        let rec = run_trial(&cfg).unwrap();
        assert!(!rec.converged);
        assert!(rec.per_node_cycles.is_none());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(Protocol::Pco, ProtocolParams::new(4, 0.5, 0.02), 0);
        cfg.max_cycles = 10;
        assert!(run_trial(&cfg).is_err());
        let cfg = SimConfig::new(Protocol::Pco, ProtocolParams::new(4, 0.5, 0.02), 0)
            .with_initial_phases(vec![0.1, 0.2]);
        assert!(matches!(run_trial(&cfg), Err(Error::InvalidConfig(_))));
    }
}
