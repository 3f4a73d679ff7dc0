//! Per-node DESYNC and PCO transition functions.
//!
//! These are pure: the simulator decides when they fire, measures the phases
//! they consume and draws their noise samples.

use crate::phase::{wrap_unit, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DesyncNodeState {
    pub own_phase: Phase,
    /// Phase offset of the firing heard just before our own, recorded when
    /// heard and never refreshed within the cycle (stale DESYNC).
    pub prev_fire_phase: Option<f64>,
    pub streak: u32,
}

/// One DESYNC update, applied when the firing after our own is heard.
///
/// `phi_prev` and `phi_next` are elapsed-time phases of the two neighbours'
/// firings measured at the update instant, so `phi_next` is 0 and `phi_prev`
/// may exceed 1 when the preceding firing is more than a period old. Noise
/// samples are added to own, previous and next in that order:
///
/// `phi <- (1 - a)(phi + d0) + a/2 (phi_prev + d1 + phi_next + d2)  (mod 1)`
pub fn desync_update(
    state: &DesyncNodeState,
    phi_prev: f64,
    phi_next: f64,
    alpha: f64,
    noise: [f64; 3],
) -> DesyncNodeState {
    let own = state.own_phase.value();
    let mixed = (1.0 - alpha) * (own + noise[0])
        + 0.5 * alpha * (phi_prev + noise[1] + phi_next + noise[2]);
    DesyncNodeState {
        own_phase: Phase::new(mixed),
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PcoNodeState {
    pub own_phase: Phase,
    pub streak: u32,
}

/// Lower edge of the PCO listening interval, `1 - 1/W`.
#[inline]
pub fn pco_listen_start(w: usize) -> f64 {
    1.0 - 1.0 / w as f64
}

/// Whether a firing heard at `phase` falls inside the open interval `(1 - 1/W, 1)`.
#[inline]
pub fn pco_in_listening_interval(phase: f64, w: usize) -> bool {
    phase > pco_listen_start(w) && phase < 1.0
}

/// `phi <- (1 - a)(phi + d) + a(1 - 1/W)  (mod 1)`.
///
/// Gating on the listening interval is the caller's job.
pub fn pco_update(state: &PcoNodeState, alpha: f64, w: usize, noise: f64) -> PcoNodeState {
    let own = state.own_phase.value();
    let next = (1.0 - alpha) * (own + noise) + alpha * pco_listen_start(w);
    PcoNodeState {
        own_phase: Phase::new(wrap_unit(next)),
        ..*state
    }
}

/// `|gap - 1/W| <= b_thres`, where `gap` is the elapsed time between the
/// previous heard firing and our own, as a fraction of the period.
pub fn convergence_check(gap: f64, w: usize, b_thres: f64) -> bool {
    (gap - 1.0 / w as f64).abs() <= b_thres
}

/// Phase-based form of the check: both phases taken in the same frame at our
/// firing instant, with the gap measured forward around the ring from `prev`.
pub fn convergence_check_phases(own: Phase, prev: Phase, w: usize, b_thres: f64) -> bool {
    convergence_check(wrap_unit(own.value() - prev.value()), w, b_thres)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn desync(own: f64) -> DesyncNodeState {
        DesyncNodeState {
            own_phase: Phase::new(own),
            prev_fire_phase: None,
            streak: 0,
        }
    }

    #[test]
    fn desync_decoupled_keeps_phase() {
        let s = desync_update(&desync(0.42), 0.9, 0.0, 0.0, [0.0; 3]);
        assert_eq!(s.own_phase.value(), 0.42);
        let s = desync_update(&desync(0.42), 0.9, 0.0, 0.0, [0.01, 0.3, 0.3]);
        assert!((s.own_phase.value() - 0.43).abs() < 1e-15);
    }

    #[test]
    fn desync_midpoint_is_a_fixed_point() {
        for &a in &[0.1, 0.5, 0.95] {
            let s = desync_update(&desync(0.6), 0.7, 0.5, a, [0.0; 3]);
            assert!((s.own_phase.value() - 0.6).abs() < 1e-15);
        }
    }

    #[test]
    fn desync_full_coupling_jumps_to_midpoint() {
        let s = desync_update(&desync(0.1), 0.5, 0.0, 1.0, [0.0; 3]);
        assert!((s.own_phase.value() - 0.25).abs() < 1e-15);
        // stale previous firing more than a period ago
        let s = desync_update(&desync(0.4), 1.4, 0.0, 1.0, [0.0; 3]);
        assert!((s.own_phase.value() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn round_robin_is_invariant() {
        // In the update frame of a round-robin ring: own phase 1/W, previous 2/W, next 0.
        for w in [2usize, 3, 4, 8, 16] {
            let g = 1.0 / w as f64;
            for &a in &[0.05, 0.5, 0.95] {
                let s = desync_update(&desync(g), 2.0 * g, 0.0, a, [0.0; 3]);
                assert!((s.own_phase.value() - g).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pco_examples() {
        let w = 4;
        let s = PcoNodeState {
            own_phase: Phase::new(0.75),
            streak: 0,
        };
        assert!((pco_update(&s, 0.3, w, 0.0).own_phase.value() - 0.75).abs() < 1e-15);
        let s = PcoNodeState {
            own_phase: Phase::new(0.9),
            streak: 0,
        };
        assert!((pco_update(&s, 1.0, w, 0.0).own_phase.value() - 0.75).abs() < 1e-15);
        assert!((pco_update(&s, 0.5, w, 0.0).own_phase.value() - 0.825).abs() < 1e-15);
        assert!(pco_in_listening_interval(0.9, 4));
        assert!(!pco_in_listening_interval(0.75, 4));
        assert!(!pco_in_listening_interval(0.5, 4));
    }

    #[test]
    fn check_examples() {
        assert!(convergence_check(0.25, 4, 0.02));
        assert!(!convergence_check(0.25 + 0.04, 4, 0.02));
        assert!(convergence_check(0.235, 4, 0.02));
        assert!(convergence_check_phases(
            Phase::new(0.05),
            Phase::new(0.8),
            4,
            0.001
        ));
        assert!(!convergence_check_phases(
            Phase::new(0.05),
            Phase::new(0.7),
            4,
            0.02
        ));
    }

    proptest! {
        #[test]
        fn pco_contracts_geometrically(w in 2usize..32, a in 0.01f64..0.99, x in 0.0f64..1.0) {
            let start = pco_listen_start(w);
            let phase = start + x / w as f64 * 0.999;
            prop_assume!(pco_in_listening_interval(phase, w));
            let s = PcoNodeState { own_phase: Phase::new(phase), streak: 0 };
            let after = pco_update(&s, a, w, 0.0).own_phase.value();
            let lhs = (after - start).abs();
            let rhs = (1.0 - a) * (phase - start).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn desync_update_preserves_mean() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (a, s) = (0.5, 3.4e-4);
        let h = s * 3f64.sqrt();
        let n = 100_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let noise = [
                rng.random_range(-h..h),
                rng.random_range(-h..h),
                rng.random_range(-h..h),
            ];
            let x = desync_update(&desync(0.3), 0.6, 0.0, a, noise)
                .own_phase
                .value();
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!((mean - 0.3).abs() <= 4.0 * std / (n as f64).sqrt());
    }
}
