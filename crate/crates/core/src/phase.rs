use std::fmt;

/// A point on the unit firing ring, stored as a fraction of the period in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);

    /// Reduces `value` modulo 1. Non-finite input maps to zero.
    pub fn new(value: f64) -> Self {
        Phase(wrap_unit(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for Phase {
    fn from(value: f64) -> Self {
        Phase::new(value)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `x - floor(x)`, with the rounding edge case `-tiny -> 1.0` folded back to 0.
#[inline]
pub(crate) fn wrap_unit(x: f64) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub fn phase_add(p: Phase, x: f64) -> Phase {
    Phase::new(p.0 + x)
}

/// Shortest arc between two phases, in `[0, 0.5]`.
pub fn ring_distance(a: Phase, b: Phase) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(1.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn add_examples() {
        assert!(close(phase_add(Phase::new(0.9), 0.2).value(), 0.1));
        assert!(close(phase_add(Phase::new(0.5), 0.0).value(), 0.5));
        assert!(close(phase_add(Phase::new(0.3), -0.5).value(), 0.8));
    }

    #[test]
    fn distance_examples() {
        assert!(close(ring_distance(Phase::new(0.1), Phase::new(0.9)), 0.2));
        assert_eq!(ring_distance(Phase::new(0.37), Phase::new(0.37)), 0.0);
        assert!(close(ring_distance(Phase::new(0.0), Phase::new(0.5)), 0.5));
    }

    #[test]
    fn tiny_negative_stays_in_range() {
        let p = Phase::new(-1e-18);
        assert!(p.value() >= 0.0 && p.value() < 1.0);
        assert!(Phase::new(f64::NAN).value() == 0.0);
    }

    #[test]
    fn triangle_inequality_on_grid() {
        let grid: Vec<Phase> = (0..40)
            .map(|i| Phase::new(i as f64 / 40.0 + 0.003))
            .collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    assert!(
                        ring_distance(a, c) <= ring_distance(a, b) + ring_distance(b, c) + 1e-12
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn add_is_associative(p in 0.0f64..1.0, num_a in -50i32..50, num_b in -50i32..50, den in 1i32..64) {
            let a = num_a as f64 / den as f64;
            let b = num_b as f64 / den as f64;
            let left = phase_add(phase_add(Phase::new(p), a), b);
            let right = phase_add(Phase::new(p), a + b);
            prop_assert!(left.value() >= 0.0 && left.value() < 1.0);
            prop_assert!(ring_distance(left, right) <= 1e-12);
        }

        #[test]
        fn distance_symmetric_and_bounded(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (pa, pb) = (Phase::new(a), Phase::new(b));
            let d = ring_distance(pa, pb);
            prop_assert_eq!(d, ring_distance(pb, pa));
            prop_assert!((0.0..=0.5).contains(&d));
        }
    }
}
