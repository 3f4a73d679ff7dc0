//! Coupling-kernel powers under circular convolution.

use crate::error::{Error, Result};

/// Smallest circular-convolution period. Rings of 2-4 nodes are padded up to
/// this so the three-tap kernel never overlaps itself after one pass.
pub const MIN_PERIOD: usize = 5;

/// `(a * b)_P[n] = sum_m a[m] sum_k b[n - m - kP]` for `0 <= n < P`.
pub fn circular_convolve(a: &[f64], b: &[f64], period: usize) -> Result<Vec<f64>> {
    let len = a.len().max(b.len());
    if period == 0 || period < len {
        return Err(Error::InvalidPeriod { period, len });
    }
    let mut out = vec![0.0; period];
    for (m, &am) in a.iter().enumerate() {
        if am == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[(m + j) % period] += am * bj;
        }
    }
    Ok(out)
}

/// The DESYNC averaging kernel `[alpha/2, 1 - alpha, alpha/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingKernel {
    taps: [f64; 3],
    period: usize,
}

impl CouplingKernel {
    pub fn new(alpha: f64, w: usize) -> Self {
        CouplingKernel {
            taps: [alpha / 2.0, 1.0 - alpha, alpha / 2.0],
            period: w.max(MIN_PERIOD),
        }
    }

    pub fn taps(&self) -> [f64; 3] {
        self.taps
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// The kernel zero-padded to one full period.
    pub fn padded(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.period];
        v[..3].copy_from_slice(&self.taps);
        v
    }

    /// Iterator over `v^(1), v^(2), ...` (j-fold circular self-convolutions).
    pub fn powers(&self) -> KernelPowers {
        KernelPowers {
            kernel: *self,
            current: None,
        }
    }
}

pub struct KernelPowers {
    kernel: CouplingKernel,
    current: Option<Vec<f64>>,
}

impl Iterator for KernelPowers {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let next = match &self.current {
            None => self.kernel.padded(),
            Some(prev) => circular_convolve(prev, &self.kernel.taps, self.kernel.period)
                .expect("period is at least the kernel length"),
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// `||v_W^(j)||^2` for `j = 1..=k_max`, with the period clamped to at least 5.
pub fn kernel_power_norms(alpha: f64, w: usize, k_max: usize) -> Vec<f64> {
    CouplingKernel::new(alpha, w)
        .powers()
        .take(k_max)
        .map(|v| v.iter().map(|x| x * x).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the periodic-extension definition.
    fn convolve_by_definition(a: &[f64], b: &[f64], period: usize) -> Vec<f64> {
        let at = |v: &[f64], i: i64| -> f64 {
            if i >= 0 && (i as usize) < v.len() {
                v[i as usize]
            } else {
                0.0
            }
        };
        let p = period as i64;
        (0..p)
            .map(|n| {
                let mut s = 0.0;
                for m in 0..a.len() as i64 {
                    for k in -4..=4 {
                        s += at(a, m) * at(b, n - m - k * p);
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn identity_kernel_is_an_impulse() {
        let out = circular_convolve(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0], 8).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn half_alpha_self_convolution() {
        let v = [0.25, 0.5, 0.25];
        let out = circular_convolve(&v, &v, 8).unwrap();
        assert_eq!(out, convolve_by_definition(&v, &v, 8));
        let expected = [0.0625, 0.25, 0.375, 0.25, 0.0625, 0.0, 0.0, 0.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-15);
        }
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wraparound_matches_definition() {
        let a = [0.1, 0.7, 0.2, 0.3, 0.9];
        let b = [0.4, 0.0, 0.6, 0.5, 0.25];
        let out = circular_convolve(&a, &b, 5).unwrap();
        for (x, y) in out.iter().zip(convolve_by_definition(&a, &b, 5)) {
            assert!((x - y).abs() < 1e-14);
        }
        let mass: f64 = out.iter().sum();
        assert!((mass - a.iter().sum::<f64>() * b.iter().sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn short_period_rejected() {
        assert_eq!(
            circular_convolve(&[1.0; 4], &[1.0; 3], 3),
            Err(Error::InvalidPeriod { period: 3, len: 4 })
        );
    }

    #[test]
    fn kernel_period_is_clamped() {
        for (w, p) in [(2, 5), (3, 5), (4, 5), (5, 5), (8, 8), (16, 16)] {
            assert_eq!(CouplingKernel::new(0.3, w).period(), p);
        }
        let taps = CouplingKernel::new(0.37, 8).taps();
        assert!((taps.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn norm_examples() {
        assert!(kernel_power_norms(0.0, 8, 20).iter().all(|&n| n == 1.0));
        for &a in &[0.05, 0.3, 0.95] {
            let n1 = kernel_power_norms(a, 8, 1)[0];
            assert!((n1 - (a * a / 2.0 + (1.0 - a) * (1.0 - a))).abs() < 1e-15);
        }
        let n = kernel_power_norms(0.5, 8, 2);
        assert!((n[1] - 0.273_437_5).abs() < 1e-15);
    }

    #[test]
    fn mass_conserved_and_norms_non_increasing() {
        for w in [2, 4, 5, 8, 16] {
            for i in 1..=19 {
                let a = i as f64 * 0.05;
                let mut prev = f64::INFINITY;
                for v in CouplingKernel::new(a, w).powers().take(50) {
                    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                    let n: f64 = v.iter().map(|x| x * x).sum();
                    assert!(n <= prev + 1e-15);
                    prev = n;
                }
            }
        }
    }
}
