//! Error function and its inverse.
//!
//! `erf` uses the all-positive-terms series `erf(x) = 2/sqrt(pi) e^{-x^2}
//! sum 2^n x^{2n+1} / (2n+1)!!` below [`SERIES_CUTOFF`] and a continued
//! fraction for `erfc` above it. Both stay well inside 1e-15 absolute error.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_CUTOFF: f64 = 2.5;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x < SERIES_CUTOFF {
        erf_series(x)
    } else {
        1.0 - erfc_continued_fraction(x)
    }
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`,
/// evaluated with the modified Lentz algorithm.
fn erfc_continued_fraction(x: f64) -> f64 {
    if x > 27.3 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = n as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Coefficients `c_k` of the Maclaurin expansion
/// `erf^-1(u) = sum_k c_k / (2k+1) * (sqrt(pi)/2 * u)^(2k+1)`.
///
/// `c_0 = 1`, `c_k = sum_{m<k} c_m c_{k-1-m} / ((m+1)(2m+1))`, which gives the
/// familiar `1, pi/12, 7 pi^2/480, ...` once the powers of `sqrt(pi)/2` are
/// folded in.
pub fn erf_inv_maclaurin_coefficients(terms: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(terms);
    for k in 0..terms {
        if k == 0 {
            c.push(1.0);
            continue;
        }
        let s = (0..k)
            .map(|m| c[m] * c[k - 1 - m] / ((m as f64 + 1.0) * (2.0 * m as f64 + 1.0)))
            .sum();
        c.push(s);
    }
    c
}

/// Truncated Maclaurin series of the inverse error function.
pub fn erf_inv_maclaurin(u: f64, terms: usize) -> f64 {
    let z = 0.5 * PI.sqrt() * u;
    let z2 = z * z;
    let mut pow = z;
    let mut sum = 0.0;
    for (k, ck) in erf_inv_maclaurin_coefficients(terms)
        .into_iter()
        .enumerate()
    {
        sum += ck / (2.0 * k as f64 + 1.0) * pow;
        pow *= z2;
    }
    sum
}

const SEED_TERMS: usize = 40;
const SEARCH_HI: f64 = 6.5;

/// Inverse error function on `(-1, 1)`.
///
/// The Maclaurin series supplies the starting point; a bracketed Newton
/// iteration on `erf` finishes the job, since the series alone converges far
/// too slowly near `|u| -> 1` (erf^-1(0.9999) is about 2.75).
pub fn erf_inv(u: f64) -> Result<f64> {
    if !(u.abs() < 1.0) {
        return Err(Error::ErfInvDomain(u));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    if u < 0.0 {
        return erf_inv(-u).map(|x| -x);
    }

    // Residual erf(x) - u, written through erfc where it keeps more digits.
    let one_minus_u = 1.0 - u;
    let residual = |x: f64| {
        if x >= 1.0 {
            one_minus_u - erfc(x)
        } else {
            erf(x) - u
        }
    };

    let (mut lo, mut hi) = (0.0_f64, SEARCH_HI);
    let mut x = erf_inv_maclaurin(u, SEED_TERMS).clamp(lo, hi);
    for _ in 0..200 {
        let r = residual(x);
        if r == 0.0 {
            return Ok(x);
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = FRAC_2_SQRT_PI * (-x * x).exp();
        let mut next = x - r / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 * x.max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Adaptive Simpson quadrature of 2/sqrt(pi) e^{-t^2} on [0, x].
    fn erf_quadrature(x: f64) -> f64 {
        fn f(t: f64) -> f64 {
            FRAC_2_SQRT_PI * (-t * t).exp()
        }
        fn simpson(a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn adapt(a: f64, b: f64, whole: f64, eps: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (l, r) = (simpson(a, m), simpson(m, b));
            if depth == 0 || (l + r - whole).abs() <= 15.0 * eps {
                l + r + (l + r - whole) / 15.0
            } else {
                adapt(a, m, l, eps / 2.0, depth - 1) + adapt(m, b, r, eps / 2.0, depth - 1)
            }
        }
        adapt(0.0, x, simpson(0.0, x), 1e-15, 50)
    }

    fn bisect_inverse(u: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if erf_quadrature(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn erf_examples() {
        assert_eq!(erf(0.0), 0.0);
        assert!((erf(6.0) - 1.0).abs() <= 1e-15);
        assert!((erf(1.0) - erf_quadrature(1.0)).abs() < 1e-12);
        assert!((erf(1.0) - 0.842_700_792_9).abs() < 1e-10);
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert_eq!(erf(f64::NEG_INFINITY), -1.0);
    }

    #[test]
    fn erf_matches_quadrature_across_cutoff() {
        for i in 0..=80 {
            let x = i as f64 * 0.05;
            assert!((erf(x) - erf_quadrature(x)).abs() < 1e-12, "x = {x}");
            assert!((erf(-x) + erf(x)).abs() == 0.0);
        }
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-18);
    }

    #[test]
    fn maclaurin_leading_coefficients() {
        // sqrt(pi)/2 (u + pi/12 u^3 + 7 pi^2/480 u^5 + ...)
        let c = erf_inv_maclaurin_coefficients(3);
        let s = PI.sqrt() / 2.0;
        let u3 = c[1] / 3.0 * s.powi(3) / s;
        let u5 = c[2] / 5.0 * s.powi(5) / s;
        assert!((u3 - PI / 12.0).abs() < 1e-15);
        assert!((u5 - 7.0 * PI * PI / 480.0).abs() < 1e-15);
        assert!((erf_inv_maclaurin(0.3, 40) - erf_inv(0.3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn erf_inv_examples() {
        assert_eq!(erf_inv(0.0).unwrap(), 0.0);
        assert!((erf_inv(erf(1.0)).unwrap() - 1.0).abs() < 1e-9);
        let oracle = bisect_inverse(0.9999);
        let x = erf_inv(0.9999).unwrap();
        assert!((x - oracle).abs() < 1e-6);
        assert!((x - 2.7511).abs() < 1e-4);
        assert!(matches!(erf_inv(1.0), Err(Error::ErfInvDomain(_))));
        assert!(erf_inv(-1.2).is_err());
        assert!(erf_inv(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(u in -0.999_999f64..0.999_999) {
            let x = erf_inv(u).unwrap();
            prop_assert!((erf(x) - u).abs() <= 1e-9);
        }

        #[test]
        fn erf_is_monotone(a in -7.0f64..7.0, d in 1e-6f64..1.0) {
            prop_assert!(erf(a) <= erf(a + d));
        }
    }
}
