//! Descriptive statistics, correlations and goodness-of-fit distances.

use crate::analytic::erf;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Pearson correlation. NaN when either input has zero variance or the
/// lengths disagree.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() != ys.len() || xs.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// 1-based ranks with ties given their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    pearson(&ranks(xs), &ranks(ys))
}

fn central_moment(xs: &[f64], m: f64, p: i32) -> f64 {
    xs.iter().map(|x| (x - m).powi(p)).sum::<f64>() / xs.len() as f64
}

/// Moment-based sample skewness `m3 / m2^1.5`.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    central_moment(xs, m, 3) / central_moment(xs, m, 2).powf(1.5)
}

/// `m4 / m2^2 - 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let m2 = central_moment(xs, m, 2);
    central_moment(xs, m, 4) / (m2 * m2) - 3.0
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `xs` and `cdf`.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + erf((x - mu) / (sigma * std::f64::consts::SQRT_2)))
}

pub fn ks_normal(xs: &[f64], mu: f64, sigma: f64) -> f64 {
    ks_distance(xs, |x| normal_cdf(x, mu, sigma))
}

pub fn ks_uniform(xs: &[f64], lo: f64, hi: f64) -> f64 {
    ks_distance(xs, |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// Least-squares scale through the origin: `argmin_s sum (y - s x)^2`.
pub fn lsq_scale(xs: &[f64], ys: &[f64]) -> f64 {
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_hand_computed() {
        // sxy = 6, sxx = 10, syy = 6
        let r = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 5.0, 4.0, 5.0]);
        assert!((r - 6.0 / 60f64.sqrt()).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // sxy = -1, sxx = 2, syy = 2
        let r = pearson(&[0.0, 1.0, 2.0], &[1.0, 2.0, 0.0]);
        assert!((r + 0.5).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_nan());
        let xs = [3.0, 1.5, 8.25, 4.0];
        assert_eq!(pearson(&xs, &xs), 1.0);
    }

    #[test]
    fn spearman_and_ranks() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[9.0, 4.0, 1.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_std(&[2.0, 2.0]), 0.0);
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let sym = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert_eq!(skewness(&sym), 0.0);
        // m2 = 2, m4 = 6.8
        assert!((excess_kurtosis(&sym) - (6.8 / 4.0 - 3.0)).abs() < 1e-15);
    }

    #[test]
    fn ks_examples() {
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_uniform(&grid, 0.0, 1.0) - 0.0005).abs() < 1e-12);
        assert!(ks_normal(&grid, 0.5, 1.0 / 12f64.sqrt()) > 0.03);
        assert!((normal_cdf(0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lsq() {
        assert!((lsq_scale(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-15);
    }
}
