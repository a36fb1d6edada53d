//! Small estimators shared by the experiments.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::noise::NoiseStream;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Linear interpolation between order statistics of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    pub n: usize,
}

/// Ordinary least squares `y ≈ intercept + slope · x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InsufficientSignal(format!("{n} points cannot be fitted")));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientSignal("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if n > 2 {
        (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
        slope_se,
        n,
    })
}

pub fn normal_cdf(z: f64, sd: f64) -> f64 {
    Normal::new(0.0, sd).expect("positive sd").cdf(z)
}

/// Two-sided normal quantile `z_{1 - a/2}`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// `sup_z |F_n(z) - F(z)|` for a sorted sample.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let f = cdf(z);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `sup_z (|z| ∧ 1) |F_n(z) - 1{z >= 0}|` for a sorted sample.
pub fn weighted_distance_to_point_mass(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, &z) in sorted.iter().enumerate() {
        let w = z.abs().min(1.0);
        let target = if z >= 0.0 { 1.0 } else { 0.0 };
        // Left and right limits of the empirical CDF at z.
        let left = i as f64 / n;
        let right = (i + 1) as f64 / n;
        let left_target = if z > 0.0 { 1.0 } else { 0.0 };
        worst = worst
            .max(w * (right - target).abs())
            .max(w * (left - left_target).abs());
    }
    worst
}

/// Percentile bootstrap interval (2.5%, 97.5%) of `stat` over resamples of
/// `values`.
pub fn bootstrap_interval(
    values: &[f64],
    stat: impl Fn(&[f64]) -> f64,
    draws: usize,
    stream: &NoiseStream,
) -> (f64, f64) {
    let n = values.len();
    let mut buf = vec![0.0; n];
    let mut out: Vec<f64> = (0..draws)
        .map(|d| {
            for (j, b) in buf.iter_mut().enumerate() {
                let r = stream.uniform_u64(d as u64, j as u64);
                *b = values[(r % n as u64) as usize];
            }
            stat(&buf)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    (quantile_sorted(&out, 0.025), quantile_sorted(&out, 0.975))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let sample: Vec<f64> = (0..n)
            .map(|i| Normal::new(0.0, 1.0).unwrap().inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(ks_statistic(&sample, |z| normal_cdf(z, 1.0)) <= 0.5 / n as f64 + 1e-8);
    }

    #[test]
    fn point_mass_distance() {
        assert_eq!(weighted_distance_to_point_mass(&[0.0, 0.0, 0.0]), 0.0);
        let d = weighted_distance_to_point_mass(&[-2.0, 2.0]);
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&s, 0.5), 1.5);
        assert_eq!(quantile_sorted(&s, 1.0), 3.0);
    }
}
