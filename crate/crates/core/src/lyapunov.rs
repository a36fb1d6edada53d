//! Radial Lyapunov functions `V(x) = phi(|x|)` and their dissipation constants.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

/// Radial profile `phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `phi(r) = r^p`, `p >= 1`. `p = 2` is the squared norm.
    Power { p: f64 },
}

impl Profile {
    pub fn quadratic() -> Self {
        Profile::Power { p: 2.0 }
    }

    pub fn phi(&self, r: f64) -> f64 {
        match *self {
            Profile::Power { p } if p == 2.0 => r * r,
            Profile::Power { p } => r.powf(p),
        }
    }

    pub fn dphi(&self, r: f64) -> f64 {
        match *self {
            Profile::Power { p } if p == 2.0 => 2.0 * r,
            Profile::Power { p } => p * r.powf(p - 1.0),
        }
    }

    pub fn d2phi(&self, r: f64) -> f64 {
        match *self {
            Profile::Power { p } if p == 2.0 => 2.0,
            Profile::Power { p } => p * (p - 1.0) * r.powf(p - 2.0),
        }
    }

    /// `lim_{r -> 0} phi'(r) / r`, finite only when `p >= 2`.
    fn radial_curvature_at_origin(&self) -> Option<f64> {
        match *self {
            Profile::Power { p } if p == 2.0 => Some(2.0),
            Profile::Power { p } if p > 2.0 => Some(0.0),
            Profile::Power { .. } => None,
        }
    }
}

/// Lyapunov function with the dissipation constants used by the ergodic and
/// limit experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    pub profile: Profile,
    /// Contraction rate target for the pair dissipation condition.
    pub delta: f64,
    pub delta_star: f64,
    pub delta0: f64,
    pub c: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub kappa: f64,
}

impl LyapunovSpec {
    /// `V = |x|^2` with constants matching a linear drift `-a x` and additive
    /// noise of intensity `sigma` on `k` modes.
    pub fn quadratic_for_ou(a: f64, sigma: f64, k: usize) -> Self {
        Self {
            profile: Profile::quadratic(),
            delta: 2.0 * a,
            delta_star: 2.0 * a,
            delta0: sigma * sigma * k as f64,
            c: 1.0,
            delta1: 0.0,
            delta2: 0.0,
            kappa: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Profile::Power { p } = self.profile;
        if !(p >= 1.0) {
            return Err(arg(format!("Lyapunov power must be >= 1, got {p}")));
        }
        if !(self.c > 0.0) {
            return Err(arg("Lyapunov constant c must be positive"));
        }
        if !(self.delta_star > 0.0) || self.delta0 < 0.0 {
            return Err(arg("need delta_star > 0 and delta0 >= 0"));
        }
        if !(self.kappa > 0.0) {
            return Err(arg("kappa must be positive"));
        }
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        if self.profile.phi(0.0) != 0.0 {
            return Err(arg("phi(0) must vanish"));
        }
        if grid.windows(2).any(|w| self.profile.phi(w[1]) < self.profile.phi(w[0])) {
            return Err(arg("phi must be nondecreasing"));
        }
        Ok(())
    }

    /// `c*`: `c^2` when `c >= 1`, else `c`.
    pub fn c_star(&self) -> f64 {
        if self.c >= 1.0 {
            self.c * self.c
        } else {
            self.c
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.profile.phi(norm(x))
    }

    /// `V(x - y)`.
    pub fn value_diff(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self.profile {
            Profile::Power { p } if p == 2.0 => r2,
            _ => self.profile.phi(r2.sqrt()),
        }
    }

    /// `V(c x)`.
    pub fn value_scaled(&self, x: &[f64]) -> f64 {
        self.profile.phi(self.c * norm(x))
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        if r == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let s = self.profile.dphi(r) / r;
        out.iter_mut().zip(x).for_each(|(o, xi)| *o = s * xi);
    }

    /// `tr(Hess V(x) * G)` for a symmetric `k x k` row-major `G`.
    ///
    /// Returns `None` where the Hessian is singular (origin with `p < 2`).
    pub fn hessian_trace(&self, x: &[f64], g: &[f64]) -> Option<f64> {
        let k = x.len();
        let trace: f64 = (0..k).map(|i| g[i * k + i]).sum();
        let r = norm(x);
        if r == 0.0 {
            return self.profile.radial_curvature_at_origin().map(|h| h * trace);
        }
        let mut xgx = 0.0;
        for i in 0..k {
            for j in 0..k {
                xgx += x[i] * g[i * k + j] * x[j];
            }
        }
        let along = xgx / (r * r);
        Some(self.profile.d2phi(r) * along + self.profile.dphi(r) / r * (trace - along))
    }

    /// Smallest `M` with `V(x - y) <= M [V(c x) + V(c y)]` over the sampled
    /// pairs.
    pub fn pair_domination_constant<'a>(&self, pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> f64 {
        pairs
            .into_iter()
            .filter_map(|(x, y)| {
                let den = self.value_scaled(x) + self.value_scaled(y);
                (den > 0.0).then(|| self.value_diff(x, y) / den)
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_hessian_trace() {
        let v = LyapunovSpec::quadratic_for_ou(1.0, 1.0, 2);
        let g = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(v.hessian_trace(&[0.3, -0.4], &g), Some(4.0));
        assert_eq!(v.hessian_trace(&[0.0, 0.0], &g), Some(4.0));
    }

    #[test]
    fn power_hessian_matches_finite_difference() {
        let v = LyapunovSpec {
            profile: Profile::Power { p: 3.0 },
            ..LyapunovSpec::quadratic_for_ou(1.0, 1.0, 2)
        };
        let x = [0.7, -0.2];
        let h = 1e-4;
        let f = |a: f64, b: f64| v.value(&[a, b]);
        let dxx = (f(x[0] + h, x[1]) - 2.0 * f(x[0], x[1]) + f(x[0] - h, x[1])) / (h * h);
        let dyy = (f(x[0], x[1] + h) - 2.0 * f(x[0], x[1]) + f(x[0], x[1] - h)) / (h * h);
        let got = v.hessian_trace(&x, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((got - (dxx + dyy)).abs() < 1e-5);
        assert_eq!(
            LyapunovSpec {
                profile: Profile::Power { p: 1.5 },
                ..v.clone()
            }
            .hessian_trace(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]),
            None
        );
    }

    #[test]
    fn c_star_case_split() {
        let mut v = LyapunovSpec::quadratic_for_ou(1.0, 1.0, 1);
        v.c = 2.0;
        assert_eq!(v.c_star(), 4.0);
        v.c = 0.5;
        assert_eq!(v.c_star(), 0.5);
    }

    #[test]
    fn pair_domination_for_quadratic() {
        // |x - y|^2 <= 2 (|x|^2 + |y|^2)
        let v = LyapunovSpec::quadratic_for_ou(1.0, 1.0, 1);
        let pts: Vec<[f64; 1]> = (-20..=20).map(|i| [i as f64 * 0.25]).collect();
        let pairs: Vec<(&[f64], &[f64])> = pts
            .iter()
            .flat_map(|a| pts.iter().map(move |b| (&a[..], &b[..])))
            .collect();
        let m = v.pair_domination_constant(pairs);
        assert!(m <= 2.0 + 1e-12 && m > 1.9);
    }
}
