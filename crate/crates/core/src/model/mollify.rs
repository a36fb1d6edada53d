//! Pasch-Hausdorff Lipschitz envelopes `F^n(x) = inf_y [F(y) + n |x - y|]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Coefficients, ModeProfile, ModeWiseField, SpectralModel};
use crate::error::{arg, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MollifyConfig {
    /// Grid window is `[-half_width, half_width]` on every axis.
    pub half_width: f64,
    /// Grid points per axis (odd, so the origin is a node).
    pub points: usize,
}

impl Default for MollifyConfig {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            points: 16385,
        }
    }
}

/// Envelope of a scalar profile tabulated on a uniform grid.
pub struct EnvelopeTable {
    base: ModeProfile,
    lipschitz: f64,
    lo: f64,
    h: f64,
    env: Vec<f64>,
}

impl fmt::Debug for EnvelopeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvelopeTable")
            .field("lipschitz", &self.lipschitz)
            .field("lo", &self.lo)
            .field("h", &self.h)
            .field("points", &self.env.len())
            .finish()
    }
}

impl EnvelopeTable {
    pub fn build(base: ModeProfile, n: f64, cfg: &MollifyConfig) -> Result<Self> {
        if !(cfg.half_width > 0.0) || cfg.points < 3 {
            return Err(arg("mollify window needs half_width > 0 and >= 3 points"));
        }
        let lo = -cfg.half_width;
        let h = 2.0 * cfg.half_width / (cfg.points - 1) as f64;
        let grid = |j: usize| lo + j as f64 * h;
        let vals: Vec<f64> = (0..cfg.points).map(|j| base.eval(grid(j))).collect();
        if let Some(j) = vals.iter().position(|v| !v.is_finite() || v.abs() > 1e12) {
            return Err(Error::Mollification(format!(
                "component is non-finite or unbounded at y = {} (value {})",
                grid(j),
                vals[j]
            )));
        }
        let inc: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for j in 0..inc.len() {
            let far = inc
                .get(j.wrapping_sub(2))
                .copied()
                .unwrap_or(0.0)
                .max(inc.get(j + 2).copied().unwrap_or(0.0));
            if inc[j] > 1e-9 && inc[j] > 4.0 * far {
                if let Some(at) = jump_location(&base, grid(j), grid(j + 1), vals[j], vals[j + 1]) {
                    return Err(Error::Mollification(format!(
                        "component is discontinuous near y = {at}"
                    )));
                }
            }
        }
        let step = n * h;
        let mut env = vals;
        for j in 1..env.len() {
            env[j] = env[j].min(env[j - 1] + step);
        }
        for j in (0..env.len() - 1).rev() {
            env[j] = env[j].min(env[j + 1] + step);
        }
        Ok(Self {
            base,
            lipschitz: n,
            lo,
            h,
            env,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn hi(&self) -> f64 {
        self.lo + (self.env.len() - 1) as f64 * self.h
    }

    pub fn eval(&self, x: f64) -> f64 {
        let f = self.base.eval(x);
        let n = self.lipschitz;
        let last = self.env.len() - 1;
        let cand = if x <= self.lo {
            self.env[0] + n * (self.lo - x)
        } else if x >= self.hi() {
            self.env[last] + n * (x - self.hi())
        } else {
            let j = (((x - self.lo) / self.h) as usize).min(last - 1);
            let yl = self.lo + j as f64 * self.h;
            let yr = yl + self.h;
            (self.env[j] + n * (x - yl)).min(self.env[j + 1] + n * (yr - x))
        };
        if f.is_nan() || cand < f - 1e-12 * (1.0 + f.abs()) {
            cand
        } else {
            f
        }
    }
}

/// Bisects a large increment; a jump that survives shrinking the bracket
/// to rounding level is a discontinuity.
fn jump_location(base: &ModeProfile, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Option<f64> {
    let initial = (fb - fa).abs();
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = base.eval(mid);
        if !fm.is_finite() {
            return Some(mid);
        }
        if (fm - fa).abs() >= (fb - fm).abs() {
            b = mid;
            fb = fm;
        } else {
            a = mid;
            fa = fm;
        }
    }
    ((fb - fa).abs() > 0.5 * initial && initial > 1e-6).then_some(0.5 * (a + b))
}

/// Replaces every drift and diffusion profile by its `n`-Lipschitz envelope
/// using the default window.
pub fn mollify(model: &SpectralModel, n: u32) -> Result<SpectralModel> {
    mollify_with(model, n, &MollifyConfig::default())
}

pub fn mollify_with(model: &SpectralModel, n: u32, cfg: &MollifyConfig) -> Result<SpectralModel> {
    if n == 0 {
        return Err(arg("mollification level must be >= 1"));
    }
    let field = match &model.coefficients {
        Coefficients::ModeWise(f) => f,
        Coefficients::Dense(_) => return Err(Error::Unsupported("mollification needs mode-wise coefficients".into())),
    };
    let wrap = |p: &ModeProfile| -> Result<ModeProfile> {
        Ok(ModeProfile::Envelope(Arc::new(EnvelopeTable::build(
            p.clone(),
            n as f64,
            cfg,
        )?)))
    };
    let drift = field
        .drift
        .iter()
        .enumerate()
        .map(|(i, p)| wrap(p).map_err(|e| e.context(format!("drift mode {}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    let diffusion = field
        .diffusion
        .iter()
        .enumerate()
        .map(|(i, p)| wrap(p).map_err(|e| e.context(format!("diffusion mode {}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    let mut out = model.clone();
    out.name = format!("{}~n{}", model.name, n);
    out.coefficients = Coefficients::ModeWise(ModeWiseField {
        drift,
        mean_coupling: field.mean_coupling.clone(),
        diffusion,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PowTerm, ScalarExpr};

    fn table(e: ScalarExpr, n: f64) -> EnvelopeTable {
        EnvelopeTable::build(e.into(), n, &MollifyConfig::default()).unwrap()
    }

    fn sqrt_abs() -> ScalarExpr {
        ScalarExpr::abs_power(1.0, 0.5)
    }

    #[test]
    fn lipschitz_function_is_fixed() {
        let t = table(ScalarExpr::abs_power(1.0, 1.0), 1.0);
        for i in -50..=50 {
            let x = i as f64 * 0.173;
            assert_eq!(t.eval(x), x.abs());
        }
    }

    #[test]
    fn sqrt_envelope_examples() {
        let t = table(sqrt_abs(), 1.0);
        assert!((t.eval(0.01) - 0.01).abs() < 1e-12);
        assert_eq!(t.eval(0.0), 0.0);
    }

    #[test]
    fn envelope_matches_brute_force() {
        let t = table(sqrt_abs(), 3.0);
        let ys: Vec<f64> = (0..=200_000).map(|j| -10.0 + j as f64 * 1e-4).collect();
        for &x in &[-2.3, -0.05, 0.02, 0.4, 1.7, 12.0] {
            let brute = ys
                .iter()
                .map(|y| y.abs().sqrt() + 3.0 * (x - y).abs())
                .fold(x.abs().sqrt(), f64::min);
            assert!((t.eval(x) - brute).abs() < 5e-3, "x = {x}: {} vs {brute}", t.eval(x));
        }
    }

    #[test]
    fn discontinuity_rejected() {
        let step = ScalarExpr {
            sign_pow: vec![PowTerm {
                coef: 1.0,
                exp: 0.0,
                cap: None,
            }],
            ..ScalarExpr::default()
        };
        let err = EnvelopeTable::build(step.into(), 1.0, &MollifyConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Mollification(_)));
    }

    #[test]
    fn rough_but_continuous_accepted() {
        table(ScalarExpr::abs_power(1.0, 0.1), 2.0);
    }

    #[test]
    fn unbounded_rejected() {
        let pole = ScalarExpr::abs_power(1.0, -1.0);
        assert!(EnvelopeTable::build(pole.into(), 1.0, &MollifyConfig::default()).is_err());
    }
}
