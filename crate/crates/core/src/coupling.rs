//! Generalized coupling of a rough model with its mollified version.
//!
//! Three paths share one Brownian increment per step: `u` under the original
//! coefficients, `u^m` under the mollified ones, and `u*_m` under the
//! mollified coefficients plus the control drift `ζ (u - u*_m)` switched off
//! once the paths separate by more than `2Θ*`. The law argument is supplied
//! by a background ensemble of the original model.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::exec;
use crate::model::{mollify_with, Coefficients, MollifyConfig, SpectralModel};
use crate::noise::{lanes, NoiseStream};
use crate::particle::{step_state, step_state_with, LawPath, ParticleEnsemble, StepConfig, StepScratch};
use crate::stats::{linear_fit, mean};
use crate::table::{num, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingConfig {
    pub theta_star: f64,
    pub vartheta: f64,
    /// Tail exponent; `None` picks the middle of the admissible window.
    pub ell: Option<f64>,
    pub radius_r: f64,
    pub horizon_t: f64,
    /// Fixed mollification level; `None` calibrates the smallest level whose
    /// measured coefficient gap on the ball is below `theta_star`.
    pub mollify_level: Option<u32>,
    pub replicas: usize,
    pub dt: f64,
    pub taming: bool,
    pub g_min: f64,
    /// Common initial state; `None` starts at the origin.
    pub x0: Option<Vec<f64>>,
    pub background_particles: usize,
    pub keep_series: bool,
    pub mollify: MollifyConfig,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            theta_star: 0.1,
            vartheta: 0.25,
            ell: None,
            radius_r: 5.0,
            horizon_t: 1.0,
            mollify_level: None,
            replicas: 200,
            dt: 1e-3,
            taming: true,
            g_min: 1e-3,
            x0: None,
            background_particles: 500,
            keep_series: false,
            mollify: MollifyConfig::default(),
        }
    }
}

/// Upper end of the admissible tail exponents,
/// `(β + (1 - ϑ)/2 - 1) / 3`.
pub fn ell_upper(beta: f64, vartheta: f64) -> f64 {
    (beta + 0.5 * (1.0 - vartheta) - 1.0) / 3.0
}

impl CouplingConfig {
    pub fn zeta(&self) -> f64 {
        self.theta_star.powf(self.vartheta - 1.0)
    }

    pub fn ell_for(&self, model: &SpectralModel) -> f64 {
        self.ell
            .unwrap_or_else(|| 0.5 * ell_upper(model.constants.beta, self.vartheta))
    }

    pub fn validate(&self, model: &SpectralModel) -> Result<()> {
        let (alpha, beta) = (model.constants.alpha, model.constants.beta);
        let cap = alpha.min(2.0 * beta - 1.0);
        if !(self.vartheta > 0.0 && self.vartheta < cap) {
            return Err(arg(format!(
                "vartheta = {} must lie in (0, min(alpha, 2 beta - 1)) = (0, {cap})",
                self.vartheta
            )));
        }
        if !(self.theta_star > 0.0) {
            return Err(arg("theta_star must be positive"));
        }
        let hi = ell_upper(beta, self.vartheta);
        let ell = self.ell_for(model);
        if !(ell > 0.0 && ell < hi) {
            return Err(arg(format!("ell = {ell} must lie in (0, {hi})")));
        }
        if !(self.radius_r > 0.0) || !(self.horizon_t > 0.0) {
            return Err(arg("radius_r and horizon_t must be positive"));
        }
        if self.replicas == 0 || self.background_particles == 0 {
            return Err(arg("replicas and background_particles must be >= 1"));
        }
        if !(self.g_min > 0.0) {
            return Err(arg("g_min must be positive"));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != model.k {
                return Err(arg("x0 length must equal k"));
            }
        }
        if !model.is_diagonal() {
            return Err(Error::Unsupported("coupling runs need diagonal diffusion".into()));
        }
        self.step().validate()
    }

    fn step(&self) -> StepConfig {
        StepConfig {
            dt: self.dt,
            taming: self.taming,
            max_dt: crate::particle::DEFAULT_MAX_DT,
        }
    }
}

/// Coefficient gaps between a model and its mollification on the box
/// `[-R, R]^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollificationGap {
    pub theta1: f64,
    pub theta2: f64,
    /// `max(Θ1^{1/α}, Θ2^{1/β})`.
    pub theta_star: f64,
}

const GAP_GRID: usize = 40_001;

pub fn mollification_gap(model: &SpectralModel, mollified: &SpectralModel, radius: f64) -> Result<MollificationGap> {
    let (Coefficients::ModeWise(f), Coefficients::ModeWise(fm)) = (&model.coefficients, &mollified.coefficients) else {
        return Err(Error::Unsupported("gap needs mode-wise coefficients".into()));
    };
    let h = 2.0 * radius / (GAP_GRID - 1) as f64;
    let sup = |a: &crate::model::ModeProfile, b: &crate::model::ModeProfile| {
        (0..GAP_GRID)
            .map(|j| {
                let x = -radius + j as f64 * h;
                (a.eval(x) - b.eval(x)).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for i in 0..model.k {
        t1 += sup(&f.drift[i], &fm.drift[i]).powi(2);
        t2 += sup(&f.diffusion[i], &fm.diffusion[i]).powi(2);
    }
    let (theta1, theta2) = (t1.sqrt(), t2.sqrt());
    let c = &model.constants;
    Ok(MollificationGap {
        theta1,
        theta2,
        theta_star: theta1.powf(1.0 / c.alpha).max(theta2.powf(1.0 / c.beta)),
    })
}

/// Smallest level `n` whose gap `Θ*(n)` is at most `target`.
pub fn calibrate_level(
    model: &SpectralModel,
    target: f64,
    radius: f64,
    cfg: &MollifyConfig,
) -> Result<(u32, MollificationGap)> {
    let gap_at =
        |n: u32| -> Result<MollificationGap> { mollification_gap(model, &mollify_with(model, n, cfg)?, radius) };
    let mut hi = 1u32;
    let mut gap_hi = gap_at(hi)?;
    while gap_hi.theta_star > target {
        if hi >= 1 << 24 {
            return Err(Error::Mollification(format!(
                "no level up to {hi} brings the gap below {target}"
            )));
        }
        hi *= 2;
        gap_hi = gap_at(hi)?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let g = gap_at(mid)?;
        if g.theta_star <= target {
            hi = mid;
            gap_hi = g;
        } else {
            lo = mid;
        }
    }
    Ok((hi, gap_hi))
}

/// One replica of the triple.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaOutcome {
    /// `sup |u - u*_m|` over `[0, τ1 ∧ T]`.
    pub sup_diff: f64,
    /// First time `|u - u*_m| > 2Θ*` (infinite if never).
    pub tau: f64,
    /// First time `|u| > R` (infinite if never).
    pub tau1: f64,
    pub control_energy: f64,
    /// `sup_t (η(t) + ζ V(t))` along the active window.
    pub drift_excess: f64,
    /// `sup_t m(t)`, the quadratic-variation density of `V`.
    pub qv_density: f64,
    /// `V(t) = |u - u*_m|^2` per step on `[0, τ ∧ τ1 ∧ T]` when requested.
    #[serde(skip)]
    pub v_series: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub theta_star: f64,
    pub ell: f64,
    pub zeta: f64,
    pub mollify_level: u32,
    pub gap: MollificationGap,
    pub replicas: Vec<ReplicaOutcome>,
    /// Frequency of `sup_diff >= Θ*^{1+ℓ}`.
    pub exceed_freq: f64,
    pub mean_energy: f64,
    pub kl: f64,
    pub tv_bound: f64,
    /// `mean_energy / Θ*^{2ζ}` (exponent read as the control gain).
    pub energy_gain_reading: f64,
    /// `mean_energy / Θ*^{2ϑ}` (exponent read as ϑ).
    pub energy_vartheta_reading: f64,
}

impl CouplingReport {
    pub fn a_constant(&self) -> f64 {
        self.replicas.iter().map(|r| r.drift_excess).fold(0.0, f64::max)
    }

    pub fn b_constant(&self) -> f64 {
        self.replicas.iter().map(|r| r.qv_density).fold(0.0, f64::max)
    }
}

/// `kl = ½ mean(energy)`, `tv = min(1, sqrt(kl / 2))`.
pub fn girsanov_tv_bound(report: &CouplingReport) -> (f64, f64) {
    let energies: Vec<f64> = report.replicas.iter().map(|r| r.control_energy).collect();
    tv_from_energy(&energies)
}

pub fn tv_from_energy(energies: &[f64]) -> (f64, f64) {
    if energies.is_empty() {
        return (0.0, 0.0);
    }
    let kl = 0.5 * mean(energies);
    (kl, pinsker(kl))
}

pub fn pinsker(kl: f64) -> f64 {
    (kl / 2.0).sqrt().min(1.0)
}

/// Runs `cfg.replicas` replicas of the triple.
pub fn run_coupling_triple(model: &SpectralModel, cfg: &CouplingConfig, seed: u64) -> Result<CouplingReport> {
    cfg.validate(model)?;
    let (level, gap) = match cfg.mollify_level {
        Some(n) => (
            n,
            mollification_gap(model, &mollify_with(model, n, &cfg.mollify)?, cfg.radius_r)?,
        ),
        None => calibrate_level(model, cfg.theta_star, cfg.radius_r, &cfg.mollify)?,
    };
    if gap.theta_star > cfg.theta_star * (1.0 + 1e-12) {
        log::warn!(
            "mollification level {level} leaves a gap {:.3e} above theta_star {:.3e}",
            gap.theta_star,
            cfg.theta_star
        );
    }
    let mollified = mollify_with(model, level, &cfg.mollify)?;
    let step = cfg.step();
    let steps = step.steps_for(cfg.horizon_t)?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; model.k]);
    let root = NoiseStream::new(seed);
    let background = ParticleEnsemble::filled(cfg.background_particles, &x0)?;
    let law = LawPath::for_model(model, &background, steps, step, &root.lane(lanes::BACKGROUND))?;
    let noise = root.lane(lanes::REPLICA);
    let ctx = TripleContext {
        model,
        mollified: &mollified,
        law: &law,
        step,
        steps,
        zeta: cfg.zeta(),
        theta: cfg.theta_star,
        radius: cfg.radius_r,
        g_min: cfg.g_min,
        keep_series: cfg.keep_series,
        x0: &x0,
        noise: &noise,
    };
    let replicas = exec::try_map_indexed(cfg.replicas, |r| {
        ctx.run(r as u64)
            .map_err(|e| e.context(format!("coupling replica {r}")))
    })?;
    let ell = cfg.ell_for(model);
    let threshold = cfg.theta_star.powf(1.0 + ell);
    let exceed = replicas.iter().filter(|r| r.sup_diff >= threshold).count();
    let energies: Vec<f64> = replicas.iter().map(|r| r.control_energy).collect();
    let (kl, tv_bound) = tv_from_energy(&energies);
    let mean_energy = mean(&energies);
    let zeta = cfg.zeta();
    Ok(CouplingReport {
        theta_star: cfg.theta_star,
        ell,
        zeta,
        mollify_level: level,
        gap,
        exceed_freq: exceed as f64 / replicas.len() as f64,
        mean_energy,
        kl,
        tv_bound,
        energy_gain_reading: mean_energy / cfg.theta_star.powf(2.0 * zeta),
        energy_vartheta_reading: mean_energy / cfg.theta_star.powf(2.0 * cfg.vartheta),
        replicas,
    })
}

struct TripleContext<'a> {
    model: &'a SpectralModel,
    mollified: &'a SpectralModel,
    law: &'a LawPath,
    step: StepConfig,
    steps: u64,
    zeta: f64,
    theta: f64,
    radius: f64,
    g_min: f64,
    keep_series: bool,
    x0: &'a [f64],
    noise: &'a NoiseStream,
}

impl TripleContext<'_> {
    fn run(&self, replica: u64) -> Result<ReplicaOutcome> {
        let k = self.model.k;
        let dt = self.step.dt;
        let mut cursor = self.noise.cursor(replica, 0, self.model.m);
        let mut z = vec![0.0; self.model.m];
        let mut u = self.x0.to_vec();
        let mut um = self.x0.to_vec();
        let mut us = self.x0.to_vec();
        let mut s_orig = StepScratch::new(self.model);
        let mut s_moll = StepScratch::new(self.mollified);
        let mut s_star = StepScratch::new(self.mollified);
        let mut gm = vec![0.0; k];
        let mut fu = vec![0.0; k];
        let mut fs = vec![0.0; k];
        let mut gu = vec![0.0; k];
        let mut gs = vec![0.0; k];

        let mut out = ReplicaOutcome {
            sup_diff: 0.0,
            tau: f64::INFINITY,
            tau1: f64::INFINITY,
            control_energy: 0.0,
            drift_excess: 0.0,
            qv_density: 0.0,
            v_series: Vec::new(),
        };
        let mut active = true;
        let mut inside = norm(&u) <= self.radius;
        if !inside {
            out.tau1 = 0.0;
        }
        if self.keep_series {
            out.v_series.push(0.0);
        }
        for s in 0..self.steps {
            let t = s as f64 * dt;
            let mu = self.law.at(s);
            let diff: Vec<f64> = u.iter().zip(&us).map(|(a, b)| a - b).collect();

            if active {
                self.mollified.diffusion_diag_into(&um, mu, &mut gm);
                let mut e = 0.0;
                for (i, (&g, &d)) in gm.iter().zip(&diff).enumerate() {
                    if g.abs() < self.g_min {
                        return Err(Error::RightInverse {
                            mode: i + 1,
                            value: g.abs(),
                            g_min: self.g_min,
                            time: t,
                        });
                    }
                    let c = self.zeta * d / g;
                    e += c * c;
                }
                out.control_energy += dt * e;
            }
            if active && inside {
                // V = |Δ|^2, dV = η dt + dM with d<M> = m dt.
                self.model.drift_into(&u, mu, &mut fu);
                self.mollified.drift_into(&us, mu, &mut fs);
                self.model.diffusion_diag_into(&u, mu, &mut gu);
                self.mollified.diffusion_diag_into(&us, mu, &mut gs);
                let v: f64 = diff.iter().map(|d| d * d).sum();
                let pair: f64 = diff.iter().zip(fu.iter().zip(&fs)).map(|(d, (a, b))| d * (a - b)).sum();
                let g_sq: f64 = gu.iter().zip(&gs).map(|(a, b)| (a - b) * (a - b)).sum();
                let eta = 2.0 * pair - 2.0 * self.zeta * v + g_sq;
                out.drift_excess = out.drift_excess.max(eta + self.zeta * v);
                let qv: f64 = diff
                    .iter()
                    .zip(gu.iter().zip(&gs))
                    .map(|(d, (a, b))| 2.0 * d * (a - b))
                    .map(|c| c * c)
                    .sum();
                out.qv_density = out.qv_density.max(qv);
            }

            cursor.next_into(&mut z);
            step_state(self.model, &mut u, mu, &self.step, &z, &mut s_orig);
            step_state(self.mollified, &mut um, mu, &self.step, &z, &mut s_moll);
            let (zeta, on) = (self.zeta, active);
            step_state_with(self.mollified, &mut us, mu, &self.step, &z, &mut s_star, |_, b| {
                if on {
                    b.iter_mut().zip(&diff).for_each(|(bi, d)| *bi += zeta * d);
                }
            });
            if u.iter().chain(&um).chain(&us).any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    particle: replica as usize,
                    time: t + dt,
                });
            }

            let t1 = t + dt;
            let d_now = norm_diff(&u, &us);
            if inside {
                out.sup_diff = out.sup_diff.max(d_now);
                if norm(&u) > self.radius {
                    inside = false;
                    out.tau1 = t1;
                }
            }
            if active {
                debug_assert!(norm_diff(&diff, &vec![0.0; k]) <= 2.0 * self.theta);
                if d_now > 2.0 * self.theta {
                    active = false;
                    out.tau = t1;
                }
            }
            if self.keep_series && active && inside {
                out.v_series.push(d_now * d_now);
            }
        }
        Ok(out)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub theta_star: f64,
    pub ell: f64,
    pub replicas: usize,
    pub exceed_freq: f64,
    pub max_sup_diff: f64,
    pub mollify_level: u32,
    pub mean_energy: f64,
    pub kl: f64,
    pub tv_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailScan {
    pub rows: Vec<TailRow>,
    /// Slope of `log f` against `-Θ*^{-2ℓ}` on the nonzero rows.
    pub fitted_c2: Option<f64>,
    pub r2: Option<f64>,
    pub note: Option<String>,
}

impl TailScan {
    /// Frequencies never increase as `Θ*` decreases.
    pub fn nonincreasing(&self) -> bool {
        let mut rows: Vec<&TailRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.theta_star.total_cmp(&a.theta_star));
        rows.windows(2).all(|w| w[1].exceed_freq <= w[0].exceed_freq)
    }

    /// Columns `theta_star, ell, replicas, exceed_freq, fitted_c2, r2`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["theta_star", "ell", "replicas", "exceed_freq", "fitted_c2", "r2"]);
        let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "nan".into());
        for r in &self.rows {
            t.push(vec![
                num(r.theta_star),
                num(r.ell),
                r.replicas.to_string(),
                num(r.exceed_freq),
                opt(self.fitted_c2),
                opt(self.r2),
            ]);
        }
        t
    }
}

/// Exceedance frequencies over a list of `Θ*` values and the fitted tail
/// constant. Each `Θ*` uses its own seed lane so rows are independent.
pub fn tail_scan(model: &SpectralModel, base: &CouplingConfig, thetas: &[f64], seed: u64) -> Result<TailScan> {
    let mut distinct = thetas.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(arg("tail scan needs at least 3 distinct theta_star values"));
    }
    if base.replicas < 100 {
        return Err(arg("tail scan needs at least 100 replicas per theta_star"));
    }
    let mut rows = Vec::new();
    for (j, &theta) in thetas.iter().enumerate() {
        let cfg = CouplingConfig {
            theta_star: theta,
            keep_series: false,
            ..base.clone()
        };
        let rep = run_coupling_triple(model, &cfg, seed.wrapping_add(j as u64))
            .map_err(|e| e.context(format!("theta_star = {theta}")))?;
        rows.push(TailRow {
            theta_star: theta,
            ell: rep.ell,
            replicas: cfg.replicas,
            exceed_freq: rep.exceed_freq,
            max_sup_diff: rep.replicas.iter().map(|r| r.sup_diff).fold(0.0, f64::max),
            mollify_level: rep.mollify_level,
            mean_energy: rep.mean_energy,
            kl: rep.kl,
            tv_bound: rep.tv_bound,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.exceed_freq > 0.0)
        .map(|r| (-r.theta_star.powf(-2.0 * r.ell), r.exceed_freq.ln()))
        .unzip();
    let (fitted_c2, r2, note) = if xs.is_empty() {
        (
            None,
            None,
            Some("no exceedances; bound vacuously satisfied".to_string()),
        )
    } else {
        match linear_fit(&xs, &ys) {
            Ok(f) => (Some(f.slope), Some(f.r2), None),
            Err(_) => (None, None, Some("fewer than two nonzero rows; no fit".to_string())),
        }
    };
    Ok(TailScan {
        rows,
        fitted_c2,
        r2,
        note,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub r: f64,
    pub threshold: f64,
    pub freq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub rows: Vec<EnvelopeRow>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

/// Frequency of `sup_t (V(t) - e^{-λt} V(0)) >= A/λ + sqrt(B) λ^{-δ} R` per
/// `R`, and the fit `log f ≈ log C1 - C2 R^2`. Series are sampled every
/// `dt` from time 0.
pub fn concentration_envelope(
    series: &[Vec<f64>],
    dt: f64,
    lambda: f64,
    a: f64,
    b: f64,
    delta: f64,
    r_grid: &[f64],
) -> Result<EnvelopeReport> {
    if series.is_empty() || series.iter().all(|s| s.is_empty()) {
        return Err(arg("no series supplied"));
    }
    if !(lambda > 0.0) || a < 0.0 || b < 0.0 || !(delta > 0.0 && delta < 0.5) {
        return Err(arg("need lambda > 0, A >= 0, B >= 0 and delta in (0, 1/2)"));
    }
    let sups: Vec<f64> = series
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v0 = s[0];
            s.iter()
                .enumerate()
                .map(|(j, v)| v - (-lambda * j as f64 * dt).exp() * v0)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let n = sups.len() as f64;
    let rows: Vec<EnvelopeRow> = r_grid
        .iter()
        .map(|&r| {
            let threshold = a / lambda + b.sqrt() * lambda.powf(-delta) * r;
            let hits = sups.iter().filter(|&&s| s >= threshold && s > 0.0).count();
            EnvelopeRow {
                r,
                threshold,
                freq: hits as f64 / n,
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.freq > 0.0)
        .map(|r| (-r.r * r.r, r.freq.ln()))
        .unzip();
    let (c1, c2) = match linear_fit(&xs, &ys) {
        Ok(f) => (Some(f.intercept.exp()), Some(f.slope)),
        Err(_) => (None, None),
    };
    Ok(EnvelopeReport { rows, c1, c2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HolderParams;

    #[test]
    fn zeta_from_theta() {
        let cfg = CouplingConfig {
            theta_star: 0.01,
            vartheta: 0.25,
            ..CouplingConfig::default()
        };
        assert!((cfg.zeta() - 31.622776601683793).abs() < 1e-10);
    }

    #[test]
    fn pinsker_arithmetic() {
        assert_eq!(pinsker(0.02), 0.1);
        assert_eq!(pinsker(2.0), 1.0);
        assert_eq!(pinsker(5.0), 1.0);
        assert_eq!(tv_from_energy(&[0.0, 0.0]), (0.0, 0.0));
    }

    #[test]
    fn vartheta_window_enforced() {
        let m = SpectralModel::mf_holder(1, 0.0, HolderParams::default());
        let mut cfg = CouplingConfig::default();
        cfg.vartheta = 0.7;
        assert!(cfg.validate(&m).is_err());
        cfg.vartheta = 0.25;
        assert!(cfg.validate(&m).is_ok());
        cfg.ell = Some(0.5);
        assert!(cfg.validate(&m).is_err());
    }

    #[test]
    fn lipschitz_model_gives_identical_paths() {
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0);
        let cfg = CouplingConfig {
            replicas: 8,
            horizon_t: 0.5,
            x0: Some(vec![0.3]),
            ..CouplingConfig::default()
        };
        let r = run_coupling_triple(&m, &cfg, 4).unwrap();
        assert_eq!(r.gap.theta_star, 0.0);
        for rep in &r.replicas {
            assert_eq!(rep.sup_diff, 0.0);
            assert!(rep.tau.is_infinite());
            assert_eq!(rep.control_energy, 0.0);
        }
    }

    #[test]
    fn deterministic_envelope_has_no_exceedances() {
        let lambda = 2.0;
        let series: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..100).map(|j| 3.0 * (-lambda * j as f64 * 0.01).exp()).collect())
            .collect();
        let rep = concentration_envelope(&series, 0.01, lambda, 0.0, 0.0, 0.25, &[0.5, 1.0, 2.0]).unwrap();
        assert!(rep.rows.iter().all(|r| r.freq == 0.0));
    }
}
