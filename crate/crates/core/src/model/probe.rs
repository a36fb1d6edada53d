//! Sampling-based checks of the coercivity, growth, weak-monotonicity and
//! Hölder conditions, plus a numerical Osgood test of the modulus.

use serde::Serialize;

use super::{energy_norm_sq, MeasureSummary, ModulusSpec, SpectralModel};
use crate::error::{arg, Result};
use crate::exec;
use crate::lyapunov::norm;
use crate::noise::{lanes, NoiseStream};

/// Margins within this absolute slack count as satisfied.
const MARGIN_TOL: f64 = 1e-9;

pub const OSGOOD_EPSILONS: [f64; 3] = [1e-2, 1e-4, 1e-6];
pub const OSGOOD_THRESHOLD: f64 = 50.0;

#[derive(Clone, Debug)]
pub struct Probe {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: MeasureSummary,
    pub nu: MeasureSummary,
}

impl Probe {
    pub fn diagonal(x: Vec<f64>, mu: MeasureSummary) -> Self {
        Self {
            y: x.clone(),
            x,
            nu: mu.clone(),
            mu,
        }
    }

    fn distance(&self) -> f64 {
        norm_diff(&self.x, &self.y)
    }
}

/// Worst (largest) value of `lhs - rhs` over the probes that entered a
/// clause. Nonpositive means the clause held everywhere it was checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Margin {
    pub worst: f64,
    pub at: Option<usize>,
    pub checked: usize,
}

impl Margin {
    fn empty() -> Self {
        Self {
            worst: f64::NEG_INFINITY,
            at: None,
            checked: 0,
        }
    }

    fn absorb(&mut self, value: f64, index: usize) {
        self.checked += 1;
        if value > self.worst || value.is_nan() {
            self.worst = value;
            self.at = Some(index);
        }
    }

    fn merge(&mut self, other: &Margin) {
        self.checked += other.checked;
        if other.worst > self.worst || other.worst.is_nan() {
            self.worst = other.worst;
            self.at = other.at;
        }
    }

    pub fn holds(&self) -> bool {
        self.checked == 0 || self.worst <= MARGIN_TOL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OsgoodDiagnostic {
    pub epsilons: [f64; 3],
    /// `∫_eps^1 dr / G(r)` for each epsilon.
    pub integrals: [f64; 3],
    pub divergent: bool,
    /// `G(r) / sqrt(r)` at `r = 1e-12`.
    pub sqrt_ratio: f64,
}

impl OsgoodDiagnostic {
    /// Divergence needs positive increments and either a large integral or
    /// increments that do not shrink faster than geometrically.
    pub fn evaluate(modulus: &ModulusSpec) -> Self {
        let mut integrals = [0.0; 3];
        let mut upper = 1.0f64;
        let mut acc = 0.0;
        for (slot, &eps) in integrals.iter_mut().zip(&OSGOOD_EPSILONS) {
            acc += log_simpson(|r| 1.0 / modulus.eval(r), eps, upper, 2000);
            *slot = acc;
            upper = eps;
        }
        let d1 = integrals[1] - integrals[0];
        let d2 = integrals[2] - integrals[1];
        let divergent =
            d1 > 0.0 && d2 > 0.0 && (integrals[2] > OSGOOD_THRESHOLD || d2 >= 0.5 * d1 || integrals[2].is_infinite());
        let r = 1e-12;
        Self {
            epsilons: OSGOOD_EPSILONS,
            integrals,
            divergent,
            sqrt_ratio: modulus.eval(r) / r.sqrt(),
        }
    }
}

/// `∫_a^b h(r) dr` by Simpson's rule in `s = ln r`.
fn log_simpson(h: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let (sa, sb) = (a.ln(), b.ln());
    let n = intervals + intervals % 2;
    let step = (sb - sa) / n as f64;
    let w = |s: f64| s.exp() * h(s.exp());
    let mut sum = w(sa) + w(sb);
    for i in 1..n {
        let coef = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += coef * w(sa + i as f64 * step);
    }
    sum * step / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub probes: usize,
    pub local_pairs: usize,
    pub coercivity: Margin,
    pub growth_linear: Margin,
    pub growth_coefficients: Margin,
    pub monotone_drift: Margin,
    pub monotone_diffusion: Margin,
    pub holder_drift: Margin,
    pub holder_diffusion: Margin,
    pub osgood: OsgoodDiagnostic,
}

impl AssumptionReport {
    pub fn coercive_and_growth(&self) -> bool {
        self.coercivity.holds() && self.growth_linear.holds() && self.growth_coefficients.holds()
    }

    pub fn weak_monotone(&self) -> bool {
        self.monotone_drift.holds() && self.monotone_diffusion.holds() && self.osgood.divergent
    }

    pub fn holder(&self) -> bool {
        self.holder_drift.holds() && self.holder_diffusion.holds()
    }

    /// Coercivity and growth plus one of the two continuity conditions.
    pub fn pass(&self) -> bool {
        self.coercive_and_growth() && (self.weak_monotone() || self.holder())
    }
}

#[derive(Default)]
struct Partial {
    local: bool,
    coercivity: Margin,
    growth_linear: Margin,
    growth_coefficients: Margin,
    monotone_drift: Margin,
    monotone_diffusion: Margin,
    holder_drift: Margin,
    holder_diffusion: Margin,
}

/// Evaluates every clause on every probe; local clauses only on probes with
/// `|x - y| <= 1` and `d(mu, nu) <= 1`, where `d` is the distance between
/// the summary means.
pub fn probe_assumptions(model: &SpectralModel, probes: &[Probe]) -> Result<AssumptionReport> {
    if probes.is_empty() {
        return Err(arg("probe set is empty"));
    }
    model.validate()?;
    for p in probes {
        if p.x.len() != model.k || p.y.len() != model.k {
            return Err(arg("probe dimension does not match the model"));
        }
    }
    let parts = exec::try_map_indexed(probes.len(), |i| probe_one(model, &probes[i], i))?;

    let mut report = AssumptionReport {
        probes: probes.len(),
        local_pairs: 0,
        coercivity: Margin::empty(),
        growth_linear: Margin::empty(),
        growth_coefficients: Margin::empty(),
        monotone_drift: Margin::empty(),
        monotone_diffusion: Margin::empty(),
        holder_drift: Margin::empty(),
        holder_diffusion: Margin::empty(),
        osgood: OsgoodDiagnostic::evaluate(&model.modulus),
    };
    for p in &parts {
        report.local_pairs += p.local as usize;
        report.coercivity.merge(&p.coercivity);
        report.growth_linear.merge(&p.growth_linear);
        report.growth_coefficients.merge(&p.growth_coefficients);
        report.monotone_drift.merge(&p.monotone_drift);
        report.monotone_diffusion.merge(&p.monotone_diffusion);
        report.holder_drift.merge(&p.holder_drift);
        report.holder_diffusion.merge(&p.holder_diffusion);
    }
    Ok(report)
}

fn probe_one(model: &SpectralModel, p: &Probe, index: usize) -> Result<Partial> {
    let c = &model.constants;
    let mut part = Partial {
        coercivity: Margin::empty(),
        growth_linear: Margin::empty(),
        growth_coefficients: Margin::empty(),
        monotone_drift: Margin::empty(),
        monotone_diffusion: Margin::empty(),
        holder_drift: Margin::empty(),
        holder_diffusion: Margin::empty(),
        ..Partial::default()
    };

    for (x, mu) in [(&p.x, &p.mu), (&p.y, &p.nu)] {
        let mu_norm = mu.total_norm();
        let xb2 = energy_norm_sq(x);
        let xu = norm(x);
        let lhs = model.linear_pairing(x, x);
        let rhs = c.lambda1 * (xu * xu + mu_norm * mu_norm) - c.lambda2 * xb2.powf(0.5 * model.coercivity_p) + c.big_m;
        part.coercivity.absorb(lhs - rhs, index);

        // |nu Λ x|_{B*}^2 = nu^2 |x|_B^2
        let a_dual = model.nu * model.nu * xb2;
        part.growth_linear
            .absorb(a_dual - (c.lambda2 * (xb2 + mu_norm * mu_norm) + c.big_m), index);

        let mut f = vec![0.0; model.k];
        model.nonlinear_drift_into(x, mu, &mut f);
        let g = model.eval_diffusion(x, mu)?;
        let f_norm = norm(&f);
        if !f_norm.is_finite() {
            return Err(crate::error::Error::ModelEvaluation {
                what: "drift",
                index: f.iter().position(|v| !v.is_finite()).unwrap_or(0),
                x: x.clone(),
            });
        }
        let lhs = f_norm.max(g.hs_norm());
        part.growth_coefficients
            .absorb(lhs - (c.lambda2 * (xu + mu_norm) + c.big_m), index);
    }

    let dist = p.distance();
    let d = p.mu.mean_distance(&p.nu);
    if dist <= 1.0 && d <= 1.0 {
        part.local = true;
        let delta: Vec<f64> = p.x.iter().zip(&p.y).map(|(a, b)| a - b).collect();
        let a_pair = 2.0 * model.linear_pairing(&delta, &delta);

        let mut fx = vec![0.0; model.k];
        let mut fy = vec![0.0; model.k];
        model.nonlinear_drift_into(&p.x, &p.mu, &mut fx);
        model.nonlinear_drift_into(&p.y, &p.nu, &mut fy);
        let f_pair: f64 = fx.iter().zip(&fy).zip(&delta).map(|((a, b), dl)| (a - b) * dl).sum();

        let gx = model.eval_diffusion(&p.x, &p.mu)?;
        let gy = model.eval_diffusion(&p.y, &p.nu)?;
        let g_diff: f64 = gx
            .data
            .iter()
            .zip(&gy.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();

        let r2 = dist * dist;
        let modulus = model.modulus.eval(r2.min(1.0));
        let mono = c.lambda1 * (modulus + d * d);
        part.monotone_drift.absorb((a_pair - mono).max(f_pair - mono), index);
        part.monotone_diffusion
            .absorb(g_diff * g_diff - c.lambda2 * (modulus + d * d), index);

        let a_rhs = c.lambda1 * (r2 + d * d);
        let f_rhs = c.lambda1 * (dist.powf(c.alpha + 1.0) + d * d);
        part.holder_drift.absorb((a_pair - a_rhs).max(f_pair - f_rhs), index);
        part.holder_diffusion
            .absorb(g_diff - c.lambda2 * (dist.powf(c.beta) + d), index);
    }
    Ok(part)
}

fn norm_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn unit(stream: &NoiseStream, index: u64, counter: u64) -> f64 {
    (stream.uniform_u64(index, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic probe set: `x` uniform in `[-radius, radius]^k`, `y` within
/// distance 1 of `x` at log-uniform scales down to `1e-4`, and summary means
/// within distance 1 of each other.
pub fn random_probes(k: usize, count: usize, radius: f64, seed: u64) -> Vec<Probe> {
    let stream = NoiseStream::new(seed).lane(lanes::INIT);
    (0..count)
        .map(|i| {
            let i = i as u64;
            let mut c = 0u64;
            let mut next = || {
                c += 1;
                unit(&stream, i, c)
            };
            let x: Vec<f64> = (0..k).map(|_| radius * (2.0 * next() - 1.0)).collect();
            let mut dir: Vec<f64> = (0..k).map(|_| 2.0 * next() - 1.0).collect();
            let n = norm(&dir).max(1e-12);
            let scale = 10f64.powf(-4.0 * next());
            dir.iter_mut().for_each(|v| *v *= scale / n);
            let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
            let mean: Vec<f64> = (0..k).map(|_| 0.5 * radius * (2.0 * next() - 1.0)).collect();
            let shift = next() / (k as f64).sqrt();
            let mean2: Vec<f64> = mean.iter().map(|m| m + shift * (2.0 * next() - 1.0)).collect();
            let spread = radius * next();
            let m1 = mean.iter().map(|v| v * v).sum::<f64>() + spread;
            let m2 = mean2.iter().map(|v| v * v).sum::<f64>() + spread;
            Probe {
                x,
                y,
                mu: MeasureSummary::new(mean, m1),
                nu: MeasureSummary::new(mean2, m2),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HolderParams;

    #[test]
    fn ou_passes_all_clauses() {
        let m = SpectralModel::mf_ou(3, 0.5, 1.0, 0.5, 1.0);
        let r = probe_assumptions(&m, &random_probes(3, 2000, 5.0, 7)).unwrap();
        assert!(r.pass(), "{r:#?}");
        assert!(r.weak_monotone() && r.holder());
        assert!(r.local_pairs > 1000);
    }

    #[test]
    fn diagonal_probes_have_zero_pair_margins() {
        let m = SpectralModel::mf_ou(2, 1.0, 1.0, 0.3, 1.0);
        let probes: Vec<Probe> = (0..10)
            .map(|i| {
                Probe::diagonal(
                    vec![i as f64, -0.5 * i as f64],
                    MeasureSummary::new(vec![0.1, 0.2], 1.0),
                )
            })
            .collect();
        let r = probe_assumptions(&m, &probes).unwrap();
        assert_eq!(r.monotone_drift.worst, 0.0);
        assert_eq!(r.holder_drift.worst, 0.0);
        assert_eq!(r.monotone_diffusion.worst, 0.0);
        assert_eq!(r.holder_diffusion.worst, 0.0);
    }

    #[test]
    fn empty_probe_set_rejected() {
        assert!(probe_assumptions(&SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0), &[]).is_err());
    }

    #[test]
    fn osgood_classification() {
        let lin = OsgoodDiagnostic::evaluate(&ModulusSpec::linear());
        assert!(lin.divergent);
        let ln_eps = -(1e-6f64).ln();
        assert!((lin.integrals[2] - ln_eps).abs() < 1e-6);
        assert!(OsgoodDiagnostic::evaluate(&ModulusSpec::log_lipschitz()).divergent);
        assert!(!OsgoodDiagnostic::evaluate(&ModulusSpec::power(0.5)).divergent);
        assert!(!OsgoodDiagnostic::evaluate(&ModulusSpec::holder(0.6, 0.8)).divergent);
    }

    #[test]
    fn holder_model_satisfies_holder_clauses() {
        let m = SpectralModel::mf_holder(2, 0.1, HolderParams::default());
        let r = probe_assumptions(&m, &random_probes(2, 3000, 4.0, 11)).unwrap();
        assert!(r.holder(), "{r:#?}");
        assert!(r.coercive_and_growth(), "{r:#?}");
        assert!(!r.osgood.divergent);
    }

    #[test]
    fn inflated_drift_violates_holder_clause() {
        let mut m = SpectralModel::mf_ou(1, 0.0, -3.0, 0.0, 1.0);
        m.constants.lambda1 = 0.1;
        let r = probe_assumptions(&m, &random_probes(1, 500, 2.0, 3)).unwrap();
        assert!(!r.holder_drift.holds());
    }
}
