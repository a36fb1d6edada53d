//! Time averages of a tagged path: SLLN moment decay, Poisson-equation
//! functionals, asymptotic variance and Kolmogorov-distance CLT checks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::exec;
use crate::lyapunov::{norm, LyapunovSpec};
use crate::measure::EmpiricalMeasure;
use crate::model::SpectralModel;
use crate::noise::{lanes, NoiseStream};
use crate::particle::{LawPath, ParticleEnsemble, StepConfig, TaggedPath};
use crate::stats::{ks_statistic, linear_fit, mean, normal_cdf, std_error, weighted_distance_to_point_mass};
use crate::table::{num, Table};

pub type PhiFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Observable `Φ` with weight `ℋ` and an optional known mean `(Φ, μ*)`.
#[derive(Clone)]
pub struct ObservableSpec {
    pub name: String,
    phi: Arc<PhiFn>,
    weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub declared_mean: Option<f64>,
}

impl std::fmt::Debug for ObservableSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObservableSpec")
            .field("name", &self.name)
            .field("declared_mean", &self.declared_mean)
            .finish()
    }
}

/// Default weight `ℋ(r) = 2 - 1/(1 + r)`: positive, increasing, bounded by 2.
fn default_weight(r: f64) -> f64 {
    2.0 - 1.0 / (1.0 + r)
}

impl ObservableSpec {
    pub fn new(name: impl Into<String>, phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            phi: Arc::new(phi),
            weight: Arc::new(default_weight),
            declared_mean: None,
        }
    }

    /// `Φ(x) = x_i` (zero-based mode index).
    pub fn coordinate(i: usize) -> Self {
        Self::new(format!("x_{}", i + 1), move |x| x[i])
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c).with_mean(c)
    }

    pub fn with_mean(mut self, m: f64) -> Self {
        self.declared_mean = Some(m);
        self
    }

    pub fn with_weight(mut self, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.weight = Arc::new(h);
        self
    }

    /// `a Φ + Ψ`.
    pub fn combine(a: f64, phi: &ObservableSpec, psi: &ObservableSpec) -> Self {
        let (p, q) = (phi.phi.clone(), psi.phi.clone());
        let mean = match (phi.declared_mean, psi.declared_mean) {
            (Some(m), Some(n)) => Some(a * m + n),
            _ => None,
        };
        Self {
            name: format!("{a}*{}+{}", phi.name, psi.name),
            phi: Arc::new(move |x| a * p(x) + q(x)),
            weight: phi.weight.clone(),
            declared_mean: mean,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::combine(a, self, &Self::constant(0.0))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }

    pub fn weight(&self, r: f64) -> f64 {
        (self.weight)(r)
    }

    /// `sup |Φ(x)| / ℋ(|x|)` over the sample points.
    pub fn weighted_norm(&self, sample: &EmpiricalMeasure) -> f64 {
        sample
            .points()
            .map(|x| self.eval(x).abs() / self.weight(norm(x)))
            .fold(0.0, f64::max)
    }

    /// Mean subtracted before any moment is taken.
    fn centre(&self) -> f64 {
        self.declared_mean.unwrap_or(0.0)
    }
}

/// `ψ_{t_j} = (1/t_j) Σ_{i<j} Φ(u_i) dt` for `j = 1..n`, where `path` holds
/// `n + 1` states of dimension `k` on a grid of step `dt`.
pub fn time_average(path: &[f64], k: usize, dt: f64, obs: &ObservableSpec) -> Result<Vec<f64>> {
    if k == 0 || path.len() < 2 * k || path.len() % k != 0 {
        return Err(arg("time average needs at least two states"));
    }
    let n = path.len() / k - 1;
    let mut acc = 0.0;
    Ok((1..=n)
        .map(|j| {
            acc += obs.eval(&path[(j - 1) * k..j * k]) * dt;
            acc / (j as f64 * dt)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggedConfig {
    pub dt: f64,
    /// Start of the tagged path; `None` starts at the origin.
    pub x0: Option<Vec<f64>>,
    /// Size of the background ensemble supplying the law.
    pub background: usize,
}

impl Default for TaggedConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            x0: None,
            background: 1000,
        }
    }
}

impl TaggedConfig {
    fn start(&self, k: usize) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(x) if x.len() == k => Ok(x.clone()),
            Some(_) => Err(arg("x0 length must equal k")),
            None => Ok(vec![0.0; k]),
        }
    }
}

fn law_for(model: &SpectralModel, x0: &[f64], steps: u64, cfg: &TaggedConfig, root: &NoiseStream) -> Result<LawPath> {
    let bg = ParticleEnsemble::filled(cfg.background.max(1), x0)?;
    LawPath::for_model(
        model,
        &bg,
        steps,
        StepConfig::new(cfg.dt),
        &root.lane(lanes::BACKGROUND),
    )
}

/// `∫_0^{t_j} Φ(u(s)) ds` at each grid step index, one row per replica.
fn running_integrals(
    model: &SpectralModel,
    obs: &ObservableSpec,
    grid_steps: &[u64],
    replicas: usize,
    cfg: &TaggedConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let step = StepConfig::new(cfg.dt);
    step.validate()?;
    let last = *grid_steps.iter().max().ok_or_else(|| arg("empty time grid"))?;
    let x0 = cfg.start(model.k)?;
    let root = NoiseStream::new(seed);
    let law = law_for(model, &x0, last, cfg, &root)?;
    let noise = root.lane(lanes::TAGGED);
    exec::try_map_indexed(replicas, |r| {
        let mut path = TaggedPath::new(model, &law, step, &noise, r as u64, &x0);
        let mut acc = 0.0;
        let mut out = vec![0.0; grid_steps.len()];
        for s in 1..=last {
            acc += obs.eval(&path.x) * cfg.dt;
            path.advance().map_err(|e| e.context(format!("tagged replica {r}")))?;
            for (o, &g) in out.iter_mut().zip(grid_steps) {
                if g == s {
                    *o = acc;
                }
            }
        }
        Ok(out)
    })
}

fn grid_steps(times: &[f64], dt: f64) -> Result<Vec<u64>> {
    let step = StepConfig::new(dt);
    times.iter().map(|&t| step.steps_for(t)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SllnReport {
    pub order: u32,
    pub times: Vec<f64>,
    /// `E |ψ_t - (Φ, μ*)|^{2k}`.
    pub moments: Vec<f64>,
    /// 95% half-width of each moment.
    pub ci: Vec<f64>,
    pub slope: Option<f64>,
    pub slope_ci: Option<(f64, f64)>,
    pub exact_zero: bool,
}

impl SllnReport {
    /// Columns `t, moment_2k, ci`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "moment_2k", "ci"]);
        for i in 0..self.times.len() {
            t.push(vec![num(self.times[i]), num(self.moments[i]), num(self.ci[i])]);
        }
        t
    }
}

/// Least-squares slope of `log E|ψ_t - (Φ, μ*)|^{2k}` against `log t`.
pub fn slln_moment_slope(
    model: &SpectralModel,
    obs: &ObservableSpec,
    order: u32,
    times: &[f64],
    replicas: usize,
    cfg: &TaggedConfig,
    seed: u64,
) -> Result<SllnReport> {
    if order == 0 {
        return Err(arg("moment order must be >= 1"));
    }
    if replicas < 200 {
        return Err(Error::StatisticalPower(format!(
            "{replicas} replicas; at least 200 required"
        )));
    }
    let gs = grid_steps(times, cfg.dt)?;
    let ints = running_integrals(model, obs, &gs, replicas, cfg, seed)?;
    let target = obs.centre();
    let p = 2 * order as i32;
    let mut moments = Vec::new();
    let mut ci = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let errs: Vec<f64> = ints.iter().map(|row| (row[j] / t - target).powi(p)).collect();
        moments.push(mean(&errs));
        ci.push(1.96 * std_error(&errs));
    }
    let exact_zero = moments.iter().all(|&m| m == 0.0);
    let (slope, slope_ci) = if exact_zero {
        (None, None)
    } else {
        let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
        let f = linear_fit(&xs, &ys)?;
        (
            Some(f.slope),
            Some((f.slope - 1.96 * f.slope_se, f.slope + 1.96 * f.slope_se)),
        )
    };
    Ok(SllnReport {
        order,
        times: times.to_vec(),
        moments,
        ci,
        slope,
        slope_ci,
        exact_zero,
    })
}

/// `δ̂ = 2kδ* - (2k-1)[δ0 + 2δ1²k + 2δ2²(k-1)]`.
pub fn slln_rate(v: &LyapunovSpec, order: u32) -> f64 {
    let k = order as f64;
    2.0 * k * v.delta_star
        - (2.0 * k - 1.0) * (v.delta0 + 2.0 * v.delta1 * v.delta1 * k + 2.0 * v.delta2 * v.delta2 * (k - 1.0))
}

/// Logs a warning and returns `false` when `δ̂ <= 0`.
pub fn check_slln_rate(v: &LyapunovSpec, order: u32) -> bool {
    let r = slln_rate(v, order);
    if r <= 0.0 {
        log::warn!("moment rate for order {order} is {r:.4}; the SLLN moment bound gives no decay");
    }
    r > 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoissonConfig {
    pub dt: f64,
    /// Integration horizon; `None` uses `8 / rate`.
    pub horizon: Option<f64>,
    /// Fitted mixing rate `δ̂`.
    pub rate: f64,
    /// Fitted mixing prefactor `M̂`.
    pub m_hat: f64,
    pub replicas: usize,
    pub centering_tol: f64,
    /// Subtract `(Φ, μ̂*)` instead of failing when it exceeds the tolerance.
    pub recenter: bool,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            horizon: None,
            rate: 1.0,
            m_hat: 1.0,
            replicas: 10000,
            centering_tol: 0.05,
            recenter: false,
        }
    }
}

impl PoissonConfig {
    fn horizon(&self) -> Result<f64> {
        if !(self.rate > 0.0) {
            return Err(arg("mixing rate must be positive"));
        }
        let h = self.horizon.unwrap_or(8.0 / self.rate);
        // Round to the time grid.
        Ok((h / self.dt).round().max(1.0) * self.dt)
    }
}

/// Observable centred against the sample, or a centering error.
fn centred(obs: &ObservableSpec, mu_star: &EmpiricalMeasure, cfg: &PoissonConfig) -> Result<ObservableSpec> {
    let m = mu_star.integrate(|x| obs.eval(x));
    if m.abs() <= cfg.centering_tol {
        return Ok(obs.clone());
    }
    if !cfg.recenter {
        return Err(Error::Centering {
            mean: m,
            tol: cfg.centering_tol,
        });
    }
    Ok(ObservableSpec::combine(1.0, obs, &ObservableSpec::constant(-m)).with_mean(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pi1Estimate {
    pub value: f64,
    pub std_error: f64,
    pub horizon: f64,
    /// `M̂ ‖Φ‖_ℋ e^{-δ̂ h} / δ̂`.
    pub tail_bound: f64,
}

/// `∫_0^h E Φ(u(t; x)) dt` for the one-body path in the stationary law
/// `μ̂*`.
pub fn poisson_pi1(
    model: &SpectralModel,
    obs: &ObservableSpec,
    x: &[f64],
    mu_star: &EmpiricalMeasure,
    cfg: &PoissonConfig,
    seed: u64,
) -> Result<Pi1Estimate> {
    if x.len() != model.k {
        return Err(arg("x length must equal k"));
    }
    let obs = centred(obs, mu_star, cfg)?;
    let h = cfg.horizon()?;
    let step = StepConfig::new(cfg.dt);
    let steps = step.steps_for(h)?;
    let law = LawPath::frozen(mu_star.summary());
    let noise = NoiseStream::new(seed).lane(lanes::TAGGED);
    let vals = exec::try_map_indexed(cfg.replicas.max(1), |r| {
        integrate_path(model, &law, step, &noise, r as u64, x, steps, &obs)
    })?;
    Ok(Pi1Estimate {
        value: mean(&vals),
        std_error: std_error(&vals),
        horizon: h,
        tail_bound: cfg.m_hat * obs.weighted_norm(mu_star) * (-cfg.rate * h).exp() / cfg.rate,
    })
}

#[allow(clippy::too_many_arguments)]
fn integrate_path(
    model: &SpectralModel,
    law: &LawPath,
    step: StepConfig,
    noise: &NoiseStream,
    index: u64,
    x: &[f64],
    steps: u64,
    obs: &ObservableSpec,
) -> Result<f64> {
    let mut path = TaggedPath::new(model, law, step, noise, index, x);
    let mut acc = 0.0;
    for _ in 0..steps {
        acc += obs.eval(&path.x) * step.dt;
        path.advance()?;
    }
    Ok(acc)
}

/// Two paths from `x` and `y` driven by the same increments; returns
/// `∫ Φ(u(t; x)) - Φ(u(t; y)) dt`.
#[allow(clippy::too_many_arguments)]
fn integrate_synchronous_difference(
    model: &SpectralModel,
    law: &LawPath,
    step: StepConfig,
    noise: &NoiseStream,
    index: u64,
    x: &[f64],
    y: &[f64],
    steps: u64,
    obs: &ObservableSpec,
) -> Result<f64> {
    let mut p = TaggedPath::new(model, law, step, noise, index, x);
    let mut q = TaggedPath::new(model, law, step, noise, index, y);
    let mut acc = 0.0;
    for _ in 0..steps {
        acc += (obs.eval(&p.x) - obs.eval(&q.x)) * step.dt;
        p.advance()?;
        q.advance()?;
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaConfig {
    pub poisson: PoissonConfig,
    /// Samples of the direct (martingale-increment) estimator.
    pub direct_samples: usize,
    /// Samples of the identity estimator.
    pub identity_samples: usize,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            poisson: PoissonConfig::default(),
            direct_samples: 8000,
            identity_samples: 40000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaEstimate {
    pub direct: f64,
    pub direct_se: f64,
    pub identity: f64,
    pub identity_se: f64,
}

impl LambdaEstimate {
    /// `|direct - identity| <= z * sqrt(se_d² + se_i²)`.
    pub fn agree(&self, z: f64) -> bool {
        (self.direct - self.identity).abs() <= z * self.direct_se.hypot(self.identity_se)
    }
}

/// `Λ²` twice: as `E|∫_0^1 Φ ds + Π1(u(1)) - Π1(x)|²` and as `2 ∫ Φ Π1 dμ*`,
/// both with `x ~ μ̂*`.
///
/// The direct estimator multiplies two conditionally independent copies of
/// the increment; each copy estimates `Π1(u(1)) - Π1(x)` with a pair of
/// synchronously driven paths.
pub fn pi2_and_lambda(
    model: &SpectralModel,
    obs: &ObservableSpec,
    mu_star: &EmpiricalMeasure,
    cfg: &LambdaConfig,
    seed: u64,
) -> Result<LambdaEstimate> {
    if mu_star.is_empty() {
        return Err(arg("empty invariant sample"));
    }
    let obs = centred(obs, mu_star, &cfg.poisson)?;
    let h = cfg.poisson.horizon()?;
    let step = StepConfig::new(cfg.poisson.dt);
    let steps = step.steps_for(h)?;
    let unit = step.steps_for(1.0)?;
    let law = LawPath::frozen(mu_star.summary());
    let root = NoiseStream::new(seed);
    let n = mu_star.len();

    let head = root.lane(lanes::TAGGED);
    let tail = [root.lane(lanes::REPLICA).lane(1), root.lane(lanes::REPLICA).lane(2)];
    let direct = exec::try_map_indexed(cfg.direct_samples, |i| -> Result<f64> {
        let x = mu_star.point(i % n);
        let mut p = TaggedPath::new(model, &law, step, &head, i as u64, x);
        let mut a = 0.0;
        for _ in 0..unit {
            a += obs.eval(&p.x) * step.dt;
            p.advance()?;
        }
        let mut prod = 1.0;
        for lane in &tail {
            let d = integrate_synchronous_difference(model, &law, step, lane, i as u64, &p.x, x, steps, &obs)?;
            prod *= a + d;
        }
        Ok(prod)
    })?;

    let ident_noise = root.lane(lanes::REPLICA).lane(3);
    let identity = exec::try_map_indexed(cfg.identity_samples, |i| -> Result<f64> {
        let x = mu_star.point(i % n);
        Ok(2.0 * obs.eval(x) * integrate_path(model, &law, step, &ident_noise, i as u64, x, steps, &obs)?)
    })?;

    Ok(LambdaEstimate {
        direct: mean(&direct),
        direct_se: std_error(&direct),
        identity: mean(&identity),
        identity_se: std_error(&identity),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltReport {
    pub lambda_sq: f64,
    pub times: Vec<f64>,
    /// Kolmogorov distance to `N(0, Λ²)`, or the weighted distance to `δ_0`
    /// when `Λ = 0`.
    pub ks: Vec<f64>,
    /// 95% sampling half-width `1.358 / sqrt(n)`.
    pub ci: Vec<f64>,
    pub degenerate: bool,
    /// Log-log slope of the distance against `t`.
    pub exponent: Option<f64>,
    pub pass: bool,
}

impl CltReport {
    /// Columns `t, ks, ci, lambda_hat`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "ks", "ci", "lambda_hat"]);
        let lam = self.lambda_sq.sqrt();
        for i in 0..self.times.len() {
            t.push(vec![num(self.times[i]), num(self.ks[i]), num(self.ci[i]), num(lam)]);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CltConfig {
    pub tagged: TaggedConfig,
    pub replicas: usize,
    /// Distance threshold applied at the last grid time.
    pub ks_max: f64,
    /// `Λ²` below this is treated as zero.
    pub degenerate_tol: f64,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            tagged: TaggedConfig::default(),
            replicas: 2000,
            ks_max: 0.05,
            degenerate_tol: 1e-12,
        }
    }
}

/// Empirical law of `t^{-1/2} ∫_0^t (Φ(u(s)) - (Φ, μ*)) ds` against
/// `N(0, Λ²)` on each grid time.
pub fn clt_ks_check(
    model: &SpectralModel,
    obs: &ObservableSpec,
    lambda_sq: f64,
    times: &[f64],
    cfg: &CltConfig,
    seed: u64,
) -> Result<CltReport> {
    if cfg.replicas < 1000 {
        return Err(Error::StatisticalPower(format!(
            "{} replicas; at least 1000 required",
            cfg.replicas
        )));
    }
    if !(lambda_sq >= 0.0) {
        return Err(arg("lambda_sq must be nonnegative"));
    }
    let gs = grid_steps(times, cfg.tagged.dt)?;
    let ints = running_integrals(model, obs, &gs, cfg.replicas, &cfg.tagged, seed)?;
    let centre = obs.centre();
    let degenerate = lambda_sq < cfg.degenerate_tol;
    let sd = lambda_sq.sqrt();
    let ks: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let mut z: Vec<f64> = ints.iter().map(|row| (row[j] - centre * t) / t.sqrt()).collect();
            z.sort_by(f64::total_cmp);
            if degenerate {
                weighted_distance_to_point_mass(&z)
            } else {
                ks_statistic(&z, |v| normal_cdf(v, sd))
            }
        })
        .collect();
    let half = 1.358 / (cfg.replicas as f64).sqrt();
    let exponent = if ks.iter().all(|&d| d > 0.0) && times.len() >= 2 {
        let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = ks.iter().map(|d| d.ln()).collect();
        linear_fit(&xs, &ys).ok().map(|f| f.slope)
    } else {
        None
    };
    let pass = ks.last().is_some_and(|&d| d < cfg.ks_max);
    Ok(CltReport {
        lambda_sq,
        times: times.to_vec(),
        ci: vec![half; ks.len()],
        ks,
        degenerate,
        exponent,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpMomentReport {
    pub horizons: Vec<f64>,
    /// Mean of `sup_{t <= T} e^{c1 V(u(t))}` per horizon.
    pub means: Vec<f64>,
    pub finite: bool,
    /// Largest ratio between consecutive horizons.
    pub max_ratio: f64,
    pub stable: bool,
}

/// Mean running supremum of `e^{c1 V(u)}` over the tagged replicas.
pub fn exponential_moment_check(
    model: &SpectralModel,
    v: &LyapunovSpec,
    c1: f64,
    horizons: &[f64],
    replicas: usize,
    cfg: &TaggedConfig,
    seed: u64,
) -> Result<ExpMomentReport> {
    if !(c1 > 0.0) || replicas == 0 {
        return Err(arg("need c1 > 0 and replicas >= 1"));
    }
    let gs = grid_steps(horizons, cfg.dt)?;
    let last = *gs.iter().max().ok_or_else(|| arg("empty horizon list"))?;
    let x0 = cfg.start(model.k)?;
    let root = NoiseStream::new(seed);
    let law = law_for(model, &x0, last, cfg, &root)?;
    let step = StepConfig::new(cfg.dt);
    let noise = root.lane(lanes::TAGGED);
    let sups = exec::try_map_indexed(replicas, |r| -> Result<Vec<f64>> {
        let mut path = TaggedPath::new(model, &law, step, &noise, r as u64, &x0);
        let mut best = v.value(&path.x);
        let mut out = vec![0.0; gs.len()];
        for s in 1..=last {
            path.advance()?;
            best = best.max(v.value(&path.x));
            for (o, &g) in out.iter_mut().zip(&gs) {
                if g == s {
                    *o = (c1 * best).exp();
                }
            }
        }
        Ok(out)
    })?;
    let means: Vec<f64> = (0..gs.len())
        .map(|j| mean(&sups.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect();
    let finite = means.iter().all(|m| m.is_finite());
    let max_ratio = means.windows(2).map(|w| w[1] / w[0]).fold(1.0, f64::max);
    Ok(ExpMomentReport {
        horizons: horizons.to_vec(),
        finite,
        stable: finite && max_ratio <= 1.5,
        max_ratio,
        means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_average_is_constant() {
        let path = vec![0.3; 11];
        let psi = time_average(&path, 1, 0.1, &ObservableSpec::constant(1.0)).unwrap();
        assert!(psi.iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(time_average(&[1.0], 1, 0.1, &ObservableSpec::constant(1.0)).is_err());
    }

    #[test]
    fn average_is_linear() {
        let path: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let phi = ObservableSpec::coordinate(0);
        let psi = ObservableSpec::new("sq", |x| x[0] * x[0]);
        let comb = ObservableSpec::combine(2.5, &phi, &psi);
        let a = time_average(&path, 1, 0.01, &phi).unwrap();
        let b = time_average(&path, 1, 0.01, &psi).unwrap();
        let c = time_average(&path, 1, 0.01, &comb).unwrap();
        for i in 0..c.len() {
            assert!((c[i] - (2.5 * a[i] + b[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn slln_rate_formula() {
        let v = LyapunovSpec::quadratic_for_ou(1.0, 1.0, 1);
        assert_eq!(slln_rate(&v, 1), 3.0);
        assert_eq!(slln_rate(&v, 2), 5.0);
        let bad = LyapunovSpec { delta_star: 0.1, ..v };
        assert!(!check_slln_rate(&bad, 1));
    }

    #[test]
    fn zero_observable_gives_zero() {
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0);
        let mu = EmpiricalMeasure::uniform(1, vec![-0.5, 0.0, 0.5]).unwrap();
        let cfg = PoissonConfig {
            replicas: 4,
            ..PoissonConfig::default()
        };
        let zero = ObservableSpec::constant(0.0);
        let p = poisson_pi1(&m, &zero, &[1.0], &mu, &cfg, 1).unwrap();
        assert_eq!(p.value, 0.0);
        let l = pi2_and_lambda(
            &m,
            &zero,
            &mu,
            &LambdaConfig {
                poisson: cfg,
                direct_samples: 4,
                identity_samples: 4,
            },
            1,
        )
        .unwrap();
        assert_eq!((l.direct, l.identity), (0.0, 0.0));
    }

    #[test]
    fn uncentred_observable_rejected() {
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0);
        let mu = EmpiricalMeasure::uniform(1, vec![1.0, 1.0]).unwrap();
        let err = poisson_pi1(
            &m,
            &ObservableSpec::coordinate(0),
            &[0.0],
            &mu,
            &PoissonConfig::default(),
            1,
        );
        assert!(matches!(err, Err(Error::Centering { .. })));
    }
}
