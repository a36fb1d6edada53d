//! Invariant measures, Lyapunov decay and exponential mixing.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::exec;
use crate::lyapunov::LyapunovSpec;
use crate::measure::{optimal_pair_costs, quasi_distance_with_cap, EmpiricalMeasure, DEFAULT_ASSIGNMENT_CAP};
use crate::model::SpectralModel;
use crate::noise::{lanes, NoiseStream};
use crate::particle::{lyapunov_generator, Integrator, ParticleEnsemble, StepConfig};
use crate::stats::{bootstrap_interval, linear_fit, mean, std_error};
use crate::table::{num, Table};

/// Offset between the two seeds of the consistency check.
const SECOND_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InvariantConfig {
    pub particles: usize,
    pub burn_in: f64,
    pub dt: f64,
    /// Standard deviation of the centred Gaussian start.
    pub init_std: f64,
    /// Points used by the two-seed consistency check (`0` skips it).
    pub check_points: usize,
    pub check_draws: usize,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        Self {
            particles: 2000,
            burn_in: 20.0,
            dt: 1e-3,
            init_std: 1.0,
            check_points: 256,
            check_draws: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Consistency {
    /// Mean `Π_V` between matching chunks of the two seeds' estimates.
    pub distance: f64,
    /// Mean `Π_V` between disjoint chunks of the same estimate.
    pub spread: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantEstimate {
    #[serde(skip)]
    pub measure: EmpiricalMeasure,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub consistency: Option<Consistency>,
}

fn evolve_from_gaussian(model: &SpectralModel, cfg: &InvariantConfig, seed: u64) -> Result<ParticleEnsemble> {
    let root = NoiseStream::new(seed);
    let mut ens = ParticleEnsemble::gaussian(
        cfg.particles,
        &vec![0.0; model.k],
        cfg.init_std,
        &root.lane(lanes::INIT),
    )?;
    let step = StepConfig::new(cfg.dt);
    let steps = step.steps_for(cfg.burn_in)?;
    let mut integ = Integrator::new(model, cfg.particles, step, &root.lane(lanes::ENSEMBLE), 0)?;
    for _ in 0..steps {
        integ
            .step(model, &mut ens)
            .map_err(|e| e.context("invariant burn-in"))?;
    }
    Ok(ens)
}

/// Runs the ensemble for `burn_in` and returns its snapshot as `μ̂*`.
pub fn estimate_invariant(model: &SpectralModel, cfg: &InvariantConfig, seed: u64) -> Result<InvariantEstimate> {
    if cfg.particles == 0 || !(cfg.burn_in > 0.0) {
        return Err(arg("need particles >= 1 and burn_in > 0"));
    }
    let ens = evolve_from_gaussian(model, cfg, seed)?;
    let mut est = InvariantEstimate {
        mean: ens.mean(),
        variance: (0..model.k).map(|i| ens.variance(i)).collect(),
        measure: ens.to_measure(),
        consistency: None,
    };
    if cfg.check_points > 0 {
        let other = evolve_from_gaussian(model, cfg, seed.wrapping_add(SECOND_SEED))?;
        let c = consistency(&est.measure, &other.to_measure(), cfg)?;
        if !c.consistent {
            log::warn!(
                "invariant estimates from two seeds differ: Π_V = {:.4e} vs bootstrap spread {:.4e}",
                c.distance,
                c.spread
            );
        }
        est.consistency = Some(c);
    }
    Ok(est)
}

fn consistency(a: &EmpiricalMeasure, b: &EmpiricalMeasure, cfg: &InvariantConfig) -> Result<Consistency> {
    let v = LyapunovSpec::quadratic_for_ou(1.0, 0.0, a.dim());
    let n = cfg
        .check_points
        .min(a.len().min(b.len()) / 2)
        .min(DEFAULT_ASSIGNMENT_CAP);
    if n == 0 {
        return Err(arg("consistency check needs at least two particles"));
    }
    let chunk = |m: &EmpiricalMeasure, j: usize| {
        EmpiricalMeasure::uniform(m.dim(), m.raw()[j * n * m.dim()..(j + 1) * n * m.dim()].to_vec())
    };
    let pairs = cfg.check_draws.max(1).min(a.len().min(b.len()) / (2 * n));
    let across = exec::try_map_indexed(pairs, |j| {
        quasi_distance_with_cap(&chunk(a, j)?, &chunk(b, j)?, &v, DEFAULT_ASSIGNMENT_CAP)
    })?;
    let distance = mean(&across);
    // Disjoint chunk pairs within each estimate calibrate the sampling noise.
    let spreads = exec::try_map_indexed(2 * pairs, |d| {
        let m = if d < pairs { a } else { b };
        let j = d % pairs;
        quasi_distance_with_cap(&chunk(m, 2 * j)?, &chunk(m, 2 * j + 1)?, &v, DEFAULT_ASSIGNMENT_CAP)
    })?;
    let spread = mean(&spreads);
    Ok(Consistency {
        distance,
        spread,
        consistent: distance <= 3.0 * spread,
    })
}

/// Burn-in should cover several relaxation times.
pub fn burn_in_adequate(burn_in: f64, rate: f64) -> bool {
    burn_in * rate >= 5.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingConfig {
    pub t_end: f64,
    pub dt: f64,
    pub grid_step: f64,
    pub bootstrap_draws: usize,
    /// Rate the fit is compared against, if any.
    pub expected_rate: Option<f64>,
    /// Relative tolerance on the rate.
    pub tolerance: f64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            t_end: 3.0,
            dt: 1e-3,
            grid_step: 0.25,
            bootstrap_draws: 200,
            expected_rate: None,
            tolerance: 0.1,
        }
    }
}

impl MixingConfig {
    fn grid(&self) -> Result<(StepConfig, u64, u64)> {
        let step = StepConfig::new(self.dt);
        let steps = step.steps_for(self.t_end)?;
        let every = step.steps_for(self.grid_step)?;
        if every == 0 || steps % every != 0 {
            return Err(arg("t_end must be a multiple of grid_step"));
        }
        Ok((step, steps, every))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingReport {
    pub times: Vec<f64>,
    pub pi_v: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub fit_window: Vec<bool>,
    pub rate: Option<f64>,
    pub prefactor: Option<f64>,
    pub r2: Option<f64>,
    pub pass: bool,
}

impl MixingReport {
    /// Columns `t, pi_v, ci_low, ci_high, fit_window_flag`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t", "pi_v", "ci_low", "ci_high", "fit_window_flag"]);
        for i in 0..self.times.len() {
            t.push(vec![
                num(self.times[i]),
                num(self.pi_v[i]),
                num(self.ci_low[i]),
                num(self.ci_high[i]),
                u8::from(self.fit_window[i]).to_string(),
            ]);
        }
        t
    }
}

/// Length of the fit window: the series up to the first point followed by
/// three consecutive non-decreasing grid points, stopping early at values
/// that are zero or below `1e-12` of the first one.
pub fn fit_window_len(pi: &[f64]) -> usize {
    let Some(&first) = pi.first() else { return 0 };
    if !(first > 0.0) {
        return 0;
    }
    let floor = 1e-12 * first;
    let mut end = pi.len();
    for j in 0..pi.len() {
        if !(pi[j] > floor) {
            end = j;
            break;
        }
        if j + 3 < pi.len() && (1..=3).all(|d| pi[j + d] >= pi[j + d - 1]) {
            end = j + 1;
            break;
        }
    }
    end
}

/// `Π_V` between the ensembles started from `nu0` and `mu0` under
/// synchronous coupling, on the grid `0, grid_step, .., t_end`.
pub fn mixing_series(
    model: &SpectralModel,
    v: &LyapunovSpec,
    nu0: &EmpiricalMeasure,
    mu0: &EmpiricalMeasure,
    cfg: &MixingConfig,
    seed: u64,
) -> Result<MixingReport> {
    if nu0.len() != mu0.len() {
        return Err(arg("mixing needs ensembles of equal size"));
    }
    let (step, steps, every) = cfg.grid()?;
    let mut a = ParticleEnsemble::from_measure(nu0)?;
    let mut b = ParticleEnsemble::from_measure(mu0)?;
    let root = NoiseStream::new(seed);
    let mut integ = Integrator::new(model, a.len(), step, &root.lane(lanes::ENSEMBLE), 0)?;
    let mut snaps = vec![(a.to_measure(), b.to_measure())];
    for s in 1..=steps {
        integ.draw();
        let (ma, mb) = (a.summary(), b.summary());
        integ
            .apply(model, &mut a, &ma)
            .and_then(|_| integ.apply(model, &mut b, &mb))
            .map_err(|e| e.context("mixing pair"))?;
        if s % every == 0 {
            snaps.push((a.to_measure(), b.to_measure()));
        }
    }
    let boot = root.lane(lanes::BOOTSTRAP);
    let draws = cfg.bootstrap_draws;
    let stats = exec::try_map_indexed(snaps.len(), |j| -> Result<(f64, f64, f64)> {
        let costs = exec::sequential(|| optimal_pair_costs(&snaps[j].0, &snaps[j].1, v, DEFAULT_ASSIGNMENT_CAP))?;
        let m = mean(&costs);
        let (lo, hi) = if draws > 0 {
            bootstrap_interval(&costs, mean, draws, &boot.lane(j as u64))
        } else {
            (m, m)
        };
        Ok((m, lo, hi))
    })?;
    let times: Vec<f64> = (0..snaps.len()).map(|j| j as f64 * every as f64 * step.dt).collect();
    let window = fit_window_len(&stats.iter().map(|s| s.0).collect::<Vec<_>>());
    Ok(MixingReport {
        times,
        pi_v: stats.iter().map(|s| s.0).collect(),
        ci_low: stats.iter().map(|s| s.1).collect(),
        ci_high: stats.iter().map(|s| s.2).collect(),
        fit_window: (0..snaps.len()).map(|j| j < window).collect(),
        rate: None,
        prefactor: None,
        r2: None,
        pass: false,
    })
}

/// Fits `log Π_V ≈ log C - δ t` on the pre-noise-floor window.
pub fn fit_mixing_rate(
    model: &SpectralModel,
    v: &LyapunovSpec,
    nu0: &EmpiricalMeasure,
    mu0: &EmpiricalMeasure,
    cfg: &MixingConfig,
    seed: u64,
) -> Result<MixingReport> {
    let mut rep = mixing_series(model, v, nu0, mu0, cfg, seed)?;
    fit_report(&mut rep, cfg)?;
    Ok(rep)
}

fn fit_report(rep: &mut MixingReport, cfg: &MixingConfig) -> Result<()> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rep
        .times
        .iter()
        .zip(&rep.pi_v)
        .zip(&rep.fit_window)
        .filter(|(_, &w)| w)
        .map(|((t, p), _)| (*t, p.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientSignal(format!(
            "noise floor reached after {} usable grid points",
            xs.len()
        )));
    }
    let f = linear_fit(&xs, &ys)?;
    let rate = -f.slope;
    rep.rate = Some(rate);
    rep.prefactor = Some(f.intercept.exp());
    rep.r2 = Some(f.r2);
    rep.pass = match cfg.expected_rate {
        Some(target) => (rate - target).abs() <= cfg.tolerance * target.abs(),
        None => rate > 0.0,
    };
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayConfig {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub grid_step: f64,
    pub replicas: usize,
    /// Standard errors added to the bound before flagging a violation.
    pub z: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            x0: vec![2.0],
            t_end: 3.0,
            dt: 1e-3,
            grid_step: 0.25,
            replicas: 2000,
            z: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    /// Monte Carlo `E V(c u(t))`.
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    /// `V(c x0) e^{-c* δ* t} + δ0 / (c* δ*)`.
    pub bound: Vec<f64>,
    /// `bound - estimate`.
    pub margin: Vec<f64>,
    /// `mean LV + δ* mean V - δ0`, nonpositive when the generator condition
    /// holds on average.
    pub generator_excess: Vec<f64>,
    pub bound_holds: bool,
    pub generator_holds: bool,
    pub pass: bool,
}

/// Compares the Monte Carlo moment `E V(c u(t))` against the comparison
/// bound and checks the averaged generator inequality at the grid times.
pub fn lyapunov_decay_check(
    model: &SpectralModel,
    v: &LyapunovSpec,
    cfg: &DecayConfig,
    seed: u64,
) -> Result<DecayReport> {
    v.validate()?;
    if cfg.x0.len() != model.k || cfg.replicas < 2 {
        return Err(arg("x0 must have length k and replicas >= 2"));
    }
    let step = StepConfig::new(cfg.dt);
    let steps = step.steps_for(cfg.t_end)?;
    let every = step.steps_for(cfg.grid_step)?;
    let mut ens = ParticleEnsemble::filled(cfg.replicas, &cfg.x0)?;
    let mut integ = Integrator::new(
        model,
        cfg.replicas,
        step,
        &NoiseStream::new(seed).lane(lanes::ENSEMBLE),
        0,
    )?;
    let rate = v.c_star() * v.delta_star;
    let v0 = v.value_scaled(&cfg.x0);
    let mut rep = DecayReport {
        times: Vec::new(),
        estimate: Vec::new(),
        std_error: Vec::new(),
        bound: Vec::new(),
        margin: Vec::new(),
        generator_excess: Vec::new(),
        bound_holds: true,
        generator_holds: true,
        pass: false,
    };
    let record = |ens: &ParticleEnsemble, rep: &mut DecayReport| -> Result<()> {
        let t = ens.time;
        let mu = ens.summary();
        let vals: Vec<f64> = (0..ens.len()).map(|i| v.value_scaled(ens.state(i))).collect();
        let plain: Vec<f64> = (0..ens.len()).map(|i| v.value(ens.state(i))).collect();
        let lv = exec::try_map_indexed(ens.len(), |i| lyapunov_generator(model, v, ens.state(i), &mu))?;
        let (m, se) = (mean(&vals), std_error(&vals));
        let bound = v0 * (-rate * t).exp() + v.delta0 / rate;
        let excess = mean(&lv) + v.delta_star * mean(&plain) - v.delta0;
        rep.bound_holds &= m - cfg.z * se <= bound;
        rep.generator_holds &= excess <= 1e-9 * (1.0 + v.delta0 + v.delta_star * mean(&plain));
        rep.times.push(t);
        rep.estimate.push(m);
        rep.std_error.push(se);
        rep.bound.push(bound);
        rep.margin.push(bound - m);
        rep.generator_excess.push(excess);
        Ok(())
    };
    record(&ens, &mut rep)?;
    for s in 1..=steps {
        integ
            .step(model, &mut ens)
            .map_err(|e| e.context("Lyapunov decay run"))?;
        if every > 0 && s % every == 0 {
            record(&ens, &mut rep)?;
        }
    }
    rep.pass = rep.bound_holds && rep.generator_holds;
    Ok(rep)
}

/// `δ0 / (c* δ* (1 - e^{-t0 c* δ*}))`.
pub fn mixing_prefactor(v: &LyapunovSpec, t0: f64) -> f64 {
    let r = v.c_star() * v.delta_star;
    v.delta0 / (r * (1.0 - (-t0 * r).exp()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    pub t0: f64,
    pub mixing: MixingConfig,
    /// Largest acceptable `M̂`.
    pub m_max: f64,
    /// Relative spread of `M̂` across seeds counted as stable.
    pub stability: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mixing: MixingConfig::default(),
            m_max: 2.0,
            stability: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub prefactor: f64,
    /// `∫ V(c x) ν(dx)`.
    pub initial_moment: f64,
    /// `M̂` per seed.
    pub m_hat: Vec<f64>,
    pub stable: bool,
    pub trivial: bool,
    pub mixing: MixingReport,
    pub pass: bool,
}

/// Smallest `M` with `Π_V(P_t ν, μ̂*) <= M e^{-δ̂ t} [prefactor + ∫V(cx)ν(dx)]`
/// along the grid, for two seeds.
pub fn mixing_bound_check(
    model: &SpectralModel,
    v: &LyapunovSpec,
    nu0: &EmpiricalMeasure,
    mu_star: &EmpiricalMeasure,
    cfg: &BoundConfig,
    seed: u64,
) -> Result<BoundReport> {
    v.validate()?;
    if !(cfg.t0 > 0.0) {
        return Err(arg("t0 must be positive"));
    }
    let prefactor = mixing_prefactor(v, cfg.t0);
    let initial_moment = nu0.integrate(|x| v.value_scaled(x));
    let rhs0 = prefactor + initial_moment;
    let mut m_hat = Vec::new();
    let mut first: Option<MixingReport> = None;
    let mut trivial = false;
    for s in [seed, seed.wrapping_add(SECOND_SEED)] {
        let mut rep = mixing_series(model, v, nu0, mu_star, &cfg.mixing, s)?;
        if rep.pi_v.iter().all(|&p| p == 0.0) {
            trivial = true;
            m_hat.push(0.0);
            first.get_or_insert(rep);
            continue;
        }
        fit_report(&mut rep, &cfg.mixing)?;
        let rate = rep.rate.expect("fitted");
        let m = rep
            .times
            .iter()
            .zip(&rep.pi_v)
            .map(|(t, p)| p / ((-rate * t).exp() * rhs0))
            .fold(0.0, f64::max);
        m_hat.push(m);
        first.get_or_insert(rep);
    }
    let hi = m_hat.iter().cloned().fold(0.0, f64::max);
    let lo = m_hat.iter().cloned().fold(f64::INFINITY, f64::min);
    let stable = hi == 0.0 || (hi - lo) <= cfg.stability * hi;
    let pass = hi <= cfg.m_max;
    Ok(BoundReport {
        prefactor,
        initial_moment,
        m_hat,
        stable,
        trivial,
        mixing: first.expect("two seeds ran"),
        pass,
    })
}
