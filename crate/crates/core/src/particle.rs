//! Interacting-particle integration of the Galerkin mean-field system.
//!
//! Each step evaluates the ensemble summary once, then advances all
//! particles against that pre-step summary. Gaussian increments are
//! addressed by `(particle, step)` so the result never depends on how
//! particles are split across workers.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::exec;
use crate::lyapunov::{norm, LyapunovSpec};
use crate::measure::EmpiricalMeasure;
use crate::model::{MeasureSummary, SpectralModel};
use crate::noise::{NoiseCursor, NoiseStream};
use crate::table::{num, Table};

pub const DEFAULT_MAX_DT: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub taming: bool,
    pub max_dt: f64,
}

impl StepConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            taming: true,
            max_dt: DEFAULT_MAX_DT,
        }
    }

    pub fn untamed(dt: f64) -> Self {
        Self {
            taming: false,
            ..Self::new(dt)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(arg(format!("dt = {} must be positive", self.dt)));
        }
        if self.dt > self.max_dt {
            return Err(arg(format!("dt = {} exceeds the maximum {}", self.dt, self.max_dt)));
        }
        Ok(())
    }

    /// Number of steps covering `[0, t_end]`; `t_end` must be a multiple of
    /// `dt` up to rounding.
    pub fn steps_for(&self, t_end: f64) -> Result<u64> {
        if !(t_end > 0.0) {
            return Err(arg(format!("horizon {t_end} must be positive")));
        }
        let n = (t_end / self.dt).round();
        if n < 1.0 || (n * self.dt - t_end).abs() > 1e-6 * self.dt {
            return Err(arg(format!("horizon {t_end} is not a multiple of dt = {}", self.dt)));
        }
        Ok(n as u64)
    }
}

/// `N` particles in `R^k`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    k: usize,
    states: Vec<f64>,
    pub time: f64,
}

impl ParticleEnsemble {
    pub fn new(k: usize, states: Vec<f64>) -> Result<Self> {
        if k == 0 || states.is_empty() || states.len() % k != 0 {
            return Err(arg(format!(
                "{} values do not form a nonempty ensemble in dimension {k}",
                states.len()
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(arg("ensemble states must be finite"));
        }
        Ok(Self { k, states, time: 0.0 })
    }

    /// `n` copies of `x0`.
    pub fn filled(n: usize, x0: &[f64]) -> Result<Self> {
        Self::new(x0.len(), x0.repeat(n))
    }

    /// `n` independent draws of `mean + std * Z`.
    pub fn gaussian(n: usize, mean: &[f64], std: f64, noise: &NoiseStream) -> Result<Self> {
        let k = mean.len();
        let mut states = vec![0.0; n * k];
        for (i, row) in states.chunks_exact_mut(k).enumerate() {
            noise.fill(i as u64, 0, row);
            row.iter_mut().zip(mean).for_each(|(x, m)| *x = m + std * *x);
        }
        Self::new(k, states)
    }

    pub fn from_measure(mu: &EmpiricalMeasure) -> Result<Self> {
        if !mu.is_uniform() {
            return Err(Error::Unsupported("ensembles carry uniform weights".into()));
        }
        Self::new(mu.dim(), mu.raw().to_vec())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.k..(i + 1) * self.k]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn summary(&self) -> MeasureSummary {
        MeasureSummary::from_states(&self.states, self.k)
    }

    pub fn to_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(self.k, self.states.clone()).expect("ensemble is a valid measure")
    }

    pub fn mean(&self) -> Vec<f64> {
        self.summary().mean
    }

    /// Sample variance (divisor `N`) of one coordinate.
    pub fn variance(&self, axis: usize) -> f64 {
        let n = self.len() as f64;
        let m = self.states.iter().skip(axis).step_by(self.k).sum::<f64>() / n;
        self.states
            .iter()
            .skip(axis)
            .step_by(self.k)
            .map(|x| (x - m) * (x - m))
            .sum::<f64>()
            / n
    }

    /// `(1/N) Σ |x_i - y_i|^2`.
    pub fn mean_square_difference(&self, other: &ParticleEnsemble) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.len() as f64
    }

    fn first_non_finite(&self) -> Option<usize> {
        self.states.iter().position(|v| !v.is_finite()).map(|j| j / self.k)
    }
}

/// Per-state buffers for drift and diffusion evaluation.
#[derive(Clone, Debug)]
pub struct StepScratch {
    b: Vec<f64>,
    g: Vec<f64>,
}

impl StepScratch {
    pub fn new(model: &SpectralModel) -> Self {
        let g_len = if model.is_diagonal() {
            model.k
        } else {
            model.k * model.m
        };
        Self {
            b: vec![0.0; model.k],
            g: vec![0.0; g_len],
        }
    }
}

/// One tamed Euler-Maruyama step of a single state against the law summary
/// `mu`, with standard normals `z` (length `m`).
pub fn step_state(
    model: &SpectralModel,
    x: &mut [f64],
    mu: &MeasureSummary,
    cfg: &StepConfig,
    z: &[f64],
    scratch: &mut StepScratch,
) {
    step_state_with(model, x, mu, cfg, z, scratch, |_, _| {});
}

/// [`step_state`] with `extra(x, b)` free to add to the drift `b` before
/// taming.
pub(crate) fn step_state_with(
    model: &SpectralModel,
    x: &mut [f64],
    mu: &MeasureSummary,
    cfg: &StepConfig,
    z: &[f64],
    scratch: &mut StepScratch,
    extra: impl FnOnce(&[f64], &mut [f64]),
) {
    let dt = cfg.dt;
    let sdt = dt.sqrt();
    let StepScratch { b, g } = scratch;
    model.drift_into(x, mu, b);
    extra(x, b);
    let scale = if cfg.taming { dt / (1.0 + dt * norm(b)) } else { dt };
    if model.diffusion_diag_into(x, mu, g) {
        for i in 0..model.k {
            x[i] += scale * b[i] + sdt * g[i] * z[i];
        }
    } else {
        model.diffusion_into(x, mu, g);
        let m = model.m;
        for i in 0..model.k {
            let gz: f64 = g[i * m..(i + 1) * m].iter().zip(z).map(|(a, w)| a * w).sum();
            x[i] += scale * b[i] + sdt * gz;
        }
    }
}

/// Single step of the whole ensemble with increments addressed by
/// `(particle, step_index)`.
pub fn step_tamed_em(
    model: &SpectralModel,
    ens: &mut ParticleEnsemble,
    cfg: &StepConfig,
    noise: &NoiseStream,
    step_index: u64,
) -> Result<()> {
    cfg.validate()?;
    check_dims(model, ens)?;
    let mu = ens.summary();
    let m = model.m;
    let k = ens.k;
    exec::for_each_row_init(
        &mut ens.states,
        k,
        || (StepScratch::new(model), vec![0.0; m]),
        |(scratch, z), i, x| {
            noise.fill(i as u64, step_index, z);
            step_state(model, x, &mu, cfg, z, scratch);
        },
    );
    ens.time += cfg.dt;
    blow_up_check(ens)
}

fn check_dims(model: &SpectralModel, ens: &ParticleEnsemble) -> Result<()> {
    if ens.k != model.k {
        return Err(arg(format!("ensemble dimension {} != model k = {}", ens.k, model.k)));
    }
    Ok(())
}

fn blow_up_check(ens: &ParticleEnsemble) -> Result<()> {
    match ens.first_non_finite() {
        Some(particle) => Err(Error::BlowUp {
            particle,
            time: ens.time,
        }),
        None => Ok(()),
    }
}

/// Stateful stepper holding one noise cursor per particle. The current
/// increments can be applied to several ensembles (synchronous coupling).
pub struct Integrator {
    cfg: StepConfig,
    m: usize,
    cursors: Vec<NoiseCursor>,
    z: Vec<f64>,
    step: u64,
}

impl Integrator {
    pub fn new(model: &SpectralModel, n: usize, cfg: StepConfig, noise: &NoiseStream, start_step: u64) -> Result<Self> {
        cfg.validate()?;
        let m = model.m;
        Ok(Self {
            cfg,
            m,
            cursors: (0..n).map(|i| noise.cursor(i as u64, start_step, m)).collect(),
            z: vec![0.0; n * m],
            step: start_step,
        })
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    /// Steps drawn so far.
    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Draws the increments of the next step.
    pub fn draw(&mut self) {
        exec::for_each_row(&mut self.z, self.m, &mut self.cursors, |_, row, cur| cur.next_into(row));
        self.step += 1;
    }

    /// Applies the current increments with an externally supplied law.
    pub fn apply(&self, model: &SpectralModel, ens: &mut ParticleEnsemble, mu: &MeasureSummary) -> Result<()> {
        check_dims(model, ens)?;
        if ens.len() != self.cursors.len() {
            return Err(arg("ensemble size differs from the integrator's"));
        }
        let (k, m, cfg, z) = (ens.k, self.m, &self.cfg, &self.z);
        exec::for_each_row_init(
            &mut ens.states,
            k,
            || StepScratch::new(model),
            |scratch, i, x| step_state(model, x, mu, cfg, &z[i * m..(i + 1) * m], scratch),
        );
        ens.time += self.cfg.dt;
        blow_up_check(ens)
    }

    /// Draws and applies one interacting step.
    pub fn step(&mut self, model: &SpectralModel, ens: &mut ParticleEnsemble) -> Result<()> {
        self.draw();
        let mu = ens.summary();
        self.apply(model, ens, &mu)
    }
}

pub type ObserverFn = dyn Fn(&ParticleEnsemble) -> f64 + Send + Sync;

/// Named scalar functional recorded at every sampled time.
pub struct Observer {
    pub name: String,
    f: Box<ObserverFn>,
}

impl Observer {
    pub fn new(name: impl Into<String>, f: impl Fn(&ParticleEnsemble) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }

    pub fn mean(axis: usize) -> Self {
        Self::new(format!("mean_{}", axis + 1), move |e| e.mean()[axis])
    }

    pub fn variance(axis: usize) -> Self {
        Self::new(format!("var_{}", axis + 1), move |e| e.variance(axis))
    }

    pub fn second_moment() -> Self {
        Self::new("second_moment", |e| e.summary().second_moment)
    }

    pub fn eval(&self, e: &ParticleEnsemble) -> f64 {
        (self.f)(e)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub step: StepConfig,
    /// Steps between samples; defaults to `max(1, round(0.1 / dt))`.
    pub stride: Option<u64>,
    pub keep_snapshots: bool,
}

impl SimOptions {
    pub fn new(step: StepConfig) -> Self {
        Self {
            step,
            stride: None,
            keep_snapshots: false,
        }
    }

    pub fn stride(&self) -> u64 {
        self.stride
            .unwrap_or_else(|| ((0.1 / self.step.dt).round() as u64).max(1))
            .max(1)
    }
}

/// Sampled output of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub k: usize,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub series: Vec<Series>,
    pub last: ParticleEnsemble,
}

impl Trajectory {
    fn start(ens: &ParticleEnsemble, observers: &[Observer]) -> Self {
        Self {
            k: ens.k,
            times: Vec::new(),
            snapshots: Vec::new(),
            series: observers
                .iter()
                .map(|o| Series {
                    name: o.name.clone(),
                    values: Vec::new(),
                })
                .collect(),
            last: ens.clone(),
        }
    }

    fn record(&mut self, ens: &ParticleEnsemble, observers: &[Observer], keep: bool) {
        self.times.push(ens.time);
        if keep {
            self.snapshots.push(ens.states.clone());
        }
        for (s, o) in self.series.iter_mut().zip(observers) {
            s.values.push(o.eval(ens));
        }
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    /// Columns `t, particle, x_1..x_k`.
    pub fn snapshot_table(&self) -> Result<Table> {
        if self.snapshots.is_empty() {
            return Err(arg("trajectory holds no snapshots"));
        }
        let mut header = vec!["t".to_string(), "particle".to_string()];
        header.extend((1..=self.k).map(|i| format!("x_{i}")));
        let mut t = Table::new(header);
        for (time, snap) in self.times.iter().zip(&self.snapshots) {
            for (p, row) in snap.chunks_exact(self.k).enumerate() {
                let mut r = vec![num(*time), p.to_string()];
                r.extend(row.iter().map(|v| num(*v)));
                t.push(r);
            }
        }
        Ok(t)
    }

    /// Columns `t` and one per observer.
    pub fn series_table(&self) -> Table {
        let mut header = vec!["t".to_string()];
        header.extend(self.series.iter().map(|s| s.name.clone()));
        let mut t = Table::new(header);
        for (j, time) in self.times.iter().enumerate() {
            let mut r = vec![num(*time)];
            r.extend(self.series.iter().map(|s| num(s.values[j])));
            t.push(r);
        }
        t
    }
}

/// Interacting-particle run on `[0, t_end]`.
pub fn simulate(
    model: &SpectralModel,
    ens0: &ParticleEnsemble,
    t_end: f64,
    opts: &SimOptions,
    observers: &[Observer],
    noise: &NoiseStream,
) -> Result<Trajectory> {
    check_dims(model, ens0)?;
    let steps = opts.step.steps_for(t_end)?;
    let stride = opts.stride();
    let mut integ = Integrator::new(model, ens0.len(), opts.step, noise, 0)?;
    let mut ens = ens0.clone();
    let mut traj = Trajectory::start(&ens, observers);
    traj.record(&ens, observers, opts.keep_snapshots);
    for s in 1..=steps {
        integ
            .step(model, &mut ens)
            .map_err(|e| e.context(format!("simulate {}", model.name)))?;
        if s % stride == 0 || s == steps {
            traj.record(&ens, observers, opts.keep_snapshots);
        }
    }
    traj.last = ens;
    Ok(traj)
}

#[derive(Clone, Debug)]
pub struct PairTrajectory {
    pub a: Trajectory,
    pub b: Trajectory,
    /// `(1/N) Σ |x_i^A - x_i^B|^2` at the sampled times.
    pub msd: Vec<f64>,
}

/// Two ensembles driven by identical increments, each interacting through
/// its own empirical law.
pub fn simulate_synchronous_pair(
    model: &SpectralModel,
    a0: &ParticleEnsemble,
    b0: &ParticleEnsemble,
    t_end: f64,
    opts: &SimOptions,
    noise: &NoiseStream,
) -> Result<PairTrajectory> {
    check_dims(model, a0)?;
    check_dims(model, b0)?;
    if a0.len() != b0.len() {
        return Err(arg("synchronous pair needs equal ensemble sizes"));
    }
    let steps = opts.step.steps_for(t_end)?;
    let stride = opts.stride();
    let mut integ = Integrator::new(model, a0.len(), opts.step, noise, 0)?;
    let (mut a, mut b) = (a0.clone(), b0.clone());
    let mut ta = Trajectory::start(&a, &[]);
    let mut tb = Trajectory::start(&b, &[]);
    let mut msd = Vec::new();
    let mut record = |a: &ParticleEnsemble, b: &ParticleEnsemble, ta: &mut Trajectory, tb: &mut Trajectory| {
        ta.record(a, &[], opts.keep_snapshots);
        tb.record(b, &[], opts.keep_snapshots);
        msd.push(a.mean_square_difference(b));
    };
    record(&a, &b, &mut ta, &mut tb);
    for s in 1..=steps {
        integ.draw();
        let (ma, mb) = (a.summary(), b.summary());
        integ
            .apply(model, &mut a, &ma)
            .and_then(|_| integ.apply(model, &mut b, &mb))
            .map_err(|e| e.context("synchronous pair"))?;
        if s % stride == 0 || s == steps {
            record(&a, &b, &mut ta, &mut tb);
        }
    }
    ta.last = a;
    tb.last = b;
    Ok(PairTrajectory { a: ta, b: tb, msd })
}

/// `LV(x) = <nu Λ x + f(x, mu), ∇V(x)> + ½ tr(∇²V(x) g gᵀ)`.
pub fn lyapunov_generator(model: &SpectralModel, v: &LyapunovSpec, x: &[f64], mu: &MeasureSummary) -> Result<f64> {
    let b = model.eval_drift(x, mu)?;
    let g = model.eval_diffusion(x, mu)?;
    let mut grad = vec![0.0; x.len()];
    v.gradient(x, &mut grad);
    let first: f64 = b.iter().zip(&grad).map(|(p, q)| p * q).sum();
    let second = v
        .hessian_trace(x, &g.gram())
        .ok_or_else(|| arg("Lyapunov function is not twice differentiable at x"))?;
    Ok(first + 0.5 * second)
}

/// Law of the solution along a run, one summary per step index.
#[derive(Clone, Debug)]
pub struct LawPath {
    summaries: Vec<MeasureSummary>,
    constant: bool,
}

impl LawPath {
    pub fn frozen(mu: MeasureSummary) -> Self {
        Self {
            summaries: vec![mu],
            constant: true,
        }
    }

    /// Records the summary of an interacting background ensemble at every
    /// step of `[0, steps·dt]`.
    pub fn from_background(
        model: &SpectralModel,
        ens0: &ParticleEnsemble,
        steps: u64,
        cfg: StepConfig,
        noise: &NoiseStream,
    ) -> Result<Self> {
        let mut integ = Integrator::new(model, ens0.len(), cfg, noise, 0)?;
        let mut ens = ens0.clone();
        let mut summaries = Vec::with_capacity(steps as usize + 1);
        summaries.push(ens.summary());
        for _ in 0..steps {
            integ
                .step(model, &mut ens)
                .map_err(|e| e.context("background ensemble"))?;
            summaries.push(ens.summary());
        }
        Ok(Self {
            summaries,
            constant: false,
        })
    }

    /// Frozen law for law-free models, otherwise a background run.
    pub fn for_model(
        model: &SpectralModel,
        ens0: &ParticleEnsemble,
        steps: u64,
        cfg: StepConfig,
        noise: &NoiseStream,
    ) -> Result<Self> {
        if model.law_free() {
            Ok(Self::frozen(ens0.summary()))
        } else {
            Self::from_background(model, ens0, steps, cfg, noise)
        }
    }

    pub fn at(&self, step: u64) -> &MeasureSummary {
        if self.constant {
            &self.summaries[0]
        } else {
            &self.summaries[(step as usize).min(self.summaries.len() - 1)]
        }
    }
}

/// One distinguished path advanced against a prescribed law.
pub struct TaggedPath<'a> {
    model: &'a SpectralModel,
    law: &'a LawPath,
    cfg: StepConfig,
    cursor: NoiseCursor,
    scratch: StepScratch,
    z: Vec<f64>,
    pub x: Vec<f64>,
    step: u64,
}

impl<'a> TaggedPath<'a> {
    pub fn new(
        model: &'a SpectralModel,
        law: &'a LawPath,
        cfg: StepConfig,
        noise: &NoiseStream,
        index: u64,
        x0: &[f64],
    ) -> Self {
        Self {
            model,
            law,
            cfg,
            cursor: noise.cursor(index, 0, model.m),
            scratch: StepScratch::new(model),
            z: vec![0.0; model.m],
            x: x0.to_vec(),
            step: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn advance(&mut self) -> Result<()> {
        self.cursor.next_into(&mut self.z);
        let mu = self.law.at(self.step);
        step_state(self.model, &mut self.x, mu, &self.cfg, &self.z, &mut self.scratch);
        self.step += 1;
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                particle: 0,
                time: self.time(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wide(dt: f64, taming: bool) -> StepConfig {
        StepConfig {
            dt,
            taming,
            max_dt: 1.0,
        }
    }

    #[test]
    fn explicit_and_tamed_euler() {
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 0.0);
        let noise = NoiseStream::new(1);
        let mut e = ParticleEnsemble::filled(1, &[1.0]).unwrap();
        step_tamed_em(&m, &mut e, &wide(0.1, false), &noise, 0).unwrap();
        assert!((e.state(0)[0] - 0.9).abs() < 1e-15);
        let mut e = ParticleEnsemble::filled(1, &[1.0]).unwrap();
        step_tamed_em(&m, &mut e, &wide(0.1, true), &noise, 0).unwrap();
        assert!((e.state(0)[0] - (1.0 - 0.1 / 1.1)).abs() < 1e-15);
    }

    #[test]
    fn additive_noise_only() {
        let m = SpectralModel::mf_ou(2, 0.0, 0.0, 0.0, 0.7);
        let noise = NoiseStream::new(5);
        let mut e = ParticleEnsemble::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        step_tamed_em(&m, &mut e, &StepConfig::new(0.01), &noise, 3).unwrap();
        for p in 0..2 {
            let mut z = [0.0; 2];
            noise.fill(p, 3, &mut z);
            for i in 0..2 {
                let x0 = (2 * p as usize + i + 1) as f64;
                assert_eq!(e.state(p as usize)[i], x0 + 0.7 * 0.1 * z[i]);
            }
        }
    }

    #[test]
    fn dt_above_max_rejected() {
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0);
        let mut e = ParticleEnsemble::filled(1, &[1.0]).unwrap();
        assert!(step_tamed_em(&m, &mut e, &StepConfig::new(0.1), &NoiseStream::new(0), 0).is_err());
    }

    #[test]
    fn integrator_matches_random_access_steps() {
        let m = SpectralModel::mf_ou(2, 0.5, 1.0, 0.3, 0.8);
        let noise = NoiseStream::new(9);
        let e0 = ParticleEnsemble::gaussian(17, &[0.5, -0.5], 1.0, &noise.lane(1)).unwrap();
        let cfg = StepConfig::new(0.01);
        let mut a = e0.clone();
        let mut integ = Integrator::new(&m, 17, cfg, &noise, 0).unwrap();
        let mut b = e0.clone();
        for s in 0..25 {
            integ.step(&m, &mut a).unwrap();
            step_tamed_em(&m, &mut b, &cfg, &noise, s).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn blow_up_reports_particle() {
        let m = SpectralModel::mf_ou(1, 0.0, -1e300, 0.0, 0.0);
        let mut e = ParticleEnsemble::new(1, vec![0.0, 1e300]).unwrap();
        match step_tamed_em(&m, &mut e, &wide(0.5, false), &NoiseStream::new(0), 0) {
            Err(Error::BlowUp { particle: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identical_pair_has_zero_difference() {
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.2, 1.0);
        let e = ParticleEnsemble::gaussian(50, &[0.0], 1.0, &NoiseStream::new(2)).unwrap();
        let p = simulate_synchronous_pair(
            &m,
            &e,
            &e,
            1.0,
            &SimOptions::new(StepConfig::new(0.01)),
            &NoiseStream::new(3),
        )
        .unwrap();
        assert!(p.msd.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn generator_examples() {
        let v = LyapunovSpec::quadratic_for_ou(1.0, 0.0, 1);
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 0.0);
        let lv = lyapunov_generator(&m, &v, &[1.0], &MeasureSummary::zero(1)).unwrap();
        assert_eq!(lv, -2.0);
        let m = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0);
        let lv = lyapunov_generator(&m, &v, &[0.6], &MeasureSummary::zero(1)).unwrap();
        assert!((lv - (-2.0 * 0.36 + 1.0)).abs() < 1e-15);
        let lv0 = lyapunov_generator(&m, &v, &[0.0], &MeasureSummary::zero(1)).unwrap();
        assert_eq!(lv0, 1.0);
    }

    #[test]
    fn trajectory_times_increase_and_tables_have_schema() {
        let m = SpectralModel::mf_ou(2, 0.0, 1.0, 0.0, 1.0);
        let e = ParticleEnsemble::filled(3, &[1.0, 0.0]).unwrap();
        let mut opts = SimOptions::new(StepConfig::new(0.01));
        opts.keep_snapshots = true;
        let tr = simulate(&m, &e, 0.35, &opts, &[Observer::mean(0)], &NoiseStream::new(1)).unwrap();
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(tr.times.len(), 5);
        let snap = tr.snapshot_table().unwrap();
        assert_eq!(snap.header, vec!["t", "particle", "x_1", "x_2"]);
        assert_eq!(snap.rows.len(), 15);
        assert_eq!(tr.series_table().header, vec!["t", "mean_1"]);
    }
}
