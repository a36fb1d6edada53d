//! TOML experiment configuration.
//!
//! ```toml
//! kind = "mixing"        # simulate | coupling | mixing | slln | clt | selftest
//! seed = 7
//!
//! [model]
//! name = "mf-ou"         # mf-ou | mf-holder
//! k = 1
//! a = 1.0
//! sigma = 1.0
//! ```
//!
//! Each kind reads its own table (`[simulate]`, `[coupling]`, ...); missing
//! tables and keys take their defaults. Times are in model units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingConfig;
use crate::ergodic::{BoundConfig, DecayConfig, InvariantConfig, MixingConfig};
use crate::error::{Error, Result};
use crate::limit::{LambdaConfig, ObservableSpec, TaggedConfig};
use crate::lyapunov::{LyapunovSpec, Profile};
use crate::model::{HolderParams, SpectralModel};
use crate::particle::DEFAULT_MAX_DT;

pub const KINDS: [&str; 6] = ["simulate", "coupling", "mixing", "slln", "clt", "selftest"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Simulate,
    Coupling,
    Mixing,
    Slln,
    Clt,
    Selftest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum ModelConfig {
    #[serde(rename = "mf-ou")]
    MfOu {
        #[serde(default = "one")]
        k: usize,
        #[serde(default)]
        nu: f64,
        #[serde(default = "onef")]
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default = "onef")]
        sigma: f64,
    },
    #[serde(rename = "mf-holder")]
    MfHolder {
        #[serde(default = "one")]
        k: usize,
        #[serde(default)]
        nu: f64,
        #[serde(default = "onef")]
        a: f64,
        #[serde(default = "onef")]
        c: f64,
        #[serde(default = "holder_alpha")]
        alpha: f64,
        #[serde(default = "half")]
        b: f64,
        #[serde(default = "half")]
        sigma0: f64,
        #[serde(default = "half")]
        sigma1: f64,
        #[serde(default = "holder_beta")]
        beta: f64,
        #[serde(default = "holder_cap")]
        x_cap: f64,
    },
}

fn one() -> usize {
    1
}

fn onef() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn holder_alpha() -> f64 {
    HolderParams::default().alpha
}

fn holder_beta() -> f64 {
    HolderParams::default().beta
}

fn holder_cap() -> f64 {
    HolderParams::default().x_cap
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::MfOu {
            k: 1,
            nu: 0.0,
            a: 1.0,
            b: 0.0,
            sigma: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> SpectralModel {
        match *self {
            ModelConfig::MfOu { k, nu, a, b, sigma } => SpectralModel::mf_ou(k, nu, a, b, sigma),
            ModelConfig::MfHolder { k, nu, .. } => {
                SpectralModel::mf_holder(k, nu, self.holder_params().expect("holder"))
            }
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            ModelConfig::MfOu { k, .. } | ModelConfig::MfHolder { k, .. } => k,
        }
    }

    pub fn holder_params(&self) -> Option<HolderParams> {
        match *self {
            ModelConfig::MfHolder {
                a,
                c,
                alpha,
                b,
                sigma0,
                sigma1,
                beta,
                x_cap,
                ..
            } => Some(HolderParams {
                a,
                c,
                alpha,
                b,
                sigma0,
                sigma1,
                beta,
                x_cap,
            }),
            ModelConfig::MfOu { .. } => None,
        }
    }

    /// Quadratic Lyapunov constants for the model: exact for `mf-ou` with
    /// `b = 0`; the `mf-holder` values bound the noise by `σ0 + σ1 cap^β`.
    pub fn default_lyapunov(&self) -> LyapunovSpec {
        match *self {
            ModelConfig::MfOu { k, a, sigma, .. } => LyapunovSpec::quadratic_for_ou(a, sigma, k),
            ModelConfig::MfHolder { k, .. } => {
                let p = self.holder_params().expect("holder");
                let s = p.sigma0.abs() + p.sigma1.abs() * p.x_cap.powf(p.beta);
                LyapunovSpec::quadratic_for_ou(p.a, s, k)
            }
        }
    }
}

/// Lyapunov constants; unset fields come from the model defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub delta_star: Option<f64>,
    pub delta0: Option<f64>,
    pub c: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub kappa: Option<f64>,
}

impl LyapunovConfig {
    fn resolve(&self, base: LyapunovSpec) -> LyapunovSpec {
        LyapunovSpec {
            profile: self.p.map(|p| Profile::Power { p }).unwrap_or(base.profile),
            delta: self.delta.unwrap_or(base.delta),
            delta_star: self.delta_star.unwrap_or(base.delta_star),
            delta0: self.delta0.unwrap_or(base.delta0),
            c: self.c.unwrap_or(base.c),
            delta1: self.delta1.unwrap_or(base.delta1),
            delta2: self.delta2.unwrap_or(base.delta2),
            kappa: self.kappa.unwrap_or(base.kappa),
        }
    }

    fn filled(spec: &LyapunovSpec) -> Self {
        let Profile::Power { p } = spec.profile;
        Self {
            p: Some(p),
            delta: Some(spec.delta),
            delta_star: Some(spec.delta_star),
            delta0: Some(spec.delta0),
            c: Some(spec.c),
            delta1: Some(spec.delta1),
            delta2: Some(spec.delta2),
            kappa: Some(spec.kappa),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `Φ(x) = x_mode` (1-based).
    Coordinate {
        #[serde(default = "one")]
        mode: usize,
        #[serde(default)]
        scale: Option<f64>,
    },
    Constant {
        value: f64,
    },
}

impl Default for ObservableConfig {
    fn default() -> Self {
        ObservableConfig::Coordinate { mode: 1, scale: None }
    }
}

impl ObservableConfig {
    /// Observable with its stationary mean. Catalog drifts are odd and their
    /// noises even, so coordinate observables have mean zero.
    pub fn build(&self) -> ObservableSpec {
        match *self {
            ObservableConfig::Coordinate { mode, scale } => {
                let base = ObservableSpec::coordinate(mode - 1);
                match scale {
                    Some(a) => base.scaled(a),
                    None => base,
                }
                .with_mean(0.0)
            }
            ObservableConfig::Constant { value } => ObservableSpec::constant(value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub particles: usize,
    pub t_end: f64,
    pub dt: f64,
    pub taming: bool,
    pub init_mean: f64,
    pub init_std: f64,
    /// Observer stride in steps; `None` uses about every 0.1 time units.
    pub stride: Option<u64>,
    pub snapshots: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            particles: 1000,
            t_end: 5.0,
            dt: 1e-3,
            taming: true,
            init_mean: 0.0,
            init_std: 1.0,
            stride: None,
            snapshots: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingSection {
    #[serde(flatten)]
    pub run: CouplingConfig,
    /// Values of `Θ*` for the tail scan; a single value runs one triple.
    pub theta_list: Vec<f64>,
    /// Write per-replica diagnostics.
    pub per_replica: bool,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            run: CouplingConfig::default(),
            theta_list: vec![0.2, 0.1, 0.05],
            per_replica: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingSection {
    pub invariant: InvariantConfig,
    pub mixing: MixingConfig,
    /// Ensemble size of the synchronous pair (at most 512).
    pub pair_particles: usize,
    /// Start of the second ensemble (all particles at this point).
    pub nu0: Option<Vec<f64>>,
    pub t0: f64,
    pub m_max: f64,
    pub decay: Option<DecayConfig>,
}

impl Default for MixingSection {
    fn default() -> Self {
        Self {
            invariant: InvariantConfig::default(),
            mixing: MixingConfig::default(),
            pair_particles: 256,
            nu0: None,
            t0: 1.0,
            m_max: 2.0,
            decay: None,
        }
    }
}

impl MixingSection {
    pub fn bound(&self) -> BoundConfig {
        BoundConfig {
            t0: self.t0,
            mixing: self.mixing.clone(),
            m_max: self.m_max,
            ..BoundConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SllnSection {
    pub order: u32,
    pub times: Vec<f64>,
    pub replicas: usize,
    pub tagged: TaggedConfig,
    pub observable: ObservableConfig,
    /// Accepted distance of the slope from `-order`.
    pub slope_tolerance: f64,
}

impl Default for SllnSection {
    fn default() -> Self {
        Self {
            order: 1,
            times: vec![10.0, 20.0, 40.0, 80.0, 160.0],
            replicas: 500,
            tagged: TaggedConfig::default(),
            observable: ObservableConfig::default(),
            slope_tolerance: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltSection {
    pub times: Vec<f64>,
    pub replicas: usize,
    pub tagged: TaggedConfig,
    pub observable: ObservableConfig,
    pub invariant: InvariantConfig,
    pub lambda: LambdaConfig,
    pub ks_max: f64,
    /// Known `Λ²`, checked against both estimators with `lambda_tolerance`.
    pub expected_lambda_sq: Option<f64>,
    pub lambda_tolerance: f64,
}

impl Default for CltSection {
    fn default() -> Self {
        Self {
            times: vec![25.0, 50.0, 100.0, 200.0],
            replicas: 2000,
            tagged: TaggedConfig::default(),
            observable: ObservableConfig::default(),
            invariant: InvariantConfig {
                check_points: 0,
                ..InvariantConfig::default()
            },
            lambda: LambdaConfig::default(),
            ks_max: 0.05,
            expected_lambda_sq: None,
            lambda_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slln: Option<SllnSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clt: Option<CltSection>,
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            seed: 0,
            model: ModelConfig::default(),
            lyapunov: LyapunovConfig::default(),
            simulate: None,
            coupling: None,
            mixing: None,
            slln: None,
            clt: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        match value.get("kind") {
            None => {
                return Err(Error::Config(format!(
                    "missing key `kind`; expected one of {}",
                    KINDS.join(", ")
                )))
            }
            Some(toml::Value::String(k)) if !KINDS.contains(&k.as_str()) => {
                return Err(Error::Config(format!(
                    "unknown kind {k:?}; expected one of {}",
                    KINDS.join(", ")
                )))
            }
            _ => {}
        }
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn lyapunov_spec(&self) -> LyapunovSpec {
        self.lyapunov.resolve(self.model.default_lyapunov())
    }

    /// Fills the section of this kind and the Lyapunov constants with their
    /// defaults, then checks every range. All violations are reported
    /// together.
    pub fn normalized(mut self) -> Result<Self> {
        match self.kind {
            Kind::Simulate => {
                self.simulate.get_or_insert_with(SimulateSection::default);
            }
            Kind::Coupling => {
                self.coupling.get_or_insert_with(CouplingSection::default);
            }
            Kind::Mixing => {
                self.mixing.get_or_insert_with(MixingSection::default);
            }
            Kind::Slln => {
                self.slln.get_or_insert_with(SllnSection::default);
            }
            Kind::Clt => {
                self.clt.get_or_insert_with(CltSection::default);
            }
            Kind::Selftest => {}
        }
        self.lyapunov = LyapunovConfig::filled(&self.lyapunov_spec());
        let bad = self.violations();
        if bad.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(bad.join("\n")))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                bad.push(msg);
            }
        };
        let (k, nu) = match self.model {
            ModelConfig::MfOu { k, nu, .. } | ModelConfig::MfHolder { k, nu, .. } => (k, nu),
        };
        check(k >= 1, format!("model.k = {k} must be >= 1"));
        check(nu >= 0.0, format!("model.nu = {nu} must be >= 0"));
        if let Some(p) = self.model.holder_params() {
            check(
                p.alpha > 0.0 && p.alpha <= 1.0,
                format!(
                    "model.alpha = {} violates the drift Hölder range alpha in (0, 1]",
                    p.alpha
                ),
            );
            check(
                p.beta > 0.5 && p.beta <= 1.0,
                format!(
                    "model.beta = {} violates the diffusion Hölder range beta in (1/2, 1]",
                    p.beta
                ),
            );
            check(p.x_cap > 0.0, format!("model.x_cap = {} must be > 0", p.x_cap));
        }
        let v = self.lyapunov_spec();
        if let Err(e) = v.validate() {
            check(false, format!("lyapunov: {e}"));
        }
        let dt_ok = |dt: f64| dt > 0.0 && dt <= DEFAULT_MAX_DT;
        let dt_msg = |name: &str, dt: f64| format!("{name}.dt = {dt} must lie in (0, {DEFAULT_MAX_DT}]");
        if let Some(s) = &self.simulate {
            check(s.particles >= 1, "simulate.particles must be >= 1".into());
            check(s.t_end > 0.0, "simulate.t_end must be > 0".into());
            check(dt_ok(s.dt), dt_msg("simulate", s.dt));
            check(s.init_std >= 0.0, "simulate.init_std must be >= 0".into());
        }
        if let Some(c) = &self.coupling {
            let (alpha, beta) = self.model.holder_params().map_or((1.0, 1.0), |p| (p.alpha, p.beta));
            let cap = alpha.min(2.0 * beta - 1.0);
            check(
                c.run.vartheta > 0.0 && c.run.vartheta < cap,
                format!(
                    "coupling.vartheta = {} violates the coupling range vartheta in (0, min(alpha, 2 beta - 1)) = (0, {cap})",
                    c.run.vartheta
                ),
            );
            let hi = crate::coupling::ell_upper(beta, c.run.vartheta);
            if let Some(ell) = c.run.ell {
                check(
                    ell > 0.0 && ell < hi,
                    format!("coupling.ell = {ell} must lie in (0, {hi})"),
                );
            }
            check(c.run.radius_r > 0.0, "coupling.radius_r must be > 0".into());
            check(c.run.horizon_t > 0.0, "coupling.horizon_t must be > 0".into());
            check(c.run.replicas >= 1, "coupling.replicas must be >= 1".into());
            check(dt_ok(c.run.dt), dt_msg("coupling", c.run.dt));
            check(c.run.g_min > 0.0, "coupling.g_min must be > 0".into());
            check(
                !c.theta_list.is_empty() && c.theta_list.iter().all(|&t| t > 0.0),
                "coupling.theta_list must hold positive values".into(),
            );
            if c.theta_list.len() > 1 {
                let mut d = c.theta_list.clone();
                d.sort_by(f64::total_cmp);
                d.dedup();
                check(
                    d.len() >= 3,
                    "coupling.theta_list needs at least 3 distinct values for a tail scan".into(),
                );
                check(
                    c.run.replicas >= 100,
                    "coupling.replicas must be >= 100 for a tail scan".into(),
                );
            }
        }
        if let Some(m) = &self.mixing {
            check(
                m.invariant.particles >= m.pair_particles,
                "mixing.invariant.particles must be >= pair_particles".into(),
            );
            check(
                (1..=crate::measure::DEFAULT_ASSIGNMENT_CAP).contains(&m.pair_particles),
                format!(
                    "mixing.pair_particles must lie in [1, {}]",
                    crate::measure::DEFAULT_ASSIGNMENT_CAP
                ),
            );
            check(m.invariant.burn_in > 0.0, "mixing.invariant.burn_in must be > 0".into());
            check(dt_ok(m.invariant.dt), dt_msg("mixing.invariant", m.invariant.dt));
            check(dt_ok(m.mixing.dt), dt_msg("mixing.mixing", m.mixing.dt));
            check(
                m.mixing.grid_step > 0.0 && m.mixing.t_end > 0.0,
                "mixing grid must be positive".into(),
            );
            check(m.t0 > 0.0, "mixing.t0 must be > 0".into());
            if let Some(x) = &m.nu0 {
                check(x.len() == k, "mixing.nu0 must have length k".into());
            }
            if let Some(d) = &m.decay {
                check(d.x0.len() == k, "mixing.decay.x0 must have length k".into());
                check(dt_ok(d.dt), dt_msg("mixing.decay", d.dt));
            }
        }
        if let Some(s) = &self.slln {
            check(s.order >= 1, "slln.order must be >= 1".into());
            check(
                s.replicas >= 200,
                format!("slln.replicas = {} must be >= 200", s.replicas),
            );
            check(
                s.times.len() >= 2 && s.times.iter().all(|&t| t >= 1.0),
                "slln.times needs at least two values >= 1".into(),
            );
            check(dt_ok(s.tagged.dt), dt_msg("slln.tagged", s.tagged.dt));
            check_observable(&mut check, &s.observable, k);
        }
        if let Some(c) = &self.clt {
            check(
                c.replicas >= 1000,
                format!("clt.replicas = {} must be >= 1000", c.replicas),
            );
            check(
                !c.times.is_empty() && c.times.iter().all(|&t| t > 0.0),
                "clt.times must be positive".into(),
            );
            check(dt_ok(c.tagged.dt), dt_msg("clt.tagged", c.tagged.dt));
            check(dt_ok(c.invariant.dt), dt_msg("clt.invariant", c.invariant.dt));
            check(
                dt_ok(c.lambda.poisson.dt),
                dt_msg("clt.lambda.poisson", c.lambda.poisson.dt),
            );
            check(
                c.lambda.poisson.rate > 0.0,
                "clt.lambda.poisson.rate must be > 0".into(),
            );
            check_observable(&mut check, &c.observable, k);
        }
        bad
    }
}

fn check_observable(check: &mut impl FnMut(bool, String), obs: &ObservableConfig, k: usize) {
    if let ObservableConfig::Coordinate { mode, .. } = obs {
        check(
            (1..=k).contains(mode),
            format!("observable mode {mode} must lie in [1, {k}]"),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ou_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str("kind = \"mixing\"\n[model]\nname = \"mf-ou\"\n")
            .unwrap()
            .normalized()
            .unwrap();
        assert_eq!(cfg.mixing.as_ref().unwrap().t0, 1.0);
        assert_eq!(cfg.lyapunov.delta_star, Some(2.0));
        let echo = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&echo).unwrap().normalized().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn low_beta_rejected_with_range() {
        let text = "kind = \"coupling\"\n[model]\nname = \"mf-holder\"\nbeta = 0.4\n";
        let err = ExperimentConfig::from_toml_str(text).unwrap().normalized().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(1/2, 1]") && msg.contains("beta = 0.4"), "{msg}");
    }

    #[test]
    fn missing_kind_lists_kinds() {
        let err = ExperimentConfig::from_toml_str("seed = 1\n").unwrap_err().to_string();
        for k in KINDS {
            assert!(err.contains(k), "{err}");
        }
    }

    #[test]
    fn unknown_model_rejected() {
        let err = ExperimentConfig::from_toml_str("kind = \"simulate\"\n[model]\nname = \"nope\"\n");
        assert!(err.is_err());
    }
}
