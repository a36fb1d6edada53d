//! Galerkin-truncated mean-field models on the Dirichlet sine basis.
//!
//! States are mode coefficients `x ∈ R^k`. The linear part is `nu` times the
//! spectral Laplacian, `diag(-1², …, -k²)`; the nonlinear drift `f` and the
//! diffusion `g` read the law of the solution only through a
//! [`MeasureSummary`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::lyapunov::norm;
use crate::measure::{weighted_total_norm, EmpiricalMeasure};

mod mollify;
mod probe;

pub use mollify::{mollify, mollify_with, EnvelopeTable, MollifyConfig};
pub use probe::{
    probe_assumptions, random_probes, AssumptionReport, Margin, OsgoodDiagnostic, Probe, OSGOOD_EPSILONS,
    OSGOOD_THRESHOLD,
};

/// Constants of the coercivity, growth and continuity conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub lambda1: f64,
    pub lambda2: f64,
    pub big_m: f64,
    /// Hölder exponent of the one-sided drift condition, in `(0, 1]`.
    pub alpha: f64,
    /// Hölder exponent of the diffusion, in `(1/2, 1]`.
    pub beta: f64,
}

impl AssumptionConstants {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.lambda2 > 0.0) {
            bad.push(format!("lambda2 = {} must be > 0", self.lambda2));
        }
        if !(self.big_m > 0.0) {
            bad.push(format!("M = {} must be > 0", self.big_m));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            bad.push(format!("alpha = {} outside (0, 1]", self.alpha));
        }
        if !(self.beta > 0.5 && self.beta <= 1.0) {
            bad.push(format!("beta = {} outside (1/2, 1]", self.beta));
        }
        if !self.lambda1.is_finite() {
            bad.push("lambda1 must be finite".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(arg(bad.join("; ")))
        }
    }
}

/// Weak-monotonicity modulus `G: [0, 1) -> R+`.
#[derive(Clone)]
pub struct ModulusSpec {
    name: String,
    g_fn: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for ModulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusSpec").field("name", &self.name).finish()
    }
}

impl ModulusSpec {
    pub fn new(name: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            g_fn: Arc::new(g),
        }
    }

    /// `G(r) = r` (Lipschitz case).
    pub fn linear() -> Self {
        Self::new("linear", |r| r)
    }

    /// `G(r) = r^gamma`, `gamma ∈ (0, 1]`.
    pub fn power(gamma: f64) -> Self {
        Self::new(format!("power({gamma})"), move |r: f64| r.powf(gamma))
    }

    /// `G(r) = r (1 - ln r)`, the log-Lipschitz modulus.
    pub fn log_lipschitz() -> Self {
        Self::new(
            "log_lipschitz",
            |r: f64| if r <= 0.0 { 0.0 } else { r * (1.0 - r.ln()) },
        )
    }

    /// `G(r) = r^{(α+1)/2} + r^β`, the modulus induced by Hölder coefficients.
    pub fn holder(alpha: f64, beta: f64) -> Self {
        Self::new(format!("holder({alpha},{beta})"), move |r: f64| {
            r.powf(0.5 * (alpha + 1.0)) + r.powf(beta)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.g_fn)(r)
    }

    /// Checks `G(0) = 0`, monotonicity and midpoint concavity on a grid.
    pub fn validate(&self) -> Result<()> {
        if self.eval(0.0) != 0.0 {
            return Err(arg(format!("modulus {}: G(0) = {} != 0", self.name, self.eval(0.0))));
        }
        let n = 400;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&r| self.eval(r)).collect();
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(arg(format!("modulus {}: negative or non-finite values", self.name)));
        }
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(arg(format!("modulus {} is not increasing", self.name)));
        }
        for i in 0..n - 2 {
            let mid = self.eval(0.5 * (grid[i] + grid[i + 2]));
            if mid + 1e-12 < 0.5 * (vals[i] + vals[i + 2]) {
                return Err(arg(format!(
                    "modulus {} fails the midpoint concavity test near r = {}",
                    self.name,
                    grid[i + 1]
                )));
            }
        }
        Ok(())
    }
}

/// Finite statistics of the law through which coefficients see it.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSummary {
    pub mean: Vec<f64>,
    /// `E |x|^2`.
    pub second_moment: f64,
    pub sample: Option<Arc<EmpiricalMeasure>>,
}

impl MeasureSummary {
    /// Clamps `second_moment` up to `|mean|^2` to absorb rounding.
    pub fn new(mean: Vec<f64>, second_moment: f64) -> Self {
        let m2 = mean.iter().map(|v| v * v).sum::<f64>();
        Self {
            mean,
            second_moment: second_moment.max(m2),
            sample: None,
        }
    }

    pub fn zero(k: usize) -> Self {
        Self::new(vec![0.0; k], 0.0)
    }

    pub fn dirac(x: &[f64]) -> Self {
        Self::new(x.to_vec(), x.iter().map(|v| v * v).sum())
    }

    pub fn with_sample(mut self, sample: Arc<EmpiricalMeasure>) -> Self {
        self.sample = Some(sample);
        self
    }

    /// Summary of the uniform measure on the rows of `states`.
    pub fn from_states(states: &[f64], k: usize) -> Self {
        let n = states.len() / k;
        let mut mean = vec![0.0; k];
        let mut m2 = 0.0;
        for row in states.chunks_exact(k) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
                m2 += x * x;
            }
        }
        let inv = 1.0 / n as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        Self::new(mean, m2 * inv)
    }

    /// `|μ|_{U1}` when the sample is attached, otherwise the Jensen lower
    /// bound `1 + |mean|`.
    pub fn total_norm(&self) -> f64 {
        match &self.sample {
            Some(s) => weighted_total_norm(s),
            None => 1.0 + norm(&self.mean),
        }
    }

    /// Distance proxy between two laws seen through their summaries.
    pub fn mean_distance(&self, other: &MeasureSummary) -> f64 {
        self.mean
            .iter()
            .zip(&other.mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// `c · min(|x|, cap)^exp`, optionally multiplied by `sign(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowTerm {
    pub coef: f64,
    pub exp: f64,
    #[serde(default)]
    pub cap: Option<f64>,
}

impl PowTerm {
    fn magnitude(&self, x: f64) -> f64 {
        let a = match self.cap {
            Some(c) => x.abs().min(c),
            None => x.abs(),
        };
        self.coef * a.powf(self.exp)
    }
}

/// One-dimensional coefficient expression: polynomial plus power terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarExpr {
    #[serde(default)]
    pub poly: Vec<f64>,
    #[serde(default)]
    pub abs_pow: Vec<PowTerm>,
    #[serde(default)]
    pub sign_pow: Vec<PowTerm>,
}

impl ScalarExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            poly: vec![c],
            ..Self::default()
        }
    }

    pub fn linear(slope: f64) -> Self {
        Self {
            poly: vec![0.0, slope],
            ..Self::default()
        }
    }

    pub fn abs_power(coef: f64, exp: f64) -> Self {
        Self {
            abs_pow: vec![PowTerm { coef, exp, cap: None }],
            ..Self::default()
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.poly.iter().rev() {
            acc = acc * x + c;
        }
        for t in &self.abs_pow {
            acc += t.magnitude(x);
        }
        let s = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        for t in &self.sign_pow {
            acc += s * t.magnitude(x);
        }
        acc
    }
}

/// Per-mode scalar profile: an expression or its tabulated envelope.
#[derive(Clone, Debug)]
pub enum ModeProfile {
    Expr(ScalarExpr),
    Envelope(Arc<EnvelopeTable>),
}

impl ModeProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ModeProfile::Expr(e) => e.eval(x),
            ModeProfile::Envelope(t) => t.eval(x),
        }
    }
}

impl From<ScalarExpr> for ModeProfile {
    fn from(e: ScalarExpr) -> Self {
        ModeProfile::Expr(e)
    }
}

/// Mode-separable coefficients with diagonal diffusion (`m = k`):
/// `f_i(x, μ) = drift_i(x_i) + mean_coupling_i · mean_i`,
/// `g_ii(x, μ) = diffusion_i(x_i)`.
#[derive(Clone, Debug)]
pub struct ModeWiseField {
    pub drift: Vec<ModeProfile>,
    pub mean_coupling: Vec<f64>,
    pub diffusion: Vec<ModeProfile>,
}

type DriftFn = dyn Fn(&[f64], &MeasureSummary, &mut [f64]) + Send + Sync;

/// General coefficients; `diffusion` writes a row-major `k x m` matrix.
#[derive(Clone)]
pub struct DenseField {
    pub drift: Arc<DriftFn>,
    pub diffusion: Arc<DriftFn>,
}

impl fmt::Debug for DenseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DenseField { .. }")
    }
}

#[derive(Clone, Debug)]
pub enum Coefficients {
    ModeWise(ModeWiseField),
    Dense(DenseField),
}

/// Dense `rows x cols` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DiffusionMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `g g^T`, row-major `rows x rows`.
    pub fn gram(&self) -> Vec<f64> {
        let (k, m) = (self.rows, self.cols);
        let mut out = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] = (0..m).map(|l| self.get(i, l) * self.get(j, l)).sum();
            }
        }
        out
    }
}

/// Galerkin-truncated mean-field model.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    pub name: String,
    pub k: usize,
    pub nu: f64,
    pub m: usize,
    pub coefficients: Coefficients,
    pub constants: AssumptionConstants,
    pub modulus: ModulusSpec,
    pub coercivity_p: f64,
}

/// Parameters of the Hölder catalog family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub a: f64,
    pub c: f64,
    pub alpha: f64,
    pub b: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub beta: f64,
    pub x_cap: f64,
}

impl Default for HolderParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            c: 1.0,
            alpha: 0.6,
            b: 0.5,
            sigma0: 0.5,
            sigma1: 0.5,
            beta: 0.8,
            x_cap: 100.0,
        }
    }
}

impl SpectralModel {
    /// Linear mean-field Ornstein-Uhlenbeck family:
    /// `f(x, μ) = -a x + b mean(μ)`, `g = σ I`.
    pub fn mf_ou(k: usize, nu: f64, a: f64, b: f64, sigma: f64) -> Self {
        let field = ModeWiseField {
            drift: vec![ScalarExpr::linear(-a).into(); k],
            mean_coupling: vec![b; k],
            diffusion: vec![ScalarExpr::constant(sigma).into(); k],
        };
        let lambda2 = (nu * nu).max(a.abs()).max(b.abs()).max(1e-3);
        let lambda1 = (0.5 * b.abs())
            .max(-a + 0.5 * b.abs())
            .max((lambda2 - nu).max(0.0) * (k * k) as f64)
            + 1e-6;
        Self {
            name: "mf-ou".into(),
            k,
            nu,
            m: k,
            coefficients: Coefficients::ModeWise(field),
            constants: AssumptionConstants {
                lambda1,
                lambda2,
                big_m: 1.0 + sigma.abs() * (k as f64).sqrt(),
                alpha: 1.0,
                beta: 1.0,
            },
            modulus: ModulusSpec::linear(),
            coercivity_p: 2.0,
        }
    }

    /// Hölder family:
    /// `f(x, μ) = -a x - c sign(x)|x|^α + b mean(μ)`,
    /// `g(x) = diag(σ0 + σ1 min(|x_i|, cap)^β)`.
    pub fn mf_holder(k: usize, nu: f64, p: HolderParams) -> Self {
        let drift = ScalarExpr {
            poly: vec![0.0, -p.a],
            abs_pow: vec![],
            sign_pow: vec![PowTerm {
                coef: -p.c,
                exp: p.alpha,
                cap: None,
            }],
        };
        let diffusion = ScalarExpr {
            poly: vec![p.sigma0],
            abs_pow: vec![PowTerm {
                coef: p.sigma1,
                exp: p.beta,
                cap: Some(p.x_cap),
            }],
            sign_pow: vec![],
        };
        let field = ModeWiseField {
            drift: vec![drift.into(); k],
            mean_coupling: vec![p.b; k],
            diffusion: vec![diffusion.into(); k],
        };
        let kf = k as f64;
        let holder_diff = p.sigma1.abs() * kf.powf(0.5 * (1.0 - p.beta));
        let lambda2 = (nu * nu)
            .max(p.a.abs() + p.c.abs())
            .max(p.b.abs())
            .max(holder_diff)
            .max(holder_diff * holder_diff)
            .max(1e-3);
        let lambda1 = (0.5 * p.b.abs())
            .max(-p.a + 0.5 * p.b.abs())
            .max((lambda2 - nu).max(0.0) * kf * kf)
            + 1e-6;
        Self {
            name: "mf-holder".into(),
            k,
            nu,
            m: k,
            coefficients: Coefficients::ModeWise(field),
            constants: AssumptionConstants {
                lambda1,
                lambda2,
                big_m: 1.0 + (p.c.abs() + p.sigma0.abs() + p.sigma1.abs()) * kf.sqrt(),
                alpha: p.alpha,
                beta: p.beta,
            },
            modulus: ModulusSpec::holder(p.alpha, p.beta),
            coercivity_p: 2.0,
        }
    }

    /// Model from per-mode expressions; `drift`, `diffusion` and
    /// `mean_coupling` must have length `k`.
    pub fn mode_wise(
        name: impl Into<String>,
        nu: f64,
        field: ModeWiseField,
        constants: AssumptionConstants,
        modulus: ModulusSpec,
    ) -> Result<Self> {
        let k = field.drift.len();
        if field.diffusion.len() != k || field.mean_coupling.len() != k {
            return Err(arg("per-mode tables must all have length k"));
        }
        let model = Self {
            name: name.into(),
            k,
            nu,
            m: k,
            coefficients: Coefficients::ModeWise(field),
            constants,
            modulus,
            coercivity_p: 2.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(arg("k and m must be >= 1"));
        }
        if !(self.nu >= 0.0) {
            return Err(arg(format!("nu = {} must be >= 0", self.nu)));
        }
        if !(self.coercivity_p >= 2.0) {
            return Err(arg("coercivity exponent p must be >= 2"));
        }
        self.constants.validate()
    }

    /// True when the coefficients ignore the law argument.
    pub fn law_free(&self) -> bool {
        match &self.coefficients {
            Coefficients::ModeWise(f) => f.mean_coupling.iter().all(|&b| b == 0.0),
            Coefficients::Dense(_) => false,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.coefficients, Coefficients::ModeWise(_))
    }

    /// Spectral Laplacian eigenvalue of mode `i` (0-based): `-(i+1)^2`.
    pub fn laplacian_eigenvalue(i: usize) -> f64 {
        let j = (i + 1) as f64;
        -j * j
    }

    /// `nu Λ x + f(x, μ)` without finiteness checks.
    pub fn drift_into(&self, x: &[f64], mu: &MeasureSummary, out: &mut [f64]) {
        match &self.coefficients {
            Coefficients::ModeWise(f) => {
                for i in 0..self.k {
                    out[i] = f.drift[i].eval(x[i]) + f.mean_coupling[i] * mu.mean[i];
                }
            }
            Coefficients::Dense(f) => (f.drift)(x, mu, out),
        }
        if self.nu != 0.0 {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.nu * Self::laplacian_eigenvalue(i) * x[i];
            }
        }
    }

    /// Nonlinear drift `f(x, μ)` alone.
    pub fn nonlinear_drift_into(&self, x: &[f64], mu: &MeasureSummary, out: &mut [f64]) {
        match &self.coefficients {
            Coefficients::ModeWise(f) => {
                for i in 0..self.k {
                    out[i] = f.drift[i].eval(x[i]) + f.mean_coupling[i] * mu.mean[i];
                }
            }
            Coefficients::Dense(f) => (f.drift)(x, mu, out),
        }
    }

    /// Diagonal of `g` for mode-wise models; `false` for dense coefficients.
    pub fn diffusion_diag_into(&self, x: &[f64], _mu: &MeasureSummary, out: &mut [f64]) -> bool {
        match &self.coefficients {
            Coefficients::ModeWise(f) => {
                for i in 0..self.k {
                    out[i] = f.diffusion[i].eval(x[i]);
                }
                true
            }
            Coefficients::Dense(_) => false,
        }
    }

    /// Row-major `k x m` diffusion matrix without finiteness checks.
    pub fn diffusion_into(&self, x: &[f64], mu: &MeasureSummary, out: &mut [f64]) {
        match &self.coefficients {
            Coefficients::ModeWise(f) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..self.k {
                    out[i * self.m + i] = f.diffusion[i].eval(x[i]);
                }
            }
            Coefficients::Dense(f) => (f.diffusion)(x, mu, out),
        }
    }

    pub fn eval_drift(&self, x: &[f64], mu: &MeasureSummary) -> Result<Vec<f64>> {
        self.check_input(x, mu)?;
        let mut out = vec![0.0; self.k];
        self.drift_into(x, mu, &mut out);
        if let Some(index) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation {
                what: "drift",
                index,
                x: x.to_vec(),
            });
        }
        Ok(out)
    }

    pub fn eval_diffusion(&self, x: &[f64], mu: &MeasureSummary) -> Result<DiffusionMatrix> {
        self.check_input(x, mu)?;
        let mut data = vec![0.0; self.k * self.m];
        self.diffusion_into(x, mu, &mut data);
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation {
                what: "diffusion",
                index,
                x: x.to_vec(),
            });
        }
        Ok(DiffusionMatrix {
            rows: self.k,
            cols: self.m,
            data,
        })
    }

    fn check_input(&self, x: &[f64], mu: &MeasureSummary) -> Result<()> {
        if x.len() != self.k || mu.mean.len() != self.k {
            return Err(arg(format!(
                "state/summary dimension {}/{} does not match k = {}",
                x.len(),
                mu.mean.len(),
                self.k
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(arg("state must be finite"));
        }
        Ok(())
    }

    /// `<A x, x>` for `A = nu Λ`: `-nu Σ i² x_i²`.
    pub(crate) fn linear_pairing(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (a, b))| self.nu * Self::laplacian_eigenvalue(i) * a * b)
            .sum()
    }
}

/// `|x|_B^2 = Σ i² x_i²` (first Sobolev norm in mode coordinates).
pub(crate) fn energy_norm_sq(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| -SpectralModel::laplacian_eigenvalue(i) * v * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_examples() {
        let m = SpectralModel::mf_ou(2, 1.0, 1.0, 0.0, 1.0);
        assert_eq!(
            m.eval_drift(&[1.0, 0.0], &MeasureSummary::zero(2)).unwrap(),
            vec![-2.0, 0.0]
        );
        assert_eq!(
            m.eval_drift(&[0.0, 0.0], &MeasureSummary::zero(2)).unwrap(),
            vec![0.0, 0.0]
        );
        let m = SpectralModel::mf_ou(2, 0.0, 1.0, 0.5, 1.0);
        let mu = MeasureSummary::new(vec![2.0, 0.0], 4.0);
        assert_eq!(m.eval_drift(&[0.0, 0.0], &mu).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn higher_modes_damp_faster() {
        let m = SpectralModel::mf_ou(3, 0.5, 0.0, 0.0, 1.0);
        let d = m.eval_drift(&[1.0, 1.0, 1.0], &MeasureSummary::zero(3)).unwrap();
        assert_eq!(d, vec![-0.5, -2.0, -4.5]);
    }

    #[test]
    fn diffusion_examples() {
        let m = SpectralModel::mf_ou(2, 0.0, 1.0, 0.0, 0.3);
        let g = m.eval_diffusion(&[5.0, -1.0], &MeasureSummary::zero(2)).unwrap();
        assert_eq!(g.data, vec![0.3, 0.0, 0.0, 0.3]);
        let h = SpectralModel::mf_holder(
            1,
            0.0,
            HolderParams {
                sigma0: 0.1,
                sigma1: 1.0,
                beta: 0.75,
                ..HolderParams::default()
            },
        );
        let g = h.eval_diffusion(&[16.0], &MeasureSummary::zero(1)).unwrap();
        assert!((g.data[0] - 8.1).abs() < 1e-12);
        let g0 = h.eval_diffusion(&[0.0], &MeasureSummary::zero(1)).unwrap();
        assert_eq!(g0.data[0], 0.1);
    }

    #[test]
    fn diffusion_cap_limits_growth() {
        let h = SpectralModel::mf_holder(
            1,
            0.0,
            HolderParams {
                sigma0: 0.0,
                sigma1: 1.0,
                beta: 1.0,
                x_cap: 3.0,
                ..HolderParams::default()
            },
        );
        assert_eq!(
            h.eval_diffusion(&[10.0], &MeasureSummary::zero(1)).unwrap().data[0],
            3.0
        );
    }

    #[test]
    fn non_finite_drift_is_reported() {
        let field = ModeWiseField {
            drift: vec![ScalarExpr::abs_power(1.0, -1.0).into()],
            mean_coupling: vec![0.0],
            diffusion: vec![ScalarExpr::constant(1.0).into()],
        };
        let c = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0).constants;
        let m = SpectralModel::mode_wise("bad", 0.0, field, c, ModulusSpec::linear()).unwrap();
        match m.eval_drift(&[0.0], &MeasureSummary::zero(1)) {
            Err(Error::ModelEvaluation {
                what: "drift",
                index: 0,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn moduli_validate() {
        ModulusSpec::linear().validate().unwrap();
        ModulusSpec::power(0.5).validate().unwrap();
        ModulusSpec::log_lipschitz().validate().unwrap();
        ModulusSpec::holder(0.6, 0.8).validate().unwrap();
        assert!(ModulusSpec::new("convex", |r| r * r).validate().is_err());
        assert!(ModulusSpec::new("offset", |r| r + 1.0).validate().is_err());
        assert!(ModulusSpec::new("decreasing", |r| -r).validate().is_err());
    }

    #[test]
    fn constants_ranges() {
        let mut c = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0).constants;
        c.beta = 0.4;
        assert!(c.validate().is_err());
        c.beta = 0.75;
        c.alpha = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn summary_from_states() {
        let s = MeasureSummary::from_states(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(s.mean, vec![2.0, 3.0]);
        assert_eq!(s.second_moment, (1.0 + 4.0 + 9.0 + 16.0) / 2.0);
        assert!(s.second_moment >= s.mean.iter().map(|v| v * v).sum::<f64>());
    }
}
