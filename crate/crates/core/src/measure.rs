//! Empirical measures, the weighted total norm, and exact transport distances.

use std::path::Path;

use crate::assignment;
use crate::error::{Error, Result};
use crate::exec;
use crate::lyapunov::{norm, LyapunovSpec};
use crate::model::MeasureSummary;
use crate::noise::NoiseStream;
use crate::table::{num, parse_num, Table};

/// Default support-size cap for the assignment-based distances.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 512;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weighted point cloud in `R^dim`; uniform weights unless given.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl EmpiricalMeasure {
    /// Uniform measure on the rows of the row-major `points` buffer.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("measure dimension must be >= 1".into()));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::Argument(format!(
                "point buffer of length {} is not a nonempty multiple of dim {dim}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Argument(format!("non-finite coordinate at point {}", i / dim)));
        }
        Ok(Self {
            dim,
            points,
            weights: None,
        })
    }

    pub fn weighted(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::uniform(dim, points)?;
        if weights.len() != m.len() {
            return Err(Error::Argument("one weight per point required".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Argument("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Argument(format!("weights sum to {s}, expected 1")));
        }
        m.weights = Some(weights);
        Ok(m)
    }

    /// Dirac mass at `x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::uniform(x.len(), x.to_vec())
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Argument("inconsistent point dimensions".into()));
        }
        Self::uniform(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn raw(&self) -> &[f64] {
        &self.points
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.len() as f64,
        }
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        match &self.weights {
            None => self.points().map(&f).sum::<f64>() / self.len() as f64,
            Some(w) => self.points().zip(w).map(|(p, w)| w * f(p)).sum(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (i, p) in self.points().enumerate() {
            let w = self.weight(i);
            m.iter_mut().zip(p).for_each(|(mj, pj)| *mj += w * pj);
        }
        m
    }

    pub fn summary(&self) -> MeasureSummary {
        MeasureSummary::new(self.mean(), self.integrate(|p| p.iter().map(|v| v * v).sum()))
    }

    /// First `n` points (uniform measures only; ensembles are exchangeable).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        if !self.is_uniform() {
            return Err(Error::Unsupported("truncating a weighted measure".into()));
        }
        Self::uniform(self.dim, self.points[..n * self.dim].to_vec())
    }

    /// Bootstrap resample of the same size, addressed by `(stream, draw)`.
    pub fn resample(&self, stream: &NoiseStream, draw: u64) -> Self {
        let n = self.len();
        let mut pts = Vec::with_capacity(self.points.len());
        for i in 0..n {
            let j = (stream.uniform_u64(draw, i as u64) % n as u64) as usize;
            pts.extend_from_slice(self.point(j));
        }
        Self {
            dim: self.dim,
            points: pts,
            weights: None,
        }
    }

    /// One row per point, columns `x_1..x_k`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new((1..=self.dim).map(|i| format!("x_{i}")));
        for p in self.points() {
            t.push(p.iter().map(|&v| num(v)).collect());
        }
        t
    }

    pub fn from_table(t: &Table) -> Result<Self> {
        let dim = t.header.len();
        let mut pts = Vec::with_capacity(dim * t.rows.len());
        for row in &t.rows {
            for v in row {
                pts.push(parse_num(v)?);
            }
        }
        Self::uniform(dim, pts)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_table().write(path)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_table(&Table::read(path)?)
    }
}

/// `[Σ w_i (1 + |x_i|)^2]^{1/2}`.
pub fn weighted_total_norm(mu: &EmpiricalMeasure) -> f64 {
    mu.integrate(|p| {
        let r = 1.0 + norm(p);
        r * r
    })
    .sqrt()
}

fn require_uniform_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::Unsupported("transport distances need uniform weights".into()));
    }
    if mu.len() != nu.len() {
        return Err(Error::Unsupported(format!(
            "transport distances need equal support sizes ({} vs {})",
            mu.len(),
            nu.len()
        )));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::Unsupported("dimension mismatch".into()));
    }
    Ok(())
}

/// Exact 1-Wasserstein distance between equal-size uniform measures on `R`.
pub fn w1_sorted_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    require_uniform_pair(mu, nu)?;
    if mu.dim() != 1 {
        return Err(Error::Unsupported("w1_sorted_1d needs one-dimensional measures".into()));
    }
    let mut a = mu.raw().to_vec();
    let mut b = nu.raw().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

fn cost_matrix(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    cost: impl Fn(&[f64], &[f64]) -> f64 + Sync + Send,
) -> Vec<f64> {
    let n = mu.len();
    exec::map_indexed(n, |i| {
        let x = mu.point(i);
        (0..n).map(|j| cost(x, nu.point(j))).collect::<Vec<_>>()
    })
    .concat()
}

fn assignment_cost(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    cap: usize,
    cost: impl Fn(&[f64], &[f64]) -> f64 + Sync + Send,
) -> Result<f64> {
    require_uniform_pair(mu, nu)?;
    let n = mu.len();
    if n > cap {
        return Err(Error::Resource(format!(
            "assignment on {n} points exceeds the cap of {cap}"
        )));
    }
    let c = cost_matrix(mu, nu, cost);
    let a = assignment::solve(&c, n);
    Ok(assignment::mean_cost(&c, n, &a))
}

/// `Π_V(μ, ν) = min_π (1/n) Σ V(x_i - y_π(i))`, by exact assignment.
pub fn quasi_distance_assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, v: &LyapunovSpec) -> Result<f64> {
    quasi_distance_with_cap(mu, nu, v, DEFAULT_ASSIGNMENT_CAP)
}

pub fn quasi_distance_with_cap(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    v: &LyapunovSpec,
    cap: usize,
) -> Result<f64> {
    assignment_cost(mu, nu, cap, |x, y| v.value_diff(x, y))
}

/// Per-pair costs `V(x_i - y_π(i))` under an optimal assignment `π`.
pub fn optimal_pair_costs(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    v: &LyapunovSpec,
    cap: usize,
) -> Result<Vec<f64>> {
    require_uniform_pair(mu, nu)?;
    let n = mu.len();
    if n > cap {
        return Err(Error::Resource(format!(
            "assignment on {n} points exceeds the cap of {cap}"
        )));
    }
    let c = cost_matrix(mu, nu, |x, y| v.value_diff(x, y));
    let a = assignment::solve(&c, n);
    Ok(a.iter().enumerate().map(|(i, &j)| c[i * n + j]).collect())
}

/// Certified bracket for the dual bounded-Lipschitz-type distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlBounds {
    pub lower: f64,
    pub upper: f64,
}

/// One admissible test function: `scale * h(x)` with `h` 1-Lipschitz.
#[derive(Clone, Copy, Debug)]
enum TestFn {
    Coordinate { axis: usize, clip: f64 },
    Radial { clip: f64 },
}

impl TestFn {
    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TestFn::Coordinate { axis, clip } => x[axis].clamp(-clip, clip),
            TestFn::Radial { clip } => norm(x).min(clip),
        }
    }

    /// `sup_x |h(x)| / (1 + |x|)^2`; `r / (1 + r)^2` peaks at `r = 1`.
    fn weighted_sup(&self) -> f64 {
        let clip = match *self {
            TestFn::Coordinate { clip, .. } | TestFn::Radial { clip } => clip,
        };
        if clip >= 1.0 {
            0.25
        } else {
            clip / ((1.0 + clip) * (1.0 + clip))
        }
    }

    /// Rescaling so that weighted sup plus Lipschitz constant equals 1.
    fn scale(&self) -> f64 {
        1.0 / (1.0 + self.weighted_sup())
    }
}

const CLIPS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, f64::INFINITY];

/// Lower bound from a finite admissible test family; upper bound from the
/// exact `W_1` assignment, which dominates the dual distance through any
/// coupling.
pub fn bl_distance_bounds(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<BlBounds> {
    bl_distance_bounds_with_cap(mu, nu, DEFAULT_ASSIGNMENT_CAP)
}

pub fn bl_distance_bounds_with_cap(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, cap: usize) -> Result<BlBounds> {
    let upper = assignment_cost(mu, nu, cap, |x, y| {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    })?;
    let family = (0..mu.dim())
        .flat_map(|axis| CLIPS.iter().map(move |&clip| TestFn::Coordinate { axis, clip }))
        .chain(CLIPS.iter().map(|&clip| TestFn::Radial { clip }));
    let lower = family
        .map(|f| f.scale() * (mu.integrate(|x| f.eval(x)) - nu.integrate(|x| f.eval(x))).abs())
        .fold(0.0, f64::max);
    Ok(BlBounds { lower, upper })
}
