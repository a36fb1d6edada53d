//! Built-in oracle suite.

use serde::Serialize;

use crate::coupling::pinsker;
use crate::ergodic::{estimate_invariant, mixing_prefactor, InvariantConfig};
use crate::error::Result;
use crate::lyapunov::LyapunovSpec;
use crate::measure::{quasi_distance_assignment, EmpiricalMeasure};
use crate::model::{EnvelopeTable, ModeProfile, MollifyConfig, ScalarExpr, SpectralModel};
use crate::noise::{lanes, NoiseStream};
use crate::table::{num, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &str, expected: String, actual: String, pass: bool) {
        self.checks.push(Check {
            name: name.into(),
            expected,
            actual,
            pass,
        });
    }

    /// Columns `check, expected, actual, pass`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["check", "expected", "actual", "pass"]);
        for c in &self.checks {
            t.push(vec![
                c.name.clone(),
                c.expected.clone(),
                c.actual.clone(),
                c.pass.to_string(),
            ]);
        }
        t
    }
}

/// Minimum of `(1/n) Σ cost(i, π(i))` over all permutations.
pub fn brute_force_assignment(cost: &[f64], n: usize) -> f64 {
    fn go(cost: &[f64], n: usize, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                go(cost, n, row + 1, used, acc + cost[row * n + j], best);
                used[j] = false;
            }
        }
    }
    if n == 0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    go(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
    best / n as f64
}

/// Largest gap between exact assignment and permutation enumeration over
/// `instances` random problems with `n <= 6`.
pub fn assignment_oracle(instances: usize, seed: u64) -> Result<f64> {
    let s = NoiseStream::new(seed).lane(lanes::INIT);
    let unif = |i: u64, c: u64| (s.uniform_u64(i, c) >> 11) as f64 / (1u64 << 53) as f64;
    let v = LyapunovSpec::quadratic_for_ou(1.0, 0.0, 1);
    let mut worst = 0.0f64;
    for inst in 0..instances as u64 {
        let n = 1 + (s.uniform_u64(inst, 0) % 6) as usize;
        let d = 1 + (s.uniform_u64(inst, 1) % 3) as usize;
        let mut c = 2u64;
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| {
                    c += 1;
                    4.0 * unif(inst, c) - 2.0
                })
                .collect()
        };
        let a = draw(n * d);
        let b = draw(n * d);
        let mu = EmpiricalMeasure::uniform(d, a)?;
        let nu = EmpiricalMeasure::uniform(d, b)?;
        let cost: Vec<f64> = (0..n * n)
            .map(|ij| v.value_diff(mu.point(ij / n), nu.point(ij % n)))
            .collect();
        let exact = quasi_distance_assignment(&mu, &nu, &v)?;
        worst = worst.max((exact - brute_force_assignment(&cost, n)).abs());
    }
    Ok(worst)
}

/// Envelope properties of `√|x|` at the given levels: `(below, lipschitz
/// excess, max deviation on [-1, 1])` per level.
pub fn mollifier_oracle(levels: &[u32]) -> Result<Vec<(bool, f64, f64)>> {
    let base = ModeProfile::Expr(ScalarExpr::abs_power(1.0, 0.5));
    let cfg = MollifyConfig::default();
    // Uniform grid plus a log-spaced grid resolving the cusp at 0.
    let mut probes: Vec<f64> = (0..=4000).map(|i| -2.0 + i as f64 * 1e-3).collect();
    for i in 0..=600 {
        let r = 10f64.powf(-8.0 + i as f64 / 100.0);
        probes.extend([r, -r]);
    }
    probes.sort_by(f64::total_cmp);
    probes.dedup();
    levels
        .iter()
        .map(|&n| {
            let env = EnvelopeTable::build(base.clone(), n as f64, &cfg)?;
            let below = probes.iter().all(|&x| env.eval(x) <= base.eval(x) + 1e-12);
            let lip = probes
                .windows(2)
                .map(|w| (env.eval(w[1]) - env.eval(w[0])).abs() / (w[1] - w[0]) - n as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            let dev = probes
                .iter()
                .filter(|x| x.abs() <= 1.0)
                .map(|&x| base.eval(x) - env.eval(x))
                .fold(0.0, f64::max);
            Ok((below, lip, dev))
        })
        .collect()
}

pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    let mut rep = SelftestReport::default();

    let gap = assignment_oracle(100, seed)?;
    rep.push(
        "assignment_vs_permutations",
        "gap <= 1e-12".into(),
        num(gap),
        gap <= 1e-12,
    );

    let model = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0);
    let inv = estimate_invariant(
        &model,
        &InvariantConfig {
            check_points: 0,
            ..InvariantConfig::default()
        },
        seed,
    )?;
    let var = inv.variance[0];
    rep.push(
        "ou_stationary_variance",
        "0.5 within 10%".into(),
        num(var),
        (var - 0.5).abs() <= 0.05,
    );

    let levels = [4, 16, 64];
    let moll = mollifier_oracle(&levels)?;
    let below = moll.iter().all(|m| m.0);
    rep.push("envelope_below_original", "true".into(), below.to_string(), below);
    let lip = moll.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    rep.push("envelope_lipschitz", "slope - n <= 1e-6".into(), num(lip), lip <= 1e-6);
    let devs: Vec<f64> = moll.iter().map(|m| m.2).collect();
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    rep.push(
        "envelope_deviation_decreasing",
        "strictly decreasing over n = 4 16 64".into(),
        devs.iter().map(|d| num(*d)).collect::<Vec<_>>().join(" "),
        decreasing,
    );

    rep.push("pinsker_0.02", "0.1".into(), num(pinsker(0.02)), pinsker(0.02) == 0.1);
    rep.push("pinsker_clip", "1".into(), num(pinsker(2.0)), pinsker(2.0) == 1.0);

    let v = LyapunovSpec {
        delta0: 1.0,
        ..LyapunovSpec::quadratic_for_ou(1.0, 1.0, 1)
    };
    let pref = mixing_prefactor(&v, 1.0);
    let closed = 0.5 / (1.0 - (-2.0f64).exp());
    rep.push(
        "mixing_prefactor",
        num(closed),
        num(pref),
        (pref - closed).abs() <= 1e-12,
    );
    Ok(rep)
}
