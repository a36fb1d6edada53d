//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero when a criterion fails.
//!
//! Run with `cargo test -p mvlab --test acceptance`.

use std::path::Path;
use std::time::{Duration, Instant};

use mvlab::config::{
    CouplingSection, ExperimentConfig, Kind, MixingSection, ModelConfig, SimulateSection, SllnSection,
};
use mvlab::coupling::{pinsker, tail_scan, CouplingConfig};
use mvlab::ergodic::{
    estimate_invariant, fit_mixing_rate, mixing_bound_check, mixing_prefactor, BoundConfig, InvariantConfig,
    MixingConfig,
};
use mvlab::limit::{
    clt_ks_check, pi2_and_lambda, slln_moment_slope, CltConfig, LambdaConfig, ObservableSpec, TaggedConfig,
};
use mvlab::model::HolderParams;
use mvlab::runner::run_experiment;
use mvlab::selftest::{assignment_oracle, mollifier_oracle};
use mvlab::{EmpiricalMeasure, LyapunovSpec, SpectralModel};

const ASSIGNMENT_TOL: f64 = 1e-12;
const VARIANCE_REL_TOL: f64 = 0.10;
const RATE_REL_TOL: f64 = 0.10;
const M_HAT_MAX: f64 = 2.0;
const PREFACTOR_TOL: f64 = 1e-6;
const PREFACTOR_LITERAL: f64 = 0.578235;
const SLLN_SLOPE_TOL: f64 = 0.15;
const LAMBDA_REL_TOL: f64 = 0.10;
const KS_MAX: f64 = 0.05;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    /// Reported but not counted against the exit status.
    advisory: bool,
    detail: String,
    elapsed: Duration,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn ou() -> SpectralModel {
    SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0)
}

fn ou_v() -> LyapunovSpec {
    LyapunovSpec::quadratic_for_ou(1.0, 1.0, 1)
}

fn transport() -> Line {
    let (gap, el) = timed(|| assignment_oracle(100, 1).unwrap());
    Line {
        id: 1,
        name: "transport oracle",
        pass: gap <= ASSIGNMENT_TOL && el < Duration::from_secs(5),
        advisory: false,
        detail: format!("max |assignment - permutation min| = {gap:e} over 100 instances"),
        elapsed: el,
    }
}

fn invariant() -> (Line, EmpiricalMeasure) {
    let (est, el) = timed(|| estimate_invariant(&ou(), &InvariantConfig::default(), 7).unwrap());
    let var = est.variance[0];
    let line = Line {
        id: 2,
        name: "invariant-measure oracle",
        pass: (var - 0.5).abs() <= VARIANCE_REL_TOL * 0.5 && el < Duration::from_secs(60),
        advisory: false,
        detail: format!("variance {var:.4} vs 0.5"),
        elapsed: el,
    };
    (line, est.measure)
}

fn mixing_inputs(mu_star: &EmpiricalMeasure) -> (EmpiricalMeasure, EmpiricalMeasure) {
    let mu = mu_star.truncated(256).unwrap();
    let nu = EmpiricalMeasure::uniform(1, vec![2.0; mu.len()]).unwrap();
    (nu, mu)
}

fn mixing_rate(mu_star: &EmpiricalMeasure) -> Line {
    let (nu, mu) = mixing_inputs(mu_star);
    let cfg = MixingConfig {
        expected_rate: Some(2.0),
        tolerance: RATE_REL_TOL,
        ..MixingConfig::default()
    };
    let (rep, el) = timed(|| fit_mixing_rate(&ou(), &ou_v(), &nu, &mu, &cfg, 3).unwrap());
    let rate = rep.rate.unwrap_or(f64::NAN);
    Line {
        id: 3,
        name: "mixing-rate oracle",
        pass: (rate - 2.0).abs() <= RATE_REL_TOL * 2.0 && el < Duration::from_secs(120),
        advisory: false,
        detail: format!("fitted rate {rate:.4} vs 2 (r2 {:.4})", rep.r2.unwrap_or(f64::NAN)),
        elapsed: el,
    }
}

fn lyapunov_bound(mu_star: &EmpiricalMeasure) -> Vec<Line> {
    let (nu, mu) = mixing_inputs(mu_star);
    let v = ou_v();
    let cfg = BoundConfig {
        t0: 1.0,
        m_max: M_HAT_MAX,
        ..BoundConfig::default()
    };
    let (rep, el) = timed(|| mixing_bound_check(&ou(), &v, &nu, &mu, &cfg, 3).unwrap());
    // Independent evaluation with δ* = 2, δ0 = σ² = 1, c* = 1, t0 = 1.
    let closed = 1.0 / (2.0 * (1.0 - (-2.0f64).exp()));
    let pref = mixing_prefactor(&v, 1.0);
    let m_max = rep.m_hat.iter().cloned().fold(0.0, f64::max);
    vec![
        Line {
            id: 4,
            name: "Lyapunov mixing bound",
            pass: rep.pass && m_max <= M_HAT_MAX && (pref - closed).abs() <= PREFACTOR_TOL && el < Duration::from_secs(120),
            advisory: false,
            detail: format!("M_hat {:?}, stable {}, prefactor {pref:.7} vs closed form {closed:.7}", rep.m_hat, rep.stable),
            elapsed: el,
        },
        Line {
            id: 4,
            name: "prefactor against the quoted constant 0.578235",
            pass: (pref - PREFACTOR_LITERAL).abs() <= PREFACTOR_TOL,
            advisory: true,
            detail: format!(
                "|{pref:.7} - {PREFACTOR_LITERAL}| = {:.2e}; the quoted constant disagrees with 1/(2(1 - e^-2)) beyond the tolerance",
                (pref - PREFACTOR_LITERAL).abs()
            ),
            elapsed: Duration::ZERO,
        },
    ]
}

fn slln() -> Line {
    let phi = ObservableSpec::coordinate(0).with_mean(0.0);
    let times = [10.0, 20.0, 40.0, 80.0, 160.0];
    let (rep, el) = timed(|| slln_moment_slope(&ou(), &phi, 1, &times, 500, &TaggedConfig::default(), 1).unwrap());
    let slope = rep.slope.unwrap_or(f64::NAN);
    Line {
        id: 5,
        name: "SLLN slope",
        pass: (slope + 1.0).abs() <= SLLN_SLOPE_TOL && el < Duration::from_secs(600),
        advisory: false,
        detail: format!("slope {slope:.4} vs -1"),
        elapsed: el,
    }
}

fn clt() -> Line {
    let model = ou();
    let phi = ObservableSpec::coordinate(0).with_mean(0.0);
    let ((lam, rep), el) = timed(|| {
        let inv = InvariantConfig {
            check_points: 0,
            ..InvariantConfig::default()
        };
        let est = estimate_invariant(&model, &inv, 5).unwrap();
        let lam = pi2_and_lambda(&model, &phi, &est.measure, &LambdaConfig::default(), 3).unwrap();
        let cfg = CltConfig {
            replicas: 2000,
            ks_max: KS_MAX,
            ..CltConfig::default()
        };
        let rep = clt_ks_check(&model, &phi, lam.identity, &[25.0, 50.0, 100.0, 200.0], &cfg, 4).unwrap();
        (lam, rep)
    });
    let ks = *rep.ks.last().unwrap();
    let ok_d = (lam.direct - 1.0).abs() <= LAMBDA_REL_TOL;
    let ok_i = (lam.identity - 1.0).abs() <= LAMBDA_REL_TOL;
    Line {
        id: 6,
        name: "CLT variance and KS",
        pass: ok_d && ok_i && ks < KS_MAX && el < Duration::from_secs(600),
        advisory: false,
        detail: format!(
            "Lambda^2 direct {:.4}±{:.4}, identity {:.4}±{:.4}; KS(t=200) {ks:.4}",
            lam.direct, lam.direct_se, lam.identity, lam.identity_se
        ),
        elapsed: el,
    }
}

fn coupling() -> Line {
    let params = HolderParams {
        alpha: 0.6,
        beta: 0.8,
        ..HolderParams::default()
    };
    let model = SpectralModel::mf_holder(1, 0.0, params);
    let base = CouplingConfig {
        vartheta: 0.25,
        replicas: 200,
        ..CouplingConfig::default()
    };
    let (scan, el) = timed(|| tail_scan(&model, &base, &[0.2, 0.1, 0.05], 11).unwrap());
    let nonzero = scan.rows.iter().filter(|r| r.exceed_freq > 0.0).count();
    let slope_ok = nonzero < 2 || scan.fitted_c2.is_some_and(|c| c > 0.0);
    let freqs: Vec<f64> = scan.rows.iter().map(|r| r.exceed_freq).collect();
    let sups: Vec<String> = scan.rows.iter().map(|r| format!("{:.3}", r.max_sup_diff)).collect();
    let vacuous = if nonzero == 0 { " (vacuous: no exceedances)" } else { "" };
    Line {
        id: 7,
        name: "coupling tail",
        pass: scan.nonincreasing() && slope_ok && el < Duration::from_secs(600),
        advisory: false,
        detail: format!("freq {freqs:?}, max sup {sups:?}, C2 {:?}{vacuous}", scan.fitted_c2),
        elapsed: el,
    }
}

fn pinsker_line() -> Line {
    let clip = [2.0, 3.5, 100.0].iter().all(|&k| pinsker(k) == 1.0);
    let exact = pinsker(0.02) == 0.1;
    Line {
        id: 8,
        name: "Pinsker arithmetic",
        pass: exact && clip,
        advisory: false,
        detail: format!("tv(0.02) = {}, tv(kl >= 2) = 1: {clip}", pinsker(0.02)),
        elapsed: Duration::ZERO,
    }
}

fn small_configs() -> Vec<ExperimentConfig> {
    let mut sim = ExperimentConfig::new(Kind::Simulate);
    sim.model = ModelConfig::MfOu {
        k: 3,
        nu: 0.2,
        a: 1.0,
        b: 0.5,
        sigma: 1.0,
    };
    sim.simulate = Some(SimulateSection {
        particles: 300,
        t_end: 0.5,
        snapshots: true,
        ..SimulateSection::default()
    });

    let mut cpl = ExperimentConfig::new(Kind::Coupling);
    cpl.model = ModelConfig::MfHolder {
        k: 1,
        nu: 0.0,
        a: 1.0,
        c: 1.0,
        alpha: 0.6,
        b: 0.5,
        sigma0: 0.5,
        sigma1: 0.5,
        beta: 0.8,
        x_cap: HolderParams::default().x_cap,
    };
    let mut cs = CouplingSection::default();
    cs.run.replicas = 100;
    cs.run.horizon_t = 0.5;
    cs.run.background_particles = 100;
    cs.per_replica = true;
    cpl.coupling = Some(cs);

    let mut mix = ExperimentConfig::new(Kind::Mixing);
    let mut ms = MixingSection::default();
    ms.invariant.particles = 256;
    ms.invariant.burn_in = 4.0;
    ms.invariant.check_points = 64;
    ms.pair_particles = 64;
    ms.mixing.bootstrap_draws = 20;
    ms.mixing.t_end = 2.0;
    mix.mixing = Some(ms);

    let mut sl = ExperimentConfig::new(Kind::Slln);
    sl.slln = Some(SllnSection {
        times: vec![2.0, 4.0, 8.0],
        replicas: 200,
        ..SllnSection::default()
    });

    for (i, c) in [&mut sim, &mut cpl, &mut mix, &mut sl].into_iter().enumerate() {
        c.seed = 100 + i as u64;
    }
    vec![sim, cpl, mix, sl]
}

fn csv_bytes(dir: &Path, files: &[String]) -> Vec<(String, Vec<u8>)> {
    files
        .iter()
        .map(|f| (f.clone(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

fn determinism() -> Line {
    let root = tempfile::tempdir().unwrap();
    let (mismatches, el) = timed(|| {
        let mut bad = Vec::new();
        for cfg in small_configs() {
            let mut outputs = Vec::new();
            for w in [1usize, 2, 8] {
                let dir = root.path().join(format!("{:?}-{w}", cfg.kind));
                let b = run_experiment(&cfg, &dir, w).unwrap();
                outputs.push(csv_bytes(&dir, &b.files));
            }
            if !outputs.windows(2).all(|p| p[0] == p[1]) {
                bad.push(format!("{:?}", cfg.kind));
            }
        }
        bad
    });
    Line {
        id: 9,
        name: "determinism across workers 1, 2, 8",
        pass: mismatches.is_empty(),
        advisory: false,
        detail: format!("simulate, coupling, mixing, slln; mismatched: {mismatches:?}"),
        elapsed: el,
    }
}

fn mollifier() -> Line {
    let (m, el) = timed(|| mollifier_oracle(&[4, 16, 64]).unwrap());
    let below = m.iter().all(|x| x.0);
    let lip = m.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let dev: Vec<f64> = m.iter().map(|x| x.2).collect();
    let mono = dev.windows(2).all(|w| w[1] < w[0]);
    Line {
        id: 10,
        name: "mollifier envelope",
        pass: below && lip <= 1e-6 && mono,
        advisory: false,
        detail: format!("below {below}, slope excess {lip:e}, deviation {dev:.5?}"),
        elapsed: el,
    }
}

fn main() {
    // libtest flags such as `--nocapture` or a filter are accepted and ignored.
    let mut lines = vec![transport()];
    let (inv, mu_star) = invariant();
    lines.push(inv);
    lines.push(mixing_rate(&mu_star));
    lines.extend(lyapunov_bound(&mu_star));
    lines.push(slln());
    lines.push(clt());
    lines.push(coupling());
    lines.push(pinsker_line());
    lines.push(determinism());
    lines.push(mollifier());

    let mut failed = 0;
    for l in &lines {
        let tag = match (l.pass, l.advisory) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (advisory)",
        };
        println!(
            "{tag} [{}] {}: {} ({:.2}s)",
            l.id,
            l.name,
            l.detail,
            l.elapsed.as_secs_f64()
        );
        if !l.pass && !l.advisory {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
