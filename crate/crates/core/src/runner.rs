//! Experiment dispatch, report files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::coupling::{run_coupling_triple, tail_scan};
use crate::ergodic::{
    estimate_invariant, fit_mixing_rate, lyapunov_decay_check, mixing_bound_check, InvariantEstimate,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::limit::{clt_ks_check, pi2_and_lambda, slln_moment_slope, CltConfig};
use crate::measure::EmpiricalMeasure;
use crate::noise::{lanes, NoiseStream};
use crate::particle::{simulate, Observer, ParticleEnsemble, SimOptions, StepConfig};
use crate::selftest::run_selftest;
use crate::table::{num, Table};

pub const MANIFEST: &str = "manifest.json";

/// Files written by one run and its outcome.
#[derive(Clone, Debug, Serialize)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    /// CSV file names relative to `out_dir`, in write order.
    pub files: Vec<String>,
    pub manifest: Value,
    pub pass: bool,
    pub summary: Value,
}

/// Collects written files so a failed run can remove them.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, table: &Table) -> Result<()> {
        table
            .write(&self.dir.join(name))
            .map_err(|e| e.context(format!("writing {name}")))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn remove_all(&self) {
        for f in self.files.iter().map(String::as_str).chain([MANIFEST]) {
            let p = self.dir.join(f);
            if p.exists() {
                if let Err(e) = fs::remove_file(&p) {
                    log::warn!("could not remove {}: {e}", p.display());
                }
            }
        }
    }
}

struct Outcome {
    pass: bool,
    summary: Value,
}

/// Normalizes `cfg`, runs it on `workers` threads (`0` = all cores) and
/// writes the CSV files and `manifest.json` into `out_dir`.
///
/// On error every file written by this run is removed.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<ReportBundle> {
    let cfg = cfg.clone().normalized()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::from(e).context(format!("creating {}", out_dir.display())))?;
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let clock = Instant::now();
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let result = exec::with_workers(workers, || dispatch(&cfg, &mut out));
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            out.remove_all();
            return Err(e.context(format!("{} experiment", kind_name(cfg.kind))));
        }
    };
    let manifest = json!({
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "seed": cfg.seed,
        "started_at": started_at,
        "wall_seconds": clock.elapsed().as_secs_f64(),
        "pass": outcome.pass,
        "files": out.files,
        "summary": outcome.summary,
        "versions": { "mvlab": env!("CARGO_PKG_VERSION") },
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    if let Err(e) = fs::write(out_dir.join(MANIFEST), text) {
        out.remove_all();
        return Err(Error::from(e).context("writing manifest.json"));
    }
    Ok(ReportBundle {
        out_dir: out_dir.to_path_buf(),
        files: out.files,
        manifest,
        pass: outcome.pass,
        summary: outcome.summary,
    })
}

fn kind_name(kind: Kind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn dispatch(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    match cfg.kind {
        Kind::Simulate => run_simulate(cfg, out),
        Kind::Coupling => run_coupling(cfg, out),
        Kind::Mixing => run_mixing(cfg, out),
        Kind::Slln => run_slln(cfg, out),
        Kind::Clt => run_clt(cfg, out),
        Kind::Selftest => {
            let rep = run_selftest(cfg.seed)?;
            out.write("selftest.csv", &rep.to_table())?;
            let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            Ok(Outcome {
                pass: rep.pass(),
                summary: json!({ "checks": rep.checks.len(), "failed": failed }),
            })
        }
    }
}

fn run_simulate(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let s = cfg.simulate.clone().unwrap_or_default();
    let model = cfg.model.build();
    let root = NoiseStream::new(cfg.seed);
    let ens = ParticleEnsemble::gaussian(
        s.particles,
        &vec![s.init_mean; model.k],
        s.init_std,
        &root.lane(lanes::INIT),
    )?;
    let step = StepConfig {
        taming: s.taming,
        ..StepConfig::new(s.dt)
    };
    let opts = SimOptions {
        stride: s.stride,
        keep_snapshots: s.snapshots,
        ..SimOptions::new(step)
    };
    let mut observers: Vec<Observer> = (0..model.k).map(Observer::mean).collect();
    observers.extend((0..model.k).map(Observer::variance));
    observers.push(Observer::second_moment());
    let traj = simulate(&model, &ens, s.t_end, &opts, &observers, &root.lane(lanes::ENSEMBLE))?;
    out.write("series.csv", &traj.series_table())?;
    if s.snapshots {
        out.write("trajectory.csv", &traj.snapshot_table()?)?;
    }
    Ok(Outcome {
        pass: true,
        summary: json!({
            "samples": traj.times.len(),
            "final_mean": traj.last.mean(),
        }),
    })
}

fn run_coupling(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let c = cfg.coupling.clone().unwrap_or_default();
    let model = cfg.model.build();
    if c.theta_list.len() == 1 {
        let run = crate::coupling::CouplingConfig {
            theta_star: c.theta_list[0],
            ..c.run.clone()
        };
        let rep = run_coupling_triple(&model, &run, cfg.seed)?;
        let mut t = Table::new(["theta_star", "ell", "replicas", "exceed_freq", "fitted_c2", "r2"]);
        t.push(vec![
            num(rep.theta_star),
            num(rep.ell),
            rep.replicas.len().to_string(),
            num(rep.exceed_freq),
            "nan".into(),
            "nan".into(),
        ]);
        out.write("coupling_tail.csv", &t)?;
        if c.per_replica {
            out.write("coupling_replicas.csv", &replica_table(&[&rep]))?;
        }
        return Ok(Outcome {
            pass: true,
            summary: json!({
                "mollify_level": rep.mollify_level,
                "exceed_freq": rep.exceed_freq,
                "kl": rep.kl,
                "tv_bound": rep.tv_bound,
            }),
        });
    }
    let scan = tail_scan(&model, &c.run, &c.theta_list, cfg.seed)?;
    out.write("coupling_tail.csv", &scan.to_table())?;
    if c.per_replica {
        let reps = c
            .theta_list
            .iter()
            .enumerate()
            .map(|(j, &th)| {
                let run = crate::coupling::CouplingConfig {
                    theta_star: th,
                    ..c.run.clone()
                };
                run_coupling_triple(&model, &run, cfg.seed.wrapping_add(j as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        out.write(
            "coupling_replicas.csv",
            &replica_table(&reps.iter().collect::<Vec<_>>()),
        )?;
    }
    let nonzero = scan.rows.iter().filter(|r| r.exceed_freq > 0.0).count();
    let slope_ok = nonzero < 2 || scan.fitted_c2.is_some_and(|c2| c2 > 0.0);
    let pass = scan.nonincreasing() && slope_ok;
    Ok(Outcome {
        pass,
        summary: json!({
            "nonincreasing": scan.nonincreasing(),
            "nonzero_rows": nonzero,
            "fitted_c2": scan.fitted_c2,
            "note": scan.note,
            "levels": scan.rows.iter().map(|r| r.mollify_level).collect::<Vec<_>>(),
            "max_sup_diff": scan.rows.iter().map(|r| r.max_sup_diff).collect::<Vec<_>>(),
        }),
    })
}

fn replica_table(reports: &[&crate::coupling::CouplingReport]) -> Table {
    let mut t = Table::new(["theta_star", "replica", "sup_diff", "tau", "tau1", "control_energy"]);
    for rep in reports {
        for (i, r) in rep.replicas.iter().enumerate() {
            t.push(vec![
                num(rep.theta_star),
                i.to_string(),
                num(r.sup_diff),
                num(r.tau),
                num(r.tau1),
                num(r.control_energy),
            ]);
        }
    }
    t
}

fn invariant_table(est: &InvariantEstimate) -> Table {
    let mut t = Table::new(["mode", "mean", "variance"]);
    for (i, (m, v)) in est.mean.iter().zip(&est.variance).enumerate() {
        t.push(vec![(i + 1).to_string(), num(*m), num(*v)]);
    }
    t
}

fn run_mixing(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let s = cfg.mixing.clone().unwrap_or_default();
    let model = cfg.model.build();
    let v = cfg.lyapunov_spec();
    let est = estimate_invariant(&model, &s.invariant, cfg.seed)?;
    out.write("invariant.csv", &invariant_table(&est))?;
    let mu = est.measure.truncated(s.pair_particles)?;
    let x0 = s.nu0.clone().unwrap_or_else(|| vec![2.0; model.k]);
    let nu = EmpiricalMeasure::uniform(model.k, x0.repeat(mu.len()))?;
    let mix = fit_mixing_rate(&model, &v, &nu, &mu, &s.mixing, cfg.seed)?;
    out.write("mixing.csv", &mix.to_table())?;
    let bound = mixing_bound_check(&model, &v, &nu, &mu, &s.bound(), cfg.seed)?;
    let decay = match &s.decay {
        Some(d) => {
            let rep = lyapunov_decay_check(&model, &v, d, cfg.seed)?;
            let mut t = Table::new(["t", "estimate", "std_error", "bound", "generator_excess"]);
            for i in 0..rep.times.len() {
                t.push(vec![
                    num(rep.times[i]),
                    num(rep.estimate[i]),
                    num(rep.std_error[i]),
                    num(rep.bound[i]),
                    num(rep.generator_excess[i]),
                ]);
            }
            out.write("decay.csv", &t)?;
            Some(rep.pass)
        }
        None => None,
    };
    let consistent = est.consistency.as_ref().map(|c| c.consistent);
    let pass = mix.pass && bound.pass && consistent != Some(false) && decay != Some(false);
    Ok(Outcome {
        pass,
        summary: json!({
            "variance": est.variance,
            "consistency": est.consistency,
            "rate": mix.rate,
            "rate_pass": mix.pass,
            "prefactor": bound.prefactor,
            "m_hat": bound.m_hat,
            "bound_pass": bound.pass,
            "decay_pass": decay,
        }),
    })
}

fn run_slln(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let s = cfg.slln.clone().unwrap_or_default();
    let model = cfg.model.build();
    let obs = s.observable.build();
    let rep = slln_moment_slope(&model, &obs, s.order, &s.times, s.replicas, &s.tagged, cfg.seed)?;
    out.write("slln.csv", &rep.to_table())?;
    let pass = rep.exact_zero
        || rep
            .slope
            .is_some_and(|b| (b + s.order as f64).abs() <= s.slope_tolerance);
    Ok(Outcome {
        pass,
        summary: json!({ "slope": rep.slope, "slope_ci": rep.slope_ci, "exact_zero": rep.exact_zero }),
    })
}

fn run_clt(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let s = cfg.clt.clone().unwrap_or_default();
    let model = cfg.model.build();
    let obs = s.observable.build();
    let est = estimate_invariant(&model, &s.invariant, cfg.seed)?;
    out.write("invariant.csv", &invariant_table(&est))?;
    let lam = pi2_and_lambda(&model, &obs, &est.measure, &s.lambda, cfg.seed)?;
    let agree = lam.agree(3.0);
    let expected_ok = s.expected_lambda_sq.is_none_or(|l| {
        let tol = s.lambda_tolerance * l.abs().max(f64::MIN_POSITIVE);
        (lam.direct - l).abs() <= tol && (lam.identity - l).abs() <= tol
    });
    let clt_cfg = CltConfig {
        tagged: s.tagged.clone(),
        replicas: s.replicas,
        ks_max: s.ks_max,
        ..CltConfig::default()
    };
    let rep = clt_ks_check(&model, &obs, lam.identity.max(0.0), &s.times, &clt_cfg, cfg.seed)?;
    out.write("clt.csv", &rep.to_table())?;
    Ok(Outcome {
        pass: rep.pass && agree && expected_ok,
        summary: json!({
            "lambda": lam,
            "estimators_agree": agree,
            "expected_ok": expected_ok,
            "ks": rep.ks,
            "exponent": rep.exponent,
            "degenerate": rep.degenerate,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_run_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(Kind::Slln);
        let mut s = crate::config::SllnSection::default();
        s.replicas = 10;
        cfg.slln = Some(s);
        assert!(run_experiment(&cfg, dir.path(), 1).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn simulate_writes_series_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(Kind::Simulate);
        let mut s = crate::config::SimulateSection::default();
        s.particles = 50;
        s.t_end = 0.2;
        cfg.simulate = Some(s);
        let b = run_experiment(&cfg, dir.path(), 1).unwrap();
        assert!(b.pass);
        assert_eq!(b.files, vec!["series.csv"]);
        let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        for key in ["config", "seed", "started_at", "wall_seconds", "pass"] {
            assert!(m.get(key).is_some(), "{key}");
        }
        let echoed: ExperimentConfig = serde_json::from_value(m["config"].clone()).unwrap();
        assert_eq!(echoed, cfg.normalized().unwrap());
    }
}
