use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mvlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvlab"))
        .args(args)
        .env_remove("MVLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

const SIMULATE: &str = r#"
kind = "simulate"
seed = 9
[model]
name = "mf-ou"
k = 2
nu = 0.3
[simulate]
particles = 64
t_end = 0.3
snapshots = true
"#;

#[test]
fn validate_rejects_low_beta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "kind = \"coupling\"\n[model]\nname = \"mf-holder\"\nbeta = 0.4\n",
    );
    let out = mvlab(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta = 0.4") && err.contains("(1/2, 1]"), "{err}");
}

#[test]
fn validate_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "kind = \"mixing\"\n[model]\nname = \"mf-ou\"\n");
    let out = mvlab(&["validate", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for key in ["[mixing]", "pair_particles", "delta_star = 2.0", "burn_in"] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
}

#[test]
fn missing_kind_lists_allowed_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "seed = 1\n");
    let out = mvlab(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for k in ["simulate", "coupling", "mixing", "slln", "clt", "selftest"] {
        assert!(err.contains(k), "{err}");
    }
}

#[test]
fn simulate_is_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SIMULATE);
    let mut runs = Vec::new();
    for (i, w) in ["1", "2", "8"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = mvlab(&[
            "run",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--workers",
            w,
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push((
            fs::read(out_dir.join("series.csv")).unwrap(),
            fs::read(out_dir.join("trajectory.csv")).unwrap(),
        ));
    }
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SIMULATE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(mvlab(&["run", "--config", &cfg, "--out", a.to_str().unwrap()])
        .status
        .success());
    assert!(
        mvlab(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "10"])
            .status
            .success()
    );
    assert_ne!(
        fs::read(a.join("series.csv")).unwrap(),
        fs::read(b.join("series.csv")).unwrap()
    );
    assert_eq!(manifest(&b)["seed"], 10);
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SIMULATE);
    let target = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_mvlab"))
        .args(["run", "--config", &cfg])
        .env("MVLAB_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("series.csv").exists());
    let m = manifest(&target);
    for key in ["config", "seed", "started_at", "wall_seconds"] {
        assert!(m.get(key).is_some(), "{key}");
    }
    assert_eq!(m["pass"], true);
}

#[test]
fn coupling_tail_has_one_row_per_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
kind = "coupling"
seed = 2
[model]
name = "mf-holder"
alpha = 0.6
beta = 0.8
[coupling]
replicas = 100
horizon_t = 0.5
background_particles = 100
theta_list = [0.2, 0.1, 0.05]
"#,
    );
    let out_dir = dir.path().join("o");
    let out = mvlab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("coupling_tail.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta_star,ell,replicas,exceed_freq,fitted_c2,r2");
    assert_eq!(lines.len(), 4);
}

#[test]
fn mixing_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
kind = "mixing"
seed = 5
[model]
name = "mf-ou"
[mixing]
pair_particles = 64
[mixing.invariant]
particles = 256
burn_in = 5.0
check_points = 0
[mixing.mixing]
bootstrap_draws = 20
t_end = 2.0
"#,
    );
    let out_dir = dir.path().join("o");
    let out = mvlab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(
        out.status.code().is_some_and(|c| c <= 1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        header(&out_dir.join("mixing.csv")),
        "t,pi_v,ci_low,ci_high,fit_window_flag"
    );
    assert_eq!(header(&out_dir.join("invariant.csv")), "mode,mean,variance");
}

#[test]
fn failed_predicate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        r#"
kind = "slln"
[model]
name = "mf-ou"
[slln]
times = [2.0, 4.0, 8.0]
replicas = 200
slope_tolerance = 0.0
"#,
    );
    let out_dir = dir.path().join("o");
    let out = mvlab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(header(&out_dir.join("slln.csv")), "t,moment_2k,ci");
}

#[test]
fn run_error_removes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "kind = \"clt\"\n[model]\nname = \"mf-ou\"\n[clt.observable]\nkind = \"constant\"\nvalue = 5.0\n[clt.invariant]\nparticles = 64\nburn_in = 1.0\n",
    );
    let out_dir = dir.path().join("o");
    let out = mvlab(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), 0);
}
