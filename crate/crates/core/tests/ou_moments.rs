//! Interacting-particle moments of the mean-field OU model against the
//! closed-form moment equations `m' = (b - a) m`, `v' = σ² - 2 a v`.

use mvlab::noise::lanes;
use mvlab::particle::{simulate, Observer, ParticleEnsemble, SimOptions, StepConfig};
use mvlab::{NoiseStream, SpectralModel};

#[test]
fn mean_and_variance_follow_moment_equations() {
    let (a, b, sigma, x0, n) = (1.0, 0.5, 1.0, 2.0, 4000);
    let model = SpectralModel::mf_ou(1, 0.0, a, b, sigma);
    let ens = ParticleEnsemble::filled(n, &[x0]).unwrap();
    let opts = SimOptions {
        stride: Some(250),
        ..SimOptions::new(StepConfig::untamed(1e-3))
    };
    let obs = [Observer::mean(0), Observer::variance(0)];
    let traj = simulate(
        &model,
        &ens,
        1.0,
        &opts,
        &obs,
        &NoiseStream::new(21).lane(lanes::ENSEMBLE),
    )
    .unwrap();
    for (i, &t) in traj.times.iter().enumerate() {
        let m = x0 * ((b - a) * t).exp();
        let v = sigma * sigma / (2.0 * a) * (1.0 - (-2.0 * a * t).exp());
        let se_m = (v / n as f64).sqrt();
        let se_v = v * (2.0 / n as f64).sqrt();
        let got_m = traj.series[0].values[i];
        let got_v = traj.series[1].values[i];
        assert!((got_m - m).abs() <= 4.0 * se_m + 2e-3, "t = {t}: mean {got_m} vs {m}");
        assert!(
            (got_v - v).abs() <= 4.0 * se_v + 2e-3,
            "t = {t}: variance {got_v} vs {v}"
        );
    }
}

#[test]
fn synchronous_copies_contract_at_rate_a() {
    // With shared noise and b = 0 the difference solves d' = -a d exactly.
    let model = SpectralModel::mf_ou(1, 0.0, 1.0, 0.0, 1.0);
    let dt = 1e-3;
    let noise = NoiseStream::new(4).lane(lanes::ENSEMBLE);
    let opts = SimOptions::new(StepConfig::untamed(dt));
    let run = |x: f64| {
        let ens = ParticleEnsemble::filled(8, &[x]).unwrap();
        simulate(&model, &ens, 1.0, &opts, &[], &noise).unwrap().last
    };
    let (u, w) = (run(1.0), run(-1.0));
    let expect = 2.0 * (1.0 - dt).powi(1000);
    for i in 0..8 {
        assert!((u.state(i)[0] - w.state(i)[0] - expect).abs() < 1e-12);
    }
}
