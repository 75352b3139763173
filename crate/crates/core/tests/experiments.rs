//! Estimators against exactly solvable cases.

use std::f64::consts::PI;

use percolab::distributions::RadiusLaw;
use percolab::experiments::{
    estimate_magnetization, estimate_tail, estimate_theta, fit_exponent, ExperimentConfig, FitModel,
    MagnetizationMethod,
};
use percolab::FieldConfig;

fn cfg(lambda: f64) -> ExperimentConfig {
    ExperimentConfig::new(FieldConfig::new(2, lambda, RadiusLaw::dirac(0.5).unwrap(), 77).unwrap()).with_workers(2)
}

#[test]
fn short_arms_are_coverage_of_the_origin() {
    // an arm shorter than the radius is reached by any ball covering the origin
    let lambda = 0.05;
    let c = ExperimentConfig::new(FieldConfig::new(2, lambda, RadiusLaw::dirac(2.0).unwrap(), 77).unwrap()).with_workers(2);
    let e = estimate_theta(&c, lambda, 1.0, 20_000).unwrap();
    let exact = 1.0 - (-lambda * PI * 4.0).exp();
    assert!((e.value - exact).abs() < 4.0 * e.standard_error, "{} vs {exact}", e.value);
}

#[test]
fn small_volume_tail_is_coverage_of_the_origin() {
    let lambda = 0.6;
    let t = estimate_tail(&cfg(lambda), lambda, &[0.5], 20_000).unwrap();
    let exact = 1.0 - (-lambda * PI * 0.25).exp();
    assert!((t.raw[0].value - exact).abs() < 4.0 * t.raw[0].standard_error);
}

#[test]
fn magnetization_estimators_agree_at_low_intensity() {
    let lambda = 0.5;
    let c = cfg(lambda);
    let direct = estimate_magnetization(&c, lambda, 0.7, 5000, MagnetizationMethod::Direct).unwrap();
    for method in [MagnetizationMethod::Ghost, MagnetizationMethod::GhostTemplate] {
        let g = estimate_magnetization(&c, lambda, 0.7, 5000, method).unwrap();
        let se = (direct.standard_error.powi(2) + g.standard_error.powi(2)).sqrt();
        assert!((direct.value - g.value).abs() < 4.0 * se, "{method:?}");
    }
}

#[test]
fn power_law_fit_recovers_a_noisy_exponent() {
    let x: Vec<f64> = (1..=12).map(|i| 0.05 * i as f64).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, x)| 2.0 * x.powf(-1.5) * (1.0 + 0.01 * ((i % 3) as f64 - 1.0))).collect();
    let f = fit_exponent(&x, &y, FitModel::PowerLaw).unwrap();
    assert!((f.exponent + 1.5).abs() < 3.0 * f.stderr + 1e-3, "{f:?}");
    assert!(f.r2 > 0.999);
}
