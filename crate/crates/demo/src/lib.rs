//! WebAssembly bindings behind `www/index.html`.
//!
//! Every export works in the plane with a Dirac radius law and returns a
//! JSON document, or an error message when a parameter is rejected.

use percolab::distributions::RadiusLaw;
use percolab::experiments::{estimate_theta, ExperimentConfig};
use percolab::explorer::{explore_cluster, Stop};
use percolab::field::sample_window;
use percolab::revealment::{EventSpec, TemplateOptions, TemplateRunner, Verdict};
use percolab::FieldConfig;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const DIM: usize = 2;

fn field(lambda: f64, radius: f64, seed: u64) -> Result<FieldConfig, String> {
    let law = RadiusLaw::dirac(radius).map_err(|e| e.to_string())?;
    FieldConfig::new(DIM, lambda, law, seed).map_err(|e| e.to_string())
}

fn disc(center: &[f64], radius: f64) -> Value {
    json!([center[0], center[1], radius])
}

/// Balls meeting the window `[-window, window]^2` and the cluster of the origin
/// among them.
#[wasm_bindgen]
pub fn sample_cluster(lambda: f64, radius: f64, window: f64, seed: u64) -> Result<String, String> {
    let w = sample_window(&field(lambda, radius, seed)?, window, 1e-6).map_err(|e| e.to_string())?;
    let cluster = explore_cluster(&w, Stop::None).map_err(|e| e.to_string())?;
    let balls: Vec<Value> = w.points.iter().map(|p| disc(&p.ball.center, p.ball.radius)).collect();
    let members: Vec<Value> = cluster.balls.iter().map(|b| disc(&b.center, b.radius)).collect();
    Ok(json!({
        "window": window,
        "balls": balls,
        "cluster": members,
        "volume": cluster.volume(),
        "max_reach": cluster.max_reach,
    })
    .to_string())
}

/// Step-by-step run of the revealment algorithm for the event that the
/// origin is connected to distance `arm`.
#[wasm_bindgen]
pub fn reveal_trace(lambda: f64, radius: f64, arm: f64, seed: u64, max_steps: usize) -> Result<String, String> {
    let cfg = field(lambda, radius, seed)?;
    let mut runner = TemplateRunner::new(&cfg, EventSpec::OneArm(arm), max_steps, TemplateOptions::default())
        .map_err(|e| e.to_string())?;
    while runner.step() {}
    let trace = runner.trace();
    let steps: Vec<Value> = trace
        .records
        .iter()
        .map(|r| json!([r.index.spatial[0], r.index.spatial[1], r.index.height, r.points, r.cumulative_pvol]))
        .collect();
    let balls: Vec<Value> = runner.revealed_balls().iter().map(|b| disc(&b.center, b.radius)).collect();
    let cluster: Vec<Value> = runner.cluster_balls().iter().map(|b| disc(&b.center, b.radius)).collect();
    let verdict = match trace.verdict {
        Verdict::Occurred => "occurred",
        Verdict::Truncated(_) => "not certified",
    };
    Ok(json!({
        "arm": arm,
        "verdict": verdict,
        "pvol": trace.pvol_revealed,
        "steps": steps,
        "balls": balls,
        "cluster": cluster,
    })
    .to_string())
}

/// Monte Carlo estimate of the one-arm probability to distance `arm`.
#[wasm_bindgen]
pub fn theta(lambda: f64, radius: f64, arm: f64, replicas: usize, seed: u64) -> Result<String, String> {
    let cfg = ExperimentConfig::new(field(lambda, radius, seed)?).with_workers(1);
    let e = estimate_theta(&cfg, lambda, arm, replicas).map_err(|e| e.to_string())?;
    serde_json::to_string(&e).map_err(|e| e.to_string())
}
