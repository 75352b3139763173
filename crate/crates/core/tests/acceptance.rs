//! Acceptance suite: fourteen criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed even
//! when all criteria pass. The process exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use percolab::distributions::RadiusLaw;
use percolab::entropy::{
    event_bound_violations, identity_instances, kl_poisson, kl_process_bound, stopped_kl_identity_check,
};
use percolab::experiments::{
    check_entropic_bound, coupled_monotonicity, estimate_chi, estimate_magnetization, estimate_tail,
    estimate_theta, find_lambda_c, magnetization_from, markov_check, susceptibility_from, tail_from,
    CheckerConfig, CheckerSamples, ExperimentConfig, MagnetizationMethod,
};
use percolab::explorer::{union_volume, VolumeMethod};
use percolab::field::sample_window;
use percolab::geometry::cube_ball_minkowski_volume;
use percolab::revealment::{oracle_verdict, run_template_with, EventSpec, TemplateOptions, TruncationReason, Verdict};
use percolab::rng::replica_seed;
use percolab::{Ball, ConeBase, CubeIndex, FieldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn(&Shared) -> Outcome,
}

/// Quantities several criteria share.
struct Shared {
    lambda_c: f64,
}

const SEED: u64 = 20_261_016;

fn dirac(r: f64) -> RadiusLaw {
    RadiusLaw::dirac(r).expect("valid radius")
}

fn plane(lambda: f64, r: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(FieldConfig::new(2, lambda, dirac(r), seed).expect("valid field")).with_workers(1)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn lambda_c_for(r: f64, ladder: &[f64]) -> Result<f64, String> {
    let cfg = plane(1.0, r, SEED);
    Ok(find_lambda_c(&cfg, ladder, 0.5, 1e-3, 400, None).map_err(err)?.lambda_c)
}

/// Truncated pmf sum of `sum_k p(k) ln(p(k) / q(k))` for Poisson laws.
fn poisson_kl_by_pmf(a: f64, b: f64) -> f64 {
    let mut sum = 0.0;
    let mut log_fact = 0.0;
    for k in 0..400u32 {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let lp = -a + k as f64 * a.ln() - log_fact;
        let lq = -b + k as f64 * b.ln() - log_fact;
        sum += lp.exp() * (lp - lq);
    }
    sum
}

fn c01_poisson_closed_form(_: &Shared) -> Outcome {
    let grid = [0.1, 0.5, 1.0, 2.0, 5.0];
    let mut worst = 0.0f64;
    for &a in &grid {
        for &b in &grid {
            worst = worst.max((kl_poisson(a, b).map_err(err)? - poisson_kl_by_pmf(a, b)).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max abs error {worst:.2e} over 25 pairs")))
}

fn c02_process_bound(_: &Shared) -> Outcome {
    let masses = [0.1, 0.5, 1.0, 2.5, 10.0];
    let rates = [0.1, 0.5, 1.0, 2.0, 5.0];
    let (mut points, mut bad) = (0, 0);
    for &m in &masses {
        for &lx in &rates {
            for &ly in &rates {
                points += 1;
                let kl = kl_poisson(m * lx, m * ly).map_err(err)?;
                let rhs = m * (ly - lx).powi(2) / ly;
                if kl > rhs || (kl_process_bound(m, lx, ly).map_err(err)? - rhs).abs() > 1e-12 * rhs.max(1.0) {
                    bad += 1;
                }
            }
        }
    }
    Ok((points == 125 && bad == 0, format!("{bad} violations on {points} points")))
}

fn c03_event_bounds(_: &Shared) -> Outcome {
    let (gap, log) = event_bound_violations(10_000, SEED);
    Ok((gap == 0 && log == 0, format!("10^4 law pairs: {gap} gap and {log} log-ratio violations")))
}

fn c04_stopped_identity(_: &Shared) -> Outcome {
    let instances = identity_instances(60, SEED);
    let mut worst = 0.0f64;
    for (tree, xs, ys) in &instances {
        if tree.n > 4 || xs.iter().chain(ys).any(|l| l.len() > 4) {
            return Err("instance outside n <= 4, support <= 4".into());
        }
        let r = stopped_kl_identity_check(tree, xs, ys).map_err(err)?;
        worst = worst.max((r.lhs - r.rhs).abs());
    }
    Ok((
        instances.len() >= 50 && worst <= 1e-9,
        format!("{} instances, max |lhs - rhs| = {worst:.2e}", instances.len()),
    ))
}

/// Hit-or-miss estimate of `vol([0,1]^d + B_r)` with its standard error.
fn dilated_cube_by_sampling(d: usize, r: f64, samples: u64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let side = 1.0 + 2.0 * r;
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut gap = 0.0;
        for _ in 0..d {
            let x = -r + side * rng.random::<f64>();
            let g = (-x).max(x - 1.0).max(0.0);
            gap += g * g;
        }
        if gap <= r * r {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    let bx = side.powi(d as i32);
    (bx * f, bx * (f * (1.0 - f) / samples as f64).sqrt())
}

fn c05_geometry(_: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for d in 1..=3 {
        for r in [0.25, 1.0, 3.0] {
            let (mc, se) = dilated_cube_by_sampling(d, r, 10_000_000, &mut rng);
            worst = worst.max((cube_ball_minkowski_volume(d, r) - mc).abs() / se);
        }
    }
    let balls: Vec<Ball> = (0..40)
        .map(|_| Ball::new(vec![rng.random_range(-10.0..10.0)], rng.random_range(0.05..1.5)).expect("valid ball"))
        .collect();
    let exact = union_volume(&balls, VolumeMethod::Exact1d).map_err(err)?.value;
    let mc = union_volume(&balls, VolumeMethod::MonteCarlo { samples: 10_000_000, seed: SEED }).map_err(err)?;
    let z1 = (exact - mc.value).abs() / mc.standard_error;
    Ok((
        worst <= 3.0 && z1 <= 3.0,
        format!("Steiner vs sampling max {worst:.2} s.e. over 9 cases; 1d union {z1:.2} s.e."),
    ))
}

/// A random lattice animal of `size` cubes grown from the origin.
fn random_animal(d: usize, size: usize, rng: &mut ChaCha8Rng) -> BTreeSet<Vec<i64>> {
    let mut set = BTreeSet::from([vec![0i64; d]]);
    let mut list = vec![vec![0i64; d]];
    while set.len() < size {
        let mut next = list[rng.random_range(0..list.len())].clone();
        next[rng.random_range(0..d)] += if rng.random::<bool>() { 1 } else { -1 };
        if set.insert(next.clone()) {
            list.push(next);
        }
    }
    set
}

fn c06_cone_bounds(_: &Shared) -> Outcome {
    let laws = [dirac(1.0), RadiusLaw::uniform(0.5, 1.5).map_err(err)?, RadiusLaw::pareto(8.0, 1.0).map_err(err)?];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut checked, mut bad) = (0, 0);
    let mut tightest = f64::INFINITY;
    for d in 1..=2 {
        for law in &laws {
            let c_mu = law.single_cube_cone_pvol(d).map_err(err)?;
            for _ in 0..50 {
                let size = rng.random_range(1..=12);
                let animal = random_animal(d, size, &mut rng);
                let base = ConeBase::cubes(animal.into_iter().map(CubeIndex)).map_err(err)?;
                let pvol = law.cone_pvol(&base, d).map_err(err)?;
                let s = size as f64;
                checked += 1;
                if pvol < s * (1.0 - 1e-6) || pvol > c_mu * s * (1.0 + 1e-6) {
                    bad += 1;
                }
                tightest = tightest.min(pvol / s - 1.0);
            }
        }
    }
    Ok((bad == 0, format!("{bad} violations on {checked} animals; min cone_pvol/|S| - 1 = {tightest:.3}")))
}

fn c07_template_soundness(sh: &Shared) -> Outcome {
    let lambda = sh.lambda_c;
    let field = FieldConfig::new(2, lambda, dirac(0.5), SEED).map_err(err)?;
    let cfg = ExperimentConfig::new(field.clone());
    let event = EventSpec::OneArm(4.0);
    let opts = TemplateOptions { record_steps: false, ..TemplateOptions::default() };
    let (mut occurred, mut unconfirmed, mut oracle_yes, mut found, mut censored, mut other) = (0, 0, 0, 0, 0, 0);
    for k in 0..1000 {
        let f = field.with_seed(replica_seed(SEED, k));
        let trace = run_template_with(&f, event.clone(), cfg.max_steps, opts).map_err(err)?;
        let oracle = oracle_verdict(&f, lambda, &event, trace.height_cap, cfg.ball_cap)
            .map_err(err)?
            .ok_or("oracle hit the ball cap")?;
        if trace.occurred() {
            occurred += 1;
            if !oracle {
                unconfirmed += 1;
            }
        }
        if oracle {
            oracle_yes += 1;
            match trace.verdict {
                Verdict::Occurred => found += 1,
                Verdict::Truncated(TruncationReason::MaxSteps) => censored += 1,
                Verdict::Truncated(TruncationReason::EmptyActiveSet) => other += 1,
            }
        }
    }
    let agreement = found as f64 / oracle_yes.max(1) as f64;
    Ok((
        unconfirmed == 0 && agreement >= 0.99 && other == 0,
        format!(
            "lambda {lambda:.4}: {occurred} occurred, {unconfirmed} unconfirmed; oracle {oracle_yes}, found {found} ({:.2}%), censored {censored}",
            100.0 * agreement
        ),
    ))
}

fn c08_duality(sh: &Shared) -> Outcome {
    let lambda = 0.9 * sh.lambda_c;
    let cfg = plane(lambda, 0.5, SEED);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for rho in [0.2, 0.5, 1.0] {
        let d = estimate_magnetization(&cfg, lambda, rho, 10_000, MagnetizationMethod::Direct).map_err(err)?;
        let g = estimate_magnetization(&cfg, lambda, rho, 10_000, MagnetizationMethod::Ghost).map_err(err)?;
        let z = (d.value - g.value).abs() / (d.standard_error.powi(2) + g.standard_error.powi(2)).sqrt();
        worst = worst.max(z);
        parts.push(format!("rho {rho}: {:.4}/{:.4}", d.value, g.value));
    }
    Ok((worst <= 3.0, format!("{}; max {worst:.2} combined s.e.", parts.join(", "))))
}

fn c09_entropic(sh: &Shared) -> Outcome {
    let lc = sh.lambda_c;
    let cfg = plane(0.9 * lc, 0.5, SEED);
    let mut pass = true;
    let mut parts = Vec::new();
    for event in [EventSpec::OneArm(3.0), EventSpec::VolumeAtLeast(2.0)] {
        for (a, b) in [(0.6, 0.9), (0.9, 0.6)] {
            let r = check_entropic_bound(&cfg, &event, a * lc, b * lc, 10_000).map_err(err)?;
            pass &= r.pass && r.template_oracle_disagreements == 0;
            parts.push(format!(
                "{:?} ({a},{b}) gap {:.3}<={:.3}",
                event,
                r.gap,
                r.gap_rhs
            ));
        }
    }
    Ok((pass, parts.join("; ")))
}

fn c10_monotonicity(sh: &Shared) -> Outcome {
    let lc = sh.lambda_c;
    let lambdas: Vec<f64> = [0.5, 0.7, 0.9, 1.0].iter().map(|f| f * lc).collect();
    let cfg = plane(lc, 0.5, SEED);
    let r = coupled_monotonicity(&cfg, &lambdas, 8.0, 0.5, 1000).map_err(err)?;
    Ok((
        r.violations() == 0 && r.skipped == 0,
        format!(
            "{} comparisons: arm {}, volume {}, magnetization {} violations; {} skipped at the ball cap",
            r.comparisons, r.arm_violations, r.volume_violations, r.magnetization_violations, r.skipped
        ),
    ))
}

fn c11_markov(sh: &Shared) -> Outcome {
    let lambda = 0.8 * sh.lambda_c;
    let cfg = plane(lambda, 0.5, SEED);
    let y: Vec<f64> = (0..10).map(|i| 10f64.powf(i as f64 / 3.0)).collect();
    let pts = markov_check(&cfg, lambda, &y, 4000).map_err(err)?;
    let held = pts.iter().filter(|p| p.holds).count();
    let worst = pts.iter().map(|p| p.tail - p.chi_over_y).fold(f64::NEG_INFINITY, f64::max);
    Ok((held == y.len(), format!("{held}/10 grid points hold; max tail - chi/y = {worst:.4}")))
}

fn c12_scaling(_: &Shared) -> Outcome {
    let ladder = [16.0, 32.0, 64.0];
    let l1 = lambda_c_for(1.0, &ladder)?;
    let l2 = lambda_c_for(2.0, &ladder)?;
    let ratio = l1 / l2;
    Ok(((ratio - 4.0).abs() <= 0.4, format!("Dirac(1) {l1:.5}, Dirac(2) {l2:.5}, ratio {ratio:.3}")))
}

fn c13_checkers(sh: &Shared) -> Outcome {
    let cfg = plane(sh.lambda_c, 0.5, SEED);
    let checker = CheckerConfig::new(sh.lambda_c);
    if checker.lambda_grid.len() != 5 || checker.y_grid.len() != 8 || checker.rho_grid.len() != 5 {
        return Err("default grids changed".into());
    }
    let samples = CheckerSamples::collect(&cfg, &checker).map_err(err)?;
    let s = susceptibility_from(&checker, &samples);
    let t = tail_from(&checker, &samples);
    let m = magnetization_from(&checker, &samples);
    let checks = [&s.arm_bound, &s.volume_bound, &t.critical_bound, &t.log_ratio_bound, &m.susceptibility_bound, &m.power_bound];
    let detail = checks.iter().map(|c| format!("{} {:.3}", c.label, c.min_lower)).collect::<Vec<_>>().join(", ");
    Ok((s.pass && t.pass && m.pass, format!("min lower constants: {detail}")))
}

fn determinism_snapshot(workers: usize, lc: f64) -> Result<Vec<String>, String> {
    let lambda = 0.9 * lc;
    let cfg = plane(lc, 0.5, SEED).with_workers(workers);
    let j = |v: serde_json::Result<String>| v.map_err(err);
    let mut out = vec![
        j(serde_json::to_string(&estimate_theta(&cfg, lambda, 6.0, 300).map_err(err)?))?,
        j(serde_json::to_string(&estimate_chi(&cfg, lambda, 300).map_err(err)?))?,
        j(serde_json::to_string(&estimate_tail(&cfg, lambda, &[1.0, 10.0, 100.0], 300).map_err(err)?))?,
        j(serde_json::to_string(&markov_check(&cfg, lambda, &[1.0, 10.0], 300).map_err(err)?))?,
    ];
    for method in [MagnetizationMethod::Direct, MagnetizationMethod::Ghost, MagnetizationMethod::GhostTemplate] {
        out.push(j(serde_json::to_string(&estimate_magnetization(&cfg, lambda, 0.5, 300, method).map_err(err)?))?);
    }
    out.push(j(serde_json::to_string(&find_lambda_c(&cfg, &[8.0], 0.5, 1e-3, 100, None).map_err(err)?))?);
    out.push(j(serde_json::to_string(&check_entropic_bound(&cfg, &EventSpec::OneArm(3.0), 0.6 * lc, 0.9 * lc, 300).map_err(err)?))?);
    out.push(j(serde_json::to_string(&coupled_monotonicity(&cfg, &[0.5 * lc, lambda], 6.0, 0.5, 100).map_err(err)?))?);
    let trace = run_template_with(&cfg.field.with_lambda(lambda), EventSpec::OneArm(4.0), 10_000, TemplateOptions::default())
        .map_err(err)?;
    out.push(j(serde_json::to_string(&trace))?);
    out.push(trace.to_json_lines());
    out.push(sample_window(&cfg.field.with_lambda(lambda), 6.0, 1e-6).map_err(err)?.to_csv());
    Ok(out)
}

fn c14_determinism(sh: &Shared) -> Outcome {
    let a = determinism_snapshot(1, sh.lambda_c)?;
    let b = determinism_snapshot(1, sh.lambda_c)?;
    let c = determinism_snapshot(4, sh.lambda_c)?;
    let differing = (0..a.len()).filter(|&i| a[i] != b[i] || a[i] != c[i]).count();
    Ok((differing == 0, format!("{} artifacts compared across 2 runs and workers {{1, 4}}: {differing} differ", a.len())))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "Poisson divergence closed form", limit: Duration::from_secs(1), run: c01_poisson_closed_form },
        Criterion { id: 2, name: "process divergence bound", limit: Duration::from_secs(1), run: c02_process_bound },
        Criterion { id: 3, name: "event probability bounds", limit: Duration::from_secs(30), run: c03_event_bounds },
        Criterion { id: 4, name: "stopped-sequence identity", limit: Duration::from_secs(60), run: c04_stopped_identity },
        Criterion { id: 5, name: "geometry oracles", limit: Duration::from_secs(120), run: c05_geometry },
        Criterion { id: 6, name: "cone volume bounds", limit: Duration::from_secs(120), run: c06_cone_bounds },
        Criterion { id: 7, name: "template soundness", limit: Duration::from_secs(300), run: c07_template_soundness },
        Criterion { id: 8, name: "magnetization duality", limit: Duration::from_secs(600), run: c08_duality },
        Criterion { id: 9, name: "entropic bounds", limit: Duration::from_secs(600), run: c09_entropic },
        Criterion { id: 10, name: "coupled monotonicity", limit: Duration::from_secs(120), run: c10_monotonicity },
        Criterion { id: 11, name: "Markov consistency", limit: Duration::from_secs(300), run: c11_markov },
        Criterion { id: 12, name: "critical intensity scaling", limit: Duration::from_secs(900), run: c12_scaling },
        Criterion { id: 13, name: "theorem checkers", limit: Duration::from_secs(1800), run: c13_checkers },
        Criterion { id: 14, name: "determinism", limit: Duration::from_secs(300), run: c14_determinism },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected: Vec<&Criterion> = criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)).collect();

    let start = Instant::now();
    let shared = match lambda_c_for(0.5, &[8.0, 16.0, 32.0]) {
        Ok(lambda_c) => Shared { lambda_c },
        Err(e) => {
            println!("FAIL  reference critical intensity: {e}");
            std::process::exit(1);
        }
    };
    let reference = start.elapsed();
    println!("reference critical intensity (d=2, Dirac(0.5), R=32): {:.5} in {:.1} s", shared.lambda_c, reference.as_secs_f64());

    let mut failures = 0;
    for c in &selected {
        let t = Instant::now();
        let outcome = (c.run)(&shared);
        // the checkers' budget includes the search that produced their reference point
        let elapsed = t.elapsed() + if c.id == 13 { reference } else { Duration::ZERO };
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && elapsed <= c.limit, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{}  {:>2}. {:<32} {:>7.1} s (limit {:>4} s)  {}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            detail
        );
    }
    println!("{} of {} criteria passed in {:.1} s", selected.len() - failures, selected.len(), start.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
