//! Monte Carlo estimators and inequality checkers.
//!
//! Every estimator fans replicas out over a fixed-size worker pool. Replica
//! `k` reads the field from its own seed `replica_seed(seed, k)`, results are
//! collected in replica order and summed sequentially, so an estimate depends
//! only on `(seed, config)` and never on the number of workers.
//!
//! Runs at several intensities are coupled by thinning one field sampled at a
//! ceiling intensity, which makes monotonicity in `lambda` exact per replica.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Moment;
use crate::entropy::{entropic_rhs_gap, entropic_rhs_log};
use crate::error::{Error, Result};
use crate::explorer::{arm_threshold, explore, explore_until, FieldSource, Stop};
use crate::field::{FieldConfig, GhostField, GhostRegion};
use crate::geometry::unit_ball_volume;
use crate::revealment::{oracle_verdict, EventSpec, TemplateOptions, TemplateRunner, TruncationReason, Verdict};
use crate::rng::replica_seed;

/// Censored fraction above which an estimate is flagged unreliable.
pub const UNRELIABLE_CENSORING: f64 = 0.05;

/// Direct magnetization explorations stop once `rho * Vol(C)` exceeds this,
/// leaving an integrand error of at most `exp(-MAGNETIZATION_SATURATION)`.
pub const MAGNETIZATION_SATURATION: f64 = 40.0;

/// Columns of the estimate CSV rows.
pub const ESTIMATE_CSV_COLUMNS: &str = "x,value,standard_error,replicas,censored_fraction,seed,truncation_error,unreliable";

/// Shared settings of all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// The field; its intensity is the thinning ceiling of coupled runs and
    /// is raised to the requested intensity when that is larger.
    pub field: FieldConfig,
    /// Explorations stop after this many balls and count as censored.
    pub ball_cap: usize,
    /// Step budget of template runs.
    pub max_steps: usize,
    /// Tolerance on the omitted heights for unbounded radius laws.
    pub eps_trunc: f64,
    /// Spatial scale used to choose the height cap of unbounded laws when no
    /// arm radius sets it.
    pub truncation_window: f64,
    /// Worker threads.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(field: FieldConfig) -> Self {
        Self {
            field,
            ball_cap: 50_000,
            max_steps: 200_000,
            eps_trunc: 1e-6,
            truncation_window: 32.0,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_ceiling(mut self, lambda: f64) -> Self {
        self.field.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        FieldConfig::new(self.field.dim, self.field.lambda, self.field.mu, self.field.seed)?;
        if self.ball_cap == 0 || self.max_steps == 0 || self.workers == 0 {
            return Err(Error::InvalidParameter("ball_cap, max_steps and workers must be positive".into()));
        }
        if !(self.eps_trunc > 0.0) || !(self.truncation_window > 0.0) {
            return Err(Error::InvalidParameter("eps_trunc and truncation_window must be positive".into()));
        }
        Ok(())
    }

    fn top(&self, lambda: f64) -> f64 {
        self.field.lambda.max(lambda)
    }

    fn height_cap(&self, top: f64, scale: f64) -> Result<(u32, f64)> {
        self.field.with_lambda(top).height_cap(scale, self.eps_trunc)
    }

    /// Run `f` on every replica seed in order.
    fn fan_out<T, F>(&self, replicas: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync,
    {
        let seed = self.field.seed;
        if self.workers == 1 {
            return (0..replicas as u64).map(|k| f(replica_seed(seed, k))).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
        pool.install(|| (0..replicas as u64).into_par_iter().map(|k| f(replica_seed(seed, k))).collect())
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("at least one replica is required".into()));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// A Monte Carlo estimate with its metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
    pub replicas: usize,
    /// Fraction of replicas whose run hit a cap before deciding.
    pub censored_fraction: f64,
    pub seed: u64,
    /// Bound on the bias from omitted heights or early stopping.
    pub truncation_error: f64,
    /// The censored fraction exceeds [`UNRELIABLE_CENSORING`].
    pub unreliable: bool,
}

impl Estimate {
    /// Sample mean with the standard error of the mean.
    pub fn from_samples(xs: &[f64], censored: usize, seed: u64, truncation_error: f64) -> Self {
        let n = xs.len();
        let value = mean(xs);
        let se = if n > 1 { (variance(xs, value) / n as f64).sqrt() } else { 0.0 };
        Self::assemble(value, se, n, censored, seed, truncation_error)
    }

    /// Proportion of successes with the binomial standard error.
    pub fn from_indicators(hits: &[bool], censored: usize, seed: u64, truncation_error: f64) -> Self {
        let n = hits.len();
        let p = hits.iter().filter(|&&h| h).count() as f64 / n.max(1) as f64;
        let se = (p * (1.0 - p) / n.max(1) as f64).sqrt();
        Self::assemble(p, se, n, censored, seed, truncation_error)
    }

    fn assemble(value: f64, se: f64, n: usize, censored: usize, seed: u64, truncation_error: f64) -> Self {
        let censored_fraction = censored as f64 / n.max(1) as f64;
        Self {
            value,
            standard_error: se,
            replicas: n,
            censored_fraction,
            seed,
            truncation_error,
            unreliable: censored_fraction > UNRELIABLE_CENSORING,
        }
    }

    /// CSV row for grid point `x`, in the order of [`ESTIMATE_CSV_COLUMNS`].
    pub fn csv_row(&self, x: f64) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            x,
            self.value,
            self.standard_error,
            self.replicas,
            self.censored_fraction,
            self.seed,
            self.truncation_error,
            self.unreliable
        )
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64], m: f64) -> f64 {
    covariance(xs, m, xs, m)
}

fn covariance(xs: &[f64], mx: f64, ys: &[f64], my: f64) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1) as f64
}

/// Delta-method standard error of `g(means)` for paired samples, given the
/// gradient of `g` at the sample means.
fn delta_se(samples: &[&[f64]], grad: &[f64]) -> f64 {
    let n = samples[0].len();
    if n < 2 {
        return 0.0;
    }
    let means: Vec<f64> = samples.iter().map(|s| mean(s)).collect();
    let mut var = 0.0;
    for i in 0..samples.len() {
        for j in 0..samples.len() {
            if grad[i] != 0.0 && grad[j] != 0.0 {
                var += grad[i] * grad[j] * covariance(samples[i], means[i], samples[j], means[j]);
            }
        }
    }
    (var.max(0.0) / n as f64).sqrt()
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// One replica's cluster volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeSample {
    /// The origin is covered.
    pub covered: bool,
    /// Volume of the explored part of the cluster.
    pub volume: f64,
    /// The exploration stopped because the volume reached the requested level.
    pub reached_stop: bool,
    /// The exploration stopped on the ball cap; `volume` is a lower bound.
    pub censored: bool,
    pub ball_count: usize,
}

/// Cluster volumes of all replicas at one intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSamples {
    pub lambda: f64,
    pub seed: u64,
    /// Exploration stopped once the volume reached this level.
    pub stop_at: Option<f64>,
    pub truncation_error: f64,
    pub samples: Vec<VolumeSample>,
}

impl VolumeSamples {
    fn seed_estimate(&self, xs: &[f64], censored: usize, extra_truncation: f64) -> Estimate {
        Estimate::from_samples(xs, censored, self.seed, self.truncation_error + extra_truncation)
    }

    fn volume_known_below(&self, s: &VolumeSample, y: f64) -> bool {
        !(s.censored || s.reached_stop) || s.volume >= y
    }

    /// `E[Vol(C)]`; censored and stopped replicas contribute lower bounds.
    pub fn chi(&self) -> Estimate {
        let xs: Vec<f64> = self.samples.iter().map(|s| s.volume).collect();
        let censored = self.samples.iter().filter(|s| s.censored || s.reached_stop).count();
        self.seed_estimate(&xs, censored, 0.0)
    }

    /// Per-replica indicators of `{C nonempty, Vol(C) >= y}`.
    pub fn tail_indicators(&self, y: f64) -> Vec<f64> {
        self.samples.iter().map(|s| indicator(s.covered && s.volume >= y)).collect()
    }

    /// `P[C nonempty, Vol(C) >= y]`.
    pub fn tail(&self, y: f64) -> Estimate {
        let censored = self.samples.iter().filter(|s| !self.volume_known_below(s, y)).count();
        self.seed_estimate(&self.tail_indicators(y), censored, 0.0)
    }

    /// Per-replica `min(Vol(C), y)`.
    pub fn truncated_volumes(&self, y: f64) -> Vec<f64> {
        self.samples.iter().map(|s| s.volume.min(y)).collect()
    }

    /// `int_0^y P[Vol(C) >= u] du = E[min(Vol(C), y)]`.
    pub fn tail_integral(&self, y: f64) -> Estimate {
        let censored = self.samples.iter().filter(|s| !self.volume_known_below(s, y)).count();
        self.seed_estimate(&self.truncated_volumes(y), censored, 0.0)
    }

    /// Per-replica `1 - exp(-rho Vol(C))`.
    pub fn magnetization_integrands(&self, rho: f64) -> Vec<f64> {
        self.samples.iter().map(|s| -(-rho * s.volume).exp_m1()).collect()
    }

    /// `E[1 - exp(-rho Vol(C))]`.
    pub fn magnetization(&self, rho: f64) -> Estimate {
        let censored = self.samples.iter().filter(|s| s.censored).count();
        let stop_error = self.stop_at.map_or(0.0, |y| (-rho * y).exp());
        self.seed_estimate(&self.magnetization_integrands(rho), censored, stop_error)
    }
}

/// Explore the origin's cluster in every replica at intensity `lambda`,
/// stopping once its volume reaches `stop_at` when given.
pub fn cluster_volumes(
    cfg: &ExperimentConfig,
    lambda: f64,
    stop_at: Option<f64>,
    replicas: usize,
) -> Result<VolumeSamples> {
    cfg.validate()?;
    check_lambda(lambda)?;
    check_replicas(replicas)?;
    let top = cfg.top(lambda);
    let (cap, truncation_error) = cfg.height_cap(top, cfg.truncation_window)?;
    let stop = stop_at.map_or(Stop::None, Stop::VolumeAtLeast);
    let samples = cfg.fan_out(replicas, |s| {
        let field = cfg.field.with_lambda(top).with_seed(s);
        let mut src = FieldSource::new(&field, lambda, None, cap)?;
        let c = explore_until(&mut src, stop, cfg.ball_cap, |_| false);
        Ok(VolumeSample {
            covered: c.contains_origin,
            volume: c.volume(),
            reached_stop: stop_at.is_some() && c.event_certified,
            censored: c.truncated && !c.event_certified,
            ball_count: c.ball_count,
        })
    })?;
    Ok(VolumeSamples { lambda, seed: cfg.field.seed, stop_at, truncation_error, samples })
}

/// Per-replica one-arm indicators at radius `r`, with censoring flags.
fn arm_indicators(cfg: &ExperimentConfig, lambda: f64, r: f64, replicas: usize) -> Result<(Vec<bool>, usize, f64)> {
    cfg.validate()?;
    check_lambda(lambda)?;
    check_replicas(replicas)?;
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter(format!("arm radius must be >= 1, got {r}")));
    }
    let top = cfg.top(lambda);
    let (cap, truncation_error) = cfg.height_cap(top, r)?;
    let runs = cfg.fan_out(replicas, |s| {
        let field = cfg.field.with_lambda(top).with_seed(s);
        let mut src = FieldSource::new(&field, lambda, Some(r), cap)?;
        let c = explore_until(&mut src, Stop::Arm(r), cfg.ball_cap, |_| false);
        Ok((c.event_certified, c.truncated && !c.event_certified))
    })?;
    let censored = runs.iter().filter(|r| r.1).count();
    Ok((runs.into_iter().map(|r| r.0).collect(), censored, truncation_error))
}

/// Probability that the origin connects to the sphere of radius `r`.
pub fn estimate_theta(cfg: &ExperimentConfig, lambda: f64, r: f64, replicas: usize) -> Result<Estimate> {
    let (hits, censored, trunc) = arm_indicators(cfg, lambda, r, replicas)?;
    Ok(Estimate::from_indicators(&hits, censored, cfg.field.seed, trunc))
}

/// Expected cluster volume, censored at the ball cap.
pub fn estimate_chi(cfg: &ExperimentConfig, lambda: f64, replicas: usize) -> Result<Estimate> {
    Ok(cluster_volumes(cfg, lambda, None, replicas)?.chi())
}

/// Raw and monotone-corrected survival function of the cluster volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub y_grid: Vec<f64>,
    pub raw: Vec<Estimate>,
    pub corrected: Vec<f64>,
}

/// Least-squares nonincreasing fit (pool adjacent violators), equal weights.
pub fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

fn check_sorted(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} must be nonempty")));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(format!("{name} must be finite and sorted")));
    }
    Ok(())
}

/// `P[C nonempty, Vol(C) >= y]` along `y_grid`.
pub fn estimate_tail(cfg: &ExperimentConfig, lambda: f64, y_grid: &[f64], replicas: usize) -> Result<TailCurve> {
    check_sorted("y_grid", y_grid)?;
    Ok(tail_curve(&cluster_volumes(cfg, lambda, None, replicas)?, y_grid))
}

fn tail_curve(samples: &VolumeSamples, y_grid: &[f64]) -> TailCurve {
    let raw: Vec<Estimate> = y_grid.iter().map(|&y| samples.tail(y)).collect();
    let corrected = isotonic_nonincreasing(&raw.iter().map(|e| e.value).collect::<Vec<_>>());
    TailCurve { y_grid: y_grid.to_vec(), raw, corrected }
}

/// One point of the Markov consistency check `tail(y) <= chi / y + 3 se`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovPoint {
    pub y: f64,
    pub tail: f64,
    pub chi_over_y: f64,
    /// Standard error of `tail(y) - chi / y` from the paired replicas.
    pub joint_se: f64,
    pub holds: bool,
}

/// Markov's inequality between the tail and mean estimates on shared replicas.
pub fn markov_check(cfg: &ExperimentConfig, lambda: f64, y_grid: &[f64], replicas: usize) -> Result<Vec<MarkovPoint>> {
    check_sorted("y_grid", y_grid)?;
    if y_grid[0] <= 0.0 {
        return Err(Error::InvalidParameter("Markov check needs y > 0".into()));
    }
    let samples = cluster_volumes(cfg, lambda, None, replicas)?;
    let volumes: Vec<f64> = samples.samples.iter().map(|s| s.volume).collect();
    let chi = mean(&volumes);
    Ok(y_grid
        .iter()
        .map(|&y| {
            let t = samples.tail_indicators(y);
            let tail = mean(&t);
            let joint_se = delta_se(&[&t, &volumes], &[1.0, -1.0 / y]);
            MarkovPoint { y, tail, chi_over_y: chi / y, joint_se, holds: tail <= chi / y + 3.0 * joint_se }
        })
        .collect())
}

/// How the magnetization is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnetizationMethod {
    /// Mean of `1 - exp(-rho Vol(C))` over explored clusters.
    Direct,
    /// Fraction of replicas whose cluster meets an independent ghost field,
    /// found by the direct explorer.
    Ghost,
    /// The same connection event decided by the revealment algorithm.
    GhostTemplate,
}

/// The ghost field of one replica.
fn replica_ghost(rho: f64, dim: usize, seed: u64) -> GhostField {
    GhostField { rho, region: GhostRegion::Unbounded { dim }, seed }
}

/// `E[1 - exp(-rho Vol(C))]`, or equivalently the probability of meeting a
/// ghost field of rate `rho`.
pub fn estimate_magnetization(
    cfg: &ExperimentConfig,
    lambda: f64,
    rho: f64,
    replicas: usize,
    method: MagnetizationMethod,
) -> Result<Estimate> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be finite and >= 0, got {rho}")));
    }
    match method {
        MagnetizationMethod::Direct => {
            let stop = (rho > 0.0).then(|| MAGNETIZATION_SATURATION / rho);
            Ok(cluster_volumes(cfg, lambda, stop, replicas)?.magnetization(rho))
        }
        MagnetizationMethod::Ghost => {
            cfg.validate()?;
            check_lambda(lambda)?;
            check_replicas(replicas)?;
            let top = cfg.top(lambda);
            let (cap, trunc) = cfg.height_cap(top, cfg.truncation_window)?;
            let runs = cfg.fan_out(replicas, |s| {
                let field = cfg.field.with_lambda(top).with_seed(s);
                let ghost = replica_ghost(rho, field.dim, s);
                let mut src = FieldSource::new(&field, lambda, None, cap)?;
                let c = explore_until(&mut src, Stop::None, cfg.ball_cap, |b| ghost.hits_ball(b));
                Ok((c.event_certified, c.truncated && !c.event_certified))
            })?;
            let censored = runs.iter().filter(|r| r.1).count();
            let hits: Vec<bool> = runs.into_iter().map(|r| r.0).collect();
            Ok(Estimate::from_indicators(&hits, censored, cfg.field.seed, trunc))
        }
        MagnetizationMethod::GhostTemplate => {
            cfg.validate()?;
            check_lambda(lambda)?;
            check_replicas(replicas)?;
            let top = cfg.top(lambda);
            let (cap, trunc) = cfg.height_cap(top, cfg.truncation_window)?;
            let runs = cfg.fan_out(replicas, |s| {
                let field = cfg.field.with_lambda(top).with_seed(s);
                let event = EventSpec::GhostConnection(replica_ghost(rho, field.dim, s));
                let trace = template_run(cfg, &field, event, lambda, cap)?;
                Ok((trace.0, trace.2))
            })?;
            let censored = runs.iter().filter(|r| r.1).count();
            let hits: Vec<bool> = runs.into_iter().map(|r| r.0).collect();
            Ok(Estimate::from_indicators(&hits, censored, cfg.field.seed, trunc))
        }
    }
}

/// Template run at intensity `lambda`: (occurred, revealed PVol, censored).
fn template_run(
    cfg: &ExperimentConfig,
    field: &FieldConfig,
    event: EventSpec,
    lambda: f64,
    cap: u32,
) -> Result<(bool, f64, bool)> {
    let opts = TemplateOptions { lambda: Some(lambda), height_cap: Some(cap), eps_trunc: cfg.eps_trunc, record_steps: false };
    let trace = TemplateRunner::new(field, event, cfg.max_steps, opts)?.run();
    let censored = trace.verdict == Verdict::Truncated(TruncationReason::MaxSteps);
    Ok((trace.occurred(), trace.pvol_revealed, censored))
}

/// Crossing intensity at one arm radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusCrossing {
    pub r: f64,
    /// `None` when the bracket does not straddle the target at this radius.
    pub lambda_hat: Option<f64>,
    pub p_lo: f64,
    pub p_hi: f64,
}

/// Outcome of the critical-intensity search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCEstimate {
    pub lambda_c: f64,
    /// Final bisection bracket at the largest radius.
    pub bracket: (f64, f64),
    /// Initial search interval.
    pub search_interval: (f64, f64),
    pub r: f64,
    pub crossing_target: f64,
    pub tolerance: f64,
    pub replicas: usize,
    pub seed: u64,
    pub truncation_error: f64,
    /// Crossing at every radius of the ladder.
    pub by_radius: Vec<RadiusCrossing>,
}

/// Default search interval: fillings `lambda E[vol B_r]` from 0.2 to 3.
pub fn default_lambda_bracket(field: &FieldConfig) -> Result<(f64, f64)> {
    let Moment::Finite(m) = field.mu.moment(field.dim as f64) else {
        return Err(Error::MomentCondition { condition: crate::distributions::MomentCondition::Weak });
    };
    let mean_volume = unit_ball_volume(field.dim) * m;
    if !(mean_volume > 0.0) {
        return Err(Error::InvalidParameter("radius law has zero mean ball volume".into()));
    }
    Ok((0.2 / mean_volume, 3.0 / mean_volume))
}

/// Per-replica thresholds `t` such that the arm event at radius `r` holds at
/// intensity `l` iff `t < l`, for fields thinned from `top`.
fn arm_thresholds(cfg: &ExperimentConfig, top: f64, r: f64, replicas: usize) -> Result<(Vec<f64>, f64)> {
    let (cap, trunc) = cfg.height_cap(top, r)?;
    let ts = cfg.fan_out(replicas, |s| {
        let field = cfg.field.with_lambda(top).with_seed(s);
        let mut src = FieldSource::new(&field, top, Some(r), cap)?;
        Ok(arm_threshold(&mut src, top, r).unwrap_or(f64::INFINITY))
    })?;
    Ok((ts, trunc))
}

/// Bisection of `l -> #{t < l} / n` for the target; `Err((p_lo, p_hi))` when
/// the interval does not bracket it.
fn bisect_crossing(ts: &[f64], lo: f64, hi: f64, target: f64, tol: f64) -> std::result::Result<(f64, f64), (f64, f64)> {
    let p = |l: f64| ts.iter().filter(|&&t| t < l).count() as f64 / ts.len() as f64;
    let (p_lo, p_hi) = (p(lo), p(hi));
    if !(p_lo < target && p_hi >= target) {
        return Err((p_lo, p_hi));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if p(m) >= target {
            b = m;
        } else {
            a = m;
        }
    }
    Ok((a, b))
}

/// Intensity at which the one-arm probability at the largest radius of the
/// ladder crosses `crossing_target`, located by bisection on coupled
/// replicas. `bracket` defaults to [`default_lambda_bracket`].
pub fn find_lambda_c(
    cfg: &ExperimentConfig,
    r_ladder: &[f64],
    crossing_target: f64,
    tolerance: f64,
    replicas: usize,
    bracket: Option<(f64, f64)>,
) -> Result<LambdaCEstimate> {
    cfg.validate()?;
    check_replicas(replicas)?;
    check_sorted("r_ladder", r_ladder)?;
    if r_ladder.windows(2).any(|w| w[0] >= w[1]) || r_ladder[0] < 1.0 {
        return Err(Error::InvalidParameter("r_ladder must be strictly increasing and start at >= 1".into()));
    }
    if !(crossing_target > 0.0 && crossing_target < 1.0) {
        return Err(Error::InvalidParameter(format!("crossing_target must lie in (0, 1), got {crossing_target}")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tolerance}")));
    }
    let (lo, hi) = match bracket {
        Some(b) => b,
        None => default_lambda_bracket(&cfg.field)?,
    };
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid search interval [{lo}, {hi}]")));
    }
    let mut by_radius = Vec::new();
    let mut last = None;
    let mut truncation_error: f64 = 0.0;
    for &r in r_ladder {
        let (ts, trunc) = arm_thresholds(cfg, hi, r, replicas)?;
        truncation_error = truncation_error.max(trunc);
        let crossing = bisect_crossing(&ts, lo, hi, crossing_target, tolerance);
        let (lambda_hat, p_lo, p_hi) = match crossing {
            Ok((a, b)) => (Some(0.5 * (a + b)), f64::NAN, f64::NAN),
            Err((pl, ph)) => (None, pl, ph),
        };
        let p = |l: f64| ts.iter().filter(|&&t| t < l).count() as f64 / ts.len() as f64;
        by_radius.push(RadiusCrossing {
            r,
            lambda_hat,
            p_lo: if p_lo.is_nan() { p(lo) } else { p_lo },
            p_hi: if p_hi.is_nan() { p(hi) } else { p_hi },
        });
        last = Some(crossing);
    }
    let r = *r_ladder.last().expect("nonempty ladder");
    match last.expect("nonempty ladder") {
        Ok((a, b)) => Ok(LambdaCEstimate {
            lambda_c: 0.5 * (a + b),
            bracket: (a, b),
            search_interval: (lo, hi),
            r,
            crossing_target,
            tolerance,
            replicas,
            seed: cfg.field.seed,
            truncation_error,
            by_radius,
        }),
        Err((p_lo, p_hi)) => Err(Error::NonBracketing { lo, hi, target: crossing_target, p_lo, p_hi }),
    }
}

/// Regression model for [`fit_exponent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    PowerLaw,
}

/// Log-log least-squares fit `y ~ a x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub r2: f64,
    pub log_prefactor: f64,
    pub used: usize,
    /// Points dropped because `x` or the estimate was not positive.
    pub excluded: usize,
}

/// Slope of `ln y` against `ln x` with its regression standard error.
pub fn fit_exponent(x_grid: &[f64], estimates: &[f64], model: FitModel) -> Result<ExponentFit> {
    let FitModel::PowerLaw = model;
    if x_grid.len() != estimates.len() {
        return Err(Error::InvalidParameter("x_grid and estimates differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = x_grid
        .iter()
        .zip(estimates)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let excluded = x_grid.len() - pts.len();
    let n = pts.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("power-law fit needs two positive points, got {n}")));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter("power-law fit needs two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>().max(0.0);
    let stderr = if n > 2 { (sse / (n - 2) as f64 / sxx).sqrt() } else { f64::INFINITY };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(ExponentFit { exponent: slope, stderr, r2, log_prefactor: intercept, used: n, excluded })
}

/// Settings of the theorem checkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerConfig {
    /// Exponent of the assumed lower bound `theta(l) >= c0 (l - lambda_c)^beta0`.
    pub beta0: f64,
    pub c0: f64,
    /// Subcritical intensities.
    pub lambda_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    /// Reference critical intensity.
    pub lambda_c_hat: f64,
    /// Radius of the finite-size proxy for `theta`.
    pub arm_radius: f64,
    pub replicas: usize,
    /// Implied constants must exceed this after 3 sigma widening.
    pub c_floor: f64,
}

impl CheckerConfig {
    /// Default grids around `lambda_c_hat`: `lambda` at 0.5..0.9 of it, `y`
    /// log-spaced on `[1, 32]`, `rho` halving from 1 to 1/16.
    pub fn new(lambda_c_hat: f64) -> Self {
        Self {
            beta0: 1.0,
            c0: 1.0,
            lambda_grid: [0.5, 0.6, 0.7, 0.8, 0.9].iter().map(|f| f * lambda_c_hat).collect(),
            y_grid: (0..8).map(|k| 32f64.powf(k as f64 / 7.0)).collect(),
            rho_grid: [0.0625, 0.125, 0.25, 0.5, 1.0].to_vec(),
            lambda_c_hat,
            arm_radius: 8.0,
            replicas: 2000,
            c_floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0) || !(self.c0 > 0.0) {
            return Err(Error::InvalidParameter("beta0 and c0 must be positive".into()));
        }
        if !(self.lambda_c_hat > 0.0) || !self.lambda_c_hat.is_finite() {
            return Err(Error::InvalidParameter("lambda_c_hat must be positive".into()));
        }
        check_sorted("lambda_grid", &self.lambda_grid)?;
        check_sorted("y_grid", &self.y_grid)?;
        check_sorted("rho_grid", &self.rho_grid)?;
        if self.lambda_grid[0] <= 0.0 || *self.lambda_grid.last().unwrap() >= self.lambda_c_hat {
            return Err(Error::InvalidParameter("lambda_grid must lie in (0, lambda_c_hat)".into()));
        }
        if self.y_grid[0] <= 0.0 {
            return Err(Error::InvalidParameter("y_grid must be positive".into()));
        }
        if self.rho_grid[0] <= 0.0 || *self.rho_grid.last().unwrap() > 1.0 {
            return Err(Error::InvalidParameter("rho_grid must lie in (0, 1]".into()));
        }
        if !(self.arm_radius >= 1.0) {
            return Err(Error::InvalidParameter("arm_radius must be >= 1".into()));
        }
        check_replicas(self.replicas)
    }
}

/// One grid point of an inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantPoint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Estimated constant (implied or minimal valid, per check).
    pub constant: f64,
    pub standard_error: f64,
    /// `constant - 3 standard_error`.
    pub lower: f64,
}

/// Implied constants of one inequality over its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub label: String,
    pub points: Vec<ConstantPoint>,
    /// Grid points left out, with the reason.
    pub excluded: Vec<(String, String)>,
    pub min_constant: f64,
    pub min_lower: f64,
    pub floor: f64,
    pub pass: bool,
}

impl InequalityCheck {
    fn positivity(label: &str, points: Vec<ConstantPoint>, excluded: Vec<(String, String)>, floor: f64) -> Self {
        let min_constant = points.iter().map(|p| p.constant).fold(f64::INFINITY, f64::min);
        let min_lower = points.iter().map(|p| p.lower).fold(f64::INFINITY, f64::min);
        let pass = !points.is_empty() && min_lower > floor;
        Self { label: label.into(), points, excluded, min_constant, min_lower, floor, pass }
    }

    /// CSV rows `label,lambda,y,rho,constant,standard_error,lower`.
    pub fn csv_rows(&self) -> String {
        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        self.points
            .iter()
            .map(|p| {
                format!(
                    "{},{},{},{},{},{},{}\n",
                    self.label,
                    f(p.lambda),
                    f(p.y),
                    f(p.rho),
                    p.constant,
                    p.standard_error,
                    p.lower
                )
            })
            .collect()
    }
}

/// Columns of [`InequalityCheck::csv_rows`].
pub const CHECK_CSV_COLUMNS: &str = "check,lambda,y,rho,constant,standard_error,lower";

fn point(lambda: Option<f64>, y: Option<f64>, rho: Option<f64>, constant: f64, se: f64) -> ConstantPoint {
    ConstantPoint { lambda, y, rho, constant, standard_error: se, lower: constant - 3.0 * se }
}

fn excluded(what: String, why: &str) -> (String, String) {
    (what, why.to_string())
}

/// Samples shared by the theorem checkers, all thinned from one ceiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerSamples {
    pub ceiling: f64,
    /// Full cluster volumes at each grid intensity.
    pub subcritical: Vec<VolumeSamples>,
    /// Cluster volumes at the reference critical intensity, stopped once
    /// they exceed every level the checks query.
    pub critical: VolumeSamples,
    /// One-arm indicators at `2 lambda_c_hat - lambda` for each grid point.
    pub supercritical_arm: Vec<Vec<bool>>,
    pub supercritical_arm_censored: Vec<usize>,
    pub arm_truncation_error: f64,
}

impl CheckerSamples {
    /// Run every exploration the three theorem checkers need.
    pub fn collect(cfg: &ExperimentConfig, checker: &CheckerConfig) -> Result<Self> {
        checker.validate()?;
        let lc = checker.lambda_c_hat;
        let ceiling = cfg.field.lambda.max(2.0 * lc - checker.lambda_grid[0]).max(lc);
        let cfg = cfg.with_ceiling(ceiling);
        let n = checker.replicas;
        let subcritical =
            checker.lambda_grid.iter().map(|&l| cluster_volumes(&cfg, l, None, n)).collect::<Result<Vec<_>>>()?;
        let gap_min = lc - checker.lambda_grid.last().unwrap();
        let rho_min = checker.rho_grid[0].min(gap_min * gap_min);
        let stop = checker
            .y_grid
            .last()
            .copied()
            .unwrap()
            .max((lc - checker.lambda_grid[0]).powi(-2))
            .max(gap_min.powi(-2))
            .max(MAGNETIZATION_SATURATION / rho_min);
        let critical = cluster_volumes(&cfg, lc, Some(stop), n)?;
        let mut supercritical_arm = Vec::new();
        let mut supercritical_arm_censored = Vec::new();
        let mut arm_truncation_error: f64 = 0.0;
        for &l in &checker.lambda_grid {
            let (hits, censored, trunc) = arm_indicators(&cfg, 2.0 * lc - l, checker.arm_radius, n)?;
            supercritical_arm.push(hits);
            supercritical_arm_censored.push(censored);
            arm_truncation_error = arm_truncation_error.max(trunc);
        }
        Ok(Self { ceiling, subcritical, critical, supercritical_arm, supercritical_arm_censored, arm_truncation_error })
    }
}

/// Implied constants of the two susceptibility lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusceptibilityReport {
    pub lambda_c_hat: f64,
    pub chi: Vec<Estimate>,
    pub theta_reflected: Vec<Estimate>,
    /// `chi >= c (lc - l)^-2 theta(2 lc - l)`.
    pub arm_bound: InequalityCheck,
    /// `chi >= c (lc - l)^-2 P_lc[Vol >= (lc - l)^-2]`.
    pub volume_bound: InequalityCheck,
    pub pass: bool,
}

/// Ratio `a * k / b` of paired sample means with its delta-method error.
fn scaled_ratio(a: &[f64], b: &[f64], k: f64) -> (f64, f64) {
    let (ma, mb) = (mean(a), mean(b));
    let r = k * ma / mb;
    (r, delta_se(&[a, b], &[k / mb, -k * ma / (mb * mb)]))
}

/// Check both susceptibility bounds from pre-collected samples.
pub fn susceptibility_from(checker: &CheckerConfig, s: &CheckerSamples) -> SusceptibilityReport {
    let lc = checker.lambda_c_hat;
    let mut arm_points = Vec::new();
    let mut arm_excluded = Vec::new();
    let mut vol_points = Vec::new();
    let mut vol_excluded = Vec::new();
    let mut chi = Vec::new();
    let mut theta_reflected = Vec::new();
    for (i, &l) in checker.lambda_grid.iter().enumerate() {
        let sub = &s.subcritical[i];
        let chi_est = sub.chi();
        chi.push(chi_est);
        let volumes: Vec<f64> = sub.samples.iter().map(|v| v.volume).collect();
        let k = (lc - l).powi(2);
        let arm: Vec<f64> = s.supercritical_arm[i].iter().map(|&h| indicator(h)).collect();
        let theta = Estimate::from_indicators(
            &s.supercritical_arm[i],
            s.supercritical_arm_censored[i],
            s.critical.seed,
            s.arm_truncation_error,
        );
        theta_reflected.push(theta);
        let tag = format!("lambda={l}");
        if chi_est.unreliable {
            arm_excluded.push(excluded(tag.clone(), "chi censored"));
            vol_excluded.push(excluded(tag, "chi censored"));
            continue;
        }
        if theta.value > 0.0 {
            let (c, se) = scaled_ratio(&volumes, &arm, k);
            arm_points.push(point(Some(l), None, None, c, se));
        } else {
            arm_excluded.push(excluded(tag.clone(), "theta estimate is zero"));
        }
        let y = 1.0 / k;
        let tail = s.critical.tail_indicators(y);
        if mean(&tail) > 0.0 {
            let (c, se) = scaled_ratio(&volumes, &tail, k);
            vol_points.push(point(Some(l), Some(y), None, c, se));
        } else {
            vol_excluded.push(excluded(tag, "critical tail estimate is zero"));
        }
    }
    let arm_bound = InequalityCheck::positivity("susceptibility_arm", arm_points, arm_excluded, checker.c_floor);
    let volume_bound =
        InequalityCheck::positivity("susceptibility_volume", vol_points, vol_excluded, checker.c_floor);
    let pass = arm_bound.pass && volume_bound.pass;
    SusceptibilityReport { lambda_c_hat: lc, chi, theta_reflected, arm_bound, volume_bound, pass }
}

/// Critical tail bound and subcritical log-ratio bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub lambda_c_hat: f64,
    pub beta0: f64,
    pub critical_tail: TailCurve,
    pub critical_integral: Vec<Estimate>,
    /// `P_lc[Vol >= y]^(2/beta0 - 1) int_0^y P_lc[Vol >= u] du >= c`.
    pub critical_bound: InequalityCheck,
    /// Smallest `c` for which the log-ratio bound holds at each `(lambda, y)`.
    pub log_ratio_bound: InequalityCheck,
    /// The smallest single constant valid on the whole grid.
    pub log_ratio_constant: f64,
    pub pass: bool,
}

/// Check both critical-volume bounds from pre-collected samples.
pub fn tail_from(checker: &CheckerConfig, s: &CheckerSamples) -> TailReport {
    let lc = checker.lambda_c_hat;
    let a = 2.0 / checker.beta0 - 1.0;
    let crit = &s.critical;
    let critical_tail = tail_curve(crit, &checker.y_grid);
    let critical_integral: Vec<Estimate> = checker.y_grid.iter().map(|&y| crit.tail_integral(y)).collect();
    let mut points = Vec::new();
    let mut excl = Vec::new();
    for &y in &checker.y_grid {
        let t = crit.tail_indicators(y);
        let iv = crit.truncated_volumes(y);
        let (mt, mi) = (mean(&t), mean(&iv));
        if !(mt > 0.0) {
            excl.push(excluded(format!("y={y}"), "critical tail estimate is zero"));
            continue;
        }
        let value = mt.powf(a) * mi;
        let grad_t = if a == 0.0 { 0.0 } else { a * mt.powf(a - 1.0) * mi };
        let se = delta_se(&[&t, &iv], &[grad_t, mt.powf(a)]);
        points.push(point(None, Some(y), None, value, se));
    }
    let critical_bound = InequalityCheck::positivity("tail_critical", points, excl, checker.c_floor);

    let mut points = Vec::new();
    let mut excl = Vec::new();
    for (i, &l) in checker.lambda_grid.iter().enumerate() {
        let k = (lc - l).powi(2);
        for &y in checker.y_grid.iter().filter(|&&y| y >= 1.0) {
            let tl = s.subcritical[i].tail_indicators(y);
            let tc = crit.tail_indicators(y);
            let iv = crit.truncated_volumes(y);
            let (pl, pc, mi) = (mean(&tl), mean(&tc), mean(&iv));
            let tag = format!("lambda={l},y={y}");
            if !(pl > 0.0 && pc > 0.0) {
                excl.push(excluded(tag, "tail estimate is zero"));
                continue;
            }
            let deficit = -1.0 - (pl / pc).ln();
            let (c, se) = if deficit <= 0.0 {
                (0.0, 0.0)
            } else {
                let c = deficit * pc / (k * mi);
                let grad = [-pc / (pl * k * mi), (pc.ln() - pl.ln()) / (k * mi), -c / mi];
                (c, delta_se(&[&tl, &tc, &iv], &grad))
            };
            points.push(point(Some(l), Some(y), None, c, se));
        }
    }
    let log_ratio_constant = points.iter().map(|p| p.constant).fold(0.0, f64::max);
    let min_constant = points.iter().map(|p| p.constant).fold(f64::INFINITY, f64::min);
    let min_lower = points.iter().map(|p| p.lower).fold(f64::INFINITY, f64::min);
    let pass_t2 = !points.is_empty() && points.iter().all(|p| p.constant.is_finite() && p.standard_error.is_finite());
    let log_ratio_bound = InequalityCheck {
        label: "tail_log_ratio".into(),
        points,
        excluded: excl,
        min_constant,
        min_lower,
        floor: 0.0,
        pass: pass_t2,
    };
    let pass = critical_bound.pass && log_ratio_bound.pass;
    TailReport {
        lambda_c_hat: lc,
        beta0: checker.beta0,
        critical_tail,
        critical_integral,
        critical_bound,
        log_ratio_bound,
        log_ratio_constant,
        pass,
    }
}

/// Magnetization bounds and the fitted small-`rho` exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationReport {
    pub lambda_c_hat: f64,
    pub beta0: f64,
    pub magnetization: Vec<Estimate>,
    /// `chi >= c (lc - l)^-2 M((lc - l)^2)`.
    pub susceptibility_bound: InequalityCheck,
    /// `M(rho) >= c rho^(beta0 / 2)`.
    pub power_bound: InequalityCheck,
    pub fit: Option<ExponentFit>,
    /// Fitted exponent at most `beta0 / 2 + 3` fit standard errors.
    pub exponent_consistent: bool,
    pub pass: bool,
}

/// Check both magnetization bounds from pre-collected samples.
pub fn magnetization_from(checker: &CheckerConfig, s: &CheckerSamples) -> MagnetizationReport {
    let lc = checker.lambda_c_hat;
    let crit = &s.critical;
    let mut points = Vec::new();
    let mut excl = Vec::new();
    for (i, &l) in checker.lambda_grid.iter().enumerate() {
        let sub = &s.subcritical[i];
        if sub.chi().unreliable {
            excl.push(excluded(format!("lambda={l}"), "chi censored"));
            continue;
        }
        let volumes: Vec<f64> = sub.samples.iter().map(|v| v.volume).collect();
        let k = (lc - l).powi(2);
        let m = crit.magnetization_integrands(k);
        if mean(&m) > 0.0 {
            let (c, se) = scaled_ratio(&volumes, &m, k);
            points.push(point(Some(l), None, Some(k), c, se));
        } else {
            excl.push(excluded(format!("lambda={l}"), "magnetization estimate is zero"));
        }
    }
    let susceptibility_bound = InequalityCheck::positivity("magnetization_chi", points, excl, checker.c_floor);

    let magnetization: Vec<Estimate> = checker.rho_grid.iter().map(|&r| crit.magnetization(r)).collect();
    let mut points = Vec::new();
    for (&rho, m) in checker.rho_grid.iter().zip(&magnetization) {
        let scale = rho.powf(checker.beta0 / 2.0);
        points.push(point(None, None, Some(rho), m.value / scale, m.standard_error / scale));
    }
    let power_bound = InequalityCheck::positivity("magnetization_power", points, Vec::new(), checker.c_floor);
    let values: Vec<f64> = magnetization.iter().map(|m| m.value).collect();
    let fit = fit_exponent(&checker.rho_grid, &values, FitModel::PowerLaw).ok();
    let exponent_consistent = fit.is_some_and(|f| f.exponent <= checker.beta0 / 2.0 + 3.0 * f.stderr);
    let pass = susceptibility_bound.pass && power_bound.pass;
    MagnetizationReport {
        lambda_c_hat: lc,
        beta0: checker.beta0,
        magnetization,
        susceptibility_bound,
        power_bound,
        fit,
        exponent_consistent,
        pass,
    }
}

/// Susceptibility bounds at every grid intensity.
pub fn check_theorem_susceptibility(cfg: &ExperimentConfig, checker: &CheckerConfig) -> Result<SusceptibilityReport> {
    Ok(susceptibility_from(checker, &CheckerSamples::collect(cfg, checker)?))
}

/// Critical-volume bounds over the `y` grid.
pub fn check_theorem_tail(cfg: &ExperimentConfig, checker: &CheckerConfig) -> Result<TailReport> {
    Ok(tail_from(checker, &CheckerSamples::collect(cfg, checker)?))
}

/// Magnetization bounds over the `lambda` and `rho` grids.
pub fn check_theorem_magnetization(cfg: &ExperimentConfig, checker: &CheckerConfig) -> Result<MagnetizationReport> {
    Ok(magnetization_from(checker, &CheckerSamples::collect(cfg, checker)?))
}

/// Revealed-volume comparisons for the algorithm's event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealedVolumeRatios {
    pub chi: Estimate,
    /// `E[PVol(W)] / chi`.
    pub ratio_chi: f64,
    /// `E[PVol(W)] / int_0^y P[Vol >= u] du`, for volume events.
    pub ratio_integral: Option<f64>,
    /// `E[PVol(W)] / (M(rho) / rho)`, for ghost events.
    pub ratio_magnetization: Option<f64>,
}

/// Empirical check of the two entropic bounds for one event and pair of
/// intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicReport {
    pub event: EventSpec,
    pub l1: f64,
    pub l2: f64,
    /// `P_l1[A]` from the revealment algorithm.
    pub p1: Estimate,
    /// `P_l2[A]` from the direct explorer.
    pub p2: Estimate,
    /// `E_l1[PVol(W)]` of the revealment algorithm.
    pub expected_pvol: Estimate,
    pub gap: f64,
    pub gap_rhs: f64,
    /// Combined standard error of the gap and its bound.
    pub gap_se: f64,
    pub gap_holds: bool,
    /// `log P1 - log P2`, when both are positive.
    pub log_ratio: Option<f64>,
    pub log_rhs: Option<f64>,
    pub log_se: Option<f64>,
    pub log_holds: Option<bool>,
    /// Replicas where the algorithm and the direct explorer at `l1` disagree.
    pub template_oracle_disagreements: usize,
    pub ratios: RevealedVolumeRatios,
    /// Censoring above [`UNRELIABLE_CENSORING`] in any component.
    pub flagged: bool,
    pub pass: bool,
}

/// Estimate both sides of the entropic bounds at `(l1, l2)` on coupled
/// replicas and compare them with 3 sigma widening.
pub fn check_entropic_bound(
    cfg: &ExperimentConfig,
    event: &EventSpec,
    l1: f64,
    l2: f64,
    replicas: usize,
) -> Result<EntropicReport> {
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(Error::InvalidParameter(format!("intensities must be positive, got {l1}, {l2}")));
    }
    cfg.validate()?;
    check_replicas(replicas)?;
    let top = cfg.top(l1.max(l2));
    let cfg = cfg.with_ceiling(top);
    let scale = match event {
        EventSpec::OneArm(r) => *r,
        _ => cfg.truncation_window,
    };
    let (cap, trunc) = cfg.height_cap(top, scale)?;
    let reseed = |s: u64| match event {
        EventSpec::GhostConnection(g) => EventSpec::GhostConnection(replica_ghost(g.rho, cfg.field.dim, s)),
        other => other.clone(),
    };
    struct Run {
        a1: bool,
        pvol: f64,
        c1: bool,
        a2: Option<bool>,
        o1: Option<bool>,
    }
    let runs = cfg.fan_out(replicas, |s| {
        let field = cfg.field.with_seed(s);
        let ev = reseed(s);
        let (a1, pvol, c1) = template_run(&cfg, &field, ev.clone(), l1, cap)?;
        let a2 = oracle_verdict(&field, l2, &ev, cap, cfg.ball_cap)?;
        let o1 = oracle_verdict(&field, l1, &ev, cap, cfg.ball_cap)?;
        Ok(Run { a1, pvol, c1, a2, o1 })
    })?;
    let seed = cfg.field.seed;
    let x1: Vec<f64> = runs.iter().map(|r| indicator(r.a1)).collect();
    let x2: Vec<f64> = runs.iter().map(|r| indicator(r.a2 == Some(true))).collect();
    let pv: Vec<f64> = runs.iter().map(|r| r.pvol).collect();
    let c1 = runs.iter().filter(|r| r.c1).count();
    let c2 = runs.iter().filter(|r| r.a2.is_none()).count();
    let p1 = Estimate::from_indicators(&runs.iter().map(|r| r.a1).collect::<Vec<_>>(), c1, seed, trunc);
    let p2 = Estimate::from_indicators(&runs.iter().map(|r| r.a2 == Some(true)).collect::<Vec<_>>(), c2, seed, trunc);
    let expected_pvol = Estimate::from_samples(&pv, c1, seed, trunc);
    let disagreements = runs.iter().filter(|r| r.o1.is_some_and(|o| o != r.a1)).count();

    let gap = (p1.value - p2.value).abs();
    let diff: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
    let gap_diff_se = Estimate::from_samples(&diff, 0, seed, 0.0).standard_error;
    let max_p = p1.value.max(p2.value);
    let (mp_samples, mp_mean) = if p1.value >= p2.value { (&x1, p1.value) } else { (&x2, p2.value) };
    let gap_rhs = entropic_rhs_gap(l1, l2, max_p, expected_pvol.value)?;
    let rhs_se = if max_p > 0.0 && expected_pvol.value > 0.0 {
        let k = (l2 - l1).abs() / l2.sqrt() * 2f64.sqrt();
        let root = (mp_mean * expected_pvol.value).sqrt();
        delta_se(&[mp_samples, &pv], &[k * expected_pvol.value / (2.0 * root), k * mp_mean / (2.0 * root)])
    } else {
        0.0
    };
    let gap_se = gap_diff_se.hypot(rhs_se);
    let gap_holds = gap <= gap_rhs + 3.0 * gap_se;

    let (log_ratio, log_rhs, log_se, log_holds) = if p1.value > 0.0 && p2.value > 0.0 {
        let lr = p1.value.ln() - p2.value.ln();
        let rhs = entropic_rhs_log(l1, l2, p1.value, expected_pvol.value)?;
        let k = (l2 - l1).powi(2) / l2;
        let lr_se = delta_se(&[&x1, &x2], &[1.0 / p1.value, -1.0 / p2.value]);
        let rhs_se = delta_se(
            &[&x1, &pv],
            &[-k * expected_pvol.value / (p1.value * p1.value), k / p1.value],
        );
        let se = lr_se.hypot(rhs_se);
        (Some(lr), Some(rhs), Some(se), Some(lr <= rhs + 3.0 * se))
    } else {
        (None, None, None, None)
    };

    let vols = cluster_volumes(&cfg, l1, None, replicas)?;
    let chi = vols.chi();
    let ratio_chi = expected_pvol.value / chi.value;
    let ratio_integral = match event {
        EventSpec::VolumeAtLeast(y) => Some(expected_pvol.value / vols.tail_integral(*y).value),
        _ => None,
    };
    let ratio_magnetization = match event {
        EventSpec::GhostConnection(g) => Some(expected_pvol.value * g.rho / vols.magnetization(g.rho).value),
        _ => None,
    };
    let flagged = p1.unreliable || p2.unreliable || chi.unreliable;
    let pass = gap_holds && log_holds.unwrap_or(true) && !flagged;
    Ok(EntropicReport {
        event: event.clone(),
        l1,
        l2,
        p1,
        p2,
        expected_pvol,
        gap,
        gap_rhs,
        gap_se,
        gap_holds,
        log_ratio,
        log_rhs,
        log_se,
        log_holds,
        template_oracle_disagreements: disagreements,
        ratios: RevealedVolumeRatios { chi, ratio_chi, ratio_integral, ratio_magnetization },
        flagged,
        pass,
    })
}

/// Violations of pathwise monotonicity in `lambda` over coupled replicas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub replicas: usize,
    pub comparisons: usize,
    pub arm_violations: usize,
    pub volume_violations: usize,
    pub magnetization_violations: usize,
    /// Comparisons skipped because a cluster was cut by the ball cap.
    pub skipped: usize,
}

impl MonotonicityReport {
    pub fn violations(&self) -> usize {
        self.arm_violations + self.volume_violations + self.magnetization_violations
    }
}

/// Compare one-arm indicators at radius `r`, cluster volumes and
/// magnetization integrands at rate `rho` across the sorted `lambdas`, each
/// replica thinned from one field at the largest of them. Volumes are those of
/// the cluster formed by the balls meeting the ball of radius
/// `truncation_window`, which is finite and monotone in the ball set.
pub fn coupled_monotonicity(
    cfg: &ExperimentConfig,
    lambdas: &[f64],
    r: f64,
    rho: f64,
    replicas: usize,
) -> Result<MonotonicityReport> {
    cfg.validate()?;
    check_replicas(replicas)?;
    check_sorted("lambdas", lambdas)?;
    let top = cfg.top(*lambdas.last().unwrap());
    let (cap, _) = cfg.height_cap(top, r.max(cfg.truncation_window))?;
    let runs = cfg.fan_out(replicas, |s| {
        let field = cfg.field.with_lambda(top).with_seed(s);
        let mut arms = Vec::new();
        let mut vols = Vec::new();
        for &l in lambdas {
            let mut src = FieldSource::new(&field, l, Some(r), cap)?;
            arms.push(explore(&mut src, Stop::Arm(r)).event_certified);
            let mut src = FieldSource::new(&field, l, Some(cfg.truncation_window), cap)?;
            let c = explore_until(&mut src, Stop::None, cfg.ball_cap, |_| false);
            vols.push((c.volume(), c.truncated));
        }
        Ok((arms, vols))
    })?;
    let mut report = MonotonicityReport {
        replicas,
        comparisons: 0,
        arm_violations: 0,
        volume_violations: 0,
        magnetization_violations: 0,
        skipped: 0,
    };
    for (arms, vols) in &runs {
        for i in 1..lambdas.len() {
            report.comparisons += 1;
            if arms[i - 1] && !arms[i] {
                report.arm_violations += 1;
            }
            if vols[i].1 {
                report.skipped += 1;
                continue;
            }
            if vols[i - 1].0 > vols[i].0 {
                report.volume_violations += 1;
            }
            if -(-rho * vols[i - 1].0).exp_m1() > -(-rho * vols[i].0).exp_m1() {
                report.magnetization_violations += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RadiusLaw;

    fn cfg(d: usize, lambda: f64, r: f64, workers: usize) -> ExperimentConfig {
        ExperimentConfig::new(FieldConfig::new(d, lambda, RadiusLaw::dirac(r).unwrap(), 11).unwrap()).with_workers(workers)
    }

    #[test]
    fn zero_intensity_gives_exact_zeros() {
        let c = cfg(2, 0.0, 0.5, 2);
        assert_eq!(estimate_theta(&c, 0.0, 3.0, 50).unwrap().value, 0.0);
        assert_eq!(estimate_chi(&c, 0.0, 50).unwrap().value, 0.0);
        let t = estimate_tail(&c, 0.0, &[0.0, 1.0], 50).unwrap();
        assert!(t.raw.iter().all(|e| e.value == 0.0));
        let c = cfg(2, 1.0, 0.5, 2);
        let m = estimate_magnetization(&c, 1.0, 0.0, 50, MagnetizationMethod::Direct).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic_nonincreasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
        assert_eq!(isotonic_nonincreasing(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_nonincreasing(&[]), Vec::<f64>::new());
    }

    #[test]
    fn exact_power_law_fit() {
        let x: Vec<f64> = (1..8).map(|k| k as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powf(-1.5)).collect();
        let f = fit_exponent(&x, &y, FitModel::PowerLaw).unwrap();
        assert!((f.exponent + 1.5).abs() < 1e-10);
        let f = fit_exponent(&x, &vec![2.0; x.len()], FitModel::PowerLaw).unwrap();
        assert_eq!(f.exponent, 0.0);
        let mut y2 = y.clone();
        y2[0] = -1.0;
        assert_eq!(fit_exponent(&x, &y2, FitModel::PowerLaw).unwrap().excluded, 1);
    }

    #[test]
    fn estimates_do_not_depend_on_workers() {
        let a = estimate_chi(&cfg(2, 1.0, 0.5, 1), 1.0, 64).unwrap();
        let b = estimate_chi(&cfg(2, 1.0, 0.5, 4), 1.0, 64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_dimensional_search_does_not_bracket() {
        let c = cfg(1, 1.0, 0.5, 2);
        match find_lambda_c(&c, &[8.0, 16.0], 0.5, 0.01, 100, None) {
            Err(Error::NonBracketing { p_hi, .. }) => assert!(p_hi < 0.5),
            other => panic!("expected a non-bracketing error, got {other:?}"),
        }
    }
}
