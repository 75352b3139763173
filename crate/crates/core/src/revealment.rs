//! The cone-revealment exploration algorithm.
//!
//! Starting from the cone above the origin, the algorithm repeatedly reveals
//! the unrevealed hypercube of smallest order key among those meeting the cone
//! above the cube set of the current cluster of the origin, and stops as soon
//! as the target event is certified on the revealed balls. A run is truncated
//! after `max_steps` reveals or when no hypercube is left to reveal.
//!
//! The active set is infinite in principle. It is handled lazily: spatial
//! cubes are materialised one sup-norm shell at a time, each carries its
//! squared gap to the cone base and its lowest unrevealed active height, and a
//! heap keyed by `(sup-norm, height, spatial index)` yields the next
//! hypercube. Heights above the cap (the last band carrying mass, or the
//! truncation height for unbounded laws) are never active; heights below it
//! without mass are revealed as empty without drawing randomness.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explorer::{explore, cluster_volume, BallGrid, FieldSource, Stop, WindowSource};
use crate::field::{reveal, FieldConfig, GhostField, WindowSample};
use crate::geometry::{
    cube_gap_sq, cube_origin_gap_sq, for_each_cube_near, min_cone_height, norm_sq, spatial_supnorm,
    unit_ball_volume, Ball, HypercubeIndex,
};

/// An increasing local event of the origin's cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventSpec {
    /// The cluster meets the sphere of radius `R`.
    OneArm(f64),
    /// The cluster volume is at least `y`.
    VolumeAtLeast(f64),
    /// Some ghost point lies in the cluster.
    GhostConnection(GhostField),
}

impl EventSpec {
    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            EventSpec::OneArm(r) if !(*r >= 0.0) => Err(Error::InvalidParameter(format!("arm radius {r} < 0"))),
            EventSpec::VolumeAtLeast(y) if !(*y >= 0.0) => {
                Err(Error::InvalidParameter(format!("volume threshold {y} < 0")))
            }
            EventSpec::GhostConnection(g) if g.dim() != dim => {
                Err(Error::DimensionMismatch { expected: dim, found: g.dim() })
            }
            _ => Ok(()),
        }
    }

    /// Spatial scale used to pick the truncation height for unbounded laws.
    fn scale(&self) -> f64 {
        match self {
            EventSpec::OneArm(r) => *r,
            EventSpec::VolumeAtLeast(y) => y.max(1.0),
            EventSpec::GhostConnection(_) => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncationReason {
    /// `max_steps` reveals did not certify the event.
    MaxSteps,
    /// No hypercube was left in the active set.
    EmptyActiveSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Occurred,
    Truncated(TruncationReason),
}

/// One reveal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub index: HypercubeIndex,
    pub points: usize,
    pub cumulative_pvol: f64,
    pub cluster_balls: usize,
    pub event_holds: bool,
    /// Squared gap from the spatial cube to the cone base when selected.
    pub gap_sq: i64,
}

/// The record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealmentTrace {
    pub revealed: Vec<HypercubeIndex>,
    pub pvol_revealed: f64,
    pub steps: usize,
    pub verdict: Verdict,
    pub max_steps: usize,
    pub height_cap: u32,
    pub cluster_balls: usize,
    pub records: Vec<StepRecord>,
}

impl RevealmentTrace {
    pub fn occurred(&self) -> bool {
        self.verdict == Verdict::Occurred
    }

    /// One JSON object per step.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::json!({
                "step": r.step,
                "spatial": r.index.spatial,
                "height": r.index.height,
                "points": r.points,
                "cumulative_pvol": r.cumulative_pvol,
                "event": r.event_holds,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Options of a template run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateOptions {
    /// Intensity after thinning; the field's own intensity when `None`.
    pub lambda: Option<f64>,
    /// Highest height revealed; derived from the law when `None`.
    pub height_cap: Option<u32>,
    /// Tolerance used to derive the height cap for unbounded laws.
    pub eps_trunc: f64,
    /// Keep per-step records.
    pub record_steps: bool,
}

impl Default for TemplateOptions {
    fn default() -> Self {
        Self { lambda: None, height_cap: None, eps_trunc: 1e-6, record_steps: true }
    }
}

struct SpatialState {
    gap_sq: i64,
    revealed: Vec<bool>,
}

impl SpatialState {
    /// Lowest unrevealed height meeting the cone.
    fn candidate(&self) -> Option<u32> {
        let lo = min_cone_height(self.gap_sq) as usize;
        (lo..self.revealed.len()).find(|&h| !self.revealed[h]).map(|h| h as u32)
    }
}

type HeapKey = Reverse<(u64, u32, Vec<i64>)>;

/// Incremental state of one run.
pub struct TemplateRunner<'a> {
    cfg: &'a FieldConfig,
    lambda: f64,
    event: EventSpec,
    cap: u32,
    max_steps: usize,
    record_steps: bool,
    spatial: HashMap<Vec<i64>, SpatialState>,
    shell: i64,
    heap: BinaryHeap<HeapKey>,
    base: HashSet<Vec<i64>>,
    base_extent: u64,
    balls: Vec<Ball>,
    in_cluster: Vec<bool>,
    pending: BallGrid,
    cluster_grid: BallGrid,
    cluster: Vec<usize>,
    max_reach: f64,
    ball_volume_sum: f64,
    volume_checked_at: usize,
    ghost_hit: bool,
    trace: RevealmentTrace,
    finished: bool,
}

impl<'a> TemplateRunner<'a> {
    pub fn new(cfg: &'a FieldConfig, event: EventSpec, max_steps: usize, opts: TemplateOptions) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
        }
        event.validate(cfg.dim)?;
        let lambda = opts.lambda.unwrap_or(cfg.lambda);
        if !(lambda >= 0.0) || lambda > cfg.lambda {
            return Err(Error::InvalidParameter(format!("thinning target {lambda} must lie in [0, {}]", cfg.lambda)));
        }
        let cap = match opts.height_cap {
            Some(c) => c,
            None => cfg.height_cap(event.scale(), opts.eps_trunc)?.0,
        };
        Ok(Self {
            cfg,
            lambda,
            event,
            cap,
            max_steps,
            record_steps: opts.record_steps,
            spatial: HashMap::default(),
            shell: -1,
            heap: BinaryHeap::new(),
            base: HashSet::default(),
            base_extent: 0,
            balls: Vec::new(),
            in_cluster: Vec::new(),
            pending: BallGrid::new(1.0),
            cluster_grid: BallGrid::new(1.0),
            cluster: Vec::new(),
            max_reach: 0.0,
            ball_volume_sum: 0.0,
            volume_checked_at: 0,
            ghost_hit: false,
            trace: RevealmentTrace {
                revealed: Vec::new(),
                pvol_revealed: 0.0,
                steps: 0,
                verdict: Verdict::Truncated(TruncationReason::MaxSteps),
                max_steps,
                height_cap: cap,
                cluster_balls: 0,
                records: Vec::new(),
            },
            finished: false,
        })
    }

    /// Squared gap from spatial cube `k` to the current cone base.
    fn gap_to_base(&self, k: &[i64]) -> i64 {
        if self.base.is_empty() {
            cube_origin_gap_sq(k)
        } else {
            self.base.iter().map(|c| cube_gap_sq(c, k)).min().expect("nonempty base")
        }
    }

    fn push_candidate(&mut self, k: &[i64]) {
        if let Some(h) = self.spatial[k].candidate() {
            let s = spatial_supnorm(k).max(h as u64);
            self.heap.push(Reverse((s, h, k.to_vec())));
        }
    }

    fn materialize_next_shell(&mut self) {
        self.shell += 1;
        let s = self.shell;
        let d = self.cfg.dim;
        let mut k = vec![-s; d];
        loop {
            if k.iter().any(|x| x.abs() == s) {
                let gap_sq = self.gap_to_base(&k);
                self.spatial.insert(k.clone(), SpatialState { gap_sq, revealed: vec![false; self.cap as usize + 1] });
                self.push_candidate(&k.clone());
            }
            let mut m = 0;
            loop {
                if m == d {
                    return;
                }
                k[m] += 1;
                if k[m] <= s {
                    break;
                }
                k[m] = -s;
                m += 1;
            }
        }
    }

    /// Shells beyond this sup-norm cannot meet the cone below the cap.
    fn last_useful_shell(&self) -> i64 {
        (self.base_extent + self.cap as u64 + 2) as i64
    }

    /// Pop the next hypercube to reveal, or `None` if the active set is empty.
    fn next_hypercube(&mut self) -> Option<(HypercubeIndex, i64)> {
        loop {
            let top_shell = self.heap.peek().map(|Reverse((s, _, _))| *s as i64);
            let need_shell = top_shell.is_none_or(|s| s > self.shell);
            if need_shell && self.shell < self.last_useful_shell() {
                self.materialize_next_shell();
                continue;
            }
            let Reverse((_, h, k)) = self.heap.pop()?;
            let st = &self.spatial[&k];
            if st.candidate() != Some(h) {
                continue;
            }
            return Some((HypercubeIndex::new(k, h), st.gap_sq));
        }
    }

    fn add_base_cube(&mut self, c: Vec<i64>) {
        if self.base.contains(&c) {
            return;
        }
        self.base_extent = self.base_extent.max(spatial_supnorm(&c));
        let reach = self.cap as i64 + 2;
        let d = c.len();
        let lo: Vec<i64> = c.iter().map(|x| x - reach).collect();
        let mut k = lo.clone();
        self.base.insert(c.clone());
        loop {
            if let Some(st) = self.spatial.get_mut(&k) {
                let g = cube_gap_sq(&c, &k);
                if g < st.gap_sq {
                    let before = st.candidate();
                    st.gap_sq = g;
                    if st.candidate() != before {
                        self.push_candidate(&k.clone());
                    }
                }
            }
            let mut m = 0;
            loop {
                if m == d {
                    return;
                }
                k[m] += 1;
                if k[m] <= c[m] + reach {
                    break;
                }
                k[m] = lo[m];
                m += 1;
            }
        }
    }

    fn join_cluster(&mut self, first: usize) {
        let mut stack = vec![first];
        self.in_cluster[first] = true;
        let kappa = unit_ball_volume(self.cfg.dim);
        let mut cand = Vec::new();
        while let Some(id) = stack.pop() {
            let b = self.balls[id].clone();
            self.cluster.push(id);
            self.cluster_grid.insert(id, &b);
            self.max_reach = self.max_reach.max(norm_sq(&b.center).sqrt() + b.radius);
            self.ball_volume_sum += kappa * b.radius.powi(self.cfg.dim as i32);
            if let EventSpec::GhostConnection(g) = &self.event {
                if !self.ghost_hit && g.hits_ball(&b) {
                    self.ghost_hit = true;
                }
            }
            let mut cubes = Vec::new();
            for_each_cube_near(&b.center, b.radius, |k| cubes.push(k.to_vec()));
            for c in cubes {
                self.add_base_cube(c);
            }
            cand.clear();
            self.pending.candidates(&b.center, b.radius, &mut cand);
            for &j in &cand {
                if !self.in_cluster[j] && self.balls[j].intersects(&b) {
                    self.in_cluster[j] = true;
                    stack.push(j);
                }
            }
        }
    }

    fn event_holds(&mut self) -> bool {
        match &self.event {
            EventSpec::OneArm(r) => !self.cluster.is_empty() && self.max_reach >= *r,
            EventSpec::VolumeAtLeast(y) => {
                if self.cluster.is_empty() || self.ball_volume_sum < *y || self.volume_checked_at == self.cluster.len() {
                    return false;
                }
                self.volume_checked_at = self.cluster.len();
                let balls: Vec<Ball> = self.cluster.iter().map(|&i| self.balls[i].clone()).collect();
                cluster_volume(&balls) >= *y
            }
            EventSpec::GhostConnection(_) => self.ghost_hit,
        }
    }

    /// Perform one reveal. Returns `false` once the run has finished.
    pub fn step(&mut self) -> bool {
        if self.finished {
            return false;
        }
        if self.trace.steps >= self.max_steps {
            self.finish(Verdict::Truncated(TruncationReason::MaxSteps));
            return false;
        }
        let Some((idx, gap_sq)) = self.next_hypercube() else {
            self.finish(Verdict::Truncated(TruncationReason::EmptyActiveSet));
            return false;
        };
        self.spatial.get_mut(&idx.spatial).expect("materialized").revealed[idx.height as usize] = true;
        self.push_candidate(&idx.spatial.clone());
        let rev = reveal(self.cfg, &idx);
        let mut cand = Vec::new();
        let mut count = 0;
        for p in rev.points {
            if !p.kept(self.cfg.lambda, self.lambda) {
                continue;
            }
            count += 1;
            let id = self.balls.len();
            let b = p.ball;
            cand.clear();
            self.cluster_grid.candidates(&b.center, b.radius, &mut cand);
            let joins = b.covers_origin() || cand.iter().any(|&j| self.balls[j].intersects(&b));
            self.pending.insert(id, &b);
            self.balls.push(b);
            self.in_cluster.push(false);
            if joins {
                self.join_cluster(id);
            }
        }
        self.trace.steps += 1;
        self.trace.pvol_revealed += self.cfg.mu.height_mass(idx.height);
        let holds = self.event_holds();
        if self.record_steps {
            self.trace.records.push(StepRecord {
                step: self.trace.steps,
                index: idx.clone(),
                points: count,
                cumulative_pvol: self.trace.pvol_revealed,
                cluster_balls: self.cluster.len(),
                event_holds: holds,
                gap_sq,
            });
        }
        self.trace.revealed.push(idx);
        if holds {
            self.finish(Verdict::Occurred);
            return false;
        }
        true
    }

    fn finish(&mut self, verdict: Verdict) {
        self.trace.verdict = verdict;
        self.trace.cluster_balls = self.cluster.len();
        self.finished = true;
    }

    /// Balls of the current cluster of the origin.
    pub fn cluster_balls(&self) -> Vec<Ball> {
        self.cluster.iter().map(|&i| self.balls[i].clone()).collect()
    }

    /// All revealed balls.
    pub fn revealed_balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn trace(&self) -> &RevealmentTrace {
        &self.trace
    }

    /// Run to completion and return the trace.
    pub fn run(mut self) -> RevealmentTrace {
        while self.step() {}
        self.trace
    }
}

/// Run the algorithm on the field at its own intensity.
pub fn run_template(cfg: &FieldConfig, event: EventSpec, max_steps: usize) -> Result<RevealmentTrace> {
    Ok(TemplateRunner::new(cfg, event, max_steps, TemplateOptions::default())?.run())
}

/// Run the algorithm with explicit options (thinning, height cap).
pub fn run_template_with(
    cfg: &FieldConfig,
    event: EventSpec,
    max_steps: usize,
    opts: TemplateOptions,
) -> Result<RevealmentTrace> {
    Ok(TemplateRunner::new(cfg, event, max_steps, opts)?.run())
}

/// Whether the event holds for the origin's cluster among `balls`.
pub fn event_holds(balls: &[Ball], event: &EventSpec) -> bool {
    let Some(first) = balls.first() else {
        return false;
    };
    let window = WindowSample::from_balls(first.dim(), f64::INFINITY, balls.to_vec());
    let cluster = explore(&mut WindowSource::new(&window), Stop::None);
    if !cluster.contains_origin {
        return false;
    }
    match event {
        EventSpec::OneArm(r) => cluster.max_reach >= *r,
        EventSpec::VolumeAtLeast(y) => cluster.volume() >= *y,
        EventSpec::GhostConnection(g) => cluster.balls.iter().any(|b| g.hits_ball(b)),
    }
}

/// The event decided by the direct explorer on the same substreams, thinned
/// to `lambda` and with the same height cap. `None` when the exploration hit
/// `ball_cap` before deciding.
pub fn oracle_verdict(
    cfg: &FieldConfig,
    lambda: f64,
    event: &EventSpec,
    height_cap: u32,
    ball_cap: usize,
) -> Result<Option<bool>> {
    match event {
        EventSpec::OneArm(r) => {
            let mut src = FieldSource::new(cfg, lambda, Some(*r), height_cap)?;
            Ok(Some(explore(&mut src, Stop::Arm(*r)).event_certified))
        }
        EventSpec::VolumeAtLeast(y) => {
            let mut src = FieldSource::new(cfg, lambda, None, height_cap)?;
            let c = explore(&mut src, Stop::VolumeAtLeast(*y));
            Ok(Some(c.event_certified))
        }
        EventSpec::GhostConnection(g) => {
            let mut src = FieldSource::new(cfg, lambda, None, height_cap)?;
            let c = explore(&mut src, Stop::BallCap(ball_cap));
            if c.balls.iter().any(|b| g.hits_ball(b)) {
                Ok(Some(true))
            } else if c.truncated {
                Ok(None)
            } else {
                Ok(Some(false))
            }
        }
    }
}

/// Agreement of a trace with the direct oracle: an occurred verdict must be
/// confirmed and a confirmed event must have been found.
pub fn local_determination_check(trace: &RevealmentTrace, oracle_verdict: bool) -> bool {
    trace.occurred() == oracle_verdict
}
