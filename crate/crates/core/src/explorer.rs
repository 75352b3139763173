//! Direct cluster exploration: breadth-first search from the balls covering
//! the origin over the intersection graph, union volumes, cube sets, one-arm
//! events and good-cube diagnostics.
//!
//! Balls come from a [`BallSource`]: either a materialised [`WindowSample`]
//! indexed by a hash grid, or the lazily revealed field itself, which shares
//! its substreams with the revealment algorithm.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{balls_csv, reveal, FieldConfig, FieldPoint, WindowSample};
use crate::geometry::{
    dist_sq, for_each_cube_near, norm_sq, sliced_union_volume, Ball, CubeIndex, HypercubeIndex,
};

/// A set of balls that can be queried for neighbours.
pub trait BallSource {
    fn dim(&self) -> usize;
    fn point(&self, id: usize) -> &FieldPoint;
    /// Append the ids of the balls covering the origin.
    fn origin_balls(&mut self, out: &mut Vec<usize>);
    /// Append the ids of the balls intersecting ball `id` (possibly including it).
    fn neighbors(&mut self, id: usize, out: &mut Vec<usize>);

    fn ball(&self, id: usize) -> &Ball {
        &self.point(id).ball
    }
}

/// Uniform hash grid on ball centres; balls larger than a cell are kept aside
/// and scanned linearly.
#[derive(Debug, Clone)]
pub struct BallGrid {
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    large: Vec<usize>,
}

impl BallGrid {
    pub fn new(cell: f64) -> Self {
        Self { cell, cells: HashMap::default(), large: Vec::new() }
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|x| (x / self.cell).floor() as i64).collect()
    }

    pub fn insert(&mut self, id: usize, b: &Ball) {
        if b.radius > self.cell {
            self.large.push(id);
        } else {
            let k = self.key(&b.center);
            self.cells.entry(k).or_default().push(id);
        }
    }

    /// Ids of balls whose centre may lie within `reach + radius` of `p`; the
    /// caller filters exactly.
    pub fn candidates(&self, p: &[f64], reach: f64, out: &mut Vec<usize>) {
        out.extend_from_slice(&self.large);
        let span = reach + self.cell;
        let lo = self.key(&p.iter().map(|x| x - span).collect::<Vec<_>>());
        let hi = self.key(&p.iter().map(|x| x + span).collect::<Vec<_>>());
        let mut k = lo.clone();
        loop {
            if let Some(ids) = self.cells.get(&k) {
                out.extend_from_slice(ids);
            }
            let mut m = 0;
            loop {
                if m == k.len() {
                    return;
                }
                k[m] += 1;
                if k[m] <= hi[m] {
                    break;
                }
                k[m] = lo[m];
                m += 1;
            }
        }
    }
}

/// A materialised window indexed by a hash grid with cell size
/// `max(1, 2 * median radius)`.
pub struct WindowSource<'a> {
    window: &'a WindowSample,
    grid: BallGrid,
    scratch: Vec<usize>,
}

impl<'a> WindowSource<'a> {
    pub fn new(window: &'a WindowSample) -> Self {
        let mut radii: Vec<f64> = window.points.iter().map(|p| p.ball.radius).collect();
        radii.sort_by(f64::total_cmp);
        let median = radii.get(radii.len() / 2).copied().unwrap_or(0.5);
        let mut grid = BallGrid::new((2.0 * median).max(1.0));
        for (id, p) in window.points.iter().enumerate() {
            grid.insert(id, &p.ball);
        }
        Self { window, grid, scratch: Vec::new() }
    }
}

impl BallSource for WindowSource<'_> {
    fn dim(&self) -> usize {
        self.window.dim
    }

    fn point(&self, id: usize) -> &FieldPoint {
        &self.window.points[id]
    }

    fn origin_balls(&mut self, out: &mut Vec<usize>) {
        out.extend(self.window.points.iter().enumerate().filter(|(_, p)| p.ball.covers_origin()).map(|(i, _)| i));
    }

    fn neighbors(&mut self, id: usize, out: &mut Vec<usize>) {
        let b = &self.window.points[id].ball;
        self.scratch.clear();
        self.grid.candidates(&b.center, b.radius, &mut self.scratch);
        out.extend(self.scratch.iter().copied().filter(|&j| self.window.points[j].ball.intersects(b)));
    }
}

/// The field read lazily hypercube by hypercube, thinned to `lambda` and
/// restricted to balls meeting `B_window` when a window is given.
pub struct FieldSource<'a> {
    cfg: &'a FieldConfig,
    lambda: f64,
    window: Option<f64>,
    heights: Vec<u32>,
    arena: Vec<FieldPoint>,
    /// Revealed hypercubes per entry of `heights`.
    revealed: Vec<HashMap<Vec<i64>, Range<usize>>>,
    cubes: Vec<i64>,
}

impl<'a> FieldSource<'a> {
    /// `max_height` caps the revealed heights (see [`FieldConfig::height_cap`]).
    pub fn new(cfg: &'a FieldConfig, lambda: f64, window: Option<f64>, max_height: u32) -> Result<Self> {
        if !(lambda >= 0.0) || lambda > cfg.lambda {
            return Err(Error::InvalidParameter(format!("thinning target {lambda} must lie in [0, {}]", cfg.lambda)));
        }
        let heights: Vec<u32> = (0..=max_height).filter(|&h| cfg.mu.height_mass(h) > 0.0).collect();
        let revealed = vec![HashMap::default(); heights.len()];
        Ok(Self { cfg, lambda, window, heights, arena: Vec::new(), revealed, cubes: Vec::new() })
    }

    /// Number of hypercubes revealed so far.
    pub fn revealed_count(&self) -> usize {
        self.revealed.iter().map(|m| m.len()).sum()
    }

    fn ensure(&mut self, k: &[i64], hi: usize) -> Range<usize> {
        if let Some(r) = self.revealed[hi].get(k) {
            return r.clone();
        }
        let idx = HypercubeIndex::new(k.to_vec(), self.heights[hi]);
        let start = self.arena.len();
        for p in reveal(self.cfg, &idx).points {
            let in_window = self.window.is_none_or(|w| norm_sq(&p.ball.center).sqrt() <= w + p.ball.radius);
            if in_window && p.kept(self.cfg.lambda, self.lambda) {
                self.arena.push(p);
            }
        }
        let r = start..self.arena.len();
        self.revealed[hi].insert(idx.spatial, r.clone());
        r
    }

    fn scan(&mut self, center: &[f64], radius: f64, out: &mut Vec<usize>) {
        let d = self.cfg.dim;
        let mut cubes = std::mem::take(&mut self.cubes);
        for hi in 0..self.heights.len() {
            let h = self.heights[hi];
            cubes.clear();
            for_each_cube_near(center, radius + h as f64 + 1.0, |k| cubes.extend_from_slice(k));
            for k in cubes.chunks_exact(d) {
                let range = self.ensure(k, hi);
                for j in range {
                    let b = &self.arena[j].ball;
                    let reach = radius + b.radius;
                    if dist_sq(&b.center, center) <= reach * reach {
                        out.push(j);
                    }
                }
            }
        }
        self.cubes = cubes;
    }
}

impl BallSource for FieldSource<'_> {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn point(&self, id: usize) -> &FieldPoint {
        &self.arena[id]
    }

    fn origin_balls(&mut self, out: &mut Vec<usize>) {
        let origin = vec![0.0; self.cfg.dim];
        self.scan(&origin, 0.0, out);
    }

    fn neighbors(&mut self, id: usize, out: &mut Vec<usize>) {
        let b = self.arena[id].ball.clone();
        self.scan(&b.center, b.radius, out);
    }
}

/// When to stop exploring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stop {
    /// Explore the whole cluster.
    None,
    /// Stop once the cluster meets the sphere of radius `R`.
    Arm(f64),
    /// Stop once the certified cluster volume reaches `y`.
    VolumeAtLeast(f64),
    /// Stop after this many balls; the cluster is then flagged truncated.
    BallCap(usize),
}

/// The explored component of the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub dim: usize,
    pub balls: Vec<Ball>,
    pub contains_origin: bool,
    /// `Some(R)` when the stop condition was `Arm(R)` and the cluster met the sphere.
    pub reached_boundary_r: Option<f64>,
    pub ball_count: usize,
    /// Exploration stopped on the ball cap with unexplored balls left.
    pub truncated: bool,
    /// The stop condition was certified (arm reached or volume attained).
    pub event_certified: bool,
    /// `max |x| + r` over the cluster's balls.
    pub max_reach: f64,
}

impl Cluster {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            balls: Vec::new(),
            contains_origin: false,
            reached_boundary_r: None,
            ball_count: 0,
            truncated: false,
            event_certified: false,
            max_reach: 0.0,
        }
    }

    /// The cubes `S_i` met by some ball of the cluster.
    pub fn cube_set(&self) -> BTreeSet<CubeIndex> {
        let mut set = BTreeSet::new();
        for b in &self.balls {
            for_each_cube_near(&b.center, b.radius, |k| {
                set.insert(CubeIndex(k.to_vec()));
            });
        }
        set
    }

    /// Deterministic union volume used for every volume event.
    pub fn volume(&self) -> f64 {
        cluster_volume(&self.balls)
    }

    pub fn summary(&self) -> ClusterSummary {
        ClusterSummary {
            ball_count: self.ball_count,
            cube_count: self.cube_set().len(),
            volume: self.volume(),
            contains_origin: self.contains_origin,
            reached_boundary_r: self.reached_boundary_r,
            truncated: self.truncated,
        }
    }

    /// CSV with columns `x1..xd, r`.
    pub fn to_csv(&self) -> String {
        balls_csv(self.dim, self.balls.iter())
    }
}

/// JSON summary of a cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub ball_count: usize,
    pub cube_count: usize,
    pub volume: f64,
    pub contains_origin: bool,
    pub reached_boundary_r: Option<f64>,
    pub truncated: bool,
}

/// Slice spacing of the deterministic union volume in dimension `d >= 3`.
pub fn default_spacing(d: usize) -> f64 {
    match d {
        0..=2 => 0.01,
        3 => 0.04,
        _ => 0.1,
    }
}

/// Deterministic union volume: exact in `d <= 2`, sliced with
/// [`default_spacing`] otherwise.
pub fn cluster_volume(balls: &[Ball]) -> f64 {
    match balls.first().map(Ball::dim) {
        None => 0.0,
        Some(1) => sliced_union_volume(balls, 1.0),
        Some(2) => disk_union_area(balls),
        Some(d) => sliced_union_volume(balls, default_spacing(d)),
    }
}

/// Exact area of a union of discs, integrating `(x dy - y dx) / 2` along
/// the uncovered boundary arcs.
pub fn disk_union_area(balls: &[Ball]) -> f64 {
    let discs: Vec<usize> = (0..balls.len()).filter(|&i| balls[i].radius > 0.0).collect();
    if discs.is_empty() {
        return 0.0;
    }
    let mut radii: Vec<f64> = discs.iter().map(|&i| balls[i].radius).collect();
    radii.sort_by(f64::total_cmp);
    let mut grid = BallGrid::new(2.0 * radii[radii.len() / 2]);
    for &i in &discs {
        grid.insert(i, &balls[i]);
    }
    let tau = std::f64::consts::TAU;
    let mut cand = Vec::new();
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    'discs: for &i in &discs {
        let (bi, ri) = (&balls[i], balls[i].radius);
        let (cx, cy) = (bi.center[0], bi.center[1]);
        cand.clear();
        grid.candidates(&bi.center, ri, &mut cand);
        arcs.clear();
        for &j in &cand {
            if j == i {
                continue;
            }
            let bj = &balls[j];
            let rj = bj.radius;
            let (dx, dy) = (bj.center[0] - cx, bj.center[1] - cy);
            let d = dx.hypot(dy);
            if d >= ri + rj {
                continue;
            }
            if d + ri <= rj {
                // Disc i lies inside disc j; of two identical discs the first is kept.
                if d == 0.0 && ri == rj && j > i {
                    continue;
                }
                continue 'discs;
            }
            if d + rj <= ri {
                continue;
            }
            let phi = dy.atan2(dx);
            let alpha = ((ri * ri + d * d - rj * rj) / (2.0 * ri * d)).clamp(-1.0, 1.0).acos();
            let a = (phi - alpha).rem_euclid(tau);
            let b = a + 2.0 * alpha;
            if b > tau {
                arcs.push((a, tau));
                arcs.push((0.0, b - tau));
            } else {
                arcs.push((a, b));
            }
        }
        arcs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let arc = |t0: f64, t1: f64| {
            0.5 * (ri * ri * (t1 - t0) + ri * cx * (t1.sin() - t0.sin()) - ri * cy * (t1.cos() - t0.cos()))
        };
        let mut at = 0.0;
        for &(a, b) in &arcs {
            if a > at {
                total += arc(at, a);
            }
            at = at.max(b);
        }
        if at < tau {
            total += arc(at, tau);
        }
    }
    total
}

/// Breadth-first exploration of the origin's cluster.
pub fn explore<S: BallSource>(source: &mut S, stop: Stop) -> Cluster {
    explore_until(source, stop, usize::MAX, |_| false)
}

/// Exploration that also stops after `ball_cap` balls (flagging the cluster
/// truncated), and stops with the event certified as soon as `found` accepts
/// a newly added ball.
pub fn explore_until<S: BallSource, F: FnMut(&Ball) -> bool>(
    source: &mut S,
    stop: Stop,
    ball_cap: usize,
    mut found: F,
) -> Cluster {
    let ball_cap = match stop {
        Stop::BallCap(m) => m.min(ball_cap),
        _ => ball_cap,
    };
    let dim = source.dim();
    let mut queue = std::collections::VecDeque::new();
    let mut seen: HashSet<usize> = HashSet::default();
    let mut buf = Vec::new();
    source.origin_balls(&mut buf);
    for &id in &buf {
        if seen.insert(id) {
            queue.push_back(id);
        }
    }
    let mut cluster = Cluster::empty(dim);
    cluster.contains_origin = !queue.is_empty();
    let mut ball_volume_sum = 0.0;
    let mut next_volume_check = 1usize;
    let kappa = crate::geometry::unit_ball_volume(dim);
    while let Some(id) = queue.pop_front() {
        if cluster.balls.len() >= ball_cap {
            cluster.truncated = true;
            break;
        }
        let b = source.ball(id).clone();
        let reach = norm_sq(&b.center).sqrt() + b.radius;
        cluster.max_reach = cluster.max_reach.max(reach);
        ball_volume_sum += kappa * b.radius.powi(dim as i32);
        let hit = found(&b);
        cluster.balls.push(b);
        if hit {
            cluster.event_certified = true;
            break;
        }
        match stop {
            Stop::Arm(r) if reach >= r => {
                cluster.reached_boundary_r = Some(r);
                cluster.event_certified = true;
                break;
            }
            Stop::VolumeAtLeast(y) if ball_volume_sum >= y && cluster.balls.len() >= next_volume_check => {
                next_volume_check = 2 * cluster.balls.len();
                if cluster.volume() >= y {
                    cluster.event_certified = true;
                    break;
                }
            }
            _ => {}
        }
        buf.clear();
        source.neighbors(id, &mut buf);
        for &j in &buf {
            if seen.insert(j) {
                queue.push_back(j);
            }
        }
    }
    if let Stop::VolumeAtLeast(y) = stop {
        if !cluster.event_certified && ball_volume_sum >= y && cluster.volume() >= y {
            cluster.event_certified = true;
        }
    }
    cluster.ball_count = cluster.balls.len();
    cluster
}

/// Explore the origin's cluster inside a window sample.
pub fn explore_cluster(window: &WindowSample, stop: Stop) -> Result<Cluster> {
    if let Stop::Arm(r) = stop {
        if r > window.window_radius {
            return Err(Error::InvalidParameter(format!(
                "arm radius {r} exceeds the window radius {}",
                window.window_radius
            )));
        }
    }
    Ok(explore(&mut WindowSource::new(window), stop))
}

/// Smallest intensity at which the origin connects to the sphere of radius
/// `r`, for the coupled family obtained by thinning the source's field.
///
/// A ball is present at intensity `l` iff `coin * lambda_top < l`, so the
/// threshold is the minimax value of `coin * lambda_top` along paths from a
/// ball covering the origin to a ball reaching the sphere. `None` when no such
/// path exists in the source.
pub fn arm_threshold<S: BallSource>(source: &mut S, lambda_top: f64, r: f64) -> Option<f64> {
    let mut heap: BinaryHeap<Reverse<(OrdF64, usize)>> = BinaryHeap::new();
    let mut best: HashMap<usize, f64> = HashMap::default();
    let mut buf = Vec::new();
    source.origin_balls(&mut buf);
    for &id in &buf {
        let c = source.point(id).coin * lambda_top;
        if best.get(&id).is_none_or(|&b| c < b) {
            best.insert(id, c);
            heap.push(Reverse((OrdF64(c), id)));
        }
    }
    let mut done: HashSet<usize> = HashSet::default();
    while let Some(Reverse((OrdF64(c), id))) = heap.pop() {
        if !done.insert(id) {
            continue;
        }
        let b = source.ball(id);
        if norm_sq(&b.center).sqrt() + b.radius >= r {
            return Some(c);
        }
        buf.clear();
        source.neighbors(id, &mut buf);
        for &j in &buf {
            if done.contains(&j) {
                continue;
            }
            let cj = c.max(source.point(j).coin * lambda_top);
            if best.get(&j).is_none_or(|&b| cj < b) {
                best.insert(j, cj);
                heap.push(Reverse((OrdF64(cj), j)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// How a union volume is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VolumeMethod {
    /// Interval merging, `d = 1` only.
    Exact1d,
    /// Boundary-arc integration, `d = 2` only.
    Exact2d,
    /// Hit-or-miss sampling of `samples` points in the bounding box.
    MonteCarlo { samples: u64, seed: u64 },
    /// Exact chords along one axis, midpoint rule in the others.
    Sliced { spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub method: VolumeMethod,
}

impl VolumeEstimate {
    /// One-sided lower confidence bound `value - 3 se`.
    pub fn lower_bound(&self) -> f64 {
        self.value - 3.0 * self.standard_error
    }
}

/// Volume of the union of `balls`.
pub fn union_volume(balls: &[Ball], method: VolumeMethod) -> Result<VolumeEstimate> {
    let Some(first) = balls.first() else {
        return Ok(VolumeEstimate { value: 0.0, standard_error: 0.0, method });
    };
    let d = first.dim();
    if let Some(b) = balls.iter().find(|b| b.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: b.dim() });
    }
    match method {
        VolumeMethod::Exact1d => {
            if d != 1 {
                return Err(Error::InvalidParameter(format!("exact union volume needs d = 1, got d = {d}")));
            }
            Ok(VolumeEstimate { value: sliced_union_volume(balls, 1.0), standard_error: 0.0, method })
        }
        VolumeMethod::Exact2d => {
            if d != 2 {
                return Err(Error::InvalidParameter(format!("exact disc-union area needs d = 2, got d = {d}")));
            }
            Ok(VolumeEstimate { value: disk_union_area(balls), standard_error: 0.0, method })
        }
        VolumeMethod::Sliced { spacing } => {
            if !(spacing > 0.0) {
                return Err(Error::InvalidParameter("slice spacing must be positive".into()));
            }
            Ok(VolumeEstimate { value: sliced_union_volume(balls, spacing), standard_error: 0.0, method })
        }
        VolumeMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParameter("Monte Carlo volume needs at least one sample".into()));
            }
            let lo: Vec<f64> = (0..d).map(|m| balls.iter().map(|b| b.center[m] - b.radius).fold(f64::INFINITY, f64::min)).collect();
            let hi: Vec<f64> = (0..d).map(|m| balls.iter().map(|b| b.center[m] + b.radius).fold(f64::NEG_INFINITY, f64::max)).collect();
            let box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
            let mut radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
            radii.sort_by(f64::total_cmp);
            let mut grid = BallGrid::new(radii[radii.len() / 2].max(1e-3) * 2.0);
            for (i, b) in balls.iter().enumerate() {
                grid.insert(i, b);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = vec![0.0; d];
            let mut cand = Vec::new();
            let mut hits = 0u64;
            for _ in 0..samples {
                for m in 0..d {
                    p[m] = lo[m] + (hi[m] - lo[m]) * rng.random::<f64>();
                }
                cand.clear();
                grid.candidates(&p, 0.0, &mut cand);
                if cand.iter().any(|&i| balls[i].contains_point(&p)) {
                    hits += 1;
                }
            }
            let f = hits as f64 / samples as f64;
            Ok(VolumeEstimate {
                value: box_volume * f,
                standard_error: box_volume * (f * (1.0 - f) / samples as f64).sqrt(),
                method,
            })
        }
    }
}

/// Whether `S_i` meets no ball of radius at most `eps`.
pub fn good_cube_event(window: &WindowSample, i: &CubeIndex, eps: f64) -> bool {
    !window
        .points
        .iter()
        .any(|p| p.ball.radius <= eps && i.dist_sq_to_point(&p.ball.center) <= p.ball.radius * p.ball.radius)
}

/// Extremes of `Vol(C) / |S_C|` over a sample of clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeComparison {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub clusters: usize,
}

/// Ratios of volume to cube count over the clusters with at least
/// `min_cubes` cubes, each given with its volume.
pub fn volume_comparison_diagnostic(clusters: &[(Cluster, f64)], min_cubes: usize) -> VolumeComparison {
    let mut out = VolumeComparison { min_ratio: f64::INFINITY, max_ratio: 0.0, clusters: 0 };
    for (c, vol) in clusters {
        let n = c.cube_set().len();
        if n == 0 || n < min_cubes {
            continue;
        }
        let ratio = vol / n as f64;
        out.min_ratio = out.min_ratio.min(ratio);
        out.max_ratio = out.max_ratio.max(ratio);
        out.clusters += 1;
    }
    out
}
