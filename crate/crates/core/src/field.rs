//! The Poisson point process of intensity `lambda dx (x) dmu`, revealed lazily
//! one hypercube at a time, plus band-sampled windows, the ghost field and the
//! monotone thinning coupling.
//!
//! Every hypercube draws from its own substream keyed by `(seed, index)`, so a
//! reveal is a pure function of its index. Each point also carries a uniform
//! coin; thinning to `lambda_lo` keeps exactly the points with
//! `coin * lambda < lambda_lo`, which couples all intensities below `lambda`
//! on one probability space.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{Moment, MomentCondition, RadiusLaw};
use crate::error::{Error, Result};
use crate::geometry::{norm_sq, unit_ball_volume, Ball, HypercubeIndex};
use crate::rng::{substream, tag};

/// Parameters of the Poisson-Boolean model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub dim: usize,
    pub lambda: f64,
    pub mu: RadiusLaw,
    pub seed: u64,
}

impl FieldConfig {
    /// `lambda = 0` is accepted and yields the empty field.
    pub fn new(dim: usize, lambda: f64, mu: RadiusLaw, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        mu.validate()?;
        Ok(Self { dim, lambda, mu, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    /// Highest height whose band `[h, h + 1)` carries mass, for bounded laws.
    pub fn top_height(&self) -> Option<u32> {
        let sup = self.mu.ess_sup();
        if !sup.is_finite() {
            return None;
        }
        let mut h = sup.floor() as u32;
        while h > 0 && self.mu.height_mass(h) == 0.0 {
            h -= 1;
        }
        Some(h)
    }

    /// Heights `0..=cap` to reveal around a window of radius `window`, and the
    /// bound `lambda * int_{r >= cap + 1} vol(B_(window + r)) dmu` on what is
    /// left out. Bounded laws are never truncated.
    pub fn height_cap(&self, window: f64, eps: f64) -> Result<(u32, f64)> {
        if let Some(h) = self.top_height() {
            return Ok((h, 0.0));
        }
        self.mu.require(self.dim, MomentCondition::Weak)?;
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps_trunc must be > 0, got {eps}")));
        }
        let mut h = self.mu.ess_inf().floor() as u32;
        loop {
            let Moment::Finite(tail) = self.mu.enlarged_ball_tail(self.dim, window, h as f64 + 1.0) else {
                return Err(Error::MomentCondition { condition: MomentCondition::Weak });
            };
            if self.lambda * tail <= eps {
                return Ok((h, self.lambda * tail));
            }
            h += 1;
            if h > 1 << 20 {
                return Err(Error::InvalidParameter(format!(
                    "no height cap below 2^20 brings the truncation error under eps_trunc = {eps}"
                )));
            }
        }
    }
}

/// A point of the process: its ball and its thinning coin in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub ball: Ball,
    pub coin: f64,
}

impl FieldPoint {
    /// Whether the point survives thinning from `lambda` to `lambda_lo`.
    #[inline]
    pub fn kept(&self, lambda: f64, lambda_lo: f64) -> bool {
        self.coin * lambda < lambda_lo
    }
}

/// The restriction of the process to one hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealedHypercube {
    pub index: HypercubeIndex,
    pub points: Vec<FieldPoint>,
}

fn check_thinning(lambda: f64, lambda_lo: f64) -> Result<()> {
    if !(lambda_lo >= 0.0) || lambda_lo > lambda {
        return Err(Error::InvalidParameter(format!(
            "thinning target {lambda_lo} must lie in [0, {lambda}]"
        )));
    }
    Ok(())
}

impl RevealedHypercube {
    pub fn thin(&self, lambda_lo: f64, cfg: &FieldConfig) -> Result<Self> {
        check_thinning(cfg.lambda, lambda_lo)?;
        Ok(Self {
            index: self.index.clone(),
            points: self.points.iter().filter(|p| p.kept(cfg.lambda, lambda_lo)).cloned().collect(),
        })
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let n: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    n as u64
}

/// Open-interval uniform variate, safe for inverse-CDF sampling.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Reveal `eta` restricted to `C_i`. Bands without mass consume no randomness.
pub fn reveal(cfg: &FieldConfig, i: &HypercubeIndex) -> RevealedHypercube {
    let h = i.height as f64;
    let mass = cfg.mu.height_mass(i.height);
    let mut points = Vec::new();
    if mass > 0.0 && cfg.lambda > 0.0 {
        let mut key = i.spatial.clone();
        key.push(i.height as i64);
        let mut rng = substream(cfg.seed, tag::FIELD, &key);
        let n = poisson_count(&mut rng, cfg.lambda * mass);
        points.reserve(n as usize);
        for _ in 0..n {
            let center: Vec<f64> = i.spatial.iter().map(|&k| k as f64 + rng.random::<f64>()).collect();
            let radius = cfg.mu.sample_in_band(h, h + 1.0, open_unit(&mut rng));
            let coin = rng.random::<f64>();
            points.push(FieldPoint { ball: Ball { center, radius }, coin });
        }
    }
    RevealedHypercube { index: i.clone(), points }
}

/// All balls of the process that meet the closed ball `B_R`, up to a radius
/// truncation whose omitted expected count is reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub dim: usize,
    pub window_radius: f64,
    pub lambda: f64,
    pub points: Vec<FieldPoint>,
    pub truncation_radius: f64,
    pub truncation_error_bound: f64,
}

impl WindowSample {
    pub fn empty(dim: usize, window_radius: f64) -> Self {
        Self {
            dim,
            window_radius,
            lambda: 0.0,
            points: Vec::new(),
            truncation_radius: 0.0,
            truncation_error_bound: 0.0,
        }
    }

    pub fn from_balls(dim: usize, window_radius: f64, balls: Vec<Ball>) -> Self {
        let points = balls.into_iter().map(|ball| FieldPoint { ball, coin: 0.0 }).collect();
        Self { points, lambda: 1.0, ..Self::empty(dim, window_radius) }
    }

    pub fn balls(&self) -> Vec<Ball> {
        self.points.iter().map(|p| p.ball.clone()).collect()
    }

    pub fn thin(&self, lambda_lo: f64) -> Result<Self> {
        check_thinning(self.lambda, lambda_lo)?;
        Ok(Self {
            points: self.points.iter().filter(|p| p.kept(self.lambda, lambda_lo)).cloned().collect(),
            lambda: lambda_lo,
            truncation_error_bound: if self.lambda > 0.0 {
                self.truncation_error_bound * lambda_lo / self.lambda
            } else {
                0.0
            },
            ..self.clone()
        })
    }

    /// CSV with columns `x1..xd, r`.
    pub fn to_csv(&self) -> String {
        balls_csv(self.dim, self.points.iter().map(|p| &p.ball))
    }
}

pub(crate) fn balls_csv<'a, I: Iterator<Item = &'a Ball>>(dim: usize, balls: I) -> String {
    let mut out = String::new();
    for m in 1..=dim {
        let _ = write!(out, "x{m},");
    }
    out.push_str("r\n");
    for b in balls {
        for c in &b.center {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{}", b.radius);
    }
    out
}

/// Geometric radius bands `[b_k, b_(k+1))` of ratio 2 starting at the
/// essential infimum, cut at the first boundary whose tail bound is below `eps`.
fn radius_bands(cfg: &FieldConfig, window: f64, eps: f64) -> Result<(Vec<(f64, f64)>, f64, f64)> {
    let mu = &cfg.mu;
    let (inf, sup) = (mu.ess_inf(), mu.ess_sup());
    let tail = |t: f64| -> Result<f64> {
        match mu.enlarged_ball_tail(cfg.dim, window, t) {
            Moment::Finite(v) => Ok(cfg.lambda * v),
            Moment::Infinite => Err(Error::MomentCondition { condition: MomentCondition::Weak }),
        }
    };
    let first_step = if inf > 0.0 {
        2.0 * inf
    } else if sup == 0.0 {
        1.0
    } else if sup.is_finite() {
        sup / 16.0
    } else {
        mu.median() / 16.0
    };
    let mut bounds = vec![inf, first_step];
    loop {
        let top = *bounds.last().expect("nonempty");
        if top > sup {
            break;
        }
        let t = tail(top)?;
        if t <= eps {
            break;
        }
        if bounds.len() > 4096 {
            return Err(Error::InvalidParameter("radius band construction does not converge".into()));
        }
        bounds.push(2.0 * top);
    }
    let last = *bounds.last().expect("nonempty");
    let error = if last > sup { 0.0 } else { tail(last)? };
    let bands = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    Ok((bands, last.min(sup), error))
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    if dim == 1 {
        return vec![radius * (2.0 * rng.random::<f64>() - 1.0)];
    }
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = norm_sq(&v).sqrt();
    let s = radius * rng.random::<f64>().powf(1.0 / dim as f64) / n;
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Sample the window `O_R` band by band from its own substream.
pub fn sample_window(cfg: &FieldConfig, window_radius: f64, eps_trunc: f64) -> Result<WindowSample> {
    cfg.mu.require(cfg.dim, MomentCondition::Weak)?;
    if !(window_radius >= 0.0) || !(eps_trunc > 0.0) {
        return Err(Error::InvalidParameter("window radius must be >= 0 and eps_trunc > 0".into()));
    }
    let (bands, truncation_radius, truncation_error_bound) = radius_bands(cfg, window_radius, eps_trunc)?;
    let kappa = unit_ball_volume(cfg.dim);
    let mut points = Vec::new();
    for (k, &(lo, hi)) in bands.iter().enumerate() {
        let mass = cfg.mu.band_mass(lo, hi);
        if mass == 0.0 || cfg.lambda == 0.0 {
            continue;
        }
        let top = hi.min(cfg.mu.ess_sup());
        let reach = window_radius + top;
        let mut rng = substream(cfg.seed, tag::WINDOW, &[k as i64]);
        let n = poisson_count(&mut rng, cfg.lambda * mass * kappa * reach.powi(cfg.dim as i32));
        for _ in 0..n {
            let center = uniform_in_ball(&mut rng, cfg.dim, reach);
            let radius = cfg.mu.sample_in_band(lo, hi, open_unit(&mut rng));
            let coin = rng.random::<f64>();
            if norm_sq(&center).sqrt() <= window_radius + radius {
                points.push(FieldPoint { ball: Ball { center, radius }, coin });
            }
        }
    }
    Ok(WindowSample {
        dim: cfg.dim,
        window_radius,
        lambda: cfg.lambda,
        points,
        truncation_radius,
        truncation_error_bound,
    })
}

/// The window `O_R` read off the lazily revealed field, so that it shares
/// every point with the revealment algorithm run on the same configuration.
pub fn window_from_field(cfg: &FieldConfig, window_radius: f64, eps_trunc: f64) -> Result<WindowSample> {
    let (cap, bound) = cfg.height_cap(window_radius, eps_trunc)?;
    let mut points = Vec::new();
    let origin = vec![0.0; cfg.dim];
    for h in 0..=cap {
        if cfg.mu.height_mass(h) == 0.0 {
            continue;
        }
        let reach = window_radius + h as f64 + 1.0;
        crate::geometry::for_each_cube_near(&origin, reach, |k| {
            let rev = reveal(cfg, &HypercubeIndex::new(k.to_vec(), h));
            for p in rev.points {
                if norm_sq(&p.ball.center).sqrt() <= window_radius + p.ball.radius {
                    points.push(p);
                }
            }
        });
    }
    let truncation_radius = if cfg.top_height().is_some() { cfg.mu.ess_sup() } else { cap as f64 + 1.0 };
    Ok(WindowSample {
        dim: cfg.dim,
        window_radius,
        lambda: cfg.lambda,
        points,
        truncation_radius,
        truncation_error_bound: bound,
    })
}

/// Region carrying a ghost field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GhostRegion {
    /// The axis-parallel box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// All of `R^d`, revealed on demand.
    Unbounded { dim: usize },
}

impl GhostRegion {
    pub fn dim(&self) -> usize {
        match self {
            GhostRegion::Box { lo, .. } => lo.len(),
            GhostRegion::Unbounded { dim } => *dim,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            GhostRegion::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a).max(0.0)).product(),
            GhostRegion::Unbounded { .. } => f64::INFINITY,
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        match self {
            GhostRegion::Box { lo, hi } => p.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *a <= *x && *x <= *b),
            GhostRegion::Unbounded { .. } => true,
        }
    }
}

/// A homogeneous Poisson process of rate `rho`, independent of the field.
///
/// Points are generated per unit cube from the ghost substream, so the field
/// restricted to any set is the same whichever way it is queried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostField {
    pub rho: f64,
    pub region: GhostRegion,
    pub seed: u64,
}

impl GhostField {
    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    /// Ghost points inside the unit cube `k + [0,1)^d` and the region.
    pub fn points_in_cube(&self, k: &[i64]) -> Vec<Vec<f64>> {
        if self.rho == 0.0 {
            return Vec::new();
        }
        let mut rng = substream(self.seed, tag::GHOST, k);
        let n = poisson_count(&mut rng, self.rho);
        (0..n)
            .map(|_| k.iter().map(|&c| c as f64 + rng.random::<f64>()).collect::<Vec<f64>>())
            .filter(|p| self.region.contains(p))
            .collect()
    }

    /// All points of a bounded ghost field.
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        let GhostRegion::Box { lo, hi } = &self.region else {
            return Err(Error::InvalidParameter("an unbounded ghost field cannot be listed".into()));
        };
        let mut out = Vec::new();
        if self.region.volume() == 0.0 {
            return Ok(out);
        }
        let klo: Vec<i64> = lo.iter().map(|x| x.floor() as i64).collect();
        let khi: Vec<i64> = hi.iter().map(|x| x.floor() as i64).collect();
        let mut k = klo.clone();
        loop {
            out.extend(self.points_in_cube(&k));
            let mut m = 0;
            loop {
                if m == k.len() {
                    return Ok(out);
                }
                k[m] += 1;
                if k[m] <= khi[m] {
                    break;
                }
                k[m] = klo[m];
                m += 1;
            }
        }
    }

    /// Whether some ghost point lies in the closed ball.
    pub fn hits_ball(&self, b: &Ball) -> bool {
        let mut hit = false;
        crate::geometry::for_each_cube_near(&b.center, b.radius, |k| {
            if !hit {
                hit = self.points_in_cube(k).iter().any(|p| b.contains_point(p));
            }
        });
        hit
    }
}

/// A ghost field of rate `rho` on `region`.
pub fn sample_ghost(rho: f64, region: GhostRegion, seed: u64) -> Result<GhostField> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("ghost rate must be finite and >= 0, got {rho}")));
    }
    if let GhostRegion::Box { lo, hi } = &region {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("ghost box corners must share a positive dimension".into()));
        }
    }
    Ok(GhostField { rho, region, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize, lambda: f64, mu: RadiusLaw) -> FieldConfig {
        FieldConfig::new(dim, lambda, mu, 11).unwrap()
    }

    #[test]
    fn zero_mass_heights_are_empty() {
        let c = cfg(2, 2.0, RadiusLaw::dirac(1.0).unwrap());
        for k in 0..50 {
            assert!(reveal(&c.with_seed(k), &HypercubeIndex::new(vec![0, 0], 5)).points.is_empty());
            assert!(reveal(&c.with_seed(k), &HypercubeIndex::new(vec![0, 0], 0)).points.is_empty());
        }
    }

    #[test]
    fn radii_stay_in_their_band() {
        let c = cfg(2, 5.0, RadiusLaw::pareto(2.5, 0.3).unwrap());
        for h in 0..4 {
            let rev = reveal(&c, &HypercubeIndex::new(vec![3, -1], h));
            for p in &rev.points {
                assert!(p.ball.radius >= h as f64 && p.ball.radius < h as f64 + 1.0);
                assert!(p.ball.center[0] >= 3.0 && p.ball.center[0] < 4.0);
            }
        }
    }

    #[test]
    fn reveal_is_order_independent() {
        let c = cfg(2, 3.0, RadiusLaw::uniform(0.0, 2.0).unwrap());
        let a = HypercubeIndex::new(vec![1, 2], 0);
        let b = HypercubeIndex::new(vec![-4, 0], 1);
        let (a1, b1) = (reveal(&c, &a), reveal(&c, &b));
        let (b2, a2) = (reveal(&c, &b), reveal(&c, &a));
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn thinning_is_identity_at_full_intensity_and_rejects_raising() {
        let c = cfg(2, 3.0, RadiusLaw::uniform(0.0, 1.0).unwrap());
        let rev = reveal(&c, &HypercubeIndex::new(vec![0, 0], 0));
        assert_eq!(rev.thin(3.0, &c).unwrap(), rev);
        assert!(rev.thin(3.5, &c).is_err());
        assert!(rev.thin(0.0, &c).unwrap().points.is_empty());
    }

    #[test]
    fn dirac_window_is_a_single_band() {
        let c = cfg(2, 1.0, RadiusLaw::dirac(1.0).unwrap());
        let w = sample_window(&c, 3.0, 1e-6).unwrap();
        assert_eq!(w.truncation_radius, 1.0);
        assert_eq!(w.truncation_error_bound, 0.0);
        for p in &w.points {
            assert!(norm_sq(&p.ball.center).sqrt() <= 4.0);
        }
    }

    #[test]
    fn pareto_window_truncation_is_bounded() {
        let c = cfg(2, 1.0, RadiusLaw::pareto(8.0, 1.0).unwrap());
        let w = sample_window(&c, 3.0, 1e-6).unwrap();
        assert!(w.truncation_radius.is_finite());
        assert!(w.truncation_error_bound <= 1e-6);
        let heavy = cfg(2, 1.0, RadiusLaw::pareto(2.0, 1.0).unwrap());
        assert!(sample_window(&heavy, 3.0, 1e-6).is_err());
    }

    #[test]
    fn field_window_contains_exactly_the_meeting_balls() {
        let c = cfg(2, 1.5, RadiusLaw::uniform(0.2, 1.4).unwrap());
        let w = window_from_field(&c, 4.0, 1e-6).unwrap();
        assert_eq!(w.truncation_error_bound, 0.0);
        let mut brute = 0;
        for h in 0..=1u32 {
            for x in -8..8 {
                for y in -8..8 {
                    for p in reveal(&c, &HypercubeIndex::new(vec![x, y], h)).points {
                        if norm_sq(&p.ball.center).sqrt() <= 4.0 + p.ball.radius {
                            brute += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(w.points.len(), brute);
    }

    #[test]
    fn ghost_degenerate_and_consistent() {
        let g = sample_ghost(3.0, GhostRegion::Box { lo: vec![0.0, 0.0], hi: vec![0.0, 2.0] }, 1).unwrap();
        assert!(g.points().unwrap().is_empty());
        let g = sample_ghost(2.0, GhostRegion::Box { lo: vec![-1.5, -1.5], hi: vec![1.5, 1.5] }, 4).unwrap();
        let unbounded = sample_ghost(2.0, GhostRegion::Unbounded { dim: 2 }, 4).unwrap();
        for p in g.points().unwrap() {
            let k: Vec<i64> = p.iter().map(|x| x.floor() as i64).collect();
            assert!(unbounded.points_in_cube(&k).contains(&p));
        }
    }
}
