//! Euclidean and lattice geometry: balls, unit cubes `S_i = i + [0,1]^d`,
//! space-height hypercubes `C_i = i + [0,1]^d x [0,1]`, cones above cube sets
//! and sliced union volumes.
//!
//! All balls are closed. Cone membership is decided in exact integer
//! arithmetic on squared box-to-box gaps.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidParameter("ball center must have at least one coordinate".into()));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Unchecked closed-ball intersection; both balls must share a dimension.
    #[inline]
    pub fn intersects(&self, other: &Ball) -> bool {
        debug_assert_eq!(self.dim(), other.dim());
        let reach = self.radius + other.radius;
        dist_sq(&self.center, &other.center) <= reach * reach
    }

    #[inline]
    pub fn contains_point(&self, p: &[f64]) -> bool {
        dist_sq(&self.center, p) <= self.radius * self.radius
    }

    #[inline]
    pub fn covers_origin(&self) -> bool {
        norm_sq(&self.center) <= self.radius * self.radius
    }

    /// Largest distance from the origin reached by the ball.
    #[inline]
    pub fn far_reach(&self) -> f64 {
        norm_sq(&self.center).sqrt() + self.radius
    }

    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Closed-ball intersection test with a dimension check.
pub fn balls_intersect(a: &Ball, b: &Ball) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(a.intersects(b))
}

/// Index of the unit cube `S_i = i + [0,1]^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeIndex(pub Vec<i64>);

impl CubeIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The cube holding a point; face points go to the cube of the floored coordinates.
    pub fn containing(p: &[f64]) -> Self {
        CubeIndex(p.iter().map(|x| x.floor() as i64).collect())
    }

    /// Squared distance from a point to the closed cube.
    pub fn dist_sq_to_point(&self, p: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(p)
            .map(|(&i, &x)| {
                let lo = i as f64;
                let g = if x < lo {
                    lo - x
                } else if x > lo + 1.0 {
                    x - lo - 1.0
                } else {
                    0.0
                };
                g * g
            })
            .sum()
    }
}

/// Squared Euclidean gap between the closed unit cubes `S_a` and `S_b`.
#[inline]
pub fn cube_gap_sq(a: &[i64], b: &[i64]) -> i64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let g = ((x - y).abs() - 1).max(0);
            g * g
        })
        .sum()
}

/// Squared Euclidean distance from the origin to the closed unit cube `S_a`.
#[inline]
pub fn cube_origin_gap_sq(a: &[i64]) -> i64 {
    a.iter()
        .map(|&x| {
            let g = if x >= 0 { x } else { -x - 1 };
            g * g
        })
        .sum()
}

/// Index of the hypercube `C_i = i + [0,1]^d x [0,1]` in space x radius.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HypercubeIndex {
    pub spatial: Vec<i64>,
    pub height: u32,
}

impl HypercubeIndex {
    pub fn new(spatial: Vec<i64>, height: u32) -> Self {
        Self { spatial, height }
    }

    pub fn dim(&self) -> usize {
        self.spatial.len()
    }

    /// Sup-norm of the full index in `Z^d x Z_+`.
    pub fn supnorm(&self) -> u64 {
        supnorm(self)
    }

    /// Total order used to pick among active hypercubes: sup-norm first,
    /// then height, then spatial coordinates lexicographically.
    pub fn reveal_cmp(&self, other: &Self) -> Ordering {
        self.supnorm()
            .cmp(&other.supnorm())
            .then(self.height.cmp(&other.height))
            .then_with(|| self.spatial.cmp(&other.spatial))
    }
}

pub fn supnorm(i: &HypercubeIndex) -> u64 {
    i.spatial
        .iter()
        .map(|x| x.unsigned_abs())
        .chain(std::iter::once(i.height as u64))
        .max()
        .unwrap_or(0)
}

/// Sup-norm of a spatial index alone.
#[inline]
pub fn spatial_supnorm(k: &[i64]) -> u64 {
    k.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)
}

/// Base of a cone in `R^d x R_+`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeBase {
    /// The single point at the origin of `R^d`.
    Origin { dim: usize },
    /// A nonempty finite union of unit cubes.
    Cubes(BTreeSet<CubeIndex>),
}

impl ConeBase {
    pub fn cubes<I: IntoIterator<Item = CubeIndex>>(cubes: I) -> Result<Self> {
        let set: BTreeSet<CubeIndex> = cubes.into_iter().collect();
        let Some(first) = set.iter().next() else {
            return Err(Error::InvalidParameter("cone base must be nonempty".into()));
        };
        let d = first.dim();
        if let Some(bad) = set.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        Ok(ConeBase::Cubes(set))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeBase::Origin { dim } => *dim,
            ConeBase::Cubes(set) => set.iter().next().map(|c| c.dim()).unwrap_or(0),
        }
    }

    /// Squared distance (an integer) from the spatial cube `k` to the base.
    pub fn gap_sq_to(&self, k: &[i64]) -> i64 {
        match self {
            ConeBase::Origin { .. } => cube_origin_gap_sq(k),
            ConeBase::Cubes(set) => set.iter().map(|c| cube_gap_sq(&c.0, k)).min().unwrap_or(i64::MAX),
        }
    }
}

/// Whether `C_i` meets the cone `{(x', y) : dist(x', base) <= y}`.
pub fn hypercube_intersects_cone(c: &HypercubeIndex, base: &ConeBase) -> bool {
    let top = c.height as i64 + 1;
    base.gap_sq_to(&c.spatial) <= top * top
}

/// Smallest height `h >= 0` such that a cube at squared gap `gap_sq` from the
/// base lies under the cone at the top of `C_(k, h)`.
#[inline]
pub fn min_cone_height(gap_sq: i64) -> u32 {
    let root = ceil_sqrt(gap_sq.max(0) as u64);
    root.saturating_sub(1) as u32
}

fn ceil_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// All unit cubes meeting the closed ball.
pub fn cubes_intersecting_ball(b: &Ball) -> Vec<CubeIndex> {
    let mut out = Vec::new();
    for_each_cube_near(&b.center, b.radius, |k| out.push(CubeIndex(k.to_vec())));
    out
}

/// Visit every spatial cube index whose closed cube lies within `reach` of `p`.
pub fn for_each_cube_near<F: FnMut(&[i64])>(p: &[f64], reach: f64, mut f: F) {
    let d = p.len();
    let lo: Vec<i64> = p.iter().map(|x| ((x - reach).ceil() as i64) - 1).collect();
    let hi: Vec<i64> = p.iter().map(|x| (x + reach).floor() as i64).collect();
    let reach_sq = reach * reach;
    let mut k = lo.clone();
    loop {
        let mut dsq = 0.0;
        for m in 0..d {
            let a = k[m] as f64;
            let g = if p[m] < a {
                a - p[m]
            } else if p[m] > a + 1.0 {
                p[m] - a - 1.0
            } else {
                0.0
            };
            dsq += g * g;
        }
        if dsq <= reach_sq {
            f(&k);
        }
        // odometer increment
        let mut m = 0;
        loop {
            if m == d {
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

/// Volume of the unit ball in `R^j` (`kappa_0 = 1`).
pub fn unit_ball_volume(j: usize) -> f64 {
    let mut even = 1.0;
    let mut odd = 2.0;
    if j == 0 {
        return 1.0;
    }
    let mut k = if j % 2 == 0 { 2 } else { 3 };
    while k <= j {
        if k % 2 == 0 {
            even *= 2.0 * std::f64::consts::PI / k as f64;
        } else {
            odd *= 2.0 * std::f64::consts::PI / k as f64;
        }
        k += 2;
    }
    if j % 2 == 0 {
        even
    } else {
        odd
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lebesgue volume of `[0,1]^d` dilated by a ball of radius `r` (Steiner formula).
pub fn cube_ball_minkowski_volume(d: usize, r: f64) -> f64 {
    (0..=d).map(|j| binomial(d, j) * unit_ball_volume(j) * r.powi(j as i32)).sum()
}

/// Every hypercube of sup-norm at most `n` in dimension `d`, in reveal order.
pub fn hypercubes_up_to_supnorm(d: usize, n: u32) -> Vec<HypercubeIndex> {
    let n = n as i64;
    let mut out = Vec::with_capacity(((2 * n + 1) as usize).pow(d as u32) * (n as usize + 1));
    let mut k = vec![-n; d];
    loop {
        for h in 0..=n as u32 {
            out.push(HypercubeIndex::new(k.clone(), h));
        }
        let mut m = 0;
        loop {
            if m == d {
                out.sort_by(|a, b| a.reveal_cmp(b));
                return out;
            }
            k[m] += 1;
            if k[m] <= n {
                break;
            }
            k[m] = -n;
            m += 1;
        }
    }
}

/// A convex set that can report its chord along the first coordinate axis
/// at a given transverse position `(x_2, ..., x_d)`.
pub trait Chorded {
    fn dim(&self) -> usize;
    /// Bounding box `(lo, hi)` of the set.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// The chord `[a, b]` of the first coordinate, if the transverse line meets the set.
    fn chord(&self, transverse: &[f64]) -> Option<(f64, f64)>;
}

impl Chorded for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }

    fn chord(&self, t: &[f64]) -> Option<(f64, f64)> {
        let s: f64 = self.center[1..].iter().zip(t).map(|(c, x)| (c - x) * (c - x)).sum();
        let r2 = self.radius * self.radius;
        (s <= r2).then(|| {
            let w = (r2 - s).sqrt();
            (self.center[0] - w, self.center[0] + w)
        })
    }
}

/// A unit cube dilated by a closed ball of radius `r`.
#[derive(Debug, Clone)]
pub struct DilatedCube<'a> {
    pub cube: &'a [i64],
    pub radius: f64,
}

impl Chorded for DilatedCube<'_> {
    fn dim(&self) -> usize {
        self.cube.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.cube.iter().map(|&c| c as f64 - self.radius).collect(),
            self.cube.iter().map(|&c| c as f64 + 1.0 + self.radius).collect(),
        )
    }

    fn chord(&self, t: &[f64]) -> Option<(f64, f64)> {
        let s: f64 = self.cube[1..]
            .iter()
            .zip(t)
            .map(|(&c, &x)| {
                let lo = c as f64;
                let g = if x < lo {
                    lo - x
                } else if x > lo + 1.0 {
                    x - lo - 1.0
                } else {
                    0.0
                };
                g * g
            })
            .sum();
        let r2 = self.radius * self.radius;
        (s <= r2).then(|| {
            let w = (r2 - s).sqrt();
            (self.cube[0] as f64 - w, self.cube[0] as f64 + 1.0 + w)
        })
    }
}

/// Volume of a union of convex sets: exact interval merging along the first
/// axis, midpoint rule on the fixed global lattice `(k + 1/2) * spacing` in the
/// remaining coordinates. In `d = 1` the result is exact.
///
/// The lattice does not depend on the shapes, so the result is a deterministic
/// nondecreasing function of the set family.
pub fn sliced_union_volume<S: Chorded>(shapes: &[S], spacing: f64) -> f64 {
    let Some(first) = shapes.first() else {
        return 0.0;
    };
    let d = first.dim();
    if d == 1 {
        let mut iv: Vec<(f64, f64)> = shapes.iter().filter_map(|s| s.chord(&[])).collect();
        return merged_length(&mut iv);
    }
    assert!(spacing > 0.0, "slice spacing must be positive");
    let tdim = d - 1;
    let ranges: Vec<(Vec<i64>, Vec<i64>)> = shapes
        .iter()
        .map(|s| {
            let (lo, hi) = s.bounds();
            (
                lo[1..].iter().map(|x| (x / spacing - 0.5).ceil() as i64).collect(),
                hi[1..].iter().map(|x| (x / spacing - 0.5).floor() as i64).collect(),
            )
        })
        .collect();
    // Row keys are packed into one integer in lexicographic order.
    let mut base = vec![i64::MAX; tdim];
    let mut top = vec![i64::MIN; tdim];
    for (klo, khi) in &ranges {
        for m in 0..tdim {
            base[m] = base[m].min(klo[m]);
            top[m] = top[m].max(khi[m]);
        }
    }
    let mut radix = vec![0u128; tdim];
    let mut span: u128 = 1;
    for m in (0..tdim).rev() {
        radix[m] = span;
        let width = (top[m] - base[m] + 1).max(1) as u128;
        span = span.checked_mul(width).expect("slice lattice too large");
    }
    let mut rows: Vec<(u128, f64, f64)> = Vec::new();
    let mut t = vec![0.0; tdim];
    let mut k = vec![0i64; tdim];
    for (s, (klo, khi)) in shapes.iter().zip(&ranges) {
        if klo.iter().zip(khi).any(|(a, b)| a > b) {
            continue;
        }
        k.copy_from_slice(klo);
        'rows: loop {
            let mut key = 0u128;
            for m in 0..tdim {
                t[m] = (k[m] as f64 + 0.5) * spacing;
                key += (k[m] - base[m]) as u128 * radix[m];
            }
            if let Some((a, b)) = s.chord(&t) {
                rows.push((key, a, b));
            }
            let mut m = tdim;
            loop {
                if m == 0 {
                    break 'rows;
                }
                m -= 1;
                k[m] += 1;
                if k[m] <= khi[m] {
                    break;
                }
                k[m] = klo[m];
            }
        }
    }
    rows.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut total = 0.0;
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        let mut row_len = 0.0;
        let (mut cur_lo, mut cur_hi) = (rows[i].1, rows[i].2);
        while j < rows.len() && rows[j].0 == rows[i].0 {
            let (a, b) = (rows[j].1, rows[j].2);
            if a > cur_hi {
                row_len += cur_hi - cur_lo;
                cur_lo = a;
                cur_hi = b;
            } else if b > cur_hi {
                cur_hi = b;
            }
            j += 1;
        }
        row_len += cur_hi - cur_lo;
        total += row_len;
        i = j;
    }
    total * spacing.powi(tdim as i32)
}

/// Total length of a union of closed intervals.
pub fn merged_length(iv: &mut [(f64, f64)]) -> f64 {
    if iv.is_empty() {
        return 0.0;
    }
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let (mut lo, mut hi) = iv[0];
    for &(a, b) in iv.iter().skip(1) {
        if a > hi {
            total += hi - lo;
            lo = a;
            hi = b;
        } else if b > hi {
            hi = b;
        }
    }
    total + (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(c: &[f64], r: f64) -> Ball {
        Ball::new(c.to_vec(), r).unwrap()
    }

    #[test]
    fn tangent_balls_intersect() {
        assert!(balls_intersect(&b(&[0.0, 0.0], 1.0), &b(&[3.0, 0.0], 2.0)).unwrap());
        assert!(!balls_intersect(&b(&[0.0, 0.0], 1.0), &b(&[3.01, 0.0], 2.0)).unwrap());
        assert!(balls_intersect(&b(&[0.0], 0.5), &b(&[0.0], 0.1)).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(matches!(
            balls_intersect(&b(&[0.0], 1.0), &b(&[0.0, 0.0], 1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cubes_for_small_balls() {
        let got = cubes_intersecting_ball(&b(&[0.5], 0.2));
        assert_eq!(got, vec![CubeIndex(vec![0])]);
        let mut got = cubes_intersecting_ball(&b(&[0.5], 0.6));
        got.sort();
        assert_eq!(got, vec![CubeIndex(vec![-1]), CubeIndex(vec![0]), CubeIndex(vec![1])]);
        let mut got = cubes_intersecting_ball(&b(&[0.0], 0.5));
        got.sort();
        assert_eq!(got, vec![CubeIndex(vec![-1]), CubeIndex(vec![0])]);
    }

    #[test]
    fn cubes_for_centered_unit_disc_are_the_3x3_block() {
        // Oracle: corner cube (1,1) is at distance sqrt(0.5) < 1 from (0.5, 0.5).
        let got: BTreeSet<_> = cubes_intersecting_ball(&b(&[0.5, 0.5], 1.0)).into_iter().collect();
        let mut want = BTreeSet::new();
        for x in -1..=1 {
            for y in -1..=1 {
                want.insert(CubeIndex(vec![x, y]));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn steiner_values() {
        assert!((cube_ball_minkowski_volume(1, 0.5) - 2.0).abs() < 1e-15);
        assert!((cube_ball_minkowski_volume(2, 1.0) - (5.0 + std::f64::consts::PI)).abs() < 1e-12);
        assert_eq!(cube_ball_minkowski_volume(3, 0.0), 1.0);
        // d = 3, r = 1: 1 + 6 + 3 pi + 4/3 pi
        let want = 7.0 + 3.0 * std::f64::consts::PI + 4.0 / 3.0 * std::f64::consts::PI;
        assert!((cube_ball_minkowski_volume(3, 1.0) - want).abs() < 1e-12);
    }

    #[test]
    fn unit_ball_volumes() {
        let pi = std::f64::consts::PI;
        let want = [1.0, 2.0, pi, 4.0 / 3.0 * pi, pi * pi / 2.0, 8.0 * pi * pi / 15.0];
        for (j, w) in want.iter().enumerate() {
            assert!((unit_ball_volume(j) - w).abs() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn cone_examples() {
        let base = ConeBase::cubes([CubeIndex(vec![0])]).unwrap();
        assert!(hypercube_intersects_cone(&HypercubeIndex::new(vec![0], 0), &base));
        assert!(!hypercube_intersects_cone(&HypercubeIndex::new(vec![5], 2), &base));
        assert!(hypercube_intersects_cone(&HypercubeIndex::new(vec![3], 2), &base));
        let origin = ConeBase::Origin { dim: 2 };
        assert!(hypercube_intersects_cone(&HypercubeIndex::new(vec![-1, -1], 0), &origin));
        assert!(hypercube_intersects_cone(&HypercubeIndex::new(vec![1, 0], 0), &origin));
        assert!(!hypercube_intersects_cone(&HypercubeIndex::new(vec![2, 0], 0), &origin));
        assert!(ConeBase::cubes(Vec::<CubeIndex>::new()).is_err());
    }

    #[test]
    fn cone_test_matches_dense_sampling() {
        // Oracle: sample points of the hypercube and test dist(x', base) <= y directly.
        let base_cubes = [vec![0i64, 0], vec![1, 0], vec![1, 1]];
        let base = ConeBase::cubes(base_cubes.iter().cloned().map(CubeIndex)).unwrap();
        let dist_to_base = |p: &[f64]| {
            base_cubes
                .iter()
                .map(|c| CubeIndex(c.clone()).dist_sq_to_point(p).sqrt())
                .fold(f64::INFINITY, f64::min)
        };
        let n = 12;
        for kx in -5..=6 {
            for ky in -5..=6 {
                for h in 0..4u32 {
                    let hc = HypercubeIndex::new(vec![kx, ky], h);
                    let mut hit = false;
                    for a in 0..=n {
                        for c in 0..=n {
                            let p = [kx as f64 + a as f64 / n as f64, ky as f64 + c as f64 / n as f64];
                            if dist_to_base(&p) <= h as f64 + 1.0 + 1e-12 {
                                hit = true;
                            }
                        }
                    }
                    assert_eq!(hypercube_intersects_cone(&hc, &base), hit, "{hc:?}");
                }
            }
        }
    }

    #[test]
    fn supnorm_examples() {
        assert_eq!(supnorm(&HypercubeIndex::new(vec![-3, 1], 2)), 3);
        assert_eq!(supnorm(&HypercubeIndex::new(vec![0, 0], 0)), 0);
        assert_eq!(supnorm(&HypercubeIndex::new(vec![2], 7)), 7);
    }

    #[test]
    fn supnorm_enumeration_size() {
        for d in 1..=3usize {
            for n in 0..=4u32 {
                let all = hypercubes_up_to_supnorm(d, n);
                assert_eq!(all.len(), (2 * n as usize + 1).pow(d as u32) * (n as usize + 1));
                assert!(all.windows(2).all(|w| w[0].reveal_cmp(&w[1]) == Ordering::Less));
            }
        }
    }

    #[test]
    fn min_cone_height_is_exact() {
        for g in 0..200i64 {
            let h = min_cone_height(g) as i64;
            assert!((h + 1) * (h + 1) >= g);
            assert!(h == 0 || h * h < g);
        }
    }

    #[test]
    fn sliced_volume_exact_in_1d() {
        let balls = [b(&[0.0], 0.5), b(&[0.3], 0.5)];
        assert!((sliced_union_volume(&balls, 0.1) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn sliced_volume_of_nested_and_disjoint_discs() {
        let pi = std::f64::consts::PI;
        let v = sliced_union_volume(&[b(&[0.0, 0.0], 1.0), b(&[0.2, 0.1], 0.3)], 1e-3);
        assert!((v - pi).abs() < 1e-4);
        let v = sliced_union_volume(&[b(&[0.0, 0.0], 1.0), b(&[5.0, 0.0], 1.0)], 1e-3);
        assert!((v - 2.0 * pi).abs() < 2e-4);
    }

    #[test]
    fn sliced_dilated_cube_matches_steiner() {
        for d in 2..=3 {
            for &r in &[0.25, 1.0] {
                let cube = vec![0i64; d];
                let shape = DilatedCube { cube: &cube, radius: r };
                let v = sliced_union_volume(&[shape], if d == 2 { 1e-3 } else { 1e-2 });
                let want = cube_ball_minkowski_volume(d, r);
                assert!((v - want).abs() / want < 1e-3, "d={d} r={r} v={v} want={want}");
            }
        }
    }
}
