//! The radius law `mu`: sampling by quantiles, interval masses, moments,
//! moment-condition checks and Poisson-Boolean volumes of cones.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    binomial, sliced_union_volume, unit_ball_volume, ConeBase, DilatedCube,
};
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance used for every radial integral.
pub const QUAD_TOL: f64 = 1e-8;

/// Quantile at which Pareto radial integrals are cut off.
const PARETO_CUTOFF_MASS: f64 = 1e-12;

/// Supported radius distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase", deny_unknown_fields)]
pub enum RadiusLaw {
    /// Point mass at `r0`.
    Dirac { r0: f64 },
    /// Uniform on `[a, b]`.
    Uniform { a: f64, b: f64 },
    /// Density `alpha * rmin^alpha * r^(-alpha-1)` on `[rmin, inf)`.
    Pareto { alpha: f64, rmin: f64 },
}

/// A moment that may diverge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn is_finite(self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
}

/// Which of the two integrability conditions on `mu` is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentCondition {
    /// `int r^d dmu < inf`: needed for a nontrivial critical intensity.
    Weak,
    /// `int r^(5d-3) dmu < inf`: the stronger condition behind `beta <= 1`.
    Strong,
}

impl fmt::Display for MomentCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentCondition::Weak => write!(f, "weak moment condition (int r^d dmu(r) < inf)"),
            MomentCondition::Strong => write!(f, "strong moment condition (int r^(5d-3) dmu(r) < inf)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub weak: bool,
    pub strong: bool,
}

impl RadiusLaw {
    pub fn dirac(r0: f64) -> Result<Self> {
        let law = RadiusLaw::Dirac { r0 };
        law.validate().map(|_| law)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let law = RadiusLaw::Uniform { a, b };
        law.validate().map(|_| law)
    }

    pub fn pareto(alpha: f64, rmin: f64) -> Result<Self> {
        let law = RadiusLaw::Pareto { alpha, rmin };
        law.validate().map(|_| law)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadiusLaw::Dirac { r0 } => r0.is_finite() && r0 >= 0.0,
            RadiusLaw::Uniform { a, b } => a.is_finite() && b.is_finite() && a >= 0.0 && b > 0.0 && a <= b,
            RadiusLaw::Pareto { alpha, rmin } => alpha.is_finite() && rmin.is_finite() && alpha > 0.0 && rmin > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid radius law {self:?}")))
        }
    }

    /// `mu([x, inf))`.
    pub fn sf_closed(&self, x: f64) -> f64 {
        match *self {
            RadiusLaw::Dirac { r0 } => {
                if x <= r0 {
                    1.0
                } else {
                    0.0
                }
            }
            RadiusLaw::Uniform { a, b } => {
                if x <= a {
                    1.0
                } else if x >= b {
                    if a == b && x == b {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (b - x) / (b - a)
                }
            }
            RadiusLaw::Pareto { alpha, rmin } => {
                if x <= rmin {
                    1.0
                } else if x.is_infinite() {
                    0.0
                } else {
                    (rmin / x).powf(alpha)
                }
            }
        }
    }

    /// `mu((x, inf))`.
    pub fn sf_open(&self, x: f64) -> f64 {
        match *self {
            RadiusLaw::Dirac { r0 } => {
                if x < r0 {
                    1.0
                } else {
                    0.0
                }
            }
            RadiusLaw::Uniform { a, b } if a == b => {
                if x < a {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.sf_closed(x),
        }
    }

    /// `mu([lo, hi])`; `hi` may be infinite.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        (self.sf_closed(lo) - self.sf_open(hi)).clamp(0.0, 1.0)
    }

    /// `mu([lo, hi))`, the mass carried by a radius band.
    pub fn band_mass(&self, lo: f64, hi: f64) -> f64 {
        (self.sf_closed(lo) - self.sf_closed(hi)).clamp(0.0, 1.0)
    }

    /// Mass of the hypercube height band `[h, h + 1)`.
    pub fn height_mass(&self, h: u32) -> f64 {
        self.band_mass(h as f64, h as f64 + 1.0)
    }

    /// Quantile function `inf { r : mu([0, r]) >= u }`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            RadiusLaw::Dirac { r0 } => r0,
            RadiusLaw::Uniform { a, b } => a + u * (b - a),
            RadiusLaw::Pareto { alpha, rmin } => rmin * (1.0 - u).powf(-1.0 / alpha),
        }
    }

    /// Inverse-CDF sample from a uniform variate in `(0, 1)`.
    pub fn sample_radius(&self, u: f64) -> f64 {
        self.quantile(u)
    }

    /// Sample from `mu` conditioned on `[lo, hi)`; the band must carry mass.
    pub fn sample_in_band(&self, lo: f64, hi: f64, u: f64) -> f64 {
        match *self {
            RadiusLaw::Dirac { r0 } => r0,
            RadiusLaw::Uniform { a, b } => {
                if a == b {
                    return a;
                }
                let (l, h) = (lo.max(a), hi.min(b));
                (l + u * (h - l)).min(h)
            }
            RadiusLaw::Pareto { alpha, rmin } => {
                let l = lo.max(rmin);
                let s_lo = (rmin / l).powf(alpha);
                let s_hi = if hi.is_infinite() { 0.0 } else { (rmin / hi).powf(alpha) };
                let s = s_lo - u * (s_lo - s_hi);
                (rmin * s.powf(-1.0 / alpha)).clamp(l, hi)
            }
        }
    }

    pub fn ess_inf(&self) -> f64 {
        match *self {
            RadiusLaw::Dirac { r0 } => r0,
            RadiusLaw::Uniform { a, .. } => a,
            RadiusLaw::Pareto { rmin, .. } => rmin,
        }
    }

    /// Essential supremum; infinite for Pareto.
    pub fn ess_sup(&self) -> f64 {
        match *self {
            RadiusLaw::Dirac { r0 } => r0,
            RadiusLaw::Uniform { b, .. } => b,
            RadiusLaw::Pareto { .. } => f64::INFINITY,
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// `int r^p dmu(r)`.
    pub fn moment(&self, p: f64) -> Moment {
        match *self {
            RadiusLaw::Dirac { r0 } => Moment::Finite(r0.powf(p)),
            RadiusLaw::Uniform { a, b } => {
                if a == b {
                    Moment::Finite(a.powf(p))
                } else {
                    Moment::Finite((b.powf(p + 1.0) - a.powf(p + 1.0)) / ((p + 1.0) * (b - a)))
                }
            }
            RadiusLaw::Pareto { alpha, rmin } => {
                if p >= alpha {
                    Moment::Infinite
                } else {
                    Moment::Finite(alpha * rmin.powf(p) / (alpha - p))
                }
            }
        }
    }

    pub fn validate_conditions(&self, d: usize) -> ConditionReport {
        ConditionReport {
            weak: self.moment(d as f64).is_finite(),
            strong: self.moment((5 * d) as f64 - 3.0).is_finite(),
        }
    }

    /// Fail with the named condition if it does not hold in dimension `d`.
    pub fn require(&self, d: usize, condition: MomentCondition) -> Result<()> {
        let report = self.validate_conditions(d);
        let ok = match condition {
            MomentCondition::Weak => report.weak,
            MomentCondition::Strong => report.weak && report.strong,
        };
        if ok {
            Ok(())
        } else if !report.weak {
            Err(Error::MomentCondition { condition: MomentCondition::Weak })
        } else {
            Err(Error::MomentCondition { condition })
        }
    }

    /// `int f(r) dmu(r)` by adaptive quadrature (exact for Dirac).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match *self {
            RadiusLaw::Dirac { r0 } => f(r0),
            RadiusLaw::Uniform { a, b } => {
                if a == b {
                    f(a)
                } else {
                    adaptive_simpson(&f, a, b, QUAD_TOL * (b - a), 16) / (b - a)
                }
            }
            RadiusLaw::Pareto { alpha, rmin } => {
                // log-radius substitution: the integrand decays exponentially in t
                let cut = self.quantile(1.0 - PARETO_CUTOFF_MASS);
                let g = |t: f64| {
                    let r = t.exp();
                    f(r) * alpha * (rmin / r).powf(alpha)
                };
                adaptive_simpson(g, rmin.ln(), cut.ln(), QUAD_TOL, 32)
            }
        }
    }

    /// `int_{r >= t} vol(B_(R + r)) dmu(r)` in dimension `d`.
    pub fn enlarged_ball_tail(&self, d: usize, window: f64, t: f64) -> Moment {
        let kappa = unit_ball_volume(d);
        let v = match *self {
            RadiusLaw::Dirac { r0 } => {
                if r0 >= t {
                    kappa * (window + r0).powi(d as i32)
                } else {
                    0.0
                }
            }
            RadiusLaw::Uniform { a, b } => {
                if a == b {
                    if a >= t {
                        kappa * (window + a).powi(d as i32)
                    } else {
                        0.0
                    }
                } else {
                    let lo = t.max(a);
                    if lo >= b {
                        0.0
                    } else {
                        let n = d as i32 + 1;
                        kappa * ((window + b).powi(n) - (window + lo).powi(n)) / (n as f64 * (b - a))
                    }
                }
            }
            RadiusLaw::Pareto { alpha, rmin } => {
                if alpha <= d as f64 {
                    return Moment::Infinite;
                }
                let lo = t.max(rmin);
                // binomial expansion of (R + r)^d against the Pareto density
                let sum: f64 = (0..=d)
                    .map(|j| {
                        binomial(d, j)
                            * window.powi((d - j) as i32)
                            * alpha
                            * rmin.powf(alpha)
                            * lo.powf(j as f64 - alpha)
                            / (alpha - j as f64)
                    })
                    .sum();
                kappa * sum
            }
        };
        Moment::Finite(v)
    }

    /// Poisson-Boolean volume of the cone above `base`, `int vol(base + B_r) dmu(r)`.
    pub fn cone_pvol(&self, base: &ConeBase, d: usize) -> Result<f64> {
        self.require(d, MomentCondition::Weak)?;
        if base.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: base.dim() });
        }
        let moment = |p: usize| self.moment(p as f64).finite().expect("weak condition checked");
        match base {
            ConeBase::Origin { .. } => Ok(unit_ball_volume(d) * moment(d)),
            ConeBase::Cubes(set) if set.len() == 1 => Ok((0..=d)
                .map(|j| binomial(d, j) * unit_ball_volume(j) * moment(j))
                .sum()),
            ConeBase::Cubes(set) => {
                let cubes: Vec<&[i64]> = set.iter().map(|c| c.0.as_slice()).collect();
                Ok(self.integrate(|r| dilated_union_volume(&cubes, r)))
            }
        }
    }

    /// `c_mu`: Poisson-Boolean volume of the cone above a single unit cube.
    pub fn single_cube_cone_pvol(&self, d: usize) -> Result<f64> {
        self.cone_pvol(&ConeBase::cubes([crate::geometry::CubeIndex(vec![0; d])])?, d)
    }
}

/// Volume of a union of unit cubes dilated by `B_r`.
pub fn dilated_union_volume(cubes: &[&[i64]], r: f64) -> f64 {
    if cubes.is_empty() {
        return 0.0;
    }
    let d = cubes[0].len();
    if d == 1 {
        let mut iv: Vec<(f64, f64)> = cubes.iter().map(|c| (c[0] as f64 - r, c[0] as f64 + 1.0 + r)).collect();
        return crate::geometry::merged_length(&mut iv);
    }
    if d == 2 {
        let cells: Vec<(f64, f64)> = cubes.iter().map(|c| (c[0] as f64, c[1] as f64)).collect();
        return rounded_square_union_area(&cells, r);
    }
    let shapes: Vec<DilatedCube> = cubes.iter().map(|c| DilatedCube { cube: c, radius: r }).collect();
    sliced_union_volume(&shapes, 2e-2)
}

/// Exact area of the union of distinct unit squares `[a, a+1] x [b, b+1]` dilated by a disc of radius `r`.
///
/// Each dilated square is bounded by four segments and four quarter arcs traversed counterclockwise.
/// The parts of that boundary lying outside every other dilated square are integrated with
/// `1/2 (x dy - y dx)`. A boundary point is covered by another square when its distance to that
/// square is at most `r`.
fn rounded_square_union_area(cells: &[(f64, f64)], r: f64) -> f64 {
    if r <= 0.0 {
        return cells.len() as f64;
    }
    let reach = 2.0 * r + 1.0;
    let mut area = 0.0;
    for (k, &(a, b)) in cells.iter().enumerate() {
        let others: Vec<(f64, f64)> = cells
            .iter()
            .enumerate()
            .filter(|&(j, &(p, q))| j != k && (p - a).abs() <= reach && (q - b).abs() <= reach)
            .map(|(_, &c)| c)
            .collect();
        // bottom and top edges, parametrized by x
        for (k, s, sign) in [(b, -r, 1.0), (b + 1.0, r, -1.0)] {
            let y = k + s;
            let covered: Vec<(f64, f64)> = others
                .iter()
                .filter_map(|&(p, q)| chord(k, s, q, r).map(|w| (p - w, p + 1.0 + w)))
                .collect();
            for (lo, hi) in uncovered((a, a + 1.0), covered) {
                area += 0.5 * sign * y * (lo - hi);
            }
        }
        // right and left edges, parametrized by y
        for (k, s, sign) in [(a + 1.0, r, 1.0), (a, -r, -1.0)] {
            let x = k + s;
            let covered: Vec<(f64, f64)> = others
                .iter()
                .filter_map(|&(p, q)| chord(k, s, p, r).map(|w| (q - w, q + 1.0 + w)))
                .collect();
            for (lo, hi) in uncovered((b, b + 1.0), covered) {
                area += 0.5 * sign * x * (hi - lo);
            }
        }
        // corner arcs, one quadrant each
        for (quadrant, cx, cy) in [(0, a + 1.0, b + 1.0), (1, a, b + 1.0), (2, a, b), (3, a + 1.0, b)] {
            let t0 = quadrant as f64 * FRAC_PI_2;
            let mut covered = Vec::new();
            for &(p, q) in &others {
                covered.extend(arc_cover_by_square(quadrant, cx, cy, r, p, q));
            }
            for (lo, hi) in uncovered((t0, t0 + FRAC_PI_2), covered) {
                area += 0.5 * (r * r * (hi - lo) + r * cx * (hi.sin() - lo.sin()) - r * cy * (hi.cos() - lo.cos()));
            }
        }
    }
    area
}

/// Half-width of a dilated unit square along the line at offset `k + s` on the axis where the
/// square spans `[q, q+1]`; `k` and `q` are integers.
fn chord(k: f64, s: f64, q: f64, r: f64) -> Option<f64> {
    let gap = ((q - k) - s).max((k - q - 1.0) + s).max(0.0);
    (gap <= r).then(|| (r * r - gap * gap).sqrt())
}

/// Complement of the union of `covered` within `span`.
fn uncovered(span: (f64, f64), mut covered: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    covered.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::new();
    let mut at = span.0;
    for (lo, hi) in covered {
        if hi <= at {
            continue;
        }
        if lo >= span.1 {
            break;
        }
        if lo > at {
            out.push((at, lo));
        }
        at = hi;
        if at >= span.1 {
            return out;
        }
    }
    if at < span.1 {
        out.push((at, span.1));
    }
    out
}

/// Angles of the quarter arc of radius `r` about `(cx, cy)` in `quadrant` that lie in the
/// dilated square `[p, p+1] x [q, q+1] + B_r`, as up to six intervals.
fn arc_cover_by_square(quadrant: usize, cx: f64, cy: f64, r: f64, p: f64, q: f64) -> Vec<(f64, f64)> {
    let t0 = quadrant as f64 * FRAC_PI_2;
    let t1 = t0 + FRAC_PI_2;
    let mut out = Vec::new();
    // offsets are formed from exact integer differences so that tangent edges give exactly +-1
    let (ux, uy) = ((p - cx) / r, (q - cy) / r);
    let (wx, wy) = ((p + 1.0 - cx) / r, (q + 1.0 - cy) / r);
    for ((xl, xr), (yl, yh)) in [((ux - 1.0, wx + 1.0), (uy, wy)), ((ux, wx), (uy - 1.0, wy + 1.0))] {
        let xs = quadrant_preimage(quadrant, Trig::Cos, xl, xr);
        let ys = quadrant_preimage(quadrant, Trig::Sin, yl, yh);
        if let (Some(u), Some(v)) = (xs, ys) {
            let (lo, hi) = (u.0.max(v.0), u.1.min(v.1));
            if lo < hi {
                out.push((lo, hi));
            }
        }
    }
    for (ox, oy) in [(p, q), (p + 1.0, q), (p, q + 1.0), (p + 1.0, q + 1.0)] {
        let (dx, dy) = (ox - cx, oy - cy);
        let dist = dx.hypot(dy);
        if dist == 0.0 {
            out.push((t0, t1));
            continue;
        }
        if dist > 2.0 * r {
            continue;
        }
        let phi = dy.atan2(dx);
        let half = (dist / (2.0 * r)).acos();
        for shift in [-TAU, 0.0, TAU] {
            let (lo, hi) = ((phi - half + shift).max(t0), (phi + half + shift).min(t1));
            if lo < hi {
                out.push((lo, hi));
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Trig {
    Cos,
    Sin,
}

/// Angles in `quadrant` where `cos` or `sin` lies in `[lo, hi]`; both are monotone on a quadrant.
fn quadrant_preimage(quadrant: usize, f: Trig, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let t0 = quadrant as f64 * FRAC_PI_2;
    let ends = match f {
        Trig::Cos => (t0.cos(), (t0 + FRAC_PI_2).cos()),
        Trig::Sin => (t0.sin(), (t0 + FRAC_PI_2).sin()),
    };
    let (vmin, vmax) = (ends.0.min(ends.1).round(), ends.0.max(ends.1).round());
    if hi < vmin || lo > vmax {
        return None;
    }
    let inverse = |v: f64| -> f64 {
        let v = v.clamp(vmin, vmax);
        match (f, quadrant) {
            (Trig::Cos, 0 | 1) => v.acos(),
            (Trig::Cos, _) => TAU - v.acos(),
            (Trig::Sin, 0) => v.asin(),
            (Trig::Sin, 1 | 2) => PI - v.asin(),
            (Trig::Sin, _) => TAU + v.asin(),
        }
    };
    let (u, v) = (inverse(lo), inverse(hi));
    Some((u.min(v), u.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cube_ball_minkowski_volume, CubeIndex};

    #[test]
    fn interval_masses() {
        assert_eq!(RadiusLaw::dirac(1.0).unwrap().interval_mass(0.0, 1.0), 1.0);
        assert_eq!(RadiusLaw::uniform(0.5, 1.5).unwrap().interval_mass(1.0, 2.0), 0.5);
        let p = RadiusLaw::pareto(3.0, 1.0).unwrap();
        // oracle: quadrature of 3 r^-4 on [2, 1e6]
        let oracle = adaptive_simpson(|r: f64| 3.0 * r.powi(-4), 2.0, 1e6, 1e-12, 2000);
        assert!((p.interval_mass(2.0, f64::INFINITY) - oracle).abs() < 1e-9);
        assert!((p.interval_mass(2.0, f64::INFINITY) - 0.125).abs() < 1e-15);
        assert_eq!(p.interval_mass(0.0, f64::INFINITY), 1.0);
    }

    #[test]
    fn dirac_atom_in_closed_and_half_open_bands() {
        let law = RadiusLaw::dirac(1.0).unwrap();
        assert_eq!(law.interval_mass(0.0, 1.0), 1.0);
        assert_eq!(law.interval_mass(1.0, 2.0), 1.0);
        assert_eq!(law.height_mass(0), 0.0);
        assert_eq!(law.height_mass(1), 1.0);
    }

    #[test]
    fn moments() {
        assert_eq!(RadiusLaw::dirac(2.0).unwrap().moment(3.0), Moment::Finite(8.0));
        let p = RadiusLaw::pareto(3.0, 1.0).unwrap();
        let oracle = adaptive_simpson(|r: f64| r * 3.0 * r.powi(-4), 1.0, 1e5, 1e-12, 4000)
            + 3.0 / 2.0 * 1e5f64.powi(-2);
        let Moment::Finite(m) = p.moment(1.0) else { panic!() };
        assert!((m - 1.5).abs() < 1e-12);
        assert!((m - oracle).abs() < 1e-8);
        assert_eq!(p.moment(3.0), Moment::Infinite);
    }

    #[test]
    fn moment_conditions() {
        let r = RadiusLaw::dirac(1.0).unwrap().validate_conditions(2);
        assert_eq!(r, ConditionReport { weak: true, strong: true });
        let r = RadiusLaw::pareto(2.5, 1.0).unwrap().validate_conditions(2);
        assert_eq!(r, ConditionReport { weak: true, strong: false });
        let r = RadiusLaw::pareto(2.0, 1.0).unwrap().validate_conditions(2);
        assert_eq!(r, ConditionReport { weak: false, strong: false });
        let r = RadiusLaw::pareto(8.0, 1.0).unwrap().validate_conditions(2);
        assert_eq!(r, ConditionReport { weak: true, strong: true });
        let r = RadiusLaw::pareto(5.0, 1.0).unwrap().validate_conditions(2);
        assert_eq!(r, ConditionReport { weak: true, strong: false });
        assert_eq!(
            RadiusLaw::pareto(5.0, 1.0).unwrap().require(2, MomentCondition::Strong),
            Err(Error::MomentCondition { condition: MomentCondition::Strong })
        );
    }

    #[test]
    fn quantiles() {
        assert_eq!(RadiusLaw::dirac(2.0).unwrap().sample_radius(0.77), 2.0);
        assert_eq!(RadiusLaw::uniform(1.0, 3.0).unwrap().sample_radius(0.5), 2.0);
        let p = RadiusLaw::pareto(3.0, 1.0).unwrap();
        // oracle: bisection on the CDF
        let (mut lo, mut hi) = (1.0f64, 100.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - mid.powi(-3) < 0.875 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((p.sample_radius(0.875) - lo).abs() < 1e-10);
        assert!((p.sample_radius(0.875) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn band_samples_stay_in_band() {
        let laws = [
            RadiusLaw::uniform(0.0, 3.5).unwrap(),
            RadiusLaw::pareto(2.0, 0.7).unwrap(),
            RadiusLaw::dirac(1.0).unwrap(),
        ];
        for law in laws {
            for h in 0..5u32 {
                if law.height_mass(h) == 0.0 {
                    continue;
                }
                for i in 1..100 {
                    let r = law.sample_in_band(h as f64, h as f64 + 1.0, i as f64 / 100.0);
                    assert!(r >= h as f64 && r < h as f64 + 1.0, "{law:?} h={h} r={r}");
                }
            }
        }
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(RadiusLaw::uniform(2.0, 1.0).is_err());
        assert!(RadiusLaw::pareto(0.0, 1.0).is_err());
        assert!(RadiusLaw::pareto(2.0, -1.0).is_err());
        assert!(RadiusLaw::dirac(-1.0).is_err());
    }

    #[test]
    fn cone_pvol_examples() {
        let one = ConeBase::cubes([CubeIndex(vec![0, 0])]).unwrap();
        let v = RadiusLaw::dirac(1.0).unwrap().cone_pvol(&one, 2).unwrap();
        assert!((v - (5.0 + std::f64::consts::PI)).abs() < 1e-12);
        assert_eq!(RadiusLaw::dirac(0.0).unwrap().cone_pvol(&one, 2).unwrap(), 1.0);
        let two = ConeBase::cubes([CubeIndex(vec![0]), CubeIndex(vec![1])]).unwrap();
        assert!((RadiusLaw::dirac(1.0).unwrap().cone_pvol(&two, 1).unwrap() - 4.0).abs() < 1e-12);
        let heavy = RadiusLaw::pareto(1.5, 1.0).unwrap();
        assert!(heavy.cone_pvol(&one, 2).is_err());
    }

    #[test]
    fn single_cube_cone_matches_radial_quadrature() {
        for law in [RadiusLaw::uniform(0.5, 1.5).unwrap(), RadiusLaw::pareto(8.0, 1.0).unwrap()] {
            for d in 1..=3 {
                let closed = law.single_cube_cone_pvol(d).unwrap();
                let quad = law.integrate(|r| cube_ball_minkowski_volume(d, r));
                assert!((closed - quad).abs() < 1e-6, "{law:?} d={d}: {closed} vs {quad}");
            }
        }
    }

    #[test]
    fn enlarged_tail_matches_quadrature() {
        let law = RadiusLaw::pareto(8.0, 1.0).unwrap();
        for &t in &[1.0, 3.0, 10.0] {
            let Moment::Finite(closed) = law.enlarged_ball_tail(2, 5.0, t) else { panic!() };
            let quad = adaptive_simpson(
                |r: f64| std::f64::consts::PI * (5.0 + r).powi(2) * 8.0 * r.powi(-9),
                t,
                1e4,
                1e-14,
                4000,
            );
            assert!((closed - quad).abs() < 1e-9 * closed.max(1.0), "t={t}: {closed} vs {quad}");
        }
        let u = RadiusLaw::uniform(0.0, 1.0).unwrap();
        let Moment::Finite(v) = u.enlarged_ball_tail(2, 3.0, 0.0) else { panic!() };
        let quad = adaptive_simpson(|r: f64| std::f64::consts::PI * (3.0 + r).powi(2), 0.0, 1.0, 1e-13, 4);
        assert!((v - quad).abs() < 1e-10);
        assert_eq!(RadiusLaw::pareto(2.0, 1.0).unwrap().enlarged_ball_tail(2, 1.0, 2.0), Moment::Infinite);
    }

    #[test]
    fn planar_dilated_unions_match_closed_forms() {
        let pi = std::f64::consts::PI;
        for r in [0.0, 0.3, 0.5, 1.0, 2.7] {
            let domino = dilated_union_volume(&[&[0, 0], &[1, 0]], r);
            assert!((domino - (2.0 + 6.0 * r + pi * r * r)).abs() < 1e-12, "r = {r}");
            let block = dilated_union_volume(&[&[0, 0], &[1, 0], &[0, 1], &[1, 1]], r);
            assert!((block - (4.0 + 8.0 * r + pi * r * r)).abs() < 1e-12, "r = {r}");
            let far = dilated_union_volume(&[&[0, 0], &[10, 0]], r);
            assert!((far - 2.0 * (1.0 + 4.0 * r + pi * r * r)).abs() < 1e-12, "r = {r}");
        }
        // a ring of eight squares around a hole that closes at r = 1/2
        let ring: Vec<[i64; 2]> = (-1..=1)
            .flat_map(|i| (-1..=1).map(move |j| [i, j]))
            .filter(|c| *c != [0, 0])
            .collect();
        let refs: Vec<&[i64]> = ring.iter().map(|c| c.as_slice()).collect();
        for r in [0.5, 0.8] {
            assert!((dilated_union_volume(&refs, r) - (9.0 + 12.0 * r + pi * r * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn planar_dilated_unions_match_slicing() {
        let shapes: [&[[i64; 2]]; 4] = [
            &[[0, 0], [1, 1]],
            &[[0, 0], [2, 0], [1, 2]],
            &[[0, 0], [1, 0], [2, 0], [2, 1], [2, 2], [0, 2]],
            &[[0, 0], [3, 1], [-1, 2], [1, -2], [0, 1]],
        ];
        for cells in shapes {
            let refs: Vec<&[i64]> = cells.iter().map(|c| c.as_slice()).collect();
            for r in [0.2, 0.5, 0.71, 1.0, 1.6] {
                let exact = dilated_union_volume(&refs, r);
                let sliced_shapes: Vec<DilatedCube> = refs.iter().map(|c| DilatedCube { cube: c, radius: r }).collect();
                let sliced = sliced_union_volume(&sliced_shapes, 2e-4);
                assert!((exact - sliced).abs() < 1e-5 * exact, "{cells:?} r = {r}: {exact} vs {sliced}");
            }
        }
    }
}
