//! Relative-entropy toolkit: Poisson divergences, Pinsker-type and log-ratio
//! bounds, discrete divergences, the stopped-sequence identity for adaptive
//! decision trees, and the entropic right-hand sides comparing two
//! intensities through the revealed Poisson-Boolean volume.
//!
//! Natural logarithms throughout.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::Moment;
use crate::error::{Error, Result};

/// Tolerance on the normalisation of a [`FiniteLaw`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability law on `{0, .., n - 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteLaw {
    probs: Vec<f64>,
}

impl FiniteLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalise nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights must have positive total".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of the event given as a bit mask over the support.
    pub fn event_prob(&self, mask: u64) -> f64 {
        self.probs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| p).sum::<f64>().min(1.0)
    }
}

fn check_rate(name: &str, l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {l}")))
    }
}

/// `D(Pois(l1) || Pois(l2)) = l2 - l1 + l1 ln(l1 / l2)`.
pub fn kl_poisson(l1: f64, l2: f64) -> Result<f64> {
    check_rate("l1", l1)?;
    check_rate("l2", l2)?;
    Ok((l2 - l1 + l1 * (l1 / l2).ln()).max(0.0))
}

/// The same divergence as a truncated sum `sum_k p_k ln(p_k / q_k)` over the
/// probability mass functions. Summation stops past the larger mean plus 50
/// standard deviations once both masses are below `1e-16`.
pub fn kl_poisson_series(l1: f64, l2: f64) -> Result<f64> {
    check_rate("l1", l1)?;
    check_rate("l2", l2)?;
    let top = l1.max(l2);
    let horizon = top + 50.0 * top.sqrt() + 50.0;
    let (mut lp, mut lq) = (-l1, -l2);
    let mut sum = 0.0;
    let mut k = 0u64;
    loop {
        let p = lp.exp();
        sum += p * (lp - lq);
        k += 1;
        lp += l1.ln() - (k as f64).ln();
        lq += l2.ln() - (k as f64).ln();
        if k as f64 > horizon && lp.exp() < 1e-16 && lq.exp() < 1e-16 {
            break;
        }
    }
    Ok(sum)
}

/// `mass * (ly - lx)^2 / ly`, an upper bound on the divergence between the
/// restrictions of two Poisson processes to a region of Poisson-Boolean
/// volume `mass`.
pub fn kl_process_bound(mass: f64, lx: f64, ly: f64) -> Result<f64> {
    if !(mass >= 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be >= 0, got {mass}")));
    }
    check_rate("lX", lx)?;
    check_rate("lY", ly)?;
    Ok(mass * (ly - lx).powi(2) / ly)
}

/// `sqrt(2 max(P[A], Q[A]) D)`, bounding `|P[A] - Q[A]|`.
pub fn pinsker_gap_bound(pa: f64, qa: f64, kl: f64) -> f64 {
    (2.0 * pa.max(qa) * kl).sqrt()
}

/// `D / P[A] + 1`, bounding `ln P[A] - ln Q[A]`.
pub fn log_ratio_bound(pa: f64, kl: f64) -> Result<f64> {
    if !(pa > 0.0 && pa <= 1.0) {
        return Err(Error::InvalidParameter(format!("P[A] must lie in (0, 1], got {pa}")));
    }
    Ok(kl / pa + 1.0)
}

/// `sum_i p_i ln(p_i / q_i)`, infinite when `p` is not dominated by `q`.
pub fn kl_discrete(p: &FiniteLaw, q: &FiniteLaw) -> Result<Moment> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
    }
    let mut sum = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(Moment::Infinite);
        }
        sum += a * (a / b).ln();
    }
    Ok(Moment::Finite(sum.max(0.0)))
}

type Prefix = [(usize, usize)];

/// An adaptive query strategy over `n` components.
///
/// Both closures see the revealed prefix as `(component, value)` pairs in
/// reveal order. `stop` is consulted before every query; `selector` names the
/// next component and must not repeat one.
pub struct DecisionTree {
    pub n: usize,
    selector: Box<dyn Fn(&Prefix) -> usize + Send + Sync>,
    stop: Box<dyn Fn(&Prefix) -> bool + Send + Sync>,
}

impl DecisionTree {
    pub fn new(
        n: usize,
        selector: impl Fn(&Prefix) -> usize + Send + Sync + 'static,
        stop: impl Fn(&Prefix) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self { n, selector: Box::new(selector), stop: Box::new(stop) }
    }

    /// Reveal components `0, 1, .., n - 1` in order.
    pub fn full_reveal(n: usize) -> Self {
        Self::new(n, |prefix| prefix.len(), move |prefix| prefix.len() == n)
    }

    /// Reveal nothing.
    pub fn stop_immediately(n: usize) -> Self {
        Self::new(n, |_| 0, |_| true)
    }

    /// Run on a full outcome and return the revealed `(component, value)` pairs.
    pub fn run(&self, outcome: &[usize]) -> Result<Vec<(usize, usize)>> {
        let mut prefix: Vec<(usize, usize)> = Vec::with_capacity(self.n);
        while prefix.len() < self.n && !(self.stop)(&prefix) {
            let j = (self.selector)(&prefix);
            if j >= self.n || prefix.iter().any(|&(c, _)| c == j) {
                return Err(Error::InvalidParameter(format!("selector chose invalid or repeated component {j}")));
            }
            prefix.push((j, outcome[j]));
        }
        Ok(prefix)
    }
}

/// Both sides of the stopped-sequence divergence identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppedKlReport {
    /// Divergence between the laws of the stopped sequences.
    pub lhs: f64,
    /// Expected sum of the component divergences along the revealed path.
    pub rhs: f64,
    pub equal: bool,
}

/// Tolerance of the stopped-sequence identity check.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Evaluate both sides of `D(X^tau || Y^tau) = E[sum_(k <= tau) d(sigma_k)]`
/// by enumerating every outcome of the independent components.
///
/// The stopped sequence is the list of revealed values padded with a
/// distinguished symbol (`None`) up to length `n`.
pub fn stopped_kl_identity_check(tree: &DecisionTree, xs: &[FiniteLaw], ys: &[FiniteLaw]) -> Result<StoppedKlReport> {
    let n = tree.n;
    if xs.len() != n || ys.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: xs.len().min(ys.len()) });
    }
    let mut d = Vec::with_capacity(n);
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        if x.probs.iter().zip(&y.probs).any(|(a, b)| (*a > 0.0) != (*b > 0.0)) {
            return Err(Error::AbsoluteContinuity { component: i });
        }
        d.push(kl_discrete(x, y)?.finite().expect("mutually continuous laws"));
    }
    let sizes: Vec<usize> = xs.iter().map(FiniteLaw::len).collect();
    let mut pushed: HashMap<Vec<Option<usize>>, (f64, f64)> = HashMap::new();
    let mut rhs = 0.0;
    let mut outcome = vec![0usize; n];
    loop {
        let px: f64 = (0..n).map(|i| xs[i].probs[outcome[i]]).product();
        let py: f64 = (0..n).map(|i| ys[i].probs[outcome[i]]).product();
        let path = tree.run(&outcome)?;
        let mut key: Vec<Option<usize>> = path.iter().map(|&(_, v)| Some(v)).collect();
        key.resize(n, None);
        let e = pushed.entry(key).or_insert((0.0, 0.0));
        e.0 += px;
        e.1 += py;
        rhs += px * path.iter().map(|&(c, _)| d[c]).sum::<f64>();
        // odometer over the product of supports
        let mut m = 0;
        loop {
            if m == n {
                let lhs: f64 = pushed
                    .values()
                    .filter(|(p, _)| *p > 0.0)
                    .map(|(p, q)| p * (p / q).ln())
                    .sum();
                return Ok(StoppedKlReport { lhs, rhs, equal: (lhs - rhs).abs() <= IDENTITY_TOL });
            }
            outcome[m] += 1;
            if outcome[m] < sizes[m] {
                break;
            }
            outcome[m] = 0;
            m += 1;
        }
    }
}

/// `|l2 - l1| / sqrt(l2) * sqrt(2 maxP E[PVol])`, bounding the change of an
/// event probability between intensities `l1` and `l2`.
pub fn entropic_rhs_gap(l1: f64, l2: f64, max_p: f64, expected_pvol: f64) -> Result<f64> {
    check_rate("l1", l1)?;
    check_rate("l2", l2)?;
    Ok((l2 - l1).abs() / l2.sqrt() * (2.0 * max_p * expected_pvol).sqrt())
}

/// `(l2 - l1)^2 / l2 * E[PVol] / P_l1[A] + 1`, bounding
/// `ln P_l1[A] - ln P_l2[A]`.
pub fn entropic_rhs_log(l1: f64, l2: f64, p1: f64, expected_pvol: f64) -> Result<f64> {
    check_rate("l1", l1)?;
    check_rate("l2", l2)?;
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("P_l1[A] must lie in (0, 1], got {p1}")));
    }
    Ok((l2 - l1).powi(2) / l2 * expected_pvol / p1 + 1.0)
}

/// One line of the self-test table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Random law on `len` atoms; with `zeros` some atoms may get no mass.
pub fn random_law(rng: &mut ChaCha8Rng, len: usize, zeros: bool) -> FiniteLaw {
    loop {
        let w: Vec<f64> = (0..len)
            .map(|_| {
                if zeros && rng.random_bool(0.2) {
                    0.0
                } else {
                    -rng.random::<f64>().max(1e-300).ln()
                }
            })
            .collect();
        if let Ok(law) = FiniteLaw::from_weights(&w) {
            return law;
        }
    }
}

/// Rate grid used by the Poisson divergence checks.
pub const RATE_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// Maximum error of the closed form against the series over the rate grid.
pub fn poisson_closed_form_error() -> f64 {
    let mut worst = 0.0f64;
    for &a in &RATE_GRID {
        for &b in &RATE_GRID {
            let e = (kl_poisson(a, b).expect("positive") - kl_poisson_series(a, b).expect("positive")).abs();
            worst = worst.max(e);
        }
    }
    worst
}

/// Violations of the process bound on the 125-point `(m, lX, lY)` grid.
pub fn process_bound_violations() -> usize {
    let masses = [0.1, 0.5, 1.0, 2.5, 10.0];
    let mut bad = 0;
    for &m in &masses {
        for &lx in &RATE_GRID {
            for &ly in &RATE_GRID {
                let kl = kl_poisson(m * lx, m * ly).expect("positive");
                if kl > kl_process_bound(m, lx, ly).expect("valid") {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Violations of both event bounds over every event of `pairs` random law
/// pairs with supports up to 6.
pub fn event_bound_violations(pairs: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap_bad, mut log_bad) = (0, 0);
    for _ in 0..pairs {
        let len = rng.random_range(1..=6);
        let p = random_law(&mut rng, len, true);
        let q = random_law(&mut rng, len, true);
        let Moment::Finite(kl) = kl_discrete(&p, &q).expect("same length") else {
            continue;
        };
        for mask in 0..(1u64 << len) {
            let (pa, qa) = (p.event_prob(mask), q.event_prob(mask));
            // slack absorbs rounding in the event sums only
            if (pa - qa).abs() > pinsker_gap_bound(pa, qa, kl) + 1e-12 {
                gap_bad += 1;
            }
            if pa > 0.0 && qa > 0.0 && pa.ln() - qa.ln() > log_ratio_bound(pa, kl).expect("pa > 0") + 1e-12 {
                log_bad += 1;
            }
        }
    }
    (gap_bad, log_bad)
}

/// A deterministic family of decision-tree instances: trivial, full-reveal,
/// and adaptive trees whose next query and stopping rule depend on earlier
/// values.
pub fn identity_instances(count: usize, seed: u64) -> Vec<(DecisionTree, Vec<FiniteLaw>, Vec<FiniteLaw>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let n = rng.random_range(1..=4usize);
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(2..=4usize)).collect();
        let xs: Vec<FiniteLaw> = sizes.iter().map(|&s| random_law(&mut rng, s, false)).collect();
        let ys: Vec<FiniteLaw> = sizes.iter().map(|&s| random_law(&mut rng, s, false)).collect();
        let tree = match idx % 4 {
            0 => DecisionTree::stop_immediately(n),
            1 => DecisionTree::full_reveal(n),
            2 => {
                // the first value picks the direction in which the rest is read
                DecisionTree::new(
                    n,
                    move |prefix: &Prefix| match prefix.first() {
                        None => 0,
                        Some(&(_, v)) if v % 2 == 0 => prefix.len(),
                        Some(_) => n - prefix.len(),
                    },
                    move |prefix: &Prefix| prefix.len() == n,
                )
            }
            _ => {
                // stop as soon as a zero is seen, otherwise query the component
                // indexed by the sum of the values so far
                let salt = rng.random_range(0..n);
                DecisionTree::new(
                    n,
                    move |prefix: &Prefix| {
                        let s: usize = prefix.iter().map(|&(_, v)| v).sum::<usize>() + salt;
                        (0..n).map(|t| (s + t) % n).find(|j| prefix.iter().all(|&(c, _)| c != *j)).expect("free")
                    },
                    |prefix: &Prefix| prefix.last().is_some_and(|&(_, v)| v == 0),
                )
            }
        };
        out.push((tree, xs, ys));
    }
    out
}

/// Run the full invariant suite with fixed seeds.
pub fn selftest() -> Vec<SelfTestLine> {
    let mut lines = Vec::new();
    let err = poisson_closed_form_error();
    lines.push(SelfTestLine {
        name: "poisson divergence closed form vs series".into(),
        passed: err <= 1e-9,
        detail: format!("max abs error {err:.3e} over 25 rate pairs"),
    });
    let bad = process_bound_violations();
    lines.push(SelfTestLine {
        name: "process divergence bound".into(),
        passed: bad == 0,
        detail: format!("{bad} violations on 125 grid points"),
    });
    let (g, l) = event_bound_violations(10_000, 0x5eed);
    lines.push(SelfTestLine {
        name: "event gap and log-ratio bounds".into(),
        passed: g == 0 && l == 0,
        detail: format!("{g} gap and {l} log-ratio violations over 10000 law pairs"),
    });
    let instances = identity_instances(64, 0x7ee5);
    let mut worst = 0.0f64;
    let mut failed = 0;
    for (tree, xs, ys) in &instances {
        match stopped_kl_identity_check(tree, xs, ys) {
            Ok(r) => {
                worst = worst.max((r.lhs - r.rhs).abs());
                if !r.equal {
                    failed += 1;
                }
            }
            Err(_) => failed += 1,
        }
    }
    lines.push(SelfTestLine {
        name: "stopped-sequence divergence identity".into(),
        passed: failed == 0,
        detail: format!("{} instances, max |lhs - rhs| {worst:.3e}", instances.len()),
    });
    let mut chain_worst = 0.0f64;
    for (_, xs, ys) in instances.iter().skip(1).step_by(4) {
        let tree = DecisionTree::full_reveal(xs.len());
        let r = stopped_kl_identity_check(&tree, xs, ys).expect("valid instance");
        let sum: f64 = xs.iter().zip(ys).map(|(x, y)| kl_discrete(x, y).unwrap().finite().unwrap()).sum();
        chain_worst = chain_worst.max((r.lhs - sum).abs());
    }
    lines.push(SelfTestLine {
        name: "chain rule for full reveal".into(),
        passed: chain_worst <= IDENTITY_TOL,
        detail: format!("max |lhs - sum of component divergences| {chain_worst:.3e}"),
    });
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_examples() {
        assert_eq!(kl_poisson(1.0, 1.0).unwrap(), 0.0);
        assert!((kl_poisson(1.0, 2.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((kl_poisson(1.0, 2.0).unwrap() - kl_poisson_series(1.0, 2.0).unwrap()).abs() < 1e-9);
        assert!((kl_poisson(3.0, 0.5).unwrap() - (-2.5 + 3.0 * 6f64.ln())).abs() < 1e-12);
        assert!((kl_poisson(3.0, 0.5).unwrap() - kl_poisson_series(3.0, 0.5).unwrap()).abs() < 1e-9);
        assert!(kl_poisson(0.0, 1.0).is_err());
    }

    #[test]
    fn process_bound_examples() {
        assert_eq!(kl_process_bound(3.0, 1.2, 1.2).unwrap(), 0.0);
        assert!((kl_process_bound(1.0, 1.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((kl_process_bound(2.5, 0.4, 0.9).unwrap() - 2.5 * 0.25 / 0.9).abs() < 1e-15);
        assert!(kl_poisson(1.0, 2.0).unwrap() <= 0.5);
    }

    #[test]
    fn event_bound_examples() {
        assert_eq!(pinsker_gap_bound(0.3, 0.6, 0.0), 0.0);
        assert_eq!(pinsker_gap_bound(1.0, 1.0, 0.5), 1.0);
        assert_eq!(log_ratio_bound(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(log_ratio_bound(0.25, 1.0).unwrap(), 5.0);
        assert!(log_ratio_bound(0.0, 1.0).is_err());
    }

    #[test]
    fn discrete_examples() {
        let p = FiniteLaw::new(vec![1.0, 0.0]).unwrap();
        let q = FiniteLaw::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(kl_discrete(&p, &p).unwrap(), Moment::Finite(0.0));
        assert_eq!(kl_discrete(&p, &q).unwrap(), Moment::Finite(2f64.ln()));
        assert_eq!(kl_discrete(&q, &p).unwrap(), Moment::Infinite);
        assert!(FiniteLaw::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(entropic_rhs_gap(1.0, 1.0, 0.4, 3.0).unwrap(), 0.0);
        assert!((entropic_rhs_gap(1.0, 2.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((entropic_rhs_gap(0.6, 0.9, 0.3, 5.0).unwrap() - 0.3 / 0.9f64.sqrt() * 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(entropic_rhs_log(1.0, 1.0, 0.3, 2.0).unwrap(), 1.0);
        assert!((entropic_rhs_log(1.0, 2.0, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((entropic_rhs_log(0.8, 1.0, 0.1, 10.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(entropic_rhs_log(1.0, 2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn trivial_and_full_trees() {
        let xs = vec![FiniteLaw::new(vec![0.2, 0.8]).unwrap(), FiniteLaw::new(vec![0.5, 0.5]).unwrap()];
        let ys = vec![FiniteLaw::new(vec![0.6, 0.4]).unwrap(), FiniteLaw::new(vec![0.1, 0.9]).unwrap()];
        let r = stopped_kl_identity_check(&DecisionTree::stop_immediately(2), &xs, &ys).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let r = stopped_kl_identity_check(&DecisionTree::full_reveal(2), &xs, &ys).unwrap();
        let sum: f64 = xs.iter().zip(&ys).map(|(x, y)| kl_discrete(x, y).unwrap().finite().unwrap()).sum();
        assert!((r.lhs - sum).abs() < 1e-12 && r.equal);
    }

    #[test]
    fn absolute_continuity_failure_is_reported() {
        let xs = vec![FiniteLaw::new(vec![0.5, 0.5]).unwrap()];
        let ys = vec![FiniteLaw::new(vec![1.0, 0.0]).unwrap()];
        assert_eq!(
            stopped_kl_identity_check(&DecisionTree::full_reveal(1), &xs, &ys),
            Err(Error::AbsoluteContinuity { component: 0 })
        );
    }

    #[test]
    fn repeated_selection_is_rejected() {
        let tree = DecisionTree::new(2, |_| 0, |p| p.len() == 2);
        assert!(tree.run(&[0, 0]).is_err());
    }
}
