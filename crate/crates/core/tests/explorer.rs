//! Cluster exploration against a union-find labeling of the whole window.

use percolab::distributions::RadiusLaw;
use percolab::explorer::{explore_cluster, union_volume, Stop, VolumeMethod};
use percolab::field::sample_window;
use percolab::{Ball, FieldConfig};

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Balls of the origin's component, labelled by brute-force union-find.
fn origin_component(balls: &[Ball]) -> Vec<Ball> {
    let mut parent: Vec<usize> = (0..balls.len()).collect();
    for i in 0..balls.len() {
        for j in 0..i {
            if balls[i].intersects(&balls[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let Some(seed) = balls.iter().position(Ball::covers_origin) else {
        return Vec::new();
    };
    let root = find(&mut parent, seed);
    (0..balls.len()).filter(|&i| find(&mut parent, i) == root).map(|i| balls[i].clone()).collect()
}

fn sorted(mut v: Vec<Ball>) -> Vec<Ball> {
    v.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    v
}

#[test]
fn exploration_matches_union_find() {
    let laws = [RadiusLaw::dirac(0.5).unwrap(), RadiusLaw::uniform(0.2, 1.0).unwrap()];
    for (d, lambda) in [(1, 0.8), (2, 1.2), (3, 0.6)] {
        for law in laws {
            for seed in 0..30 {
                let cfg = FieldConfig::new(d, lambda, law, seed).unwrap();
                let w = sample_window(&cfg, 5.0, 1e-6).unwrap();
                let c = explore_cluster(&w, Stop::None).unwrap();
                let oracle = origin_component(&w.balls());
                assert_eq!(sorted(c.balls.clone()), sorted(oracle), "d={d} seed={seed}");
                assert_eq!(c.contains_origin, !c.balls.is_empty());
            }
        }
    }
}

#[test]
fn arm_stop_certifies_only_reached_spheres() {
    for seed in 0..40 {
        let cfg = FieldConfig::new(2, 1.5, RadiusLaw::dirac(0.5).unwrap(), seed).unwrap();
        let w = sample_window(&cfg, 6.0, 1e-6).unwrap();
        let full = explore_cluster(&w, Stop::None).unwrap();
        let arm = explore_cluster(&w, Stop::Arm(4.0)).unwrap();
        assert_eq!(arm.event_certified, full.max_reach >= 4.0, "seed {seed}");
    }
}

#[test]
fn exact_union_volumes_agree_with_sampling() {
    for seed in 0..3 {
        let cfg = FieldConfig::new(2, 1.0, RadiusLaw::uniform(0.3, 0.9).unwrap(), seed).unwrap();
        let balls = sample_window(&cfg, 3.0, 1e-6).unwrap().balls();
        let exact = union_volume(&balls, VolumeMethod::Exact2d).unwrap().value;
        let mc = union_volume(&balls, VolumeMethod::MonteCarlo { samples: 2_000_000, seed }).unwrap();
        assert!((exact - mc.value).abs() < 4.0 * mc.standard_error, "{exact} vs {}", mc.value);
        let sliced = union_volume(&balls, VolumeMethod::Sliced { spacing: 1e-3 }).unwrap().value;
        assert!((exact - sliced).abs() < 1e-3 * exact);
    }
}
