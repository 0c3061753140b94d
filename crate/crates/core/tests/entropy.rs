use std::collections::BTreeSet;

use matchbox_core::entropy::{entropy_profile, expansion_growth, max_separated, Mode, SeparationInstance};
use matchbox_core::pseudogroup::{odometer_with_steps, sturmian_system, ActionKind, ContinuedFraction, PartialMap, Pseudogroup};
use matchbox_core::rational::{q, Q};
use matchbox_core::treespace::{enumerate_points, exact_profile, exact_separated_count, TreeSample};
use matchbox_core::{LevelSpace, Metric, MetricSpace, WeightedMetric};
use num_bigint::BigUint;
use proptest::prelude::*;

fn odometer(degrees: &[u32], steps: &[i64], base: u32) -> Pseudogroup {
    odometer_with_steps(degrees, steps, WeightedMetric::power(base).unwrap()).unwrap()
}

fn count(g: &Pseudogroup, eps: Q, ell: usize, depth: usize, mode: Mode) -> usize {
    max_separated(&SeparationInstance { g, epsilon: eps, ell, depth, mode }).unwrap().count
}

/// Brute-force maximum separated set for a full-depth odometer: words of length
/// at most `ell` in the steps are the translations by sums of at most `ell` steps.
fn odometer_oracle(degrees: &[u32], steps: &[i64], base: u32, eps: &Q, ell: usize) -> usize {
    let g = odometer(degrees, steps, base);
    let pts = g.ms.space.words(g.depth).unwrap();
    let n = pts.len();
    let modulus: i64 = degrees.iter().map(|&m| m as i64).product();
    let mut shifts = BTreeSet::from([0i64]);
    for _ in 0..ell {
        let next: Vec<i64> = shifts.iter().flat_map(|&s| steps.iter().flat_map(move |&t| [s + t, s - t])).collect();
        shifts.extend(next.into_iter().map(|s| s.rem_euclid(modulus)));
    }
    let value = |w: &[u32]| w.iter().zip(degrees).rev().fold(0i64, |acc, (&d, &m)| acc * m as i64 + d as i64);
    let by_value: std::collections::BTreeMap<i64, &Vec<u32>> = pts.iter().map(|w| (value(w), w)).collect();
    let sep = |i: usize, j: usize| {
        shifts.iter().any(|&s| {
            let a = by_value[&(value(&pts[i]) + s).rem_euclid(modulus)];
            let b = by_value[&(value(&pts[j]) + s).rem_euclid(modulus)];
            g.ms.distance_words(a, b) >= *eps
        })
    };
    let mut best = 0;
    for mask in 1u32..1 << n {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if members.len() <= best {
            continue;
        }
        if members.iter().enumerate().all(|(a, &i)| members[a + 1..].iter().all(|&j| sep(i, j))) {
            best = members.len();
        }
    }
    best
}

#[test]
fn dyadic_odometer_counts_four_at_one_sixth() {
    let g = odometer(&[2; 4], &[1], 3);
    for ell in 0..=6 {
        assert_eq!(count(&g, q(1, 6), ell, 4, Mode::Exact), 4);
    }
    assert_eq!(odometer_oracle(&[2; 4], &[1], 3, &q(1, 6), 6), 4);
}

#[test]
fn exact_counts_match_brute_force() {
    for (degrees, steps, base) in [(vec![2, 2, 2, 2], vec![1], 3), (vec![2, 3, 2], vec![1, 3], 2), (vec![3, 3], vec![1], 3)] {
        let g = odometer(&degrees, &steps, base);
        let values: BTreeSet<Q> = {
            let pts = g.ms.space.words(g.depth).unwrap();
            pts.iter().map(|w| g.ms.distance_words(&pts[0], w)).filter(|d| *d > Q::default()).collect()
        };
        for eps in values {
            for ell in 0..=3 {
                let ours = count(&g, eps.clone(), ell, g.depth, Mode::Exact);
                assert_eq!(ours, odometer_oracle(&degrees, &steps, base, &eps, ell), "{degrees:?} eps {eps} ell {ell}");
            }
        }
    }
}

#[test]
fn epsilon_beyond_the_diameter_gives_one() {
    let g = sturmian_system(&ContinuedFraction::golden(), 3, WeightedMetric::default()).unwrap();
    for ell in [0, 3, 9] {
        assert_eq!(count(&g, q(3, 4), ell, g.depth, Mode::Exact), 1);
    }
}

#[test]
fn odometer_profile_is_flat_under_metric_and_generator_changes() {
    let eps = [q(1, 2), q(1, 6), q(1, 18)];
    for (steps, base) in [(vec![1], 3), (vec![1], 2), (vec![1, 3], 3), (vec![1, 3], 2)] {
        let g = odometer(&[2; 6], &steps, base);
        let p = entropy_profile(&g, &eps, 0..=10, 6).unwrap();
        assert!(p.all_flat(), "steps {steps:?} base {base}: {:?}", p.slopes());
        assert!(p.rows.iter().all(|r| r.monotone));
    }
}

#[test]
fn identity_only_series_is_constant() {
    let ms = MetricSpace::new(LevelSpace::explicit(vec![2, 2, 2], true).unwrap(), Metric::default()).unwrap();
    let g = Pseudogroup::new(ms.clone(), 3, vec![PartialMap::identity(&ms)], ActionKind::Pseudogroup).unwrap();
    let s = expansion_growth(&g, &q(1, 6), 0..=5, 3).unwrap();
    let first = s.entries[0].count.clone();
    assert!(s.entries.iter().all(|e| e.count == first));
    assert_eq!(s.slope, 0.0);
}

#[test]
fn sturmian_slopes_vanish() {
    let w = 3;
    let g = sturmian_system(&ContinuedFraction::golden(), w, WeightedMetric::default()).unwrap();
    let p = entropy_profile(&g, &[q(1, 2), q(1, 6), q(1, 18)], 0..=10, g.depth).unwrap();
    // factor counting: 2w + 2 windows of width 2w + 1 bound every separated set
    let windows = BigUint::from(2 * w as u32 + 2);
    for row in &p.rows {
        assert!(row.slope.abs() < 0.1, "{}", row.slope);
        assert!(row.entries.iter().all(|e| e.count <= windows));
    }
}

#[test]
fn counts_do_not_grow_with_epsilon() {
    let g = sturmian_system(&ContinuedFraction::golden(), 4, WeightedMetric::default()).unwrap();
    let coarse = expansion_growth(&g, &q(1, 6), 0..=6, g.depth).unwrap();
    let fine = expansion_growth(&g, &q(1, 18), 0..=6, g.depth).unwrap();
    for (a, b) in coarse.entries.iter().zip(&fine.entries) {
        assert!(a.count <= b.count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_never_beats_exact(which in 0usize..3, e in 1u32..30, ell in 0usize..5) {
        let g = match which {
            0 => odometer(&[2, 3, 2], &[1], 3),
            1 => odometer(&[2, 2, 2, 2], &[1, 3], 2),
            _ => sturmian_system(&ContinuedFraction::golden(), 3, WeightedMetric::default()).unwrap(),
        };
        let eps = q(1, e as i64);
        let exact = count(&g, eps.clone(), ell, g.depth, Mode::Exact);
        let greedy = count(&g, eps, ell, g.depth, Mode::Greedy);
        prop_assert!(greedy <= exact);
        if which < 2 {
            // translation-invariant separation: every maximal set is maximum
            prop_assert_eq!(greedy, exact);
        }
    }
}

#[test]
fn treespace_sample_count_grows_with_word_length() {
    let sample = TreeSample::build(2, 3).unwrap();
    let g = sample.pseudogroup().unwrap();
    let s = expansion_growth(&g, &q(1, 4), 0..=3, sample.depth).unwrap();
    assert!(s.entries[3].count > s.entries[0].count);
    // oracle: at eps = 2^{-2} points are separated within ell steps iff their
    // radius-(ell + 3) patterns differ; count distinct patterns directly
    for e in &s.entries {
        let r = e.ell + 3;
        let patterns: BTreeSet<_> = (0..sample.len()).map(|p| sample.approx(p, r).vertices).collect();
        assert_eq!(e.count, BigUint::from(patterns.len()));
    }
}

#[test]
fn exact_treespace_counts_match_enumeration() {
    // radius ell + j + 1 with j = floor(log2(1/eps))
    assert_eq!(exact_separated_count(2, &q(1, 1), 0).unwrap(), BigUint::from(enumerate_points(2, 1).unwrap().len()));
    assert_eq!(exact_separated_count(2, &q(1, 2), 0).unwrap(), BigUint::from(enumerate_points(2, 2).unwrap().len()));
    assert_eq!(exact_separated_count(2, &q(1, 1), 1).unwrap(), BigUint::from(4067u32));
    assert_eq!(exact_separated_count(2, &q(3, 2), 5).unwrap(), BigUint::from(1u32));
}

#[test]
fn treespace_slopes_increase_as_epsilon_shrinks() {
    let p = exact_profile(2, &[q(1, 4), q(1, 8)], 0..=6).unwrap();
    let s = p.slopes();
    assert!(s[1] > s[0], "{s:?}");
    assert!(p.monotone);
    assert!(p.trend.starts_with("increasing"));
}
