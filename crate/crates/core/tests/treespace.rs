use std::collections::BTreeSet;

use matchbox_core::pseudogroup::{lipschitz_audit, minimality_check, orbit, MinimalityVerdict};
use matchbox_core::rational::{q, Q};
use matchbox_core::treespace::{
    covering_counts, enumerate_points, line_control_counts, pattern_count, translate, tree_distance, FreeGroupWord,
    PointedTreeApprox, TreeSample,
};
use matchbox_core::Point;
use num_bigint::BigUint;
use num_traits::Zero;
use proptest::prelude::*;

/// Reduced words of length at most k in F_2, letters 0..4 with l ^ 1 the inverse.
fn ball(k: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for w in &layer {
            for l in 0..4u8 {
                if w.last() != Some(&(l ^ 1)) {
                    let mut c: Vec<u8> = w.clone();
                    c.push(l);
                    next.push(c);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Brute-force count of radius-k approximations: every subset of the non-root
/// ball vertices, kept when connected and every interior vertex has degree >= 2.
fn subset_oracle(k: usize) -> usize {
    let verts: Vec<Vec<u8>> = ball(k).into_iter().skip(1).collect();
    assert!(verts.len() <= 20);
    let mut total = 0;
    for mask in 0u32..1 << verts.len() {
        let chosen: BTreeSet<&[u8]> =
            verts.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v.as_slice()).chain([&[][..]]).collect();
        let ok = chosen.iter().all(|v| {
            let connected = v.is_empty() || chosen.contains(&v[..v.len() - 1]);
            let kids = (0..4u8).filter(|&l| v.last() != Some(&(l ^ 1))).filter(|&l| {
                let mut c = v.to_vec();
                c.push(l);
                chosen.contains(c.as_slice())
            });
            let degree = kids.count() + usize::from(!v.is_empty());
            connected && (v.len() == k || degree >= 2)
        });
        total += usize::from(ok);
    }
    total
}

#[test]
fn radius_one_has_eleven_points() {
    let pts = enumerate_points(2, 1).unwrap();
    assert_eq!(pts.len(), 11);
    // subsets of the four root edges of size >= 2
    assert_eq!(6 + 4 + 1, 11);
    assert_eq!(subset_oracle(1), 11);
    assert_eq!(pattern_count(2, 1), BigUint::from(11u32));
}

#[test]
fn radius_zero_is_the_basepoint_germ() {
    let pts = enumerate_points(2, 0).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].vertices, BTreeSet::from([vec![]]));
}

#[test]
fn radius_two_matches_the_subset_oracle() {
    let pts = enumerate_points(2, 2).unwrap();
    assert_eq!(pts.len(), subset_oracle(2));
    assert_eq!(pts.len(), 4067);
    let distinct: BTreeSet<_> = pts.iter().map(|t| &t.vertices).collect();
    assert_eq!(distinct.len(), pts.len());
    assert!(pts.iter().all(|t| t.validate().is_ok()));
    assert!(pts.windows(2).all(|w| w[0].encode() < w[1].encode()));
}

#[test]
fn growth_is_super_multiplicative() {
    let n1 = BigUint::from(enumerate_points(2, 1).unwrap().len());
    let n2 = BigUint::from(enumerate_points(2, 2).unwrap().len());
    assert!(pattern_count(2, 3) * &n1 > &n2 * &n2);
    for k in 1..6 {
        assert!(pattern_count(2, k + 1) > pattern_count(2, k) * pattern_count(2, 1));
    }
}

#[test]
fn ultrametric_exhaustive_at_radius_one() {
    let pts = enumerate_points(2, 1).unwrap();
    for a in &pts {
        for b in &pts {
            let ab = tree_distance(a, b).unwrap().value;
            for c in &pts {
                let bc = tree_distance(b, c).unwrap().value;
                let ac = tree_distance(a, c).unwrap().value;
                assert!(ac <= std::cmp::max(ab.clone(), bc));
            }
        }
    }
}

/// At radius 2 the distance must equal the ball-comparison value, which is an
/// ultrametric because equality of restrictions is an equivalence relation.
#[test]
fn radius_two_distances_match_ball_comparison() {
    let pts = enumerate_points(2, 2).unwrap();
    let r1: Vec<PointedTreeApprox> = pts.iter().map(|t| t.restrict(1)).collect();
    for i in 0..pts.len() {
        for j in (i..pts.len()).step_by(7) {
            let expected = if i == j {
                Q::zero()
            } else if r1[i] != r1[j] {
                q(1, 1)
            } else {
                q(1, 2)
            };
            assert_eq!(tree_distance(&pts[i], &pts[j]).unwrap().value, expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn ultrametric_on_random_radius_two_triples(a in 0usize..4067, b in 0usize..4067, c in 0usize..4067) {
        let pts = radius_two();
        let d = |x: usize, y: usize| tree_distance(&pts[x], &pts[y]).unwrap().value;
        prop_assert!(d(a, c) <= std::cmp::max(d(a, b), d(b, c)));
        prop_assert_eq!(d(a, b), d(b, a));
    }
}

fn radius_two() -> &'static [PointedTreeApprox] {
    static PTS: std::sync::OnceLock<Vec<PointedTreeApprox>> = std::sync::OnceLock::new();
    PTS.get_or_init(|| enumerate_points(2, 2).unwrap())
}

#[test]
fn distance_classes() {
    let full = PointedTreeApprox::full(2, 3);
    assert!(tree_distance(&full, &full).unwrap().value.is_zero());
    // drop one root edge and everything below it
    let no_a1 = PointedTreeApprox::new(2, 3, full.vertices.iter().filter(|v| v.first() != Some(&0)).cloned()).unwrap();
    assert_eq!(tree_distance(&full, &no_a1).unwrap().value, q(1, 1));
    // drop one leaf at distance 3: balls agree up to radius 2
    let leaf = vec![0u8, 0, 0];
    let pruned = PointedTreeApprox::new(2, 3, full.vertices.iter().filter(|v| **v != leaf).cloned()).unwrap();
    let d = tree_distance(&full, &pruned).unwrap();
    assert_eq!(d.value, q(1, 4));
    assert_eq!(d.agreement, Some(2));
    assert!(tree_distance(&full, &PointedTreeApprox::full(2, 2)).is_err());
}

#[test]
fn translation_reference_cases() {
    let full = PointedTreeApprox::full(2, 3);
    assert_eq!(translate(&FreeGroupWord::identity(2), &full), Some(full.clone()));
    let a1 = FreeGroupWord::parse(2, "a1").unwrap();
    assert_eq!(translate(&a1, &full), Some(PointedTreeApprox::full(2, 2)));
    let no_a1 = PointedTreeApprox::new(2, 3, full.vertices.iter().filter(|v| v.first() != Some(&0)).cloned()).unwrap();
    assert_eq!(translate(&a1, &no_a1), None);
    // longer than the radius: undefined by truncation
    let long = FreeGroupWord::parse(2, "a1 a1 a1 a1").unwrap();
    assert_eq!(translate(&long, &full), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Composition acts on the right: following γ and then δ is translation by γδ.
    #[test]
    fn translation_composes_as_a_right_action(
        idx in 0usize..4067,
        g in prop::collection::vec(0u8..4, 0..3),
        h in prop::collection::vec(0u8..4, 0..3),
    ) {
        let t = &radius_two()[idx];
        let gamma = FreeGroupWord::new(2, g).unwrap();
        let delta = FreeGroupWord::new(2, h).unwrap();
        let two_step = translate(&gamma, t).and_then(|s| translate(&delta, &s));
        if let Some(s) = two_step {
            let direct = translate(&gamma.mul(&delta), t).unwrap();
            let r = s.radius.min(direct.radius);
            prop_assert_eq!(s.restrict(r), direct.restrict(r));
        }
    }
}

#[test]
fn letters_shift_agreement_radius_by_at_most_one() {
    let pts = enumerate_points(2, 2).unwrap();
    for l in 0..4u8 {
        let g = FreeGroupWord::new(2, vec![l]).unwrap();
        let moved: Vec<Option<PointedTreeApprox>> = pts.iter().map(|t| translate(&g, t)).collect();
        for i in (0..pts.len()).step_by(3) {
            for j in (i + 1..pts.len()).step_by(11) {
                let (Some(a), Some(b)) = (&moved[i], &moved[j]) else { continue };
                let before = tree_distance(&pts[i], &pts[j]).unwrap().value;
                let after = tree_distance(a, b).unwrap().value;
                assert!(after <= &before * q(2, 1), "letter {l}: {i} {j}");
            }
        }
    }
}

#[test]
fn every_approximation_extends() {
    for k in 0..=2 {
        for t in enumerate_points(2, k).unwrap() {
            let e = t.extend_one().unwrap();
            assert!(e.validate().is_ok());
            assert_eq!(e.restrict(k), t);
            assert!(t.is_extendable());
        }
    }
}

#[test]
fn sample_pseudogroup_basics() {
    let sample = TreeSample::build(2, 3).unwrap();
    assert_eq!(sample.len(), 220);
    assert_eq!(sample.distinct_patterns(sample.depth), 220);
    let g = sample.pseudogroup().unwrap();
    assert_eq!(g.generators.len(), 4);
    let audit = lipschitz_audit(&g, 1, sample.depth).unwrap();
    assert_eq!(audit.violations, 0);
    assert!(audit.rows.iter().filter(|r| r.length == 1).all(|r| r.distortion <= q(2, 1)));
    let report = minimality_check(&g, 2, 8).unwrap();
    assert!(matches!(report.verdict, MinimalityVerdict::NotMinimal { .. }));
}

#[test]
fn sample_moves_agree_with_translation() {
    let sample = TreeSample::build(2, 3).unwrap();
    let k = sample.depth;
    for p in 0..sample.len() {
        let t = sample.approx(p, k);
        for l in 0..4u8 {
            let g = FreeGroupWord::new(2, vec![l]).unwrap();
            match (sample.moves[p][l as usize], translate(&g, &t)) {
                (Some(q), Some(s)) => assert_eq!(sample.approx(q, k - 1), s),
                (None, None) => {}
                (m, s) => panic!("point {p} letter {l}: move {m:?} vs translate {s:?}"),
            }
        }
    }
}

#[test]
fn full_cayley_graph_point_is_fixed() {
    let sample = TreeSample::build(2, 3).unwrap();
    let k = sample.depth;
    let full = PointedTreeApprox::full(2, k);
    let p = (0..sample.len()).find(|&p| sample.approx(p, k) == full).unwrap();
    assert!(sample.moves[p].iter().all(|m| *m == Some(p)));
    let g = sample.pseudogroup().unwrap();
    let o = orbit(&g, &Point::new(sample.words[p].clone()), 8, k).unwrap();
    assert_eq!(o.words(&g.ms.space, k).unwrap(), vec![sample.words[p].clone()]);
}

#[test]
fn covering_slopes_increase_from_log2_eleven() {
    let r = covering_counts(2, 1..=4).unwrap();
    assert_eq!(r.rows[0].count, BigUint::from(enumerate_points(2, 1).unwrap().len()));
    assert_eq!(r.rows[1].count, BigUint::from(enumerate_points(2, 2).unwrap().len()));
    assert!((r.rows[0].dimension_slope - 11f64.log2()).abs() < 1e-12);
    assert!(r.strictly_increasing);
    assert!(r.rows.windows(2).all(|w| w[1].dimension_slope > w[0].dimension_slope));
    assert_eq!(r.rows[2].count, BigUint::from(68_719_474_691u64));
}

#[test]
fn line_control_is_polynomial() {
    let r = line_control_counts(1..=8).unwrap();
    for row in &r.rows {
        // intervals [a, b] of Z with -k <= a <= 0 <= b <= k
        let k = row.k as i64;
        let direct = (-k..=0).flat_map(|a| (0..=k).map(move |b| (a, b))).count();
        assert_eq!(row.count, BigUint::from(direct));
    }
    assert!(r.rows.windows(2).all(|w| w[1].dimension_slope < w[0].dimension_slope));
    assert!(!r.strictly_increasing);
}
