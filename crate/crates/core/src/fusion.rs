//! Gluing two pseudogroup actions along a clopen identification V1 ≅ V2.
//!
//! The glued space is stored as two tagged pieces: tag 0 carries all of K1,
//! tag 1 carries K2 \ V2. Points of V2 are transported to K1 through h^{-1}.
//! Words of the shorter piece are padded with zeros to a common depth.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderSet;
use crate::entropy::{Mode, Separation};
use crate::error::{input, Error, Result};
use crate::metric::{Metric, MetricSpace, WeightedMetric};
use crate::pseudogroup::{minimality_check, ActionKind, MinimalityReport, PartialMap, Pseudogroup};
use crate::rational::Q;
use crate::space::LevelSpace;

/// A bijection V1 -> V2 given by rewriting prefixes of a common depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gluing {
    pub depth: usize,
    pub rules: Vec<(Vec<u32>, Vec<u32>)>,
}

impl Gluing {
    /// Identity rewrite on the given prefixes.
    pub fn identity_on(depth: usize, prefixes: impl IntoIterator<Item = Vec<u32>>) -> Self {
        Gluing { depth, rules: prefixes.into_iter().map(|p| (p.clone(), p)).collect() }
    }
}

#[derive(Clone, Debug)]
pub struct FusionSpec {
    pub g1: Pseudogroup,
    pub g2: Pseudogroup,
    pub v1: CylinderSet,
    pub v2: CylinderSet,
    pub h: Gluing,
}

#[derive(Clone, Debug)]
pub struct Fused {
    pub pseudogroup: Pseudogroup,
    /// Fused word of each K1 point.
    pub left: BTreeMap<Vec<u32>, Vec<u32>>,
    /// Fused word of each K2 point (points of V2 land in piece 0).
    pub right: BTreeMap<Vec<u32>, Vec<u32>>,
    /// Number of generators coming from each input.
    pub generator_split: (usize, usize),
    /// h on full-depth words of V1.
    pub h_full: BTreeMap<Vec<u32>, Vec<u32>>,
}

fn weighted(ms: &MetricSpace, which: &str) -> Result<WeightedMetric> {
    match &ms.metric {
        Metric::Weighted(w) => Ok(w.clone()),
        Metric::Piecewise(_) => Err(Error::UnsupportedMetric(format!("{which} input already has a piecewise metric"))),
    }
}

fn pad(w: &[u32], depth: usize) -> Vec<u32> {
    let mut out = w.to_vec();
    out.resize(depth, 0);
    out
}

/// Extends the prefix gluing to a bijection of full-depth words.
fn full_gluing(spec: &FusionSpec) -> Result<BTreeMap<Vec<u32>, Vec<u32>>> {
    let (s1, s2) = (&spec.g1.ms.space, &spec.g2.ms.space);
    let (d1, d2) = (spec.g1.depth, spec.g2.depth);
    let k = spec.h.depth;
    if k > d1 || k > d2 {
        return input(format!("gluing depth {k} exceeds a working depth"));
    }
    if spec.v1.is_empty() || spec.v2.is_empty() {
        return input("glued sets must be nonempty");
    }
    let keys: BTreeSet<&Vec<u32>> = spec.h.rules.iter().map(|(a, _)| a).collect();
    let vals: BTreeSet<&Vec<u32>> = spec.h.rules.iter().map(|(_, b)| b).collect();
    if keys.len() != spec.h.rules.len() || vals.len() != spec.h.rules.len() {
        return input("gluing table is not a bijection");
    }
    let dom = CylinderSet::from_prefixes(s1, keys.iter().map(|a| (*a).clone()));
    let ran = CylinderSet::from_prefixes(s2, vals.iter().map(|b| (*b).clone()));
    if dom != spec.v1 || ran != spec.v2 {
        return input("gluing table does not map V1 onto V2");
    }
    let tail_depth = (d1 - k).max(d2 - k);
    let mut full = BTreeMap::new();
    for (a, b) in &spec.h.rules {
        if a.len() != k || b.len() != k || !s1.is_admissible(a) || !s2.is_admissible(b) {
            return input(format!("gluing rule {a:?} -> {b:?} is not at depth {k}"));
        }
        let tails = |s: &LevelSpace, p: &Vec<u32>, d: usize| -> Result<BTreeMap<Vec<u32>, Vec<u32>>> {
            Ok(s.words_under(p, d)?.into_iter().map(|w| (pad(&w[k..], tail_depth), w)).collect())
        };
        let ta = tails(s1, a, d1)?;
        let tb = tails(s2, b, d2)?;
        if ta.keys().ne(tb.keys()) {
            return input(format!("the cylinders {a:?} and {b:?} have different structure below the gluing depth"));
        }
        for (t, wa) in ta {
            full.insert(wa, tb[&t].clone());
        }
    }
    Ok(full)
}

/// The fused pseudogroup on K1 ⊔ (K2 \ V2).
pub fn fuse(spec: &FusionSpec) -> Result<Fused> {
    let (g1, g2) = (&spec.g1, &spec.g2);
    if g1.ms.space.is_coherent() != g2.ms.space.is_coherent() {
        return input("both inputs must be coherent, or both free");
    }
    let m1 = weighted(&g1.ms, "first")?;
    let m2 = weighted(&g2.ms, "second")?;
    let h = full_gluing(spec)?;
    let h_inv: BTreeMap<&Vec<u32>, &Vec<u32>> = h.iter().map(|(a, b)| (b, a)).collect();
    let inner = g1.depth.max(g2.depth);
    let depth = inner + 1;
    let tagged = |tag: u32, w: &[u32]| {
        let mut out = vec![tag];
        out.extend(pad(w, inner));
        out
    };
    let w1 = g1.ms.space.words(g1.depth)?;
    let w2 = g2.ms.space.words(g2.depth)?;
    let left: BTreeMap<Vec<u32>, Vec<u32>> = w1.iter().map(|w| (w.clone(), tagged(0, w))).collect();
    let right: BTreeMap<Vec<u32>, Vec<u32>> = w2
        .iter()
        .map(|w| match h_inv.get(w) {
            Some(a) => (w.clone(), left[*a].clone()),
            None => (w.clone(), tagged(1, w)),
        })
        .collect();
    let mut words: Vec<Vec<u32>> = left.values().cloned().collect();
    words.extend(right.values().filter(|w| w[0] == 1).cloned());
    let space = LevelSpace::admissible(words.clone(), g1.ms.space.is_coherent())?;
    let ms = MetricSpace::new(space, Metric::Piecewise(vec![m1, m2]))?;

    let mut gens = Vec::new();
    let lift = |g: &Pseudogroup, embed: &BTreeMap<Vec<u32>, Vec<u32>>, tag: char| -> Result<Vec<PartialMap>> {
        let mut out = Vec::new();
        let image: BTreeSet<&Vec<u32>> = embed.values().collect();
        for gen in &g.generators {
            let table = gen.refine(&g.ms, g.depth)?;
            let mut rules: BTreeMap<Vec<u32>, Vec<u32>> =
                table.rules().iter().map(|(a, b)| (embed[a].clone(), embed[b].clone())).collect();
            if g.kind == ActionKind::GroupAction {
                for w in words.iter().filter(|w| !image.contains(w)) {
                    rules.insert(w.clone(), w.clone());
                }
            }
            let label = format!("{tag}.{}", gen.label);
            let probe = PartialMap::from_parts(&ms, label.clone(), depth, rules.clone(), Q::one());
            let c = std::cmp::max(gen.lipschitz().clone(), probe.measured_distortion(&ms));
            out.push(PartialMap::new(&ms, label, depth, rules, c)?);
        }
        Ok(out)
    };
    gens.extend(lift(g1, &left, 'L')?);
    let n1 = gens.len();
    gens.extend(lift(g2, &right, 'R')?);
    let n2 = gens.len() - n1;
    let kind = if g1.kind == ActionKind::GroupAction && g2.kind == ActionKind::GroupAction {
        ActionKind::GroupAction
    } else {
        ActionKind::Pseudogroup
    };
    let pseudogroup = Pseudogroup::new(ms, depth, gens, kind)?;
    Ok(Fused { pseudogroup, left, right, generator_split: (n1, n2), h_full: h })
}

/// For every point of V1, each second-factor generator acts as h^{-1} g h.
pub fn check_conjugation(spec: &FusionSpec, fused: &Fused) -> Result<bool> {
    let (n1, n2) = fused.generator_split;
    let h_inv: BTreeMap<&Vec<u32>, &Vec<u32>> = fused.h_full.iter().map(|(a, b)| (b, a)).collect();
    for (i, gen) in spec.g2.generators.iter().enumerate() {
        let native = gen.refine(&spec.g2.ms, spec.g2.depth)?;
        let glued = &fused.pseudogroup.generators[n1 + i];
        debug_assert!(i < n2);
        for (w, hw) in &fused.h_full {
            let expected = native.apply(hw).map(|img| match h_inv.get(&img) {
                Some(back) => fused.left[*back].clone(),
                None => fused.right[&img].clone(),
            });
            let actual = glued.apply(&fused.left[w]);
            let ok = match (&expected, &actual) {
                (Some(e), Some(a)) => e == a,
                (None, None) => true,
                // identity extension of group actions off the transported part
                (None, Some(a)) => spec.g2.kind == ActionKind::GroupAction && a == &fused.left[w],
                (Some(_), None) => false,
            };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedMinimality {
    pub fused: MinimalityReport,
    pub left: MinimalityReport,
    pub right: MinimalityReport,
    /// False only when both inputs pass but the fused system does not.
    pub consistent: bool,
}

/// Minimality of the fused system at (k, α), next to both inputs at depth k - 1.
pub fn fused_minimality(spec: &FusionSpec, fused: &Fused, k: usize, alpha: usize) -> Result<FusedMinimality> {
    let f = minimality_check(&fused.pseudogroup, k, alpha)?;
    let kk = k.saturating_sub(1);
    let l = minimality_check(&spec.g1, kk.min(spec.g1.depth), alpha)?;
    let r = minimality_check(&spec.g2, kk.min(spec.g2.depth), alpha)?;
    let consistent = !(l.is_minimal() && r.is_minimal()) || f.is_minimal();
    Ok(FusedMinimality { fused: f, left: l, right: r, consistent })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceRow {
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
    pub ell: usize,
    pub fused: usize,
    pub factor: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub rows: Vec<DominanceRow>,
    pub dominates: bool,
}

/// Exact separated counts of the fused system against one factor on its own piece.
pub fn entropy_dominance(fused: &Fused, factor: &Pseudogroup, eps: &[Q], ells: std::ops::RangeInclusive<usize>) -> Result<DominanceReport> {
    let mut rows = Vec::new();
    for e in eps {
        let sf = Separation::new(&fused.pseudogroup, e)?;
        let sg = Separation::new(factor, e)?;
        for ell in ells.clone() {
            let a = sf.max_separated(ell, fused.pseudogroup.depth, Mode::Exact)?;
            let b = sg.max_separated(ell, factor.depth, Mode::Exact)?;
            if a.fallback || b.fallback {
                return Err(Error::Resource { message: "clique search budget exhausted".into(), partial: None });
            }
            rows.push(DominanceRow { epsilon: e.clone(), ell, fused: a.count, factor: b.count });
        }
    }
    let dominates = rows.iter().all(|r| r.fused >= r.factor);
    Ok(DominanceReport { rows, dominates })
}
