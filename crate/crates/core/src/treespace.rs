//! Pointed dead-end-free subtrees of the Cayley graph of the free group F_n.
//!
//! Letters are numbered `2i` for a_{i+1} and `2i + 1` for its inverse, so the
//! inverse of letter `l` is `l ^ 1`. A vertex of the Cayley graph is a reduced
//! word in these letters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::entropy::{profile_from_rows, EntropyProfile, GrowthEntry, GrowthSeries, Mode};
use crate::error::{input, usage, Error, Result};
use crate::metric::{Metric, MetricSpace, WeightedMetric};
use crate::pseudogroup::{ActionKind, PartialMap, Pseudogroup};
use crate::rational::{inv_pow, ln_biguint, qint, Q};
use crate::space::LevelSpace;

/// Largest number of radius-k approximations `enumerate_points` will list.
pub const MAX_ENUMERATED: u64 = 2_000_000;
/// Largest number of labelled Schreier graphs scanned when building a sample.
const MAX_SAMPLE_GRAPHS: u64 = 4_000_000;

fn letter_name(l: u8) -> String {
    let i = l / 2 + 1;
    if l.is_multiple_of(2) {
        format!("a{i}")
    } else {
        format!("A{i}")
    }
}

/// A freely reduced word in a_1^{±1}, ..., a_n^{±1}.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FreeGroupWord {
    pub n: u8,
    pub letters: Vec<u8>,
}

impl FreeGroupWord {
    pub fn identity(n: u8) -> Self {
        FreeGroupWord { n, letters: vec![] }
    }

    /// Reduces the given letters; errors on letters outside the rank.
    pub fn new(n: u8, letters: Vec<u8>) -> Result<Self> {
        if let Some(l) = letters.iter().find(|&&l| l >= 2 * n) {
            return input(format!("letter {l} outside rank {n}"));
        }
        Ok(FreeGroupWord { n, letters: reduce(letters) })
    }

    /// Parses space-separated names such as "a1 A2".
    pub fn parse(n: u8, text: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for tok in text.split_whitespace() {
            let (inv, rest) = match tok.strip_prefix('a') {
                Some(r) => (false, r),
                None => match tok.strip_prefix('A') {
                    Some(r) => (true, r),
                    None => return input(format!("bad letter {tok:?}")),
                },
            };
            let i: u8 = rest.parse().map_err(|_| Error::Input(format!("bad letter {tok:?}")))?;
            if i == 0 {
                return input(format!("bad letter {tok:?}"));
            }
            letters.push(2 * (i - 1) + inv as u8);
        }
        FreeGroupWord::new(n, letters)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        FreeGroupWord { n: self.n, letters: self.letters.iter().rev().map(|l| l ^ 1).collect() }
    }

    /// The reduced product `self · other`.
    pub fn mul(&self, other: &FreeGroupWord) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        FreeGroupWord { n: self.n, letters: reduce(letters) }
    }
}

impl fmt::Display for FreeGroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("e");
        }
        let names: Vec<String> = self.letters.iter().map(|&l| letter_name(l)).collect();
        f.write_str(&names.join(" "))
    }
}

fn reduce(letters: Vec<u8>) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::with_capacity(letters.len());
    for l in letters {
        if out.last() == Some(&(l ^ 1)) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// The part of a pointed subtree inside the ball of radius `radius` about e.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PointedTreeApprox {
    pub n: u8,
    pub radius: usize,
    /// Vertices as reduced words; always contains the empty word.
    pub vertices: BTreeSet<Vec<u8>>,
}

impl PointedTreeApprox {
    pub fn new(n: u8, radius: usize, vertices: impl IntoIterator<Item = Vec<u8>>) -> Result<Self> {
        let t = PointedTreeApprox { n, radius, vertices: vertices.into_iter().collect() };
        t.validate()?;
        Ok(t)
    }

    /// The whole Cayley graph truncated at `radius`.
    pub fn full(n: u8, radius: usize) -> Self {
        let mut vertices = BTreeSet::new();
        let mut layer = vec![vec![]];
        vertices.insert(vec![]);
        for _ in 0..radius {
            let mut next = Vec::new();
            for w in &layer {
                for l in children_letters(n, w) {
                    let mut c = w.clone();
                    c.push(l);
                    next.push(c);
                }
            }
            vertices.extend(next.iter().cloned());
            layer = next;
        }
        PointedTreeApprox { n, radius, vertices }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return input("rank must be positive");
        }
        if !self.vertices.contains(&vec![]) {
            return input("tree does not contain the basepoint");
        }
        for v in &self.vertices {
            if v.len() > self.radius {
                return input(format!("vertex {v:?} outside radius {}", self.radius));
            }
            if v.iter().any(|&l| l >= 2 * self.n) || reduce(v.clone()) != *v {
                return input(format!("vertex {v:?} is not a reduced word"));
            }
            if let Some((_, parent)) = v.split_last() {
                if !self.vertices.contains(parent) {
                    return input(format!("vertex {v:?} is disconnected"));
                }
            }
            if v.len() < self.radius && self.degree(v) < 2 {
                return input(format!("vertex {v:?} is a dead end"));
            }
        }
        Ok(())
    }

    pub fn degree(&self, v: &[u8]) -> usize {
        let up = usize::from(!v.is_empty());
        up + children_letters(self.n, v)
            .filter(|&l| {
                let mut c = v.to_vec();
                c.push(l);
                self.vertices.contains(&c)
            })
            .count()
    }

    pub fn contains(&self, v: &[u8]) -> bool {
        self.vertices.contains(v)
    }

    /// Edges in depth-first order, children in letter order; each edge named by its far vertex.
    pub fn encode(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![]];
        while let Some(v) = stack.pop() {
            let kids: Vec<Vec<u8>> = children_letters(self.n, &v)
                .map(|l| {
                    let mut c = v.clone();
                    c.push(l);
                    c
                })
                .filter(|c| self.vertices.contains(c))
                .collect();
            for c in kids.into_iter().rev() {
                stack.push(c);
            }
            if !v.is_empty() {
                out.push(v);
            }
        }
        out
    }

    /// Vertices within distance `m` of e.
    pub fn restrict(&self, m: usize) -> PointedTreeApprox {
        PointedTreeApprox {
            n: self.n,
            radius: m.min(self.radius),
            vertices: self.vertices.iter().filter(|v| v.len() <= m).cloned().collect(),
        }
    }

    /// Some radius-(k+1) approximation extending this one, if any exists.
    pub fn extend_one(&self) -> Option<PointedTreeApprox> {
        let mut vertices = self.vertices.clone();
        for v in self.vertices.iter().filter(|v| v.len() == self.radius) {
            let needed = if v.is_empty() { 2 } else { 1 };
            let letters: Vec<u8> = children_letters(self.n, v).take(needed).collect();
            if letters.len() < needed {
                return None;
            }
            for l in letters {
                let mut c = v.clone();
                c.push(l);
                vertices.insert(c);
            }
        }
        Some(PointedTreeApprox { n: self.n, radius: self.radius + 1, vertices })
    }

    pub fn is_extendable(&self) -> bool {
        self.extend_one().is_some_and(|t| t.validate().is_ok())
    }
}

/// Non-backtracking letters available after `w`.
fn children_letters(n: u8, w: &[u8]) -> impl Iterator<Item = u8> {
    let back = w.last().map(|l| l ^ 1);
    (0..2 * n).filter(move |&l| Some(l) != back)
}

/// Number of radius-k approximations: f_0 = 1, f_r = (1 + f_{r-1})^{2n-1} - 1,
/// N_k = (1 + f_{k-1})^{2n} - 1 - 2n f_{k-1}.
pub fn pattern_count(n: u32, k: usize) -> BigUint {
    if k == 0 {
        return BigUint::one();
    }
    let mut f = BigUint::one();
    for _ in 1..k {
        f = Pow::pow(BigUint::one() + &f, 2 * n - 1) - BigUint::one();
    }
    Pow::pow(BigUint::one() + &f, 2 * n) - BigUint::one() - BigUint::from(2 * n) * f
}

/// All radius-k approximations for rank n, sorted by encoding.
pub fn enumerate_points(n: u8, k: usize) -> Result<Vec<PointedTreeApprox>> {
    if n < 2 {
        return usage("enumeration needs rank n >= 2");
    }
    let total = pattern_count(n as u32, k);
    if total > BigUint::from(MAX_ENUMERATED) {
        return Err(Error::Resource {
            message: format!("{total} approximations at n = {n}, k = {k} exceed the enumeration limit {MAX_ENUMERATED}"),
            partial: Some(serde_json::json!({ "n": n, "k": k, "count": total.to_string(), "enumerated": false })),
        });
    }
    // branches[r] lists the vertex sets (relative to a child) of subtrees with r levels left
    let mut out = Vec::new();
    let mut current = BTreeSet::new();
    current.insert(vec![]);
    grow(n, k, vec![vec![]], &mut current, &mut out);
    out.sort_by_key(|t: &PointedTreeApprox| t.encode());
    Ok(out)
}

/// Chooses children for every vertex of `frontier`, one vertex at a time.
fn grow(n: u8, k: usize, frontier: Vec<Vec<u8>>, current: &mut BTreeSet<Vec<u8>>, out: &mut Vec<PointedTreeApprox>) {
    let Some((v, rest)) = frontier.split_first() else {
        out.push(PointedTreeApprox { n, radius: k, vertices: current.clone() });
        return;
    };
    if v.len() == k {
        grow(n, k, rest.to_vec(), current, out);
        return;
    }
    let letters: Vec<u8> = children_letters(n, v).collect();
    let need = if v.is_empty() { 2 } else { 1 };
    for mask in 1u32..1 << letters.len() {
        if (mask.count_ones() as usize) < need {
            continue;
        }
        let kids: Vec<Vec<u8>> = letters
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &l)| {
                let mut c = v.clone();
                c.push(l);
                c
            })
            .collect();
        for c in &kids {
            current.insert(c.clone());
        }
        let mut next = rest.to_vec();
        next.extend(kids.iter().cloned());
        grow(n, k, next, current, out);
        for c in &kids {
            current.remove(c);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDistance {
    /// Largest agreement radius; `None` when the approximations agree everywhere.
    pub agreement: Option<usize>,
    #[serde(with = "crate::rational::serde_q")]
    pub value: Q,
    pub certified_radius: usize,
}

/// 2^{-m} for the largest radius m on which the trees agree; 0 if equal.
pub fn tree_distance(t: &PointedTreeApprox, u: &PointedTreeApprox) -> Result<TreeDistance> {
    if t.n != u.n || t.radius != u.radius {
        return input("tree distance needs equal rank and radius");
    }
    let first_diff = t.vertices.symmetric_difference(&u.vertices).map(Vec::len).min();
    Ok(match first_diff {
        None => TreeDistance { agreement: None, value: Q::zero(), certified_radius: t.radius },
        Some(r) => TreeDistance { agreement: Some(r - 1), value: inv_pow(2, r as u32 - 1), certified_radius: t.radius },
    })
}

/// The tree seen from the vertex γ: γ^{-1}T re-rooted at e, truncated to radius k - |γ|.
/// A path δ followed by γ gives `translate(γ, translate(δ, T)) = translate(δγ, T)`.
pub fn translate(g: &FreeGroupWord, t: &PointedTreeApprox) -> Option<PointedTreeApprox> {
    if g.len() > t.radius || !t.contains(&g.letters) {
        return None;
    }
    let radius = t.radius - g.len();
    let inv = g.inverse();
    let vertices = t
        .vertices
        .iter()
        .map(|v| {
            let mut w = inv.letters.clone();
            w.extend_from_slice(v);
            reduce(w)
        })
        .filter(|w| w.len() <= radius)
        .collect();
    Some(PointedTreeApprox { n: t.n, radius, vertices })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringRow {
    pub k: usize,
    #[serde(with = "crate::rational::serde_biguint")]
    pub count: BigUint,
    /// log2(N_k) / k
    pub dimension_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub n: u32,
    pub rows: Vec<CoveringRow>,
    pub strictly_increasing: bool,
    pub note: String,
}

fn log2_count(c: &BigUint) -> f64 {
    ln_biguint(c) / std::f64::consts::LN_2
}

fn covering_report(n: u32, rows: Vec<CoveringRow>) -> CoveringReport {
    let strictly_increasing = rows.windows(2).all(|w| w[1].dimension_slope > w[0].dimension_slope);
    CoveringReport {
        n,
        rows,
        strictly_increasing,
        note: "2^-k covering counts; increasing slopes are evidence for infinite dimension, not proof".into(),
    }
}

/// Minimal 2^{-k} covering counts N_k with the slopes log2(N_k)/k.
pub fn covering_counts(n: u32, ks: std::ops::RangeInclusive<usize>) -> Result<CoveringReport> {
    if n < 2 {
        return usage("covering counts need rank n >= 2; see line_control_counts for n = 1");
    }
    if ks.is_empty() || *ks.start() == 0 {
        return usage("k range must be nonempty and start at 1 or later");
    }
    if *ks.end() > 40 {
        return Err(Error::Resource { message: "k above 40 is out of reach even for exact counting".into(), partial: None });
    }
    let rows = ks
        .map(|k| {
            let count = pattern_count(n, k);
            CoveringRow { k, dimension_slope: log2_count(&count) / k as f64, count }
        })
        .collect();
    Ok(covering_report(n, rows))
}

/// Negative control on the line (rank 1): subpaths through e of radius k, (k+1)^2 of them.
pub fn line_control_counts(ks: std::ops::RangeInclusive<usize>) -> Result<CoveringReport> {
    if ks.is_empty() || *ks.start() == 0 {
        return usage("k range must be nonempty and start at 1 or later");
    }
    let rows = ks
        .map(|k| {
            let count = BigUint::from((k as u64 + 1) * (k as u64 + 1));
            CoveringRow { k, dimension_slope: log2_count(&count) / k as f64, count }
        })
        .collect();
    Ok(covering_report(1, rows))
}

/// Exact entropy counts on X_n: for ε ≤ 1 with j = floor(log2(1/ε)), two points are
/// (ε, ℓ)-separated iff their radius-(ℓ + j + 1) patterns differ, so the maximum is N_{ℓ+j+1}.
pub fn exact_separated_count(n: u32, eps: &Q, ell: usize) -> Result<BigUint> {
    match pattern_radius(eps, ell)? {
        None => Ok(BigUint::one()),
        Some(r) => Ok(pattern_count(n, r)),
    }
}

/// ℓ + floor(log2(1/ε)) + 1, or `None` when ε exceeds the diameter 1.
pub fn pattern_radius(eps: &Q, ell: usize) -> Result<Option<usize>> {
    if eps <= &Q::zero() {
        return usage("epsilon must be positive");
    }
    if eps > &Q::one() {
        return Ok(None);
    }
    let mut j = 0;
    while inv_pow(2, j as u32 + 1) >= *eps {
        j += 1;
    }
    Ok(Some(ell + j + 1))
}

/// Exact expansion growth on the whole space X_n.
pub fn exact_growth(n: u32, eps: &Q, ells: std::ops::RangeInclusive<usize>) -> Result<GrowthSeries> {
    if n < 2 {
        return usage("rank must be at least 2");
    }
    if ells.is_empty() {
        return usage("word-length range is empty");
    }
    if *ells.end() > 24 {
        return Err(Error::Resource { message: "word budgets above 24 give counts too large to tabulate".into(), partial: None });
    }
    let depth = pattern_radius(eps, *ells.end())?.unwrap_or(0);
    let entries = ells
        .map(|ell| Ok(GrowthEntry { ell, count: exact_separated_count(n, eps, ell)?, mode: Mode::Exact }))
        .collect::<Result<Vec<_>>>()?;
    GrowthSeries::from_counts(eps.clone(), depth, entries)
}

pub fn exact_profile(n: u32, eps_list: &[Q], ells: std::ops::RangeInclusive<usize>) -> Result<EntropyProfile> {
    crate::entropy::check_eps_list(eps_list)?;
    let rows = eps_list.iter().map(|e| exact_growth(n, e, ells.clone())).collect::<Result<Vec<_>>>()?;
    let depth = rows.iter().map(|r| r.depth).max().unwrap_or(0);
    profile_from_rows(depth, rows, "exact pattern counts on the full space; no truncation")
}

/// Translation-closed sample of X_n: lifts of dead-end-free Schreier graphs with
/// at most `graph_order` vertices, distinguished by exact pattern classes.
#[derive(Clone, Debug)]
pub struct TreeSample {
    pub n: u8,
    pub graph_order: usize,
    /// Radius at which all sample points are pairwise distinct.
    pub depth: usize,
    /// Digit strings of the points, sorted.
    pub words: Vec<Vec<u32>>,
    /// Per point, the image under each letter.
    pub moves: Vec<Vec<Option<usize>>>,
    /// Per point, its radius-r pattern class for r = 0..=stable radius.
    classes: Vec<Vec<u32>>,
    /// One realizing (graph, vertex) per point, for rebuilding approximations.
    reps: Vec<(usize, usize)>,
    graphs: Vec<Schreier>,
}

#[derive(Clone, Debug)]
struct Schreier {
    /// step[v][l]: target of letter l at vertex v.
    step: Vec<Vec<Option<usize>>>,
}

impl Schreier {
    fn degree(&self, v: usize) -> usize {
        self.step[v].iter().filter(|s| s.is_some()).count()
    }
}

fn permutations(v: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..v).collect();
    heap_permute(&mut p, v, &mut out);
    out.sort();
    out
}

fn heap_permute(p: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k {
        heap_permute(p, k - 1, out);
        let j = if k.is_multiple_of(2) { i } else { 0 };
        p.swap(j, k - 1);
    }
}

fn factorial(v: usize) -> u64 {
    (1..=v as u64).product()
}

fn schreier_graphs(n: u8, order: usize) -> Result<Vec<Schreier>> {
    let mut total = 0u64;
    for v in 1..=order {
        let per = factorial(v).checked_pow(n as u32).and_then(|p| p.checked_mul(1u64.checked_shl((n as usize * v) as u32)?));
        total = total.saturating_add(per.unwrap_or(u64::MAX));
    }
    if total > MAX_SAMPLE_GRAPHS {
        return Err(Error::Resource {
            message: format!("{total} Schreier graphs at order {order} exceed the limit {MAX_SAMPLE_GRAPHS}"),
            partial: None,
        });
    }
    let letters = 2 * n as usize;
    let mut out = Vec::new();
    for v in 1..=order {
        let perms = permutations(v);
        let edges = n as usize * v;
        let mut choice = vec![0usize; n as usize];
        loop {
            for mask in 1u64..1 << edges {
                let mut step = vec![vec![None; letters]; v];
                for i in 0..n as usize {
                    let p = &perms[choice[i]];
                    for x in 0..v {
                        if mask >> (i * v + x) & 1 == 1 {
                            step[x][2 * i] = Some(p[x]);
                            step[p[x]][2 * i + 1] = Some(x);
                        }
                    }
                }
                let g = Schreier { step };
                if (0..v).all(|x| g.degree(x) != 1) {
                    out.push(g);
                }
            }
            // next tuple of permutations
            let mut i = 0;
            while i < choice.len() {
                choice[i] += 1;
                if choice[i] < perms.len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
    }
    Ok(out)
}

impl TreeSample {
    pub fn build(n: u8, graph_order: usize) -> Result<Self> {
        if n < 1 {
            return usage("rank must be positive");
        }
        if graph_order < 1 {
            return usage("graph order must be at least 1");
        }
        let graphs = schreier_graphs(n, graph_order)?;
        let letters = 2 * n as usize;
        let lasts = letters + 1; // slot `letters` means "no incoming letter"
        // state ids
        let mut offset = Vec::with_capacity(graphs.len());
        let mut total = 0;
        for g in &graphs {
            offset.push(total);
            total += g.step.len() * lasts;
        }
        let sid = |gi: usize, v: usize, last: usize| offset[gi] + v * lasts + last;
        let mut succ: Vec<Vec<(u8, usize)>> = vec![Vec::new(); total];
        for (gi, g) in graphs.iter().enumerate() {
            for v in 0..g.step.len() {
                for last in 0..lasts {
                    for l in 0..letters {
                        if last < letters && l == last ^ 1 {
                            continue;
                        }
                        if let Some(u) = g.step[v][l] {
                            succ[sid(gi, v, last)].push((l as u8, sid(gi, u, l)));
                        }
                    }
                }
            }
        }
        let mut starts = Vec::new();
        for (gi, g) in graphs.iter().enumerate() {
            for v in 0..g.step.len() {
                if g.degree(v) >= 2 {
                    starts.push((gi, v, sid(gi, v, letters)));
                }
            }
        }
        // refine until the partition is stable
        let mut class = vec![0u32; total];
        let mut history: Vec<Vec<u32>> = vec![starts.iter().map(|_| 0).collect()];
        let mut count = 1;
        loop {
            let sigs: Vec<Vec<(u8, u32)>> =
                succ.iter().map(|s| s.iter().map(|&(l, t)| (l, class[t])).collect()).collect();
            let ids: BTreeMap<&Vec<(u8, u32)>, u32> = {
                let set: BTreeSet<&Vec<(u8, u32)>> = sigs.iter().collect();
                set.into_iter().enumerate().map(|(i, s)| (s, i as u32)).collect()
            };
            let next: Vec<u32> = sigs.iter().map(|s| ids[s]).collect();
            let next_count = ids.len();
            class = next;
            history.push(starts.iter().map(|&(_, _, s)| class[s]).collect());
            if next_count == count {
                break;
            }
            count = next_count;
        }
        // distinct points by final class
        let last = history.len() - 1;
        let mut by_class: BTreeMap<u32, usize> = BTreeMap::new();
        for (i, _) in starts.iter().enumerate() {
            by_class.entry(history[last][i]).or_insert(i);
        }
        let chosen: Vec<usize> = by_class.values().copied().collect();
        let final_distinct = chosen.len();
        let depth = (0..=last)
            .find(|&r| chosen.iter().map(|&i| history[r][i]).collect::<BTreeSet<_>>().len() == final_distinct)
            .unwrap_or(last)
            .max(1);
        // digit at level r: rank of the radius-r class among siblings
        let mut words: Vec<Vec<u32>> = vec![Vec::with_capacity(depth); chosen.len()];
        for r in 1..=depth {
            let mut kids: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
            for &i in &chosen {
                kids.entry(history[r - 1][i]).or_default().insert(history[r][i]);
            }
            for (p, &i) in chosen.iter().enumerate() {
                let sib = &kids[&history[r - 1][i]];
                words[p].push(sib.range(..history[r][i]).count() as u32);
            }
        }
        let mut order: Vec<usize> = (0..chosen.len()).collect();
        order.sort_by(|&a, &b| words[a].cmp(&words[b]));
        let words: Vec<Vec<u32>> = order.iter().map(|&p| words[p].clone()).collect();
        let chosen: Vec<usize> = order.iter().map(|&p| chosen[p]).collect();
        let point_of_class: BTreeMap<u32, usize> =
            chosen.iter().enumerate().map(|(p, &i)| (history[last][i], p)).collect();
        let moves = chosen
            .iter()
            .map(|&i| {
                let (gi, v, _) = starts[i];
                (0..letters)
                    .map(|l| {
                        graphs[gi].step[v][l].map(|u| point_of_class[&class[sid(gi, u, letters)]])
                    })
                    .collect()
            })
            .collect();
        let classes = chosen.iter().map(|&i| history.iter().map(|h| h[i]).collect()).collect();
        let reps = chosen.iter().map(|&i| (starts[i].0, starts[i].1)).collect();
        Ok(TreeSample { n, graph_order, depth, words, moves, classes, reps, graphs })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of distinct radius-r patterns among the sample points.
    pub fn distinct_patterns(&self, r: usize) -> usize {
        let last = self.classes.first().map_or(0, |c| c.len() - 1);
        self.classes.iter().map(|c| c[r.min(last)]).collect::<BTreeSet<_>>().len()
    }

    /// The radius-k approximation of point `p`.
    pub fn approx(&self, p: usize, k: usize) -> PointedTreeApprox {
        let (gi, v0) = self.reps[p];
        let g = &self.graphs[gi];
        let mut vertices = BTreeSet::new();
        let mut layer = vec![(Vec::<u8>::new(), v0)];
        vertices.insert(vec![]);
        for _ in 0..k {
            let mut next = Vec::new();
            for (w, v) in &layer {
                for l in children_letters(self.n, w) {
                    if let Some(u) = g.step[*v][l as usize] {
                        let mut c = w.clone();
                        c.push(l);
                        next.push((c, u));
                    }
                }
            }
            vertices.extend(next.iter().map(|(w, _)| w.clone()));
            layer = next;
        }
        PointedTreeApprox { n: self.n, radius: k, vertices }
    }

    pub fn metric_space(&self) -> Result<MetricSpace> {
        let space = LevelSpace::admissible(self.words.clone(), true)?;
        MetricSpace::new(space, Metric::Weighted(WeightedMetric::power(2)?))
    }

    /// The 2n translations by a_i^{±1}, each declared 2-Lipschitz.
    pub fn pseudogroup(&self) -> Result<Pseudogroup> {
        let ms = self.metric_space()?;
        let mut gens = Vec::new();
        for l in 0..2 * self.n {
            let rules: Vec<(Vec<u32>, Vec<u32>)> = self
                .moves
                .iter()
                .enumerate()
                .filter_map(|(p, m)| m[l as usize].map(|q| (self.words[p].clone(), self.words[q].clone())))
                .collect();
            gens.push(PartialMap::new(&ms, letter_name(l), self.depth, rules, qint(2))?);
        }
        Pseudogroup::new(ms, self.depth, gens, ActionKind::Pseudogroup)
    }
}

/// Translation pseudogroup on the periodic sample of X_n built from graphs of order
/// at most `graph_order`.
pub fn treespace_pseudogroup(n: u8, graph_order: usize) -> Result<Pseudogroup> {
    if n < 2 {
        return usage("treespace needs rank n >= 2");
    }
    TreeSample::build(n, graph_order)?.pseudogroup()
}

/// Count of points of X_n within `radius` patterns that a u64 can hold, for reports.
pub fn pattern_count_u64(n: u32, k: usize) -> Option<u64> {
    pattern_count(n, k).to_u64()
}
