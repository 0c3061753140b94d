//! Exhaustive finite model of a pseudogroup at its working depth.
//!
//! Points are the admissible words of the working depth, generators become
//! partial permutations of point indices, and pairwise distances are stored
//! as ranks into the sorted list of distinct distance values.

use std::collections::{HashMap, HashSet, VecDeque};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderSet;
use crate::error::{usage, Error, Result};
use crate::metric::Metric;
use crate::rational::{pow, Q};
use crate::space::{first_disagreement, Point};

use super::{Letter, PartialMap, Pseudogroup, Word};

pub const MAX_MODEL_POINTS: usize = 6000;
const MAX_BALL_MAPS: usize = 200_000;
const NONE: u32 = u32::MAX;
/// Step marker for pairs never separated.
pub(crate) const UNREACHED: u8 = u8::MAX;

pub struct FiniteModel {
    pub depth: usize,
    pub points: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, u32>,
    pub letters: Vec<Letter>,
    action: Vec<Vec<u32>>,
    values: Vec<Q>,
    rank: Vec<u16>,
    labels: Vec<String>,
    piecewise: bool,
}

impl FiniteModel {
    pub fn new(g: &Pseudogroup) -> Result<Self> {
        let count = g.ms.space.count(g.depth);
        if count > MAX_MODEL_POINTS.into() {
            return Err(Error::Resource {
                message: format!("{count} points at depth {} exceed the model budget {MAX_MODEL_POINTS}", g.depth),
                partial: None,
            });
        }
        let points = g.ms.space.words(g.depth)?;
        let n = points.len();
        let index: HashMap<Vec<u32>, u32> = points.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();

        let mut letters = Vec::new();
        let mut action = Vec::new();
        for (i, gen) in g.generators.iter().enumerate() {
            let fwd = gen.refine(&g.ms, g.depth)?;
            let mut f = vec![NONE; n];
            let mut b = vec![NONE; n];
            for (a, img) in fwd.rules() {
                let (ia, ib) = (index[a], index[img]);
                f[ia as usize] = ib;
                b[ib as usize] = ia;
            }
            letters.push(Letter { generator: i, inverse: false });
            action.push(f);
            letters.push(Letter { generator: i, inverse: true });
            action.push(b);
        }

        // distance classes
        let coherent = g.ms.space.is_coherent();
        let mut key_of_pair: Vec<u32> = vec![0; n * n];
        let mut keys: HashMap<(u32, u128), u32> = HashMap::new();
        let mut key_values: Vec<Q> = Vec::new();
        if g.depth > 127 {
            return Err(Error::Resource { message: "model depth above 127".into(), partial: None });
        }
        for i in 0..n {
            for j in 0..n {
                let (u, v) = (&points[i], &points[j]);
                let key = if coherent {
                    let l = first_disagreement(u, v).unwrap_or(0) as u128;
                    (u.first().copied().unwrap_or(0), l)
                } else {
                    let mask = u.iter().zip(v).enumerate().fold(0u128, |m, (k, (a, b))| if a != b { m | 1 << k } else { m });
                    (u.first().copied().unwrap_or(0), mask)
                };
                let next = keys.len() as u32;
                let id = *keys.entry(key).or_insert_with(|| {
                    key_values.push(g.ms.distance_words(u, v));
                    next
                });
                key_of_pair[i * n + j] = id;
            }
        }
        let mut values = key_values.clone();
        values.sort();
        values.dedup();
        if values.len() > u16::MAX as usize {
            return Err(Error::Resource { message: "too many distinct distances".into(), partial: None });
        }
        let key_rank: Vec<u16> =
            key_values.iter().map(|v| values.binary_search(v).unwrap_or(0) as u16).collect();
        let rank = key_of_pair.into_iter().map(|k| key_rank[k as usize]).collect();

        Ok(FiniteModel {
            depth: g.depth,
            points,
            index,
            letters,
            action,
            values,
            rank,
            labels: g.labels(),
            piecewise: matches!(g.ms.metric, Metric::Piecewise(_)),
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn index_of(&self, word: &[u32]) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rank(&self, i: u32, j: u32) -> u16 {
        self.rank[i as usize * self.n() + j as usize]
    }

    pub fn distance(&self, i: u32, j: u32) -> &Q {
        &self.values[self.rank(i, j) as usize]
    }

    pub fn value(&self, rank: u16) -> &Q {
        &self.values[rank as usize]
    }

    /// Image of point `i` under letter index `l`.
    pub fn step(&self, l: usize, i: u32) -> Option<u32> {
        let v = self.action[l][i as usize];
        (v != NONE).then_some(v)
    }

    /// Image of point `i` under a word (right to left).
    pub fn apply_word(&self, w: &Word, mut i: u32) -> Option<u32> {
        for l in w.letters.iter().rev() {
            let li = self.letters.iter().position(|x| x == l)?;
            i = self.step(li, i)?;
        }
        Some(i)
    }

    /// Leftmost point of every depth-`k` cylinder, and each point's cylinder id.
    pub fn cylinder_reps(&self, k: usize) -> (Vec<u32>, Vec<u32>) {
        let mut reps = Vec::new();
        let mut cyl = Vec::with_capacity(self.n());
        for (i, p) in self.points.iter().enumerate() {
            let new = match reps.last() {
                None => true,
                Some(&r) => self.points[r as usize][..k] != p[..k],
            };
            if new {
                reps.push(i as u32);
            }
            cyl.push(reps.len() as u32 - 1);
        }
        (reps, cyl)
    }

    fn threshold_rank(&self, eps: &Q) -> u16 {
        self.values.partition_point(|v| v < eps) as u16
    }

    fn separated_now(&self, i: u32, j: u32, threshold: u16) -> bool {
        if i == j {
            return false;
        }
        if self.rank(i, j) >= threshold {
            return true;
        }
        // distinct top-level pieces are separated by convention
        self.piecewise && self.points[i as usize].first() != self.points[j as usize].first()
    }

    /// For every ordered pair, the least number of letters moving it at least
    /// `eps` apart (`UNREACHED` if never).
    pub fn separation_steps(&self, eps: &Q) -> Vec<u8> {
        let n = self.n();
        let threshold = self.threshold_rank(eps);
        let mut steps = vec![UNREACHED; n * n];
        let mut queue = VecDeque::new();
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if self.separated_now(i, j, threshold) {
                    steps[i as usize * n + j as usize] = 0;
                    queue.push_back((i, j));
                }
            }
        }
        while let Some((x, y)) = queue.pop_front() {
            let t = steps[x as usize * n + y as usize];
            if t + 1 == UNREACHED {
                continue;
            }
            for l in 0..self.letters.len() {
                // predecessors under letter l are images under its inverse
                let inv = l ^ 1;
                if let (Some(a), Some(b)) = (self.step(inv, x), self.step(inv, y)) {
                    let slot = &mut steps[a as usize * n + b as usize];
                    if *slot == UNREACHED {
                        *slot = t + 1;
                        queue.push_back((a, b));
                    }
                }
            }
        }
        steps
    }

    /// A shortest word separating the pair, given the table from `separation_steps`.
    pub fn separating_word(&self, steps: &[u8], mut x: u32, mut y: u32) -> Option<Word> {
        let n = self.n();
        let mut t = steps[x as usize * n + y as usize];
        if t == UNREACHED {
            return None;
        }
        let mut applied = Vec::new();
        while t > 0 {
            let mut moved = false;
            for l in 0..self.letters.len() {
                if let (Some(a), Some(b)) = (self.step(l, x), self.step(l, y)) {
                    if steps[a as usize * n + b as usize] == t - 1 {
                        applied.push(self.letters[l]);
                        x = a;
                        y = b;
                        t -= 1;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                return None;
            }
        }
        applied.reverse();
        Some(Word::new(applied))
    }

    /// Points reached from `start` by words of length at most `alpha`.
    pub fn orbit_points(&self, start: u32, alpha: usize) -> Vec<u32> {
        let mut seen = vec![false; self.n()];
        seen[start as usize] = true;
        let mut frontier = vec![start];
        let mut all = vec![start];
        for _ in 0..alpha {
            let mut next = Vec::new();
            for &p in &frontier {
                for l in 0..self.letters.len() {
                    if let Some(q) = self.step(l, p) {
                        if !seen[q as usize] {
                            seen[q as usize] = true;
                            next.push(q);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            all.extend_from_slice(&next);
            frontier = next;
        }
        all.sort();
        all
    }
}

#[derive(Clone, Debug)]
pub struct BallEntry {
    pub word: Word,
    /// Image index per point, `u32::MAX` where undefined.
    pub graph: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct WordBall {
    pub alpha: usize,
    pub depth: usize,
    /// Distinct nonempty maps, identity first, in breadth-first word order.
    pub entries: Vec<BallEntry>,
    /// A word realizing the empty map, when one occurs.
    pub empty_word: Option<Word>,
    /// sum_{i <= alpha} (2 nu)^i
    pub bound: u128,
}

impl WordBall {
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    /// Entries as rewrite tables at the model depth.
    pub fn maps(&self, model: &FiniteModel, g: &Pseudogroup) -> Vec<PartialMap> {
        let c = g.max_lipschitz();
        self.entries
            .iter()
            .map(|e| {
                let table = e
                    .graph
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != NONE)
                    .map(|(i, &v)| (model.points[i].clone(), model.points[v as usize].clone()))
                    .collect();
                PartialMap::from_parts(
                    &g.ms,
                    e.word.render(&g.labels()),
                    model.depth,
                    table,
                    pow(&c, e.word.letters.len() as u32),
                )
            })
            .collect()
    }
}

fn ball_bound(nu: usize, alpha: usize) -> u128 {
    let step = 2 * nu as u128;
    let mut total = 0u128;
    let mut term = 1u128;
    for _ in 0..=alpha {
        total = total.saturating_add(term);
        term = term.saturating_mul(step);
    }
    total
}

/// Distinct maps of word length at most `alpha`, deduplicated by graph.
pub fn word_ball(g: &Pseudogroup, alpha: usize) -> Result<WordBall> {
    let model = FiniteModel::new(g)?;
    word_ball_in(&model, g.generators.len(), alpha)
}

pub(crate) fn word_ball_in(model: &FiniteModel, nu: usize, alpha: usize) -> Result<WordBall> {
    let n = model.n();
    let identity: Vec<u32> = (0..n as u32).collect();
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    seen.insert(identity.clone());
    let mut entries = vec![BallEntry { word: Word::default(), graph: identity }];
    let mut empty_word = None;
    let mut frontier = vec![0usize];
    for _ in 0..alpha {
        let mut next = Vec::new();
        for &e in &frontier {
            for l in 0..model.letters.len() {
                let graph: Vec<u32> = entries[e]
                    .graph
                    .iter()
                    .map(|&v| if v == NONE { NONE } else { model.action[l][v as usize] })
                    .collect();
                if graph.iter().all(|&v| v == NONE) {
                    if empty_word.is_none() {
                        let mut w = entries[e].word.clone();
                        w.letters.insert(0, model.letters[l]);
                        empty_word = Some(w);
                    }
                    continue;
                }
                if seen.contains(&graph) {
                    continue;
                }
                seen.insert(graph.clone());
                let mut word = entries[e].word.clone();
                word.letters.insert(0, model.letters[l]);
                entries.push(BallEntry { word, graph });
                next.push(entries.len() - 1);
                if entries.len() > MAX_BALL_MAPS {
                    return Err(Error::Resource {
                        message: format!("word ball exceeded {MAX_BALL_MAPS} maps"),
                        partial: Some(serde_json::json!({ "maps_found": entries.len(), "complete": false })),
                    });
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let bound = ball_bound(nu, alpha);
    debug_assert!(entries.len() as u128 <= bound);
    Ok(WordBall { alpha, depth: model.depth, entries, empty_word, bound })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub word: String,
    pub length: usize,
    pub pairs: u64,
    /// max over pairs of max(d'/d, d/d')
    #[serde(with = "crate::rational::serde_q")]
    pub distortion: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub min_ratio: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub max_ratio: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub bound: Q,
    pub violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    #[serde(with = "crate::rational::serde_q")]
    pub c: Q,
    pub alpha: usize,
    pub depth: usize,
    pub rows: Vec<AuditRow>,
    pub violations: u64,
}

/// Measured two-sided distortion of every map in the alpha-ball against C^length.
pub fn lipschitz_audit(g: &Pseudogroup, alpha: usize, depth: usize) -> Result<AuditReport> {
    if depth > g.depth {
        return usage(format!("audit depth {depth} exceeds the working depth {}", g.depth));
    }
    let model = FiniteModel::new(g)?;
    let ball = word_ball_in(&model, g.generators.len(), alpha)?;
    let c = g.max_lipschitz();
    let (reps, _) = model.cylinder_reps(depth);
    let labels = g.labels();
    let mut rows = Vec::new();
    let mut total = 0;
    for e in &ball.entries {
        let len = e.word.letters.len();
        let bound = pow(&c, len as u32);
        let inv_bound = Q::one() / &bound;
        let mut combos: HashMap<(u16, u16), u64> = HashMap::new();
        let defined: Vec<u32> = reps.iter().copied().filter(|&i| e.graph[i as usize] != NONE).collect();
        for (a, &i) in defined.iter().enumerate() {
            for &j in &defined[a + 1..] {
                let r = model.rank(i, j);
                let s = model.rank(e.graph[i as usize], e.graph[j as usize]);
                *combos.entry((r, s)).or_default() += 1;
            }
        }
        let mut pairs = 0;
        let mut violations = 0;
        let mut min_ratio: Option<Q> = None;
        let mut max_ratio: Option<Q> = None;
        for (&(r, s), &cnt) in &combos {
            pairs += cnt;
            let (d, d2) = (model.value(r), model.value(s));
            if d.is_zero() || d2.is_zero() {
                continue;
            }
            let ratio = d2 / d;
            if ratio > bound || ratio < inv_bound {
                violations += cnt;
            }
            if min_ratio.as_ref().is_none_or(|m| &ratio < m) {
                min_ratio = Some(ratio.clone());
            }
            if max_ratio.as_ref().is_none_or(|m| &ratio > m) {
                max_ratio = Some(ratio);
            }
        }
        let min_ratio = min_ratio.unwrap_or_else(Q::one);
        let max_ratio = max_ratio.unwrap_or_else(Q::one);
        let distortion = std::cmp::max(max_ratio.clone(), Q::one() / &min_ratio);
        total += violations;
        rows.push(AuditRow {
            word: e.word.render(&labels),
            length: len,
            pairs,
            distortion,
            min_ratio,
            max_ratio,
            bound,
            violations,
        });
    }
    Ok(AuditReport { c, alpha, depth, rows, violations: total })
}

/// Depth-`k` cylinders reached from `p` by words of length at most `alpha`.
pub fn orbit(g: &Pseudogroup, p: &Point, alpha: usize, k: usize) -> Result<CylinderSet> {
    if k > g.depth || p.depth() != g.depth {
        return usage("orbit needs a point at the working depth and k within it");
    }
    let model = FiniteModel::new(g)?;
    let start = model.index_of(&p.digits).ok_or_else(|| Error::Usage(format!("point {p} not in the space")))?;
    let pts = model.orbit_points(start, alpha);
    Ok(CylinderSet::from_prefixes(&g.ms.space, pts.iter().map(|&i| model.points[i as usize][..k].to_vec())))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MinimalityVerdict {
    Minimal,
    NotMinimal { point: Vec<u32>, missing: Vec<u32>, reached: usize, cylinders: usize },
    Inconclusive { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub k: usize,
    pub alpha: usize,
    pub depth: usize,
    #[serde(flatten)]
    pub verdict: MinimalityVerdict,
}

impl MinimalityReport {
    pub fn is_minimal(&self) -> bool {
        matches!(self.verdict, MinimalityVerdict::Minimal)
    }
}

const MINIMALITY_BUDGET: u128 = 4_000_000_000;

/// Whether every point reaches every depth-`k` cylinder within word length `alpha`.
pub fn minimality_check(g: &Pseudogroup, k: usize, alpha: usize) -> Result<MinimalityReport> {
    if k > g.depth {
        return usage(format!("k = {k} exceeds the working depth {}", g.depth));
    }
    let report = |verdict| MinimalityReport { k, alpha, depth: g.depth, verdict };
    let model = match FiniteModel::new(g) {
        Ok(m) => m,
        Err(Error::Resource { message, .. }) => {
            return Ok(report(MinimalityVerdict::Inconclusive { reason: message }));
        }
        Err(e) => return Err(e),
    };
    let n = model.n() as u128;
    if n * n * model.letters.len() as u128 > MINIMALITY_BUDGET {
        return Ok(report(MinimalityVerdict::Inconclusive { reason: "orbit search budget exceeded".into() }));
    }
    let (reps, cyl) = model.cylinder_reps(k);
    for start in 0..model.n() as u32 {
        let mut hit = vec![false; reps.len()];
        for q in model.orbit_points(start, alpha) {
            hit[cyl[q as usize] as usize] = true;
        }
        if let Some(miss) = hit.iter().position(|h| !h) {
            return Ok(report(MinimalityVerdict::NotMinimal {
                point: model.points[start as usize].clone(),
                missing: model.points[reps[miss] as usize][..k].to_vec(),
                reached: hit.iter().filter(|h| **h).count(),
                cylinders: reps.len(),
            }));
        }
    }
    Ok(report(MinimalityVerdict::Minimal))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub word: Option<String>,
    pub length: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansivityReport {
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
    pub alpha_max: usize,
    pub k: usize,
    pub depth: usize,
    pub pairs: Vec<PairWitness>,
    pub witnessed: usize,
    pub note: String,
}

/// For each pair of distinct depth-`k` cylinders (via leftmost points), a
/// shortest word of length at most `alpha_max` moving them `epsilon` apart.
pub fn expansivity_witness(g: &Pseudogroup, eps: &Q, alpha_max: usize, k: usize) -> Result<ExpansivityReport> {
    if eps <= &Q::zero() {
        return usage("epsilon must be positive");
    }
    if k > g.depth {
        return usage(format!("k = {k} exceeds the working depth {}", g.depth));
    }
    let model = FiniteModel::new(g)?;
    let steps = model.separation_steps(eps);
    let (reps, _) = model.cylinder_reps(k);
    let labels = g.labels();
    let n = model.n();
    let mut pairs = Vec::new();
    let mut witnessed = 0;
    for (a, &i) in reps.iter().enumerate() {
        for &j in &reps[a + 1..] {
            let t = steps[i as usize * n + j as usize];
            let word = if t != UNREACHED && (t as usize) <= alpha_max {
                model.separating_word(&steps, i, j)
            } else {
                None
            };
            if word.is_some() {
                witnessed += 1;
            }
            pairs.push(PairWitness {
                a: model.points[i as usize].clone(),
                b: model.points[j as usize].clone(),
                length: word.as_ref().map(|w| w.letters.len()),
                word: word.map(|w| w.render(&labels)),
            });
        }
    }
    Ok(ExpansivityReport {
        epsilon: eps.clone(),
        alpha_max,
        k,
        depth: g.depth,
        pairs,
        witnessed,
        note: "absence of a witness within alpha_max is evidence, not proof".into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityRow {
    #[serde(with = "crate::rational::serde_q")]
    pub delta: Q,
    pub pairs: u64,
    #[serde(with = "crate::rational::serde_q")]
    pub sup_image: Q,
    pub below_epsilon: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityReport {
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
    pub alpha_max: usize,
    pub depth: usize,
    pub rows: Vec<EquicontinuityRow>,
}

/// For each initial distance class, the largest image distance reached by
/// words of length at most `alpha_max`.
pub fn equicontinuity_probe(g: &Pseudogroup, eps: &Q, alpha_max: usize) -> Result<EquicontinuityReport> {
    if eps <= &Q::zero() {
        return usage("epsilon must be positive");
    }
    let model = FiniteModel::new(g)?;
    let n = model.n();
    let mut best: Vec<u16> = model.rank.clone();
    for _ in 0..alpha_max {
        let mut next = best.clone();
        for x in 0..n as u32 {
            for y in 0..n as u32 {
                let slot = x as usize * n + y as usize;
                for l in 0..model.letters.len() {
                    if let (Some(a), Some(b)) = (model.step(l, x), model.step(l, y)) {
                        let v = best[a as usize * n + b as usize];
                        if v > next[slot] {
                            next[slot] = v;
                        }
                    }
                }
            }
        }
        if next == best {
            break;
        }
        best = next;
    }
    let mut by_class: Vec<(u64, u16)> = vec![(0, 0); model.values.len()];
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let r = model.rank[x * n + y] as usize;
            by_class[r].0 += 1;
            by_class[r].1 = by_class[r].1.max(best[x * n + y]);
        }
    }
    let rows = by_class
        .iter()
        .enumerate()
        .filter(|(r, (cnt, _))| *r > 0 && *cnt > 0)
        .map(|(r, &(cnt, sup))| EquicontinuityRow {
            delta: model.values[r].clone(),
            pairs: cnt,
            sup_image: model.values[sup as usize].clone(),
            below_epsilon: &model.values[sup as usize] < eps,
        })
        .collect();
    Ok(EquicontinuityReport { epsilon: eps.clone(), alpha_max, depth: g.depth, rows })
}
