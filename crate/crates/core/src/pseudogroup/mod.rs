//! Pseudogroups generated by prefix-rewrite partial homeomorphisms.

mod catalog;
mod model;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderSet;
use crate::error::{input, usage, Result};
use crate::metric::MetricSpace;
use crate::rational::{fmt_q, pow, Q};
use crate::space::Point;

pub use catalog::{
    add_mixed_radix, odometer_system, odometer_with_steps, sturmian_factors, sturmian_system,
    sturmian_word, ContinuedFraction,
};
pub use model::{
    equicontinuity_probe, expansivity_witness, lipschitz_audit, minimality_check, orbit, word_ball,
    AuditReport, AuditRow, BallEntry, EquicontinuityReport, EquicontinuityRow, ExpansivityReport,
    FiniteModel, MinimalityReport, MinimalityVerdict, PairWitness, WordBall, MAX_MODEL_POINTS,
};

/// A bijection between clopen sets, given by rewriting depth-k prefixes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialMap {
    pub label: String,
    depth: usize,
    table: BTreeMap<Vec<u32>, Vec<u32>>,
    domain: CylinderSet,
    range: CylinderSet,
    lipschitz: Q,
}

impl PartialMap {
    /// Builds and validates a rewrite table of the given depth.
    pub fn new(
        ms: &MetricSpace,
        label: impl Into<String>,
        depth: usize,
        rules: impl IntoIterator<Item = (Vec<u32>, Vec<u32>)>,
        lipschitz: Q,
    ) -> Result<Self> {
        let label = label.into();
        ms.space.check_depth(depth)?;
        let mut table = BTreeMap::new();
        let mut seen_out = std::collections::BTreeSet::new();
        for (a, b) in rules {
            if a.len() != depth || b.len() != depth {
                return input(format!("{label}: rule {a:?} -> {b:?} is not at table depth {depth}"));
            }
            if !ms.space.is_admissible(&a) || !ms.space.is_admissible(&b) {
                return input(format!("{label}: rule {a:?} -> {b:?} leaves the space"));
            }
            if !seen_out.insert(b.clone()) {
                return input(format!("{label}: two prefixes map to {b:?}"));
            }
            if table.insert(a.clone(), b).is_some() {
                return input(format!("{label}: prefix {a:?} has two images"));
            }
        }
        if lipschitz < Q::one() {
            return input(format!("{label}: Lipschitz constant below 1"));
        }
        // tails must transfer: the extensions of a and of its image must coincide
        if ms.space.depth_limit().is_some_and(|d| d > depth) {
            let full = ms.space.depth_limit().unwrap_or(depth);
            for (a, b) in &table {
                let ta: Vec<Vec<u32>> = ms.space.words_under(a, full)?.into_iter().map(|w| w[depth..].to_vec()).collect();
                let tb: Vec<Vec<u32>> = ms.space.words_under(b, full)?.into_iter().map(|w| w[depth..].to_vec()).collect();
                if ta != tb {
                    return input(format!("{label}: tails below {a:?} and {b:?} differ; tabulate deeper"));
                }
            }
        }
        let domain = CylinderSet::from_prefixes(&ms.space, table.keys().cloned());
        let range = CylinderSet::from_prefixes(&ms.space, table.values().cloned());
        let map = PartialMap { label, depth, table, domain, range, lipschitz };
        let measured = map.measured_distortion(ms);
        if measured > map.lipschitz {
            return input(format!(
                "{}: measured distortion {} exceeds declared {}",
                map.label,
                fmt_q(&measured),
                fmt_q(&map.lipschitz)
            ));
        }
        Ok(map)
    }

    pub fn identity(_ms: &MetricSpace) -> Self {
        let mut table = BTreeMap::new();
        table.insert(Vec::new(), Vec::new());
        PartialMap {
            label: "id".into(),
            depth: 0,
            table,
            domain: CylinderSet::full(),
            range: CylinderSet::full(),
            lipschitz: Q::one(),
        }
    }

    pub fn empty(depth: usize) -> Self {
        PartialMap {
            label: "empty".into(),
            depth,
            table: BTreeMap::new(),
            domain: CylinderSet::empty(),
            range: CylinderSet::empty(),
            lipschitz: Q::one(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn rules(&self) -> &BTreeMap<Vec<u32>, Vec<u32>> {
        &self.table
    }

    pub fn domain(&self) -> &CylinderSet {
        &self.domain
    }

    pub fn range(&self) -> &CylinderSet {
        &self.range
    }

    pub fn lipschitz(&self) -> &Q {
        &self.lipschitz
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Largest two-sided distortion over pairs of table prefixes.
    pub fn measured_distortion(&self, ms: &MetricSpace) -> Q {
        let rules: Vec<(&Vec<u32>, &Vec<u32>)> = self.table.iter().collect();
        let mut worst = Q::one();
        for i in 0..rules.len() {
            for j in i + 1..rules.len() {
                let d = ms.distance_words(rules[i].0, rules[j].0);
                let e = ms.distance_words(rules[i].1, rules[j].1);
                let zero = Q::default();
                if d == zero || e == zero {
                    continue;
                }
                let r = if e > d { &e / &d } else { &d / &e };
                if r > worst {
                    worst = r;
                }
            }
        }
        worst
    }

    pub fn inverse(&self) -> PartialMap {
        PartialMap {
            label: invert_label(&self.label),
            depth: self.depth,
            table: self.table.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
            domain: self.range.clone(),
            range: self.domain.clone(),
            lipschitz: self.lipschitz.clone(),
        }
    }

    /// The same map tabulated at a deeper level.
    pub fn refine(&self, ms: &MetricSpace, depth: usize) -> Result<PartialMap> {
        if depth < self.depth {
            return usage(format!("cannot refine depth {} down to {depth}", self.depth));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        ms.space.check_depth(depth)?;
        let mut table = BTreeMap::new();
        for (a, b) in &self.table {
            for w in ms.space.words_under(a, depth)? {
                let mut img = b.clone();
                img.extend_from_slice(&w[self.depth..]);
                table.insert(w, img);
            }
        }
        Ok(PartialMap { table, depth, ..self.clone() })
    }

    /// Image of a digit string of depth at least the table depth.
    pub fn apply(&self, word: &[u32]) -> Option<Vec<u32>> {
        if word.len() < self.depth {
            return None;
        }
        let img = self.table.get(&word[..self.depth])?;
        let mut out = img.clone();
        out.extend_from_slice(&word[self.depth..]);
        Some(out)
    }

    /// Same graph as `other` once both are tabulated at a common depth.
    pub fn same_graph(&self, other: &PartialMap, ms: &MetricSpace) -> Result<bool> {
        let d = self.depth.max(other.depth);
        Ok(self.refine(ms, d)?.table == other.refine(ms, d)?.table)
    }

    /// The restriction of the identity to this map's domain.
    pub fn identity_on_domain(&self) -> PartialMap {
        PartialMap {
            label: "id".into(),
            depth: self.depth,
            table: self.table.keys().map(|a| (a.clone(), a.clone())).collect(),
            domain: self.domain.clone(),
            range: self.domain.clone(),
            lipschitz: Q::one(),
        }
    }

    pub(crate) fn from_parts(
        ms: &MetricSpace,
        label: String,
        depth: usize,
        table: BTreeMap<Vec<u32>, Vec<u32>>,
        lipschitz: Q,
    ) -> PartialMap {
        let domain = CylinderSet::from_prefixes(&ms.space, table.keys().cloned());
        let range = CylinderSet::from_prefixes(&ms.space, table.values().cloned());
        PartialMap { label, depth, table, domain, range, lipschitz }
    }
}

fn invert_label(label: &str) -> String {
    match label.strip_suffix("^-1") {
        Some(base) => base.to_string(),
        None => format!("{label}^-1"),
    }
}

/// `f` after `g`, on the maximal domain g^{-1}(range g ∩ dom f).
pub fn compose(f: &PartialMap, g: &PartialMap, ms: &MetricSpace) -> Result<PartialMap> {
    let d = f.depth.max(g.depth);
    let f = f.refine(ms, d)?;
    let g = g.refine(ms, d)?;
    let table: BTreeMap<Vec<u32>, Vec<u32>> =
        g.table.iter().filter_map(|(a, b)| f.table.get(b).map(|c| (a.clone(), c.clone()))).collect();
    let label = format!("{} {}", f.label, g.label);
    Ok(PartialMap::from_parts(ms, label, d, table, &f.lipschitz * &g.lipschitz))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn inv(self) -> Letter {
        Letter { generator: self.generator, inverse: !self.inverse }
    }
}

/// A word in the generators and their inverses; applied right to left.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    pub letters: Vec<Letter>,
}

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word { letters }
    }

    pub fn letter(generator: usize) -> Self {
        Word { letters: vec![Letter { generator, inverse: false }] }
    }

    /// Freely reduced copy.
    pub fn reduced(&self) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&l.inv()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { letters: out }
    }

    pub fn len(&self) -> usize {
        self.reduced().letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| l.inv()).collect() }
    }

    /// Concatenation `self · other` (other acts first).
    pub fn then_after(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    pub fn render(&self, labels: &[String]) -> String {
        if self.letters.is_empty() {
            return "id".into();
        }
        self.letters
            .iter()
            .map(|l| {
                let base = labels.get(l.generator).cloned().unwrap_or_else(|| format!("g{}", l.generator));
                if l.inverse {
                    format!("{base}^-1")
                } else {
                    base
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&[]))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    #[default]
    Pseudogroup,
    /// Generators are restrictions of globally defined homeomorphisms.
    GroupAction,
}

/// A compactly generated pseudogroup, truncated at `depth`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pseudogroup {
    pub ms: MetricSpace,
    pub depth: usize,
    pub generators: Vec<PartialMap>,
    pub kind: ActionKind,
}

impl Pseudogroup {
    pub fn new(ms: MetricSpace, depth: usize, generators: Vec<PartialMap>, kind: ActionKind) -> Result<Self> {
        if generators.is_empty() {
            return input("a pseudogroup needs at least one generator");
        }
        ms.space.check_depth(depth)?;
        if let Some(g) = generators.iter().find(|g| g.depth > depth) {
            return input(format!("generator {} is tabulated below the working depth {depth}", g.label));
        }
        Ok(Pseudogroup { ms, depth, generators, kind })
    }

    pub fn labels(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.label.clone()).collect()
    }

    /// The largest declared generator constant.
    pub fn max_lipschitz(&self) -> Q {
        self.generators.iter().map(|g| g.lipschitz.clone()).max().unwrap_or_else(Q::one)
    }

    pub fn letter_map(&self, l: Letter) -> PartialMap {
        let g = &self.generators[l.generator];
        if l.inverse {
            g.inverse()
        } else {
            g.clone()
        }
    }

    /// The map of a word, composed on maximal domains.
    pub fn word_map(&self, w: &Word) -> Result<PartialMap> {
        let mut acc = PartialMap::identity(&self.ms);
        for &l in w.letters.iter().rev() {
            acc = compose(&self.letter_map(l), &acc, &self.ms)?;
        }
        acc.label = w.render(&self.labels());
        acc.lipschitz = pow(&self.max_lipschitz(), w.letters.len() as u32);
        Ok(acc)
    }
}

/// Applies the letters of `w` right to left; `None` when the point leaves a domain.
pub fn evaluate(w: &Word, p: &Point, g: &Pseudogroup) -> Result<Option<Point>> {
    g.ms.space.check_point(p)?;
    let mut cur = p.digits.clone();
    for &l in w.letters.iter().rev() {
        let gen = &g.generators[l.generator];
        if cur.len() < gen.depth {
            return usage(format!("point depth {} is below table depth {}", cur.len(), gen.depth));
        }
        let next = if l.inverse {
            gen.table.iter().find(|(_, b)| **b == cur[..gen.depth]).map(|(a, _)| {
                let mut out = a.clone();
                out.extend_from_slice(&cur[gen.depth..]);
                out
            })
        } else {
            gen.apply(&cur)
        };
        match next {
            Some(n) => cur = n,
            None => return Ok(None),
        }
    }
    Ok(Some(Point::new(cur)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qint;
    use crate::space::LevelSpace;

    fn dyadic(depth: usize) -> MetricSpace {
        MetricSpace::coherent(LevelSpace::mixed_radix(vec![2; depth]).unwrap())
    }

    fn flip_first(ms: &MetricSpace) -> PartialMap {
        PartialMap::new(ms, "f", 1, [(vec![0], vec![1]), (vec![1], vec![0])], qint(1)).unwrap()
    }

    #[test]
    fn rejects_non_bijective_tables() {
        let ms = dyadic(3);
        assert!(PartialMap::new(&ms, "bad", 1, [(vec![0], vec![1]), (vec![1], vec![1])], qint(1)).is_err());
        assert!(PartialMap::new(&ms, "bad", 1, [(vec![0], vec![0, 1])], qint(1)).is_err());
    }

    #[test]
    fn rejects_understated_lipschitz_constant() {
        let ms = dyadic(3);
        // swaps a level-1 disagreement with a level-2 one
        let rules = [(vec![0, 0], vec![0, 0]), (vec![1, 0], vec![0, 1])];
        assert!(PartialMap::new(&ms, "g", 2, rules.clone(), qint(1)).is_err());
        assert!(PartialMap::new(&ms, "g", 2, rules, qint(3)).is_ok());
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let ms = dyadic(3);
        let f = flip_first(&ms);
        let id = PartialMap::identity(&ms);
        assert!(compose(&id, &f, &ms).unwrap().same_graph(&f, &ms).unwrap());
        let back = compose(&f.inverse(), &f, &ms).unwrap();
        assert!(back.same_graph(&f.identity_on_domain(), &ms).unwrap());
    }

    #[test]
    fn disjoint_domains_give_the_empty_map() {
        let ms = dyadic(2);
        let a = PartialMap::new(&ms, "a", 1, [(vec![0], vec![0])], qint(1)).unwrap();
        let b = PartialMap::new(&ms, "b", 1, [(vec![1], vec![1])], qint(1)).unwrap();
        let c = compose(&a, &b, &ms).unwrap();
        assert!(c.is_empty() && c.domain().is_empty());
    }

    #[test]
    fn word_reduction() {
        let a = Letter { generator: 0, inverse: false };
        let b = Letter { generator: 1, inverse: false };
        let w = Word::new(vec![a, b, b.inv(), a, a.inv()]);
        assert_eq!(w.reduced(), Word::new(vec![a]));
        assert_eq!(w.len(), 1);
        assert_eq!(Word::new(vec![a, b]).inverse(), Word::new(vec![b.inv(), a.inv()]));
    }

    #[test]
    fn evaluate_empty_word_and_undefined_points() {
        let ms = dyadic(2);
        let a = PartialMap::new(&ms, "a", 1, [(vec![0], vec![1])], qint(1)).unwrap();
        let g = Pseudogroup::new(ms, 2, vec![a], ActionKind::Pseudogroup).unwrap();
        let p = Point::new(vec![0, 1]);
        assert_eq!(evaluate(&Word::default(), &p, &g).unwrap(), Some(p.clone()));
        assert_eq!(evaluate(&Word::letter(0), &p, &g).unwrap(), Some(Point::new(vec![1, 1])));
        let twice = Word::new(vec![Letter { generator: 0, inverse: false }; 2]);
        assert_eq!(evaluate(&twice, &p, &g).unwrap(), None);
    }
}
