use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::space::LevelSpace;

/// A clopen set given by a canonical set of cylinder prefixes.
///
/// Canonical means: every prefix is admissible, no prefix extends another,
/// and no parent has all of its admissible children present.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CylinderSet {
    cylinders: BTreeSet<Vec<u32>>,
}

fn is_prefix(p: &[u32], w: &[u32]) -> bool {
    p.len() <= w.len() && &w[..p.len()] == p
}

impl CylinderSet {
    pub fn empty() -> Self {
        CylinderSet::default()
    }

    pub fn full() -> Self {
        let mut cylinders = BTreeSet::new();
        cylinders.insert(Vec::new());
        CylinderSet { cylinders }
    }

    pub fn cylinder(space: &LevelSpace, prefix: &[u32]) -> Self {
        Self::from_prefixes(space, [prefix.to_vec()])
    }

    pub fn from_prefixes<I>(space: &LevelSpace, prefixes: I) -> Self
    where
        I: IntoIterator<Item = Vec<u32>>,
    {
        let mut raw: Vec<Vec<u32>> = prefixes.into_iter().filter(|p| space.is_admissible(p)).collect();
        raw.sort();
        raw.dedup();
        // sorted order puts a prefix right before its extensions
        let mut kept: Vec<Vec<u32>> = Vec::with_capacity(raw.len());
        for p in raw {
            if kept.last().is_some_and(|q| is_prefix(q, &p)) {
                continue;
            }
            kept.push(p);
        }
        let mut set: BTreeSet<Vec<u32>> = kept.into_iter().collect();
        let max_len = set.iter().map(Vec::len).max().unwrap_or(0);
        for len in (1..=max_len).rev() {
            let parents: BTreeSet<Vec<u32>> =
                set.iter().filter(|p| p.len() == len).map(|p| p[..len - 1].to_vec()).collect();
            for parent in parents {
                let kids = space.children(&parent);
                let complete = kids.iter().all(|&c| {
                    let mut w = parent.clone();
                    w.push(c);
                    set.contains(&w)
                });
                if complete {
                    for &c in &kids {
                        let mut w = parent.clone();
                        w.push(c);
                        set.remove(&w);
                    }
                    set.insert(parent);
                }
            }
        }
        CylinderSet { cylinders: set }
    }

    pub fn prefixes(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.cylinders.iter()
    }

    pub fn len(&self) -> usize {
        self.cylinders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.cylinders.len() == 1 && self.cylinders.contains(&Vec::new())
    }

    pub fn contains(&self, word: &[u32]) -> bool {
        (0..=word.len()).any(|k| self.cylinders.contains(&word[..k]))
    }

    pub fn max_depth(&self) -> usize {
        self.cylinders.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn union(&self, other: &Self, space: &LevelSpace) -> Self {
        Self::from_prefixes(space, self.cylinders.iter().chain(&other.cylinders).cloned())
    }

    pub fn intersection(&self, other: &Self, space: &LevelSpace) -> Self {
        let mut out = Vec::new();
        for a in &self.cylinders {
            for b in &other.cylinders {
                if is_prefix(a, b) {
                    out.push(b.clone());
                } else if is_prefix(b, a) {
                    out.push(a.clone());
                }
            }
        }
        Self::from_prefixes(space, out)
    }

    pub fn complement(&self, space: &LevelSpace) -> Self {
        let mut out = Vec::new();
        self.complement_under(space, &mut Vec::new(), &mut out);
        Self::from_prefixes(space, out)
    }

    fn complement_under(&self, space: &LevelSpace, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if self.cylinders.contains(prefix.as_slice()) {
            return;
        }
        let has_descendant = self.cylinders.range(prefix.clone()..).next().is_some_and(|c| is_prefix(prefix, c));
        if !has_descendant {
            out.push(prefix.clone());
            return;
        }
        for c in space.children(prefix) {
            prefix.push(c);
            self.complement_under(space, prefix, out);
            prefix.pop();
        }
    }

    pub fn difference(&self, other: &Self, space: &LevelSpace) -> Self {
        self.intersection(&other.complement(space), space)
    }

    pub fn is_subset(&self, other: &Self, space: &LevelSpace) -> bool {
        &self.intersection(other, space) == self
    }

    /// All depth-`depth` words inside the set.
    pub fn words(&self, space: &LevelSpace, depth: usize) -> Result<Vec<Vec<u32>>> {
        let mut out = Vec::new();
        for p in &self.cylinders {
            if p.len() > depth {
                continue;
            }
            out.extend(space.words_under(p, depth)?);
        }
        out.sort();
        Ok(out)
    }

    pub fn count(&self, space: &LevelSpace, depth: usize) -> BigUint {
        self.cylinders.iter().filter(|p| p.len() <= depth).map(|p| space.count_under(p, depth)).sum()
    }
}
