use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{input, usage, Result};

/// How the per-level alphabets are given.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Levels {
    /// Finitely many levels with the given alphabet sizes.
    Explicit(Vec<u32>),
    /// `prefix` followed by `period` repeated forever.
    Periodic { prefix: Vec<u32>, period: Vec<u32> },
    /// An explicit set of admissible words of a common length, sorted.
    Words { depth: usize, words: Vec<Vec<u32>> },
}

/// A Cantor space presented by digit strings, one finite alphabet per level.
///
/// `coherent` marks inverse-limit coordinates: a disagreement at level l
/// forces disagreement at every deeper level, so distances only depend on
/// the first disagreement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSpace {
    levels: Levels,
    coherent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    pub digits: Vec<u32>,
}

impl Point {
    pub fn new(digits: Vec<u32>) -> Self {
        Point { digits }
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn prefix(&self, len: usize) -> &[u32] {
        &self.digits[..len.min(self.digits.len())]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// First level (1-based) at which the two digit strings differ.
pub fn first_disagreement(u: &[u32], v: &[u32]) -> Option<usize> {
    u.iter().zip(v).position(|(a, b)| a != b).map(|i| i + 1)
}

impl LevelSpace {
    pub fn explicit(sizes: Vec<u32>, coherent: bool) -> Result<Self> {
        if sizes.contains(&0) {
            return input("alphabet sizes must be at least 1");
        }
        Ok(LevelSpace { levels: Levels::Explicit(sizes), coherent })
    }

    pub fn periodic(prefix: Vec<u32>, period: Vec<u32>, coherent: bool) -> Result<Self> {
        if period.is_empty() {
            return input("periodic rule needs a nonempty period");
        }
        if prefix.iter().chain(&period).any(|&m| m == 0) {
            return input("alphabet sizes must be at least 1");
        }
        Ok(LevelSpace { levels: Levels::Periodic { prefix, period }, coherent })
    }

    pub fn admissible(mut words: Vec<Vec<u32>>, coherent: bool) -> Result<Self> {
        if words.is_empty() {
            return input("admissible word set is empty");
        }
        let depth = words[0].len();
        if words.iter().any(|w| w.len() != depth) {
            return input("admissible words must share one length");
        }
        words.sort();
        words.dedup();
        Ok(LevelSpace { levels: Levels::Words { depth, words }, coherent })
    }

    /// Mixed-radix coherent fiber with the given level sizes.
    pub fn mixed_radix(sizes: Vec<u32>) -> Result<Self> {
        Self::explicit(sizes, true)
    }

    pub fn single_point() -> Self {
        LevelSpace { levels: Levels::Explicit(Vec::new()), coherent: true }
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    pub fn is_coherent(&self) -> bool {
        self.coherent
    }

    /// `None` for rule-based spaces with unboundedly many levels.
    pub fn depth_limit(&self) -> Option<usize> {
        match &self.levels {
            Levels::Explicit(s) => Some(s.len()),
            Levels::Periodic { .. } => None,
            Levels::Words { depth, .. } => Some(*depth),
        }
    }

    /// Alphabet size of level `level` (1-based). For word sets this is the
    /// largest digit used plus one.
    pub fn alphabet_size(&self, level: usize) -> Option<u32> {
        if level == 0 {
            return None;
        }
        match &self.levels {
            Levels::Explicit(s) => s.get(level - 1).copied(),
            Levels::Periodic { prefix, period } => Some(if level <= prefix.len() {
                prefix[level - 1]
            } else {
                period[(level - 1 - prefix.len()) % period.len()]
            }),
            Levels::Words { depth, words } => {
                if level > *depth {
                    None
                } else {
                    words.iter().map(|w| w[level - 1] + 1).max()
                }
            }
        }
    }

    pub fn check_depth(&self, depth: usize) -> Result<()> {
        match self.depth_limit() {
            Some(d) if depth > d => usage(format!("depth {depth} exceeds the space depth {d}")),
            _ => Ok(()),
        }
    }

    fn word_range(&self, words: &[Vec<u32>], prefix: &[u32]) -> (usize, usize) {
        let k = prefix.len();
        let lo = words.partition_point(|w| &w[..k] < prefix);
        let hi = words.partition_point(|w| &w[..k] <= prefix);
        (lo, hi)
    }

    /// Digits that extend `prefix` admissibly, ascending.
    pub fn children(&self, prefix: &[u32]) -> Vec<u32> {
        if !self.is_admissible(prefix) {
            return Vec::new();
        }
        let level = prefix.len() + 1;
        match &self.levels {
            Levels::Words { depth, words } => {
                if prefix.len() >= *depth {
                    return Vec::new();
                }
                let (lo, hi) = self.word_range(words, prefix);
                let mut out: Vec<u32> = words[lo..hi].iter().map(|w| w[prefix.len()]).collect();
                out.dedup();
                out
            }
            _ => match self.alphabet_size(level) {
                Some(m) => (0..m).collect(),
                None => Vec::new(),
            },
        }
    }

    pub fn is_admissible(&self, prefix: &[u32]) -> bool {
        match &self.levels {
            Levels::Words { depth, words } => {
                if prefix.len() > *depth {
                    return false;
                }
                let (lo, hi) = self.word_range(words, prefix);
                lo < hi
            }
            _ => {
                if let Some(d) = self.depth_limit() {
                    if prefix.len() > d {
                        return false;
                    }
                }
                prefix
                    .iter()
                    .enumerate()
                    .all(|(i, &x)| self.alphabet_size(i + 1).is_some_and(|m| x < m))
            }
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if !self.is_admissible(&p.digits) {
            return usage(format!("point {p} is not in this space"));
        }
        Ok(())
    }

    /// Number of admissible depth-`depth` words extending `prefix`.
    pub fn count_under(&self, prefix: &[u32], depth: usize) -> BigUint {
        if depth < prefix.len() || !self.is_admissible(prefix) {
            return BigUint::zero();
        }
        if self.depth_limit().is_some_and(|d| depth > d) {
            return BigUint::zero();
        }
        match &self.levels {
            Levels::Words { words, .. } => {
                let (lo, hi) = self.word_range(words, prefix);
                let mut n = 0u64;
                let mut last: Option<&[u32]> = None;
                for w in &words[lo..hi] {
                    if last != Some(&w[..depth]) {
                        n += 1;
                        last = Some(&w[..depth]);
                    }
                }
                BigUint::from(n)
            }
            _ => {
                let mut acc = BigUint::one();
                for level in prefix.len() + 1..=depth {
                    acc *= self.alphabet_size(level).unwrap_or(0);
                }
                acc
            }
        }
    }

    pub fn count(&self, depth: usize) -> BigUint {
        self.count_under(&[], depth)
    }

    /// All admissible words of length `depth` extending `prefix`, in lexicographic order.
    pub fn words_under(&self, prefix: &[u32], depth: usize) -> Result<Vec<Vec<u32>>> {
        self.check_depth(depth)?;
        let mut out = Vec::new();
        if depth < prefix.len() || !self.is_admissible(prefix) {
            return Ok(out);
        }
        if let Levels::Words { words, .. } = &self.levels {
            let (lo, hi) = self.word_range(words, prefix);
            for w in &words[lo..hi] {
                if out.last().map(|l: &Vec<u32>| l[..] != w[..depth]).unwrap_or(true) {
                    out.push(w[..depth].to_vec());
                }
            }
            return Ok(out);
        }
        let mut cur = prefix.to_vec();
        self.push_words(&mut cur, depth, &mut out);
        Ok(out)
    }

    fn push_words(&self, cur: &mut Vec<u32>, depth: usize, out: &mut Vec<Vec<u32>>) {
        if cur.len() == depth {
            out.push(cur.clone());
            return;
        }
        let m = self.alphabet_size(cur.len() + 1).unwrap_or(0);
        for d in 0..m {
            cur.push(d);
            self.push_words(cur, depth, out);
            cur.pop();
        }
    }

    pub fn words(&self, depth: usize) -> Result<Vec<Vec<u32>>> {
        self.words_under(&[], depth)
    }

    /// Smallest admissible depth-`depth` word extending `prefix`.
    pub fn leftmost(&self, prefix: &[u32], depth: usize) -> Option<Vec<u32>> {
        let mut cur = prefix.to_vec();
        while cur.len() < depth {
            let c = *self.children(&cur).first()?;
            cur.push(c);
        }
        Some(cur)
    }
}
