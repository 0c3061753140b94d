//! Geometric entropy from (ε, ℓ)-separated sets of cylinder representatives.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::pseudogroup::{FiniteModel, Pseudogroup};
use crate::rational::{least_squares, ln_biguint, Q};

/// Search nodes allowed to the exact clique search before it gives up.
pub const CLIQUE_NODE_BUDGET: u64 = 5_000_000;

pub const WORD_LENGTH_NOTE: &str =
    "separation uses global word length in the generators, an upper bound for the germ-local length";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    Greedy,
}

#[derive(Clone, Debug)]
pub struct SeparationInstance<'a> {
    pub g: &'a Pseudogroup,
    pub epsilon: Q,
    pub ell: usize,
    pub depth: usize,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatedSet {
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
    pub ell: usize,
    pub depth: usize,
    pub count: usize,
    /// Depth-`depth` prefixes of the chosen cylinders.
    pub witness: Vec<Vec<u32>>,
    /// Mode that produced the count; greedy counts are lower bounds.
    pub mode: Mode,
    /// Exact search ran out of budget and fell back to greedy.
    pub fallback: bool,
}

/// Separation data of one pseudogroup at one ε, shared across word budgets.
pub struct Separation {
    model: FiniteModel,
    epsilon: Q,
    steps: Vec<u8>,
}

impl Separation {
    pub fn new(g: &Pseudogroup, epsilon: &Q) -> Result<Self> {
        if epsilon <= &Q::zero() {
            return usage("epsilon must be positive");
        }
        let model = FiniteModel::new(g)?;
        let steps = model.separation_steps(epsilon);
        Ok(Separation { model, epsilon: epsilon.clone(), steps })
    }

    pub fn model(&self) -> &FiniteModel {
        &self.model
    }

    /// Least word length separating points `i` and `j`, if any.
    pub fn steps(&self, i: u32, j: u32) -> Option<usize> {
        let t = self.steps[i as usize * self.model.n() + j as usize];
        (t != u8::MAX).then_some(t as usize)
    }

    pub fn max_separated(&self, ell: usize, depth: usize, mode: Mode) -> Result<SeparatedSet> {
        if depth > self.model.depth {
            return usage(format!("cylinder depth {depth} exceeds the working depth {}", self.model.depth));
        }
        let (reps, _) = self.model.cylinder_reps(depth);
        let graph = Graph::new(reps.len(), |a, b| {
            self.steps(reps[a], reps[b]).is_some_and(|t| t <= ell)
        });
        let (chosen, used, fallback) = match mode {
            Mode::Greedy => (graph.greedy(), Mode::Greedy, false),
            Mode::Exact => match graph.max_clique(CLIQUE_NODE_BUDGET) {
                Some(c) => (c, Mode::Exact, false),
                None => (graph.greedy(), Mode::Greedy, true),
            },
        };
        let mut witness: Vec<Vec<u32>> =
            chosen.iter().map(|&v| self.model.points[reps[v] as usize][..depth].to_vec()).collect();
        witness.sort();
        Ok(SeparatedSet {
            epsilon: self.epsilon.clone(),
            ell,
            depth,
            count: witness.len(),
            witness,
            mode: used,
            fallback,
        })
    }
}

pub fn max_separated(inst: &SeparationInstance) -> Result<SeparatedSet> {
    Separation::new(inst.g, &inst.epsilon)?.max_separated(inst.ell, inst.depth, inst.mode)
}

/// Undirected graph as adjacency bitsets.
struct Graph {
    n: usize,
    words: usize,
    adj: Vec<Vec<u64>>,
}

impl Graph {
    fn new(n: usize, edge: impl Fn(usize, usize) -> bool) -> Self {
        let words = n.div_ceil(64);
        let mut adj = vec![vec![0u64; words]; n];
        for a in 0..n {
            for b in a + 1..n {
                if edge(a, b) || edge(b, a) {
                    adj[a][b / 64] |= 1 << (b % 64);
                    adj[b][a / 64] |= 1 << (a % 64);
                }
            }
        }
        Graph { n, words, adj }
    }

    fn degree(&self, v: usize) -> u32 {
        self.adj[v].iter().map(|w| w.count_ones()).sum()
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.adj[a][b / 64] >> (b % 64) & 1 == 1
    }

    /// Degree-descending order, ties by index.
    fn order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(self.degree(v)), v));
        order
    }

    fn greedy(&self) -> Vec<usize> {
        let mut chosen: Vec<usize> = Vec::new();
        for v in self.order() {
            if chosen.iter().all(|&c| self.has(c, v)) {
                chosen.push(v);
            }
        }
        chosen.sort();
        chosen
    }

    /// Branch and bound with greedy-coloring bounds; `None` past the node budget.
    fn max_clique(&self, budget: u64) -> Option<Vec<usize>> {
        if self.n == 0 {
            return Some(vec![]);
        }
        // relabel so low bit positions are high-degree vertices
        let order = self.order();
        let mut pos = vec![0; self.n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut adj = vec![vec![0u64; self.words]; self.n];
        for (i, &v) in order.iter().enumerate() {
            for u in 0..self.n {
                if self.has(v, u) {
                    let j = pos[u];
                    adj[i][j / 64] |= 1 << (j % 64);
                }
            }
        }
        let mut search = Search { adj, words: self.words, best: self.greedy().iter().map(|&v| pos[v]).collect(), nodes: 0, budget };
        let mut all = vec![0u64; self.words];
        for i in 0..self.n {
            all[i / 64] |= 1 << (i % 64);
        }
        let mut current = Vec::new();
        if !search.expand(&mut current, all) {
            return None;
        }
        let mut out: Vec<usize> = search.best.iter().map(|&i| order[i]).collect();
        out.sort();
        Some(out)
    }
}

struct Search {
    adj: Vec<Vec<u64>>,
    words: usize,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
}

fn bits(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &word)| {
        let mut x = word;
        std::iter::from_fn(move || {
            if x == 0 {
                return None;
            }
            let b = x.trailing_zeros() as usize;
            x &= x - 1;
            Some(w * 64 + b)
        })
    })
}

impl Search {
    /// Returns false when the budget is exhausted.
    fn expand(&mut self, current: &mut Vec<usize>, mut cand: Vec<u64>) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        let (verts, colors) = self.color(&cand);
        for i in (0..verts.len()).rev() {
            if current.len() + colors[i] <= self.best.len() {
                return true;
            }
            let v = verts[i];
            current.push(v);
            let next: Vec<u64> = cand.iter().zip(&self.adj[v]).map(|(a, b)| a & b).collect();
            if next.iter().all(|&w| w == 0) {
                if current.len() > self.best.len() {
                    self.best = current.clone();
                }
            } else if !self.expand(current, next) {
                return false;
            }
            current.pop();
            cand[v / 64] &= !(1 << (v % 64));
        }
        true
    }

    /// Sequential greedy coloring; vertices returned by nondecreasing color.
    fn color(&self, cand: &[u64]) -> (Vec<usize>, Vec<usize>) {
        let mut uncolored = cand.to_vec();
        let mut verts = Vec::new();
        let mut colors = Vec::new();
        let mut color = 0;
        while uncolored.iter().any(|&w| w != 0) {
            color += 1;
            let mut avail = uncolored.clone();
            loop {
                let Some(v) = bits(&avail).next() else { break };
                verts.push(v);
                colors.push(color);
                uncolored[v / 64] &= !(1 << (v % 64));
                avail[v / 64] &= !(1 << (v % 64));
                for w in 0..self.words {
                    avail[w] &= !self.adj[v][w];
                }
            }
        }
        (verts, colors)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthEntry {
    pub ell: usize,
    #[serde(with = "crate::rational::serde_biguint")]
    pub count: BigUint,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    #[serde(with = "crate::rational::serde_q")]
    pub epsilon: Q,
    pub depth: usize,
    pub entries: Vec<GrowthEntry>,
    /// Least-squares slope of ln(count) against ℓ over the upper half of the range.
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub window: (usize, usize),
    pub monotone: bool,
}

impl GrowthSeries {
    /// Builds the series and its tail-window slope; constant windows give slope 0 exactly.
    pub fn from_counts(epsilon: Q, depth: usize, entries: Vec<GrowthEntry>) -> Result<Self> {
        if entries.is_empty() {
            return usage("empty word-length range");
        }
        let monotone = entries.windows(2).all(|w| w[0].count <= w[1].count);
        if !monotone && entries.iter().all(|e| e.mode == Mode::Exact) {
            return Err(Error::Precondition("exact separated counts decreased as the word budget grew".into()));
        }
        let tail = &entries[entries.len() / 2..];
        let window = (tail[0].ell, tail[tail.len() - 1].ell);
        let constant = tail.iter().all(|e| e.count == tail[0].count);
        let ys: Vec<f64> = tail.iter().map(|e| ln_biguint(&e.count)).collect();
        let (slope, intercept, residuals) = if constant || tail.len() < 2 {
            (0.0, ys[0], vec![0.0; ys.len()])
        } else {
            let xs: Vec<f64> = tail.iter().map(|e| e.ell as f64).collect();
            least_squares(&xs, &ys).unwrap_or((0.0, ys[0], vec![0.0; ys.len()]))
        };
        Ok(GrowthSeries { epsilon, depth, entries, slope, intercept, residuals, window, monotone })
    }

    pub fn counts(&self) -> Vec<BigUint> {
        self.entries.iter().map(|e| e.count.clone()).collect()
    }

    pub fn counts_u64(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.count.to_u64().unwrap_or(u64::MAX)).collect()
    }
}

/// Maximal separated counts for every ℓ in the range.
pub fn expansion_growth(g: &Pseudogroup, eps: &Q, ells: std::ops::RangeInclusive<usize>, depth: usize) -> Result<GrowthSeries> {
    expansion_growth_mode(g, eps, ells, depth, Mode::Exact)
}

pub fn expansion_growth_mode(
    g: &Pseudogroup,
    eps: &Q,
    ells: std::ops::RangeInclusive<usize>,
    depth: usize,
    mode: Mode,
) -> Result<GrowthSeries> {
    if ells.is_empty() {
        return usage("word-length range is empty");
    }
    let sep = Separation::new(g, eps)?;
    let mut entries = Vec::new();
    for ell in ells {
        let s = sep.max_separated(ell, depth, mode)?;
        entries.push(GrowthEntry { ell, count: s.count.into(), mode: s.mode });
    }
    GrowthSeries::from_counts(eps.clone(), depth, entries)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub depth: usize,
    pub rows: Vec<GrowthSeries>,
    /// Slopes nondecreasing as ε decreases.
    pub monotone: bool,
    pub trend: String,
    pub note: String,
}

impl EntropyProfile {
    pub fn slopes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.slope).collect()
    }

    pub fn all_flat(&self) -> bool {
        self.rows.iter().all(|r| r.slope == 0.0)
    }
}

const SLOPE_TOLERANCE: f64 = 1e-9;

/// Assembles a profile from per-ε series, checking the monotonicity properties.
pub fn profile_from_rows(depth: usize, rows: Vec<GrowthSeries>, note: &str) -> Result<EntropyProfile> {
    for pair in rows.windows(2) {
        let exact = |r: &GrowthSeries| r.entries.iter().all(|e| e.mode == Mode::Exact);
        if exact(&pair[0]) && exact(&pair[1]) {
            let shrinking = pair[0].entries.iter().zip(&pair[1].entries).any(|(a, b)| b.count < a.count);
            if shrinking {
                return Err(Error::Precondition("separated counts decreased as epsilon decreased".into()));
            }
        }
    }
    let slopes: Vec<f64> = rows.iter().map(|r| r.slope).collect();
    let monotone = slopes.windows(2).all(|w| w[1] >= w[0] - SLOPE_TOLERANCE);
    let trend = if slopes.iter().all(|&s| s == 0.0) {
        "flat: zero slope at every tested epsilon".to_string()
    } else if slopes.windows(2).all(|w| w[1] > w[0] + SLOPE_TOLERANCE) {
        "increasing as epsilon decreases, no plateau in the tested range".to_string()
    } else {
        "plateau within the tested range".to_string()
    };
    Ok(EntropyProfile { depth, rows, monotone, trend, note: note.to_string() })
}

/// One slope per ε; `eps_list` must be strictly decreasing.
pub fn entropy_profile(
    g: &Pseudogroup,
    eps_list: &[Q],
    ells: std::ops::RangeInclusive<usize>,
    depth: usize,
) -> Result<EntropyProfile> {
    check_eps_list(eps_list)?;
    let rows = eps_list
        .iter()
        .map(|e| expansion_growth(g, e, ells.clone(), depth))
        .collect::<Result<Vec<_>>>()?;
    profile_from_rows(depth, rows, WORD_LENGTH_NOTE)
}

pub fn check_eps_list(eps_list: &[Q]) -> Result<()> {
    if eps_list.is_empty() {
        return usage("epsilon list is empty");
    }
    if eps_list.iter().any(|e| e <= &Q::zero()) {
        return usage("epsilon values must be positive");
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return usage("epsilon list must be strictly decreasing");
    }
    Ok(())
}
