use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cylinder::CylinderSet;
use crate::error::{input, usage, Error, Result};
use crate::rational::{inv_pow, Q};
use crate::space::{first_disagreement, LevelSpace, Point};

/// Level weights a_l, l >= 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weights {
    /// a_l = base^{-l}
    Power { base: u32 },
    /// Finitely many weights; levels beyond the list weigh nothing.
    Explicit(#[serde(with = "q_vec")] Vec<Q>),
}

mod q_vec {
    use super::Q;
    use crate::rational::{fmt_q, parse_q};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(fmt_q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| parse_q(s).map_err(D::Error::custom)).collect()
    }
}

/// The weighted sum of discrete level metrics, sum_l a_l [u_l != v_l].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedMetric {
    pub weights: Weights,
}

impl Default for WeightedMetric {
    fn default() -> Self {
        WeightedMetric { weights: Weights::Power { base: 3 } }
    }
}

impl WeightedMetric {
    pub fn power(base: u32) -> Result<Self> {
        let m = WeightedMetric { weights: Weights::Power { base } };
        m.validate()?;
        Ok(m)
    }

    pub fn explicit(weights: Vec<Q>) -> Result<Self> {
        let m = WeightedMetric { weights: Weights::Explicit(weights) };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.weights {
            Weights::Power { base } if *base < 2 => input("power weights need base >= 2"),
            Weights::Power { .. } => Ok(()),
            Weights::Explicit(w) => {
                if w.iter().any(|a| !a.is_positive()) {
                    return input("weights must be positive");
                }
                if self.tail(1) > Q::one() {
                    return input("weights must sum to at most 1");
                }
                Ok(())
            }
        }
    }

    /// a_l for l >= 1.
    pub fn weight(&self, level: usize) -> Q {
        match &self.weights {
            Weights::Power { base } => inv_pow(*base, level as u32),
            Weights::Explicit(w) => w.get(level - 1).cloned().unwrap_or_else(Q::zero),
        }
    }

    /// sum_{k >= level} a_k, using the infinite tail for power rules.
    pub fn tail(&self, level: usize) -> Q {
        match &self.weights {
            Weights::Power { base } => {
                // base^{-l} * base/(base-1)
                inv_pow(*base, level as u32 - 1) / Q::from_integer((*base as i64 - 1).into())
            }
            Weights::Explicit(w) => w.iter().skip(level.saturating_sub(1)).cloned().sum(),
        }
    }

    /// Levels that carry weight; `None` when unbounded.
    pub fn weighted_levels(&self) -> Option<usize> {
        match &self.weights {
            Weights::Power { .. } => None,
            Weights::Explicit(w) => Some(w.len()),
        }
    }

    /// a_l > sum_{k > l} a_k at every weighted level.
    pub fn separated_tail(&self) -> bool {
        match &self.weights {
            Weights::Power { base } => *base > 2,
            Weights::Explicit(w) => (1..=w.len()).all(|l| self.weight(l) > self.tail(l + 1)),
        }
    }
}

/// A metric on a level space: one weighted metric, or a piecewise metric
/// whose level-1 digit selects a piece (distance 1 across pieces).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Weighted(WeightedMetric),
    Piecewise(Vec<WeightedMetric>),
}

impl Default for Metric {
    fn default() -> Self {
        Metric::Weighted(WeightedMetric::default())
    }
}

impl Metric {
    pub fn validate(&self) -> Result<()> {
        match self {
            Metric::Weighted(w) => w.validate(),
            Metric::Piecewise(ps) => {
                if ps.is_empty() {
                    return input("piecewise metric needs at least one piece");
                }
                ps.iter().try_for_each(WeightedMetric::validate)
            }
        }
    }

    /// Distance between coherent points whose first disagreement is at `level`;
    /// `piece` is the first digit of the points (ignored unless piecewise).
    pub fn level_distance(&self, piece: Option<u32>, level: usize) -> Q {
        match self {
            Metric::Weighted(w) => w.tail(level),
            Metric::Piecewise(ps) => {
                if level <= 1 {
                    Q::one()
                } else {
                    let p = piece.unwrap_or(0) as usize;
                    ps.get(p).map(|w| w.tail(level - 1)).unwrap_or_else(Q::one)
                }
            }
        }
    }

    fn level_weight(&self, piece: u32, level: usize) -> Q {
        match self {
            Metric::Weighted(w) => w.weight(level),
            Metric::Piecewise(ps) => {
                if level == 1 {
                    Q::one()
                } else {
                    ps.get(piece as usize).map(|w| w.weight(level - 1)).unwrap_or_else(Q::zero)
                }
            }
        }
    }

    fn remaining(&self, piece: Option<u32>, level: usize) -> Q {
        match self {
            Metric::Weighted(w) => w.tail(level),
            Metric::Piecewise(ps) => match (level, piece) {
                (0 | 1, _) => Q::one() + ps.iter().map(|w| w.tail(1)).max().unwrap_or_else(Q::zero),
                (_, Some(p)) => ps.get(p as usize).map(|w| w.tail(level - 1)).unwrap_or_else(Q::zero),
                (_, None) => Q::zero(),
            },
        }
    }

    fn separated_tail(&self) -> bool {
        match self {
            Metric::Weighted(w) => w.separated_tail(),
            Metric::Piecewise(ps) => ps.iter().all(WeightedMetric::separated_tail),
        }
    }
}

/// A level space together with its metric.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpace {
    pub space: LevelSpace,
    pub metric: Metric,
}

impl MetricSpace {
    pub fn new(space: LevelSpace, metric: Metric) -> Result<Self> {
        metric.validate()?;
        if let Metric::Piecewise(ps) = &metric {
            let tags = space.children(&[]);
            if tags.iter().any(|&t| t as usize >= ps.len()) {
                return input("piecewise metric has fewer pieces than level-1 digits");
            }
        }
        if let (Metric::Weighted(w), Some(d)) = (&metric, space.depth_limit()) {
            if w.weighted_levels().is_some_and(|n| n < d) {
                return input(format!("explicit weights cover fewer than the {d} levels of the space"));
            }
        }
        Ok(MetricSpace { space, metric })
    }

    pub fn coherent(space: LevelSpace) -> Self {
        MetricSpace { space, metric: Metric::default() }
    }

    /// Distance between two admissible words of equal length, unchecked.
    pub fn distance_words(&self, u: &[u32], v: &[u32]) -> Q {
        if self.space.is_coherent() {
            match first_disagreement(u, v) {
                None => Q::zero(),
                Some(l) => self.metric.level_distance(u.first().copied(), l),
            }
        } else {
            let mut acc = Q::zero();
            if u.first() != v.first() && matches!(self.metric, Metric::Piecewise(_)) {
                return Q::one();
            }
            for (i, (a, b)) in u.iter().zip(v).enumerate() {
                if a != b {
                    acc += self.metric.level_weight(u[0], i + 1);
                }
            }
            acc
        }
    }

    pub fn distance(&self, u: &Point, v: &Point) -> Result<Q> {
        if u.depth() != v.depth() {
            return usage(format!("points have different depths {} and {}", u.depth(), v.depth()));
        }
        self.space.check_point(u)?;
        self.space.check_point(v)?;
        Ok(self.distance_words(&u.digits, &v.digits))
    }

    /// The closed ball of radius `r` about `center`, computed on depth-`depth` truncations.
    pub fn ball(&self, center: &Point, r: &Q, depth: usize) -> Result<CylinderSet> {
        if r.is_negative() {
            return usage("negative radius");
        }
        if !self.space.is_coherent() && !self.metric.separated_tail() {
            return Err(Error::UnsupportedMetric(
                "balls of a free metric are cylinder sets only under the separated-tail condition".into(),
            ));
        }
        self.space.check_depth(depth)?;
        if center.depth() < depth {
            return usage(format!("center has depth {} < {depth}", center.depth()));
        }
        self.space.check_point(center)?;
        let c = center.prefix(depth);
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.ball_rec(c, r, depth, &mut prefix, &Q::zero(), &mut out);
        Ok(CylinderSet::from_prefixes(&self.space, out))
    }

    fn ball_rec(&self, c: &[u32], r: &Q, depth: usize, prefix: &mut Vec<u32>, cost: &Q, out: &mut Vec<Vec<u32>>) {
        let k = prefix.len();
        let piece = prefix.first().or(c.first()).copied();
        if self.space.is_coherent() {
            match first_disagreement(prefix, c) {
                Some(l) => {
                    if self.metric.level_distance(piece, l) <= *r {
                        out.push(prefix.clone());
                    }
                    return;
                }
                None => {
                    if k == depth || self.metric.level_distance(piece, k + 1) <= *r {
                        out.push(prefix.clone());
                        return;
                    }
                }
            }
        } else {
            if cost > r {
                return;
            }
            if k == depth || cost.clone() + self.metric.remaining(piece, k + 1) <= *r {
                out.push(prefix.clone());
                return;
            }
        }
        for d in self.space.children(prefix) {
            let step = if !self.space.is_coherent() && d != c[k] {
                if k == 0 && matches!(self.metric, Metric::Piecewise(_)) {
                    Q::one()
                } else {
                    self.metric.level_weight(piece.unwrap_or(d), k + 1)
                }
            } else {
                Q::zero()
            };
            prefix.push(d);
            let next = cost + step;
            self.ball_rec(c, r, depth, prefix, &next, out);
            prefix.pop();
        }
    }
}
