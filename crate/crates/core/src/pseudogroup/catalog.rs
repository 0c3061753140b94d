//! Standard examples: adding machines on mixed-radix fibers and the shift on
//! a Sturmian subshift (the symbolic model of a Denjoy minimal system).

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::metric::{Metric, MetricSpace, WeightedMetric};
use crate::rational::qint;
use crate::solenoid::Presentation1D;
use crate::space::LevelSpace;

use super::{ActionKind, PartialMap, Pseudogroup};

/// `digits + k` in the mixed radix with level sizes `radices` (level 1 least
/// significant), wrapping modulo the product.
pub fn add_mixed_radix(digits: &[u32], radices: &[u32], k: i64) -> Vec<u32> {
    let mut value = BigInt::zero();
    let mut place = BigInt::from(1);
    for (d, m) in digits.iter().zip(radices) {
        value += &place * *d;
        place *= *m;
    }
    let mut v = (value + k).mod_floor(&place);
    radices
        .iter()
        .map(|&m| {
            let (q, r) = v.div_mod_floor(&BigInt::from(m));
            v = q;
            r.to_u32().unwrap_or(0)
        })
        .collect()
}

/// Adding machine on the first `degrees.len()` levels, one generator `+s`
/// per step `s`, tabulated at full depth.
pub fn odometer_with_steps(degrees: &[u32], steps: &[i64], metric: WeightedMetric) -> Result<Pseudogroup> {
    if degrees.iter().any(|&m| m < 2) {
        return input("odometer degrees must be at least 2");
    }
    if steps.is_empty() {
        return input("odometer needs at least one step");
    }
    let space = LevelSpace::mixed_radix(degrees.to_vec())?;
    let ms = MetricSpace::new(space, Metric::Weighted(metric))?;
    let depth = degrees.len();
    let words = ms.space.words(depth)?;
    let mut gens = Vec::new();
    for &s in steps {
        let rules = words.iter().map(|w| (w.clone(), add_mixed_radix(w, degrees, s)));
        let label = if s >= 0 { format!("+{s}") } else { format!("{s}") };
        gens.push(PartialMap::new(&ms, label, depth, rules, qint(1))?);
    }
    Pseudogroup::new(ms, depth, gens, ActionKind::GroupAction)
}

/// The +1 adding machine on the fiber of `pres`, truncated at `depth`.
pub fn odometer_system(pres: &Presentation1D, depth: usize) -> Result<Pseudogroup> {
    let degrees = pres.degrees_u32(depth)?;
    odometer_with_steps(&degrees, &[1], WeightedMetric::default())
}

/// An eventually periodic continued fraction [0; a_1, a_2, ...] for a slope
/// in (0, 1); `prefix` and `period` list the partial quotients a_i.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    #[serde(default)]
    pub prefix: Vec<u32>,
    pub period: Vec<u32>,
}

impl ContinuedFraction {
    /// [0; 2, 1, 1, 1, ...], whose characteristic word is the Fibonacci word.
    pub fn golden() -> Self {
        ContinuedFraction { prefix: vec![2], period: vec![1] }
    }

    fn validate(&self) -> Result<()> {
        if self.period.is_empty() {
            return input("continued fraction needs a nonempty period");
        }
        if self.prefix.iter().chain(&self.period).any(|&a| a == 0) {
            return input("partial quotients must be positive");
        }
        Ok(())
    }

    /// a_i for i >= 1.
    pub fn term(&self, i: usize) -> u32 {
        if i <= self.prefix.len() {
            self.prefix[i - 1]
        } else {
            self.period[(i - 1 - self.prefix.len()) % self.period.len()]
        }
    }
}

/// Prefix of length `len` of the characteristic Sturmian word of the slope.
pub fn sturmian_word(cf: &ContinuedFraction, len: usize) -> Result<Vec<u8>> {
    cf.validate()?;
    // standard words: s_{-1} = 1, s_0 = 0, s_1 = s_0^{a_1 - 1} s_{-1}, s_n = s_{n-1}^{a_n} s_{n-2}
    let mut older: Vec<u8> = vec![1];
    let mut old: Vec<u8> = vec![0];
    let mut cur: Vec<u8> = old.repeat(cf.term(1) as usize - 1);
    cur.extend_from_slice(&older);
    let mut i = 1;
    while cur.len() < len.max(2) {
        i += 1;
        older = old;
        old = cur;
        cur = old.repeat(cf.term(i) as usize);
        cur.extend_from_slice(&older);
    }
    cur.truncate(len);
    Ok(cur)
}

/// All length-`m` factors of the Sturmian subshift, sorted; checks the
/// complexity m + 1.
pub fn sturmian_factors(cf: &ContinuedFraction, m: usize) -> Result<Vec<Vec<u8>>> {
    let mut len = 64 + 16 * (m + 1);
    loop {
        let word = sturmian_word(cf, len)?;
        let set: BTreeSet<Vec<u8>> = word.windows(m.max(1)).map(<[u8]>::to_vec).collect();
        let set: BTreeSet<Vec<u8>> = if m == 0 { [Vec::new()].into() } else { set };
        if set.len() == m + 1 {
            return Ok(set.into_iter().collect());
        }
        if len > 1 << 22 {
            return input(format!("complexity mismatch at length {m}: found {} factors", set.len()));
        }
        len *= 2;
    }
}

/// Level digits of a window x[-w..=w]: level 1 is x[0], level l >= 2 packs
/// the pair (x[-(l-1)], x[l-1]).
fn encode_window(u: &[u8], w: usize) -> Vec<u32> {
    let mut out = vec![u[w] as u32];
    for r in 1..=w {
        out.push(2 * u[w - r] as u32 + u[w + r] as u32);
    }
    out
}

/// The shift on width-(2w+1) windows of the Sturmian subshift.
///
/// The generator is defined on windows whose inner length-2w word is neither
/// left- nor right-special, which makes it a bijection between clopen sets.
pub fn sturmian_system(cf: &ContinuedFraction, window: usize, metric: WeightedMetric) -> Result<Pseudogroup> {
    if window == 0 {
        return input("window must be at least 1");
    }
    let width = 2 * window + 1;
    let factors = sturmian_factors(cf, width)?;
    let fset: BTreeSet<&[u8]> = factors.iter().map(|f| f.as_slice()).collect();
    let ext = |mid: &[u8], left: bool| -> Vec<u8> {
        (0..2u8)
            .filter(|&c| {
                let mut f = Vec::with_capacity(width);
                if left {
                    f.push(c);
                    f.extend_from_slice(mid);
                } else {
                    f.extend_from_slice(mid);
                    f.push(c);
                }
                fset.contains(f.as_slice())
            })
            .collect()
    };
    let words: Vec<Vec<u32>> = factors.iter().map(|f| encode_window(f, window)).collect();
    let space = LevelSpace::admissible(words, true)?;
    let base = match metric.weights {
        crate::metric::Weights::Power { base } => base,
        _ => return input("the Sturmian model uses power weights"),
    };
    let ms = MetricSpace::new(space, Metric::Weighted(metric))?;
    let mut rules = BTreeMap::new();
    for u in &factors {
        let mid = &u[1..];
        let left = ext(mid, true);
        let right = ext(mid, false);
        if left.len() == 1 && right.len() == 1 {
            let mut img = mid.to_vec();
            img.push(right[0]);
            rules.insert(encode_window(u, window), encode_window(&img, window));
        }
    }
    let shift = PartialMap::new(&ms, "shift", window + 1, rules, qint(base as i64))?;
    Pseudogroup::new(ms, window + 1, vec![shift], ActionKind::Pseudogroup)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_radix_carry() {
        assert_eq!(add_mixed_radix(&[1, 1, 1], &[2, 2, 2], 1), vec![0, 0, 0]);
        assert_eq!(add_mixed_radix(&[1, 2], &[2, 3], 1), vec![0, 0]);
        assert_eq!(add_mixed_radix(&[0, 0], &[2, 3], -1), vec![1, 2]);
        assert_eq!(add_mixed_radix(&[1, 0, 1], &[2, 3, 5], 3), vec![0, 2, 1]);
    }

    #[test]
    fn fibonacci_word_prefix() {
        let w = sturmian_word(&ContinuedFraction::golden(), 13).unwrap();
        assert_eq!(w, vec![0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 1]);
    }

    #[test]
    fn rejects_bad_fractions() {
        let cf = ContinuedFraction { prefix: vec![0], period: vec![1] };
        assert!(sturmian_word(&cf, 4).is_err());
        let cf = ContinuedFraction { prefix: vec![], period: vec![] };
        assert!(sturmian_word(&cf, 4).is_err());
    }

    #[test]
    fn shift_domain_skips_special_windows() {
        let g = sturmian_system(&ContinuedFraction::golden(), 2, WeightedMetric::default()).unwrap();
        // 6 windows of width 5; one left-special and one right-special inner word of length 4
        assert_eq!(g.ms.space.count(3), 6u32.into());
        let n = g.generators[0].rules().len();
        assert!((3..6).contains(&n), "domain size {n}");
    }
}
