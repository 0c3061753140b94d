//! Weak solenoid presentations and their classification: prime multisets,
//! tower equivalence, displacement of indexing functions.

mod lattice;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::metric::{Metric, MetricSpace, WeightedMetric};
use crate::pseudogroup::{odometer_system, word_ball, FiniteModel, Pseudogroup};
use crate::rational::Q;
use crate::space::LevelSpace;

pub use lattice::{subgroup_contains, IntMatrix};

pub const DEFAULT_HORIZON_1D: usize = 64;
pub const DEFAULT_HORIZON_CHAIN: usize = 24;
/// Largest level index searched when inverting exponent counts.
const LEVEL_CAP: u64 = 1 << 48;

/// Trial-division factorization, ascending with multiplicity.
pub fn factor(mut m: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= m {
        while m.is_multiple_of(p) {
            out.push(p);
            m /= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if m > 1 {
        out.push(m);
    }
    out
}

fn valuation(mut m: u64, p: u64) -> u64 {
    let mut v = 0;
    while m > 0 && m.is_multiple_of(p) {
        m /= p;
        v += 1;
    }
    v
}

/// Degree rules producing arbitrarily many terms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeRule {
    Periodic { period: Vec<u64> },
    /// Blocks t = 1, 2, ...: one `sparse` term followed by 2^t `dense` terms.
    #[serde(rename = "gap2exp")]
    GapTwoExp { sparse: u64, dense: u64 },
}

/// Asymptotic behavior of a prime's exponent in the partial products.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "growth", rename_all = "snake_case")]
pub enum Growth {
    /// Occurs finitely often, with this total exponent.
    Finite { exponent: u64 },
    /// Exponent grows like `rate` per level.
    Linear {
        #[serde(with = "crate::rational::serde_q")]
        rate: Q,
    },
    /// Occurs infinitely often with density zero.
    Sublinear,
}

impl Growth {
    fn is_infinite(&self) -> bool {
        !matches!(self, Growth::Finite { .. })
    }
}

/// Which primes occur infinitely often, and how.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrimeCertificate {
    pub primes: BTreeMap<u64, Growth>,
}

impl PrimeCertificate {
    fn growth(&self, p: u64) -> Growth {
        self.primes.get(&p).cloned().unwrap_or(Growth::Finite { exponent: 0 })
    }

    /// Same supernatural number: equal infinite primes, equal finite exponents.
    pub fn same_supernatural(&self, other: &PrimeCertificate) -> bool {
        let primes: BTreeSet<u64> = self.primes.keys().chain(other.primes.keys()).copied().collect();
        primes.into_iter().all(|p| match (self.growth(p), other.growth(p)) {
            (Growth::Finite { exponent: a }, Growth::Finite { exponent: b }) => a == b,
            (a, b) => a.is_infinite() && b.is_infinite(),
        })
    }
}

/// A 1-dimensional solenoid presentation over the circle: covering degrees m_l >= 2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation1D {
    #[serde(default)]
    pub prefix: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<DegreeRule>,
    /// Declared certificate for inputs whose rule is not one of the built-in kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<PrimeCertificate>,
}

impl Presentation1D {
    pub fn periodic(prefix: Vec<u64>, period: Vec<u64>) -> Result<Self> {
        let p = Presentation1D { prefix, rule: Some(DegreeRule::Periodic { period }), certificate: None };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(m: u64) -> Self {
        Presentation1D { prefix: vec![], rule: Some(DegreeRule::Periodic { period: vec![m] }), certificate: None }
    }

    pub fn finite(degrees: Vec<u64>) -> Result<Self> {
        let p = Presentation1D { prefix: degrees, rule: None, certificate: None };
        p.validate()?;
        Ok(p)
    }

    /// 2, then blocks (3, 2^t copies of 2) for t = 1, 2, ...
    pub fn gap_two_exp() -> Self {
        Presentation1D { prefix: vec![2], rule: Some(DegreeRule::GapTwoExp { sparse: 3, dense: 2 }), certificate: None }
    }

    pub fn validate(&self) -> Result<()> {
        let rule_terms: Vec<u64> = match &self.rule {
            None => vec![],
            Some(DegreeRule::Periodic { period }) => {
                if period.is_empty() {
                    return input("periodic rule with empty period");
                }
                period.clone()
            }
            Some(DegreeRule::GapTwoExp { sparse, dense }) => vec![*sparse, *dense],
        };
        if self.prefix.iter().chain(&rule_terms).any(|&m| m < 2) {
            return input("covering degrees must be at least 2");
        }
        if self.rule.is_none() && self.prefix.is_empty() {
            return input("presentation has no degrees");
        }
        Ok(())
    }

    /// Number of known terms; `None` when the rule is unbounded.
    pub fn known_terms(&self) -> Option<u64> {
        match self.rule {
            None => Some(self.prefix.len() as u64),
            Some(_) => None,
        }
    }

    /// m_l for l >= 1.
    pub fn degree(&self, level: u64) -> Option<u64> {
        let i = level.checked_sub(1)? as usize;
        if i < self.prefix.len() {
            return Some(self.prefix[i]);
        }
        let r = (i - self.prefix.len()) as u64;
        match self.rule.as_ref()? {
            DegreeRule::Periodic { period } => Some(period[(r % period.len() as u64) as usize]),
            DegreeRule::GapTwoExp { sparse, dense } => {
                let (s, _) = gap_counts(r);
                let (s1, _) = gap_counts(r + 1);
                Some(if s1 > s { *sparse } else { *dense })
            }
        }
    }

    pub fn degrees(&self, depth: usize) -> Result<Vec<u64>> {
        (1..=depth as u64)
            .map(|l| self.degree(l).ok_or_else(|| Error::Usage(format!("presentation has no degree at level {l}"))))
            .collect()
    }

    pub fn degrees_u32(&self, depth: usize) -> Result<Vec<u32>> {
        self.degrees(depth)?
            .into_iter()
            .map(|m| u32::try_from(m).map_err(|_| Error::Input(format!("degree {m} too large for a level alphabet"))))
            .collect()
    }

    /// m_1 ... m_l.
    pub fn partial_product(&self, level: u64) -> Option<BigUint> {
        let mut acc = BigUint::one();
        for l in 1..=level {
            acc *= self.degree(l)?;
        }
        Some(acc)
    }

    fn prime_support(&self) -> BTreeSet<u64> {
        let mut terms = self.prefix.clone();
        match &self.rule {
            Some(DegreeRule::Periodic { period }) => terms.extend(period),
            Some(DegreeRule::GapTwoExp { sparse, dense }) => terms.extend([*sparse, *dense]),
            None => {}
        }
        let mut out: BTreeSet<u64> = terms.into_iter().flat_map(factor).collect();
        if let Some(c) = &self.certificate {
            out.extend(c.primes.keys());
        }
        out
    }

    /// The declared certificate, or the one implied by the rule.
    pub fn certificate(&self) -> Option<PrimeCertificate> {
        if let Some(c) = &self.certificate {
            return Some(c.clone());
        }
        let rule = self.rule.as_ref()?;
        let mut primes = BTreeMap::new();
        for p in self.prime_support() {
            let in_prefix: u64 = self.prefix.iter().map(|&m| valuation(m, p)).sum();
            let growth = match rule {
                DegreeRule::Periodic { period } => {
                    let per: u64 = period.iter().map(|&m| valuation(m, p)).sum();
                    if per > 0 {
                        Growth::Linear { rate: Q::new(per.into(), (period.len() as u64).into()) }
                    } else {
                        Growth::Finite { exponent: in_prefix }
                    }
                }
                DegreeRule::GapTwoExp { sparse, dense } => {
                    if valuation(*dense, p) > 0 {
                        Growth::Linear { rate: Q::from_integer(valuation(*dense, p).into()) }
                    } else if valuation(*sparse, p) > 0 {
                        Growth::Sublinear
                    } else {
                        Growth::Finite { exponent: in_prefix }
                    }
                }
            };
            primes.insert(p, growth);
        }
        Some(PrimeCertificate { primes })
    }

    /// Exponent of `p` in m_1 ... m_l; `None` past the known terms.
    pub fn exponent(&self, p: u64, level: u64) -> Option<u64> {
        let k = self.prefix.len() as u64;
        let head: u64 = self.prefix.iter().take(level.min(k) as usize).map(|&m| valuation(m, p)).sum();
        if level <= k {
            return Some(head);
        }
        let r = level - k;
        match self.rule.as_ref()? {
            DegreeRule::Periodic { period } => {
                let len = period.len() as u64;
                let per: u64 = period.iter().map(|&m| valuation(m, p)).sum();
                let rest: u64 = period.iter().take((r % len) as usize).map(|&m| valuation(m, p)).sum();
                Some(head + (r / len) * per + rest)
            }
            DegreeRule::GapTwoExp { sparse, dense } => {
                let (s, d) = gap_counts(r);
                Some(head + s * valuation(*sparse, p) + d * valuation(*dense, p))
            }
        }
    }

    /// Least level l with exponent(p, l) >= target.
    pub fn level_reaching(&self, p: u64, target: u64) -> Option<u64> {
        if target == 0 {
            return Some(0);
        }
        let cap = self.known_terms().unwrap_or(LEVEL_CAP);
        let mut hi = 1u64;
        loop {
            let e = self.exponent(p, hi.min(cap))?;
            if e >= target {
                break;
            }
            if hi >= cap {
                return None;
            }
            hi = hi.saturating_mul(2);
        }
        let hi = hi.min(cap);
        let mut lo = hi / 2;
        // exponent(lo) < target <= exponent(hi)
        let mut hi = hi;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.exponent(p, mid)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Rank-one subgroup chain H_l = M_l Z for l <= horizon.
    pub fn as_chain(&self, horizon: usize) -> SubgroupChainZn {
        let mut chain = Vec::new();
        for l in 1..=horizon as u64 {
            match self.partial_product(l) {
                Some(m) => chain.push(IntMatrix::scalar(1, BigInt::from(m))),
                None => break,
            }
        }
        SubgroupChainZn { rank: 1, chain, rule: None }
    }
}

/// Counts (sparse, dense) among the first r rule terms of the 2^t-gap rule.
fn gap_counts(r: u64) -> (u64, u64) {
    let mut left = r;
    let mut s = 0;
    let mut d = 0;
    let mut t = 1u32;
    while left > 0 {
        s += 1;
        left -= 1;
        let block = if t >= 63 { u64::MAX } else { 1u64 << t };
        let take = block.min(left);
        d += take;
        left -= take;
        t += 1;
    }
    (s, d)
}

/// Mixed-radix fiber with the canonical metric (3^{-l} unless given).
pub fn fiber(pres: &Presentation1D, depth: usize, metric: Option<WeightedMetric>) -> Result<MetricSpace> {
    if depth == 0 {
        return input("fiber depth must be at least 1");
    }
    let space = LevelSpace::mixed_radix(pres.degrees_u32(depth)?)?;
    MetricSpace::new(space, Metric::Weighted(metric.unwrap_or_default()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeMultiset {
    /// Prime factors of m_1, m_2, ... in order, ascending within each degree.
    pub entries: Vec<u64>,
    /// Number of entries contributed by the first l degrees, l = 1..=horizon.
    pub boundaries: Vec<usize>,
    pub horizon: usize,
    pub certificate: Option<PrimeCertificate>,
}

pub fn prime_multiset(pres: &Presentation1D, horizon: usize) -> Result<PrimeMultiset> {
    if horizon == 0 {
        return input("horizon must be at least 1");
    }
    let mut entries = Vec::new();
    let mut boundaries = Vec::new();
    for l in 1..=horizon as u64 {
        match pres.degree(l) {
            Some(m) => entries.extend(factor(m)),
            None => break,
        }
        boundaries.push(entries.len());
    }
    Ok(PrimeMultiset { entries, boundaries, horizon, certificate: pres.certificate() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

/// Minimal indexing functions, index i at position i-1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexingFunctions {
    /// nu_l: least nu with G_nu ⊆ H_l.
    pub nu: Vec<Option<u64>>,
    /// l_nu: least l with H_l ⊆ G_nu.
    pub ell: Vec<Option<u64>>,
}

impl IndexingFunctions {
    fn swapped(&self) -> IndexingFunctions {
        IndexingFunctions { nu: self.ell.clone(), ell: self.nu.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerReport {
    pub verdict: Verdict,
    /// true when decided by certificates rather than at the horizon
    pub exact: bool,
    pub horizon: usize,
    pub label: String,
    pub explanation: String,
    pub indexing: Option<IndexingFunctions>,
}

fn label(verdict: Verdict, exact: bool) -> String {
    let base = match verdict {
        Verdict::Equivalent => "equivalent",
        Verdict::NotEquivalent => "not_equivalent",
        Verdict::Inconclusive => "inconclusive",
    };
    if exact {
        base.to_string()
    } else {
        format!("{base}@horizon")
    }
}

fn tower_report(verdict: Verdict, exact: bool, horizon: usize, explanation: String, indexing: Option<IndexingFunctions>) -> TowerReport {
    TowerReport { verdict, exact, horizon, label: label(verdict, exact), explanation, indexing }
}

/// Least nu with m_1...m_l (of `p`) dividing n_1...n_nu (of `q`).
fn covering_level(p: &Presentation1D, q: &Presentation1D, l: u64) -> Option<u64> {
    let mut need = 0;
    for prime in p.prime_support() {
        let e = p.exponent(prime, l)?;
        need = need.max(q.level_reaching(prime, e)?);
    }
    Some(need)
}

fn indexing_1d(p: &Presentation1D, q: &Presentation1D, horizon: usize) -> IndexingFunctions {
    let nu = (1..=horizon as u64).map(|l| covering_level(p, q, l)).collect();
    let ell = (1..=horizon as u64).map(|v| covering_level(q, p, v)).collect();
    IndexingFunctions { nu, ell }
}

/// Tower equivalence of two presentations over the circle.
pub fn tower_equivalent_1d(p: &Presentation1D, q: &Presentation1D, horizon: usize) -> Result<TowerReport> {
    p.validate()?;
    q.validate()?;
    match (p.certificate(), q.certificate()) {
        (Some(cp), Some(cq)) => {
            if cp.same_supernatural(&cq) {
                Ok(tower_report(
                    Verdict::Equivalent,
                    true,
                    horizon,
                    "same primes occur infinitely often and finite exponents agree".into(),
                    Some(indexing_1d(p, q, horizon)),
                ))
            } else {
                Ok(tower_report(
                    Verdict::NotEquivalent,
                    true,
                    horizon,
                    "prime multisets differ (infinitely occurring primes or finite exponents)".into(),
                    None,
                ))
            }
        }
        _ => {
            let ix = indexing_1d(p, q, horizon);
            if ix.nu.iter().chain(&ix.ell).all(Option::is_some) {
                Ok(tower_report(
                    Verdict::Equivalent,
                    false,
                    horizon,
                    "all partial products divide within the known terms".into(),
                    Some(ix),
                ))
            } else {
                Ok(tower_report(
                    Verdict::Inconclusive,
                    false,
                    horizon,
                    "missing rule certificate; some partial product has no partner within the known terms".into(),
                    None,
                ))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisplacementValue {
    Bounded { d: u64 },
    UnboundedTrend,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub value: DisplacementValue,
    pub exact: bool,
    pub horizon: usize,
    /// Running sup of max(|nu_i - i|, |l_i - i|), i = 1..
    pub running_sup: Vec<u64>,
    /// Windows of the final two thirds in which the running sup increased.
    pub increasing_windows: usize,
    pub windows: usize,
    pub explanation: String,
}

impl DisplacementReport {
    pub fn is_bounded(&self) -> bool {
        matches!(self.value, DisplacementValue::Bounded { .. })
    }
}

const TREND_WINDOWS: usize = 6;

fn deviations(ix: &IndexingFunctions, upto: usize) -> Option<Vec<u64>> {
    (0..upto)
        .map(|i| {
            let idx = i as u64 + 1;
            let a = (*ix.nu.get(i)?)?;
            let b = (*ix.ell.get(i)?)?;
            Some(a.abs_diff(idx).max(b.abs_diff(idx)))
        })
        .collect()
}

fn trend(ix: &IndexingFunctions, upto: usize, horizon: usize) -> DisplacementReport {
    let Some(devs) = deviations(ix, upto) else {
        return DisplacementReport {
            value: DisplacementValue::Inconclusive,
            exact: false,
            horizon,
            running_sup: vec![],
            increasing_windows: 0,
            windows: TREND_WINDOWS,
            explanation: "indexing functions not total on the tested range".into(),
        };
    };
    let mut running = Vec::with_capacity(devs.len());
    let mut sup = 0;
    for d in devs {
        sup = sup.max(d);
        running.push(sup);
    }
    let m = running.len();
    let start = m / 3;
    let span = m - start;
    let mut increasing = 0;
    for w in 0..TREND_WINDOWS {
        let a = start + w * span / TREND_WINDOWS;
        let b = start + (w + 1) * span / TREND_WINDOWS;
        if b > a && a > 0 && running[b - 1] > running[a - 1] {
            increasing += 1;
        }
    }
    let last_third = m - m / 3;
    let stable = m > 0 && running[last_third.saturating_sub(1)..].iter().all(|&s| s == running[m - 1]);
    let (value, explanation) = if increasing >= 3 {
        (DisplacementValue::UnboundedTrend, format!("running sup increased in {increasing} of {TREND_WINDOWS} windows"))
    } else if stable {
        (DisplacementValue::Bounded { d: running[m - 1] }, "running sup constant over the final third".to_string())
    } else {
        (DisplacementValue::Inconclusive, "running sup neither stable nor growing".to_string())
    };
    DisplacementReport { value, exact: false, horizon, running_sup: running, increasing_windows: increasing, windows: TREND_WINDOWS, explanation }
}

fn period_len(p: &Presentation1D) -> Option<u64> {
    match p.rule.as_ref()? {
        DegreeRule::Periodic { period } => Some(period.len() as u64),
        DegreeRule::GapTwoExp { .. } => None,
    }
}

/// Exact displacement from the rules, when they decide it.
fn exact_displacement(p: &Presentation1D, q: &Presentation1D) -> Option<(DisplacementValue, String)> {
    p.rule.as_ref()?;
    q.rule.as_ref()?;
    if p.certificate.is_some() || q.certificate.is_some() {
        return None;
    }
    let (cp, cq) = (p.certificate()?, q.certificate()?);
    let primes: BTreeSet<u64> = cp.primes.keys().chain(cq.primes.keys()).copied().collect();
    let mut all_equal_linear = true;
    for &pr in &primes {
        match (cp.growth(pr), cq.growth(pr)) {
            (Growth::Linear { rate: a }, Growth::Linear { rate: b }) if a != b => {
                return Some((DisplacementValue::UnboundedTrend, format!("prime {pr}: exponent rates differ, so indices drift linearly")));
            }
            (Growth::Linear { .. }, Growth::Sublinear) | (Growth::Sublinear, Growth::Linear { .. }) => {
                return Some((DisplacementValue::UnboundedTrend, format!("prime {pr}: density zero on one side only, so indices drift without bound")));
            }
            (Growth::Sublinear, _) | (_, Growth::Sublinear) => all_equal_linear = false,
            _ => {}
        }
    }
    if !all_equal_linear {
        return None;
    }
    let (lp, lq) = (period_len(p)?, period_len(q)?);
    let joint = lp.lcm(&lq);
    let settle = (p.prefix.len().max(q.prefix.len()) as u64).max(1);
    // past the point where both partners clear the prefixes, nu_{i+L} = nu_i + L
    let mut i = 1u64;
    let mut start = None;
    let mut sup = 0u64;
    loop {
        let a = covering_level(p, q, i)?;
        let b = covering_level(q, p, i)?;
        sup = sup.max(a.abs_diff(i)).max(b.abs_diff(i));
        if start.is_none() && i >= settle && a >= q.prefix.len() as u64 && b >= p.prefix.len() as u64 {
            start = Some(i);
        }
        if let Some(s) = start {
            if i >= s + 2 * joint {
                break;
            }
        }
        if i > 1 << 20 {
            return None;
        }
        i += 1;
    }
    Some((DisplacementValue::Bounded { d: sup }, format!("periodic rules with equal exponent rates; sup taken over a full joint period ({joint}) past the prefixes")))
}

/// Displacement of the minimal indexing functions.
pub fn displacement(p: &Presentation1D, q: &Presentation1D, horizon: usize) -> Result<DisplacementReport> {
    let tower = tower_equivalent_1d(p, q, horizon)?;
    if tower.verdict != Verdict::Equivalent {
        return Err(Error::Precondition(format!("presentations are {}", tower.label)));
    }
    let ix = tower.indexing.unwrap_or_default();
    let mut report = trend(&ix, horizon, horizon);
    if tower.exact {
        if let Some((value, why)) = exact_displacement(p, q) {
            report.value = value;
            report.exact = true;
            report.explanation = format!("{why}; trend: {}", report.explanation);
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub homeomorphic: Answer,
    /// Lipschitz equivalence of the canonical metrics with weights 3^{-l}.
    pub lipschitz: Answer,
    pub exact: bool,
    pub tower: TowerReport,
    pub displacement: Option<DisplacementReport>,
    pub horizon: usize,
}

impl ClassificationReport {
    pub fn summary(&self) -> String {
        let a = |x: Answer| match x {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Inconclusive => "inconclusive",
        };
        let mut s = format!("homeomorphic={} lipschitz={}", a(self.homeomorphic), a(self.lipschitz));
        if let Some(DisplacementReport { value: DisplacementValue::Bounded { d }, .. }) = &self.displacement {
            s.push_str(&format!(" D={d}"));
        }
        s
    }
}

fn classify(tower: TowerReport, disp: Option<DisplacementReport>, horizon: usize) -> ClassificationReport {
    let (homeomorphic, lipschitz) = match tower.verdict {
        Verdict::NotEquivalent => (Answer::No, Answer::No),
        Verdict::Inconclusive => (Answer::Inconclusive, Answer::Inconclusive),
        Verdict::Equivalent => {
            let lip = match disp.as_ref().map(|d| &d.value) {
                Some(DisplacementValue::Bounded { .. }) => Answer::Yes,
                Some(DisplacementValue::UnboundedTrend) => Answer::No,
                _ => Answer::Inconclusive,
            };
            (Answer::Yes, lip)
        }
    };
    let exact = tower.exact && disp.as_ref().is_none_or(|d| d.exact);
    ClassificationReport { homeomorphic, lipschitz, exact, tower, displacement: disp, horizon }
}

/// Tower equivalence, then displacement, then the bounded verdict.
pub fn bounded_tower_equivalent(p: &Presentation1D, q: &Presentation1D, horizon: usize) -> Result<ClassificationReport> {
    let tower = tower_equivalent_1d(p, q, horizon)?;
    let disp = if tower.verdict == Verdict::Equivalent { Some(displacement(p, q, horizon)?) } else { None };
    Ok(classify(tower, disp, horizon))
}

/// Chain generation rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainRule {
    /// H_l = A^l Z^n.
    Power { matrix: IntMatrix },
}

/// A descending chain of finite-index subgroups H_1 ⊇ H_2 ⊇ ... of Z^n (H_0 = Z^n).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupChainZn {
    pub rank: usize,
    #[serde(default)]
    pub chain: Vec<IntMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<ChainRule>,
}

impl SubgroupChainZn {
    pub fn explicit(rank: usize, chain: Vec<IntMatrix>) -> Self {
        SubgroupChainZn { rank, chain, rule: None }
    }

    pub fn power(matrix: IntMatrix) -> Self {
        SubgroupChainZn { rank: matrix.n(), chain: vec![], rule: Some(ChainRule::Power { matrix }) }
    }

    /// H_1 .. H_horizon (fewer if the explicit chain is shorter).
    pub fn terms(&self, horizon: usize) -> Vec<IntMatrix> {
        match &self.rule {
            Some(ChainRule::Power { matrix }) => {
                let mut out = Vec::with_capacity(horizon);
                let mut acc = matrix.clone();
                for _ in 0..horizon {
                    out.push(acc.clone());
                    acc = acc.mul(matrix);
                }
                out
            }
            None => self.chain.iter().take(horizon).cloned().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub valid: bool,
    pub indices: Vec<String>,
    pub issues: Vec<String>,
}

pub fn chain_validate(c: &SubgroupChainZn, horizon: usize) -> Result<ChainReport> {
    let terms = c.terms(horizon);
    let mut issues = Vec::new();
    let mut indices = Vec::new();
    let mut prev_index = BigInt::one();
    let mut prev: Option<&IntMatrix> = None;
    for (i, m) in terms.iter().enumerate() {
        if m.n() != c.rank {
            return input(format!("term {} has rank {} instead of {}", i + 1, m.n(), c.rank));
        }
        let det = m.det();
        if det.is_zero() {
            return input(format!("term {} is singular", i + 1));
        }
        let idx = num_traits::Signed::abs(&det);
        indices.push(idx.to_string());
        if idx <= prev_index {
            issues.push(format!("index does not grow at level {}", i + 1));
        }
        if let Some(p) = prev {
            if !subgroup_contains(p, m)? {
                issues.push(format!("H_{} is not contained in H_{}", i + 1, i));
            }
        }
        prev_index = idx;
        prev = Some(m);
    }
    Ok(ChainReport { valid: issues.is_empty(), indices, issues })
}

/// Least j with `small[j-1]` ⊆ `big`, by bisection (containment is monotone in j).
fn first_inside(big: &IntMatrix, small: &[IntMatrix]) -> Result<Option<u64>> {
    if small.is_empty() || !subgroup_contains(big, small.last().unwrap_or(big))? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, small.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if subgroup_contains(big, &small[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo as u64 + 1))
}

fn prime_obstruction(need: &IntMatrix, deepest: &IntMatrix) -> Option<u64> {
    let a = num_traits::Signed::abs(&need.det()).to_u64()?;
    let b = num_traits::Signed::abs(&deepest.det());
    factor(a).into_iter().find(|&p| !(&b % p).is_zero())
}

/// Tower equivalence of two Z^n chains by inclusion search up to the horizon.
pub fn tower_equivalent_chain(p: &SubgroupChainZn, q: &SubgroupChainZn, horizon: usize) -> Result<TowerReport> {
    if p.rank != q.rank {
        return input(format!("rank mismatch: {} vs {}", p.rank, q.rank));
    }
    let hp = p.terms(horizon);
    let gq = q.terms(horizon);
    for m in hp.iter().chain(&gq) {
        m.check_nonsingular()?;
    }
    let mut nu = Vec::new();
    let mut ell = Vec::new();
    for h in &hp {
        nu.push(first_inside(h, &gq)?);
    }
    for g in &gq {
        ell.push(first_inside(g, &hp)?);
    }
    let tested = (horizon / 2).max(1);
    let total = |v: &[Option<u64>]| v.len() >= tested && v[..tested].iter().all(Option::is_some);
    let ix = IndexingFunctions { nu: nu.clone(), ell: ell.clone() };
    if total(&nu) && total(&ell) {
        return Ok(tower_report(
            Verdict::Equivalent,
            false,
            horizon,
            format!("every index up to {tested} has a partner within {horizon}"),
            Some(ix),
        ));
    }
    let obstruction = |need: &[IntMatrix], other: &[IntMatrix], found: &[Option<u64>]| -> Option<(usize, u64)> {
        let deepest = other.last()?;
        found.iter().take(tested).enumerate().find_map(|(i, f)| {
            if f.is_some() {
                return None;
            }
            prime_obstruction(&need[i], deepest).map(|pr| (i + 1, pr))
        })
    };
    if let Some((i, pr)) = obstruction(&hp, &gq, &nu).or_else(|| obstruction(&gq, &hp, &ell)) {
        return Ok(tower_report(
            Verdict::NotEquivalent,
            false,
            horizon,
            format!("index obstruction at level {i}: prime {pr} divides the index there but no index on the other side"),
            None,
        ));
    }
    Ok(tower_report(Verdict::Inconclusive, false, horizon, "partners not found within the horizon".into(), Some(ix)))
}

/// Displacement for chains, on the tested range (half the horizon).
pub fn displacement_chain(p: &SubgroupChainZn, q: &SubgroupChainZn, horizon: usize) -> Result<DisplacementReport> {
    let tower = tower_equivalent_chain(p, q, horizon)?;
    if tower.verdict != Verdict::Equivalent {
        return Err(Error::Precondition(format!("chains are {}", tower.label)));
    }
    let ix = tower.indexing.unwrap_or_default();
    Ok(trend(&ix, (horizon / 2).max(1), horizon))
}

pub fn classify_chains(p: &SubgroupChainZn, q: &SubgroupChainZn, horizon: usize) -> Result<ClassificationReport> {
    let tower = tower_equivalent_chain(p, q, horizon)?;
    let disp = if tower.verdict == Verdict::Equivalent { Some(displacement_chain(p, q, horizon)?) } else { None };
    Ok(classify(tower, disp, horizon))
}

/// Symmetric view used by tests: D(P,Q) computed from the swapped functions.
pub fn swapped_displacement(ix: &IndexingFunctions, upto: usize) -> Option<u64> {
    deviations(&ix.swapped(), upto).map(|d| d.into_iter().max().unwrap_or(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub depth: usize,
    pub alpha: usize,
    pub maps_checked: usize,
    pub pairs_checked: u64,
    pub witness: Option<IsometryWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryWitness {
    pub word: String,
    pub u: Vec<u32>,
    pub v: Vec<u32>,
    #[serde(with = "crate::rational::serde_q")]
    pub before: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub after: Q,
}

impl IsometryReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Checks that every map of word length at most `alpha` preserves all distances.
pub fn check_isometry(g: &Pseudogroup, alpha: usize) -> Result<IsometryReport> {
    let model = FiniteModel::new(g)?;
    let ball = word_ball(g, alpha)?;
    let labels = g.labels();
    let mut pairs = 0;
    for e in &ball.entries {
        let defined: Vec<u32> = (0..model.n() as u32).filter(|&i| e.graph[i as usize] != u32::MAX).collect();
        for (a, &i) in defined.iter().enumerate() {
            for &j in &defined[a + 1..] {
                pairs += 1;
                let (x, y) = (e.graph[i as usize], e.graph[j as usize]);
                if model.rank(i, j) != model.rank(x, y) {
                    return Ok(IsometryReport {
                        depth: g.depth,
                        alpha,
                        maps_checked: ball.count(),
                        pairs_checked: pairs,
                        witness: Some(IsometryWitness {
                            word: e.word.render(&labels),
                            u: model.points[i as usize].clone(),
                            v: model.points[j as usize].clone(),
                            before: model.distance(i, j).clone(),
                            after: model.distance(x, y).clone(),
                        }),
                    });
                }
            }
        }
    }
    Ok(IsometryReport { depth: g.depth, alpha, maps_checked: ball.count(), pairs_checked: pairs, witness: None })
}

/// The adding machine of `pres` at `depth` acts isometrically on all words up to `alpha`.
pub fn isometric_action_check(pres: &Presentation1D, depth: usize, alpha: usize) -> Result<IsometryReport> {
    check_isometry(&odometer_system(pres, depth)?, alpha)
}
