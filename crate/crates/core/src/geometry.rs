//! Covering-number estimators: box dimension and the doubling property.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::metric::{Metric, MetricSpace};
use crate::rational::{fmt_q, least_squares, ln_biguint, ln_q, Q};

/// Counts beyond this are refused rather than reported.
pub const MAX_COVER_COUNT_BITS: u64 = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub depth: usize,
    #[serde(with = "crate::rational::serde_q")]
    pub scale: Q,
    #[serde(with = "crate::rational::serde_biguint")]
    pub count: BigUint,
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDimensionReport {
    pub rows: Vec<ScaleRow>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Set when no slope can be fitted.
    pub flag: Option<String>,
    pub certified_depth: usize,
    pub relation: String,
}

/// Radius at which balls are exactly the depth-`depth` cylinders.
fn cylinder_scale(ms: &MetricSpace, depth: usize) -> Result<Q> {
    match &ms.metric {
        Metric::Weighted(w) => {
            if !ms.space.is_coherent() && !w.separated_tail() {
                return Err(Error::UnsupportedMetric(
                    "box counting by cylinders needs a coherent space or separated tails".into(),
                ));
            }
            Ok(w.tail(depth + 1))
        }
        Metric::Piecewise(_) => Err(Error::UnsupportedMetric("box counting on piecewise metrics".into())),
    }
}

/// Covering counts N(delta) at the scales delta_l = tail(l+1), where balls are
/// depth-l cylinders, and the least-squares slope of ln N against ln(1/delta).
pub fn box_dimension_estimate(
    ms: &MetricSpace,
    depths: std::ops::RangeInclusive<usize>,
) -> Result<BoxDimensionReport> {
    if depths.is_empty() {
        return usage("empty depth range");
    }
    let mut rows: Vec<ScaleRow> = Vec::new();
    for depth in depths.clone() {
        if ms.space.depth_limit().is_some_and(|d| depth > d) {
            return usage(format!("depth {depth} exceeds the space depth"));
        }
        let count = ms.space.count(depth);
        if count.bits() > MAX_COVER_COUNT_BITS {
            return Err(Error::Resource {
                message: format!("covering count at depth {depth} exceeds the budget"),
                partial: serde_json::to_value(&rows).ok(),
            });
        }
        let scale = cylinder_scale(ms, depth)?;
        rows.push(ScaleRow { depth, scale, count, residual: None });
    }
    let xs: Vec<f64> = rows.iter().map(|r| -ln_q(&r.scale)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| ln_biguint(&r.count)).collect();
    let fit = least_squares(&xs, &ys);
    let (slope, intercept, flag) = match fit {
        Some((b, a, res)) => {
            for (row, e) in rows.iter_mut().zip(res) {
                row.residual = Some(e);
            }
            (Some(b), Some(a), None)
        }
        None => (None, None, Some("single scale: slope undefined".to_string())),
    };
    Ok(BoxDimensionReport {
        rows,
        slope,
        intercept,
        flag,
        certified_depth: *depths.end(),
        relation: "box-counting estimate; upper bound for the Hausdorff dimension".into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingWitness {
    pub center: Vec<u32>,
    /// The ball B(center, radius) is this cylinder.
    pub cylinder: Vec<u32>,
    #[serde(with = "crate::rational::serde_q")]
    pub radius: Q,
    pub n: u32,
    #[serde(with = "crate::rational::serde_biguint")]
    pub count: BigUint,
    #[serde(with = "crate::rational::serde_biguint")]
    pub allowed: BigUint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DoublingVerdict {
    Pass { checks: u64 },
    Fail { witness: DoublingWitness },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub c: u64,
    pub max_depth: usize,
    #[serde(flatten)]
    pub verdict: DoublingVerdict,
}

impl DoublingReport {
    pub fn passed(&self) -> bool {
        matches!(self.verdict, DoublingVerdict::Pass { .. })
    }
}

/// Minimal number of radius-`r` balls covering the cylinder `prefix`
/// (balls are cylinders in a coherent space, so this is a partition count).
fn cover_count(ms: &MetricSpace, prefix: &mut Vec<u32>, r: &Q, max_depth: usize) -> BigUint {
    let k = prefix.len();
    if k == max_depth || ms.metric.level_distance(prefix.first().copied(), k + 1) <= *r {
        return BigUint::one();
    }
    let mut total = BigUint::default();
    for d in ms.space.children(prefix) {
        prefix.push(d);
        total += cover_count(ms, prefix, r, max_depth);
        prefix.pop();
    }
    total
}

/// Checks that every ball B(x, r) is covered by at most C^n balls of radius
/// r/2^n, for cylinder centers up to `max_depth` and the quantized radii
/// r = level distance at j+1 (the smallest radius giving each ball).
pub fn doubling_check(ms: &MetricSpace, c: u64, max_depth: usize) -> Result<DoublingReport> {
    if c <= 1 {
        return usage("doubling constant must exceed 1");
    }
    if !ms.space.is_coherent() {
        return Err(Error::UnsupportedMetric("doubling check needs a coherent space".into()));
    }
    ms.space.check_depth(max_depth)?;
    let mut checks = 0u64;
    for j in 0..max_depth {
        for cyl in ms.space.words(j)? {
            let center = ms.space.leftmost(&cyl, max_depth).unwrap_or_else(|| cyl.clone());
            let r = ms.metric.level_distance(center.first().copied(), j + 1);
            let mut allowed = BigUint::one();
            let mut n = 0u32;
            loop {
                n += 1;
                allowed *= c;
                let rn = &r / Q::from_integer((1u64 << n.min(62)).into());
                let mut p = cyl.clone();
                let count = cover_count(ms, &mut p, &rn, max_depth);
                checks += 1;
                if count > allowed {
                    return Ok(DoublingReport {
                        c,
                        max_depth,
                        verdict: DoublingVerdict::Fail {
                            witness: DoublingWitness { center, cylinder: cyl, radius: r, n, count, allowed },
                        },
                    });
                }
                let full = ms.space.count_under(&cyl, max_depth);
                if count == full || n >= 62 {
                    break;
                }
            }
        }
    }
    Ok(DoublingReport { c, max_depth, verdict: DoublingVerdict::Pass { checks } })
}

pub fn describe_witness(w: &DoublingWitness) -> String {
    format!(
        "ball of radius {} at {:?} needs {} balls of radius r/2^{} (allowed {})",
        fmt_q(&w.radius),
        w.center,
        w.count,
        w.n,
        w.allowed.to_u64().map(|v| v.to_string()).unwrap_or_else(|| w.allowed.to_string())
    )
}
