//! Small helpers around `BigRational`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{input, Result};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qint(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

/// `base^{-exp}`.
pub fn inv_pow(base: u32, exp: u32) -> Q {
    BigRational::new(BigInt::one(), BigInt::from(base).pow(exp))
}

pub fn pow(x: &Q, exp: u32) -> Q {
    let mut acc = Q::one();
    for _ in 0..exp {
        acc *= x;
    }
    acc
}

/// Accepts "3", "-2", "1/18".
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let parse_int = |t: &str| t.trim().parse::<BigInt>().ok();
    let parsed = match s.split_once('/') {
        Some((n, d)) => match (parse_int(n), parse_int(d)) {
            (Some(n), Some(d)) if !d.is_zero() => Some(BigRational::new(n, d)),
            _ => None,
        },
        None => parse_int(s).map(BigRational::from_integer),
    };
    match parsed {
        Some(v) => Ok(v),
        None => input(format!("not a rational number: {s:?}")),
    }
}

pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(0.0);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational, robust for very large numerators/denominators.
pub fn ln_q(x: &Q) -> f64 {
    debug_assert!(x.is_positive());
    let n = x.numer().abs().to_biguint().unwrap_or_default();
    let d = x.denom().abs().to_biguint().unwrap_or_default();
    ln_biguint(&n) - ln_biguint(&d)
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| ln_q(x).exp())
}

pub mod serde_q {
    use super::{fmt_q, parse_q, Q};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) => parse_q(&s).map_err(D::Error::custom),
            serde_json::Value::Number(n) => parse_q(&n.to_string()).map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("expected rational, got {other}"))),
        }
    }
}

/// Decimal-string form for counts that can outgrow every machine integer.
pub mod serde_biguint {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(D::Error::custom(format!("expected count, got {other}"))),
        };
        text.parse().map_err(D::Error::custom)
    }
}

/// Ordinary least squares fit `y = a + b x`; returns (slope, intercept, residuals).
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, Vec<f64>)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    Some((slope, intercept, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "1/18", "-3/2", "7"] {
            assert_eq!(fmt_q(&parse_q(s).unwrap()), s);
        }
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
    }

    #[test]
    fn ln_of_huge_values_is_accurate() {
        let big = BigUint::from(3u32).pow(5000);
        let expected = 5000.0 * 3f64.ln();
        assert!((ln_biguint(&big) - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn least_squares_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let (b, a, r) = least_squares(&xs, &ys).unwrap();
        assert!((b - 2.0).abs() < 1e-12 && (a - 1.0).abs() < 1e-12);
        assert!(r.iter().all(|e| e.abs() < 1e-12));
        assert!(least_squares(&[1.0], &[2.0]).is_none());
    }
}
