//! Full-rank integer lattices in Z^n: Hermite normal form and inclusion.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// A square integer matrix whose columns generate a sublattice of Z^n.
/// Serialized as nested arrays; entries are JSON integers, or decimal strings when too large.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: Vec<Vec<BigInt>>,
}

impl Serialize for IntMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| match i64::try_from(x) {
                        Ok(v) => serde_json::Value::from(v),
                        Err(_) => serde_json::Value::from(x.to_string()),
                    })
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = Vec::<Vec<serde_json::Value>>::deserialize(d)?;
        let rows = raw
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|v| match v {
                        serde_json::Value::Number(n) => n.to_string().parse::<BigInt>().map_err(D::Error::custom),
                        serde_json::Value::String(t) => t.trim().parse::<BigInt>().map_err(D::Error::custom),
                        other => Err(D::Error::custom(format!("expected integer, got {other}"))),
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        IntMatrix::new(rows).map_err(D::Error::custom)
    }
}

impl IntMatrix {
    pub fn new(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return input("lattice matrices must be square and nonempty");
        }
        Ok(IntMatrix { rows })
    }

    pub fn from_i64(rows: &[Vec<i64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect())
    }

    pub fn scalar(n: usize, c: BigInt) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { c.clone() } else { BigInt::zero() }).collect())
            .collect();
        IntMatrix { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        let n = self.n();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| &self.rows[i][k] * &other.rows[k][j]).sum()).collect())
            .collect();
        IntMatrix { rows }
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        self.rows.iter().map(|r| r[j].clone()).collect()
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        let n = self.n();
        let mut a = self.rows.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                    Some(r) => {
                        a.swap(k, r);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * &a[n - 1][n - 1]
    }

    pub fn check_nonsingular(&self) -> Result<()> {
        if self.det().is_zero() {
            return input("singular lattice matrix");
        }
        Ok(())
    }

    /// Lower-triangular column Hermite normal form: positive diagonal, entries
    /// left of the diagonal reduced into [0, pivot).
    pub fn hermite(&self) -> Result<IntMatrix> {
        self.check_nonsingular()?;
        let n = self.n();
        let mut a = self.rows.clone();
        for i in 0..n {
            for j in i + 1..n {
                if a[i][j].is_zero() {
                    continue;
                }
                // column ops on (i, j) making a[i][j] zero
                let (x, y) = (a[i][i].clone(), a[i][j].clone());
                let eg = x.extended_gcd(&y);
                let (g, s, t) = (eg.gcd, eg.x, eg.y);
                let (u, v) = (&x / &g, &y / &g);
                for row in a.iter_mut() {
                    let ci = row[i].clone();
                    let cj = row[j].clone();
                    row[i] = &s * &ci + &t * &cj;
                    row[j] = &u * &cj - &v * &ci;
                }
            }
            if a[i][i].is_negative() {
                for row in a.iter_mut() {
                    row[i] = -row[i].clone();
                }
            }
            let pivot = a[i][i].clone();
            for j in 0..i {
                let q = a[i][j].div_floor(&pivot);
                if !q.is_zero() {
                    for row in a.iter_mut() {
                        let ci = row[i].clone();
                        row[j] -= &q * ci;
                    }
                }
            }
        }
        Ok(IntMatrix { rows: a })
    }

    /// Whether the integer vector `b` lies in the column lattice.
    pub fn contains_vector(&self, b: &[BigInt]) -> Result<bool> {
        let h = self.hermite()?;
        Ok(solve_lower(&h, b))
    }
}

fn solve_lower(h: &IntMatrix, b: &[BigInt]) -> bool {
    let n = h.n();
    let mut x: Vec<BigInt> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rhs = b[i].clone();
        for (j, xj) in x.iter().enumerate() {
            rhs -= &h.rows[i][j] * xj;
        }
        let (q, r) = rhs.div_mod_floor(&h.rows[i][i]);
        if !r.is_zero() {
            return false;
        }
        x.push(q);
    }
    true
}

/// B ⊆ A, as column lattices.
pub fn subgroup_contains(a: &IntMatrix, b: &IntMatrix) -> Result<bool> {
    if a.n() != b.n() {
        return input("lattices of different rank");
    }
    b.check_nonsingular()?;
    let h = a.hermite()?;
    Ok((0..b.n()).all(|j| solve_lower(&h, &b.column(j))))
}
