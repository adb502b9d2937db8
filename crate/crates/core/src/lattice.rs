//! Integer matrices, Hermite and Smith normal forms, annihilator lattices.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Dense integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds from rows of `i64`; panics on ragged input.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        IntMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().map(|&x| BigInt::from(x)).collect(),
        }
    }

    /// Builds an `n × r` matrix whose columns are `cols`.
    pub fn from_columns(cols: &[Vec<i64>]) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        if let Some(bad) = cols.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let mut m = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                m.set(i, j, BigInt::from(x));
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_i64(&self, i: usize) -> Vec<i64> {
        self.row(i)
            .iter()
            .map(|x| x.to_i64().expect("entry fits in i64"))
            .collect()
    }

    pub fn to_rows_i64(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row_i64(i)).collect()
    }

    pub fn column_i64(&self, j: usize) -> Vec<i64> {
        (0..self.rows)
            .map(|i| self.get(i, j).to_i64().expect("entry fits in i64"))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Ok(IntMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    fn select_rows(&self, range: std::ops::Range<usize>) -> IntMatrix {
        IntMatrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// `row_a ← x·row_a + y·row_b`, `row_b ← z·row_a + w·row_b` (simultaneously).
    fn combine_rows(&mut self, a: usize, b: usize, x: &BigInt, y: &BigInt, z: &BigInt, w: &BigInt) {
        for j in 0..self.cols {
            let ra = self.get(a, j).clone();
            let rb = self.get(b, j).clone();
            self.set(a, j, x * &ra + y * &rb);
            self.set(b, j, z * &ra + w * &rb);
        }
    }

    /// `row_a ← row_a − q·row_b`.
    fn sub_row_multiple(&mut self, a: usize, b: usize, q: &BigInt) {
        for j in 0..self.cols {
            let v = self.get(a, j) - q * self.get(b, j);
            self.set(a, j, v);
        }
    }

    fn negate_row(&mut self, a: usize) {
        for j in 0..self.cols {
            let v = -self.get(a, j);
            self.set(a, j, v);
        }
    }

    pub fn rank(&self) -> usize {
        let (h, _) = hnf(self);
        (0..h.rows).filter(|&i| h.row(i).iter().any(|x| !x.is_zero())).count()
    }

    /// Determinant by fraction-free Bareiss elimination.
    pub fn det(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut m = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m.get(k, k).is_zero() {
                match (k + 1..n).find(|&i| !m.get(i, k).is_zero()) {
                    Some(i) => {
                        m.swap_rows(i, k);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (m.get(i, j) * m.get(k, k) - m.get(i, k) * m.get(k, j)) / &prev;
                    m.set(i, j, v);
                }
            }
            prev = m.get(k, k).clone();
        }
        Ok(sign * m.get(n - 1, n - 1))
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Row Hermite normal form: returns `(H, U)` with `U` unimodular and `U·M = H`.
///
/// Pivots are positive, each pivot lies strictly right of the one above, and
/// entries above a pivot are reduced into `[0, pivot)`. Zero rows come last.
pub fn hnf(m: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let mut h = m.clone();
    let mut u = IntMatrix::identity(m.rows);
    let mut p = 0;
    for j in 0..h.cols {
        if p == h.rows {
            break;
        }
        for i in p + 1..h.rows {
            if h.get(i, j).is_zero() {
                continue;
            }
            if h.get(p, j).is_zero() {
                h.swap_rows(p, i);
                u.swap_rows(p, i);
                continue;
            }
            let a = h.get(p, j).clone();
            let b = h.get(i, j).clone();
            let eg = a.extended_gcd(&b);
            let (g, x, y) = (eg.gcd, eg.x, eg.y);
            let z = -(&b / &g);
            let w = &a / &g;
            h.combine_rows(p, i, &x, &y, &z, &w);
            u.combine_rows(p, i, &x, &y, &z, &w);
        }
        if h.get(p, j).is_zero() {
            continue;
        }
        if h.get(p, j).is_negative() {
            h.negate_row(p);
            u.negate_row(p);
        }
        let pivot = h.get(p, j).clone();
        for i in 0..p {
            let q = h.get(i, j).div_floor(&pivot);
            if !q.is_zero() {
                h.sub_row_multiple(i, p, &q);
                u.sub_row_multiple(i, p, &q);
            }
        }
        p += 1;
    }
    (h, u)
}

/// Elementary divisors `d₁ | d₂ | …` of the Smith normal form (nonzero ones only).
pub fn smith_divisors(m: &IntMatrix) -> Vec<BigInt> {
    let mut cur = m.clone();
    loop {
        cur = hnf(&cur).0;
        let t = hnf(&cur.transpose()).0;
        cur = t.transpose();
        let diagonal = (0..cur.rows)
            .all(|i| (0..cur.cols).all(|j| i == j || cur.get(i, j).is_zero()));
        if diagonal {
            break;
        }
    }
    let mut d: Vec<BigInt> = (0..cur.rows.min(cur.cols))
        .map(|i| cur.get(i, i).abs())
        .filter(|x| !x.is_zero())
        .collect();
    // (a, b) -> (gcd, lcm) until the chain divides
    for i in 0..d.len() {
        for k in i + 1..d.len() {
            let g = d[i].gcd(&d[k]);
            let l = d[i].lcm(&d[k]);
            d[i] = g;
            d[k] = l;
        }
    }
    d
}

/// A ℤ-basis of the saturated lattice `{α ∈ ℤⁿ : αᵀK = 0}`, as rows, in
/// Hermite normal form (first nonzero entry of each row positive).
pub fn annihilator_basis(k: &IntMatrix) -> Result<IntMatrix> {
    let (n, r) = (k.rows(), k.cols());
    let (h, u) = hnf(k);
    let rank = (0..h.rows()).filter(|&i| h.row(i).iter().any(|x| !x.is_zero())).count();
    if rank < r {
        return Err(Error::RankDeficient {
            expected: r,
            found: rank,
        });
    }
    let tail = u.select_rows(rank..n);
    Ok(hnf(&tail).0)
}
