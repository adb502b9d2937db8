//! Small exact linear algebra over ℚ.

use num_traits::{One, Zero};

use crate::rational::Rational;

pub(crate) type QMatrix = Vec<Vec<Rational>>;

/// Reduced row echelon form; returns the nonzero rows and pivot columns.
pub(crate) fn rref(rows: &[Vec<Rational>], cols: usize) -> (QMatrix, Vec<usize>) {
    let mut m: QMatrix = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..m[i].len() {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

pub(crate) fn rank(rows: &[Vec<Rational>], cols: usize) -> usize {
    rref(rows, cols).1.len()
}

/// Basis of `{x : M x = 0}`.
pub(crate) fn nullspace(rows: &[Vec<Rational>], cols: usize) -> QMatrix {
    let (r, pivots) = rref(rows, cols);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rational::zero(); cols];
            v[f] = Rational::one();
            for (row, &p) in r.iter().zip(&pivots) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect()
}

/// Solves the square system `A x = b`; `None` if singular.
pub(crate) fn solve(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    let aug: QMatrix = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let (r, pivots) = rref(&aug, n);
    if pivots.len() < n {
        return None;
    }
    Some(r.iter().map(|row| row[n].clone()).collect())
}

pub(crate) fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
