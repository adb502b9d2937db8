//! Truncated power series `Σ_{k<N} c_k T^{k/D}` with floating coefficients,
//! used for Newton iteration on complex data.
//!
//! Unlike [`NovikovSeries`] there is no absolute zero test, so corrections far
//! smaller than the leading coefficients survive. Noise is judged against a
//! majorant instead, which is unaffected by rescaling `T`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::novikov::{NovikovSeries, Scalar, Valuation};
use crate::potential::LaurentPoly;
use crate::rational::Rational;

pub type Coeffs = Vec<Complex64>;

/// An exponent grid `(1/D)ℤ` with `N` slots below the working precision.
#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub d: i64,
    pub n: usize,
}

impl Grid {
    /// The coarsest grid holding `exponents`, with `N = ⌈prec·D⌉`. `None` if
    /// that exceeds `max_len` slots.
    pub fn fit<'a>(exponents: impl IntoIterator<Item = &'a Rational>, prec: &Rational, max_len: usize) -> Option<Grid> {
        let mut d = prec.denom().clone();
        for e in exponents {
            d = d.lcm(e.denom());
            if d > max_len.into() {
                return None;
            }
        }
        let d = d.to_i64()?;
        let n = (prec * Rational::from_integer(d.into())).ceil().to_integer().to_usize()?;
        (n <= max_len).then_some(Grid { d, n })
    }

    /// Slot of `e`, if `e` lies on the grid.
    pub fn index(&self, e: &Rational) -> Option<i64> {
        let k = e * Rational::from_integer(self.d.into());
        k.is_integer().then(|| k.to_integer().to_i64()).flatten()
    }

    pub fn exponent(&self, k: usize) -> Rational {
        Rational::new((k as i64).into(), self.d.into())
    }

    /// Number of slots strictly below `bound`.
    pub fn slots_below(&self, bound: &Rational) -> usize {
        if !bound.is_positive() {
            return 0;
        }
        let k = (bound * Rational::from_integer(self.d.into())).ceil().to_integer();
        k.to_usize().unwrap_or(usize::MAX).min(self.n)
    }

    pub fn coefficients(&self, s: &NovikovSeries) -> Option<Coeffs> {
        let mut out = vec![Complex64::zero(); self.n];
        let top = Rational::from_integer((self.n as i64).into()) / Rational::from_integer(self.d.into());
        for (e, c) in s.terms().iter().take_while(|(e, _)| *e < top) {
            let k = self.index(e)?;
            if k < 0 {
                return None;
            }
            if let Some(slot) = out.get_mut(k as usize) {
                *slot = c.to_complex();
            }
        }
        Some(out)
    }

    /// Back to a series, truncated at `prec` and shifted by `shift`.
    pub fn series(&self, c: &[Complex64], prec: &Rational, shift: &Rational) -> NovikovSeries {
        NovikovSeries::from_terms(
            c.iter()
                .enumerate()
                .map(|(k, &z)| (self.exponent(k) + shift, Scalar::Complex(z))),
            Valuation::Finite(prec + shift),
        )
    }
}

pub fn mul(a: &[Complex64], b: &[Complex64]) -> Coeffs {
    let n = a.len();
    let mut out = vec![Complex64::zero(); n];
    for (i, &x) in a.iter().enumerate() {
        if x == Complex64::zero() {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

fn mul_abs(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// `1/a` for `a₀ ≠ 0`.
pub fn inv(a: &[Complex64]) -> Coeffs {
    let n = a.len();
    let mut b = vec![Complex64::zero(); n];
    if n == 0 {
        return b;
    }
    let a0 = a[0].inv();
    b[0] = a0;
    for k in 1..n {
        let s: Complex64 = (1..=k).map(|i| a[i] * b[k - i]).sum();
        b[k] = -s * a0;
    }
    b
}

/// A Laurent polynomial with coefficients on a grid.
pub struct DensePoly {
    terms: Vec<(Vec<i64>, Coeffs)>,
}

impl DensePoly {
    pub fn new(f: &LaurentPoly, grid: &Grid) -> Option<Self> {
        let terms = f
            .terms()
            .map(|(c, a)| grid.coefficients(a).map(|a| (c.to_vec(), a)))
            .collect::<Option<_>>()?;
        Some(DensePoly { terms })
    }

    fn exponents(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.terms
            .iter()
            .flat_map(|(c, _)| c.iter().enumerate().filter(|(_, &k)| k != 0).map(|(j, &k)| (j, k)))
    }
}

/// `1/a` with a coefficientwise bound on the sums that produced it.
fn inv_with_majorant(a: &[Complex64]) -> (Coeffs, Vec<f64>) {
    let b = inv(a);
    let n = a.len();
    let mut m = vec![0.0; n];
    if n > 0 {
        let a0 = a[0].norm().recip();
        m[0] = a0;
        for k in 1..n {
            m[k] = (1..=k).map(|i| a[i].norm() * m[k - i]).sum::<f64>() * a0;
        }
    }
    (b, m)
}

/// Integer powers of the coordinates, computed once per point, each with a
/// majorant for the rounding error of the sums behind it.
pub struct Powers {
    pows: Vec<BTreeMap<i64, (Coeffs, Vec<f64>)>>,
}

impl Powers {
    /// `x` must have nonzero constant terms wherever a negative power is needed.
    pub fn new<'a>(x: &[Coeffs], polys: impl IntoIterator<Item = &'a DensePoly>) -> Self {
        let mut need: Vec<(i64, i64)> = vec![(0, 0); x.len()];
        for p in polys {
            for (j, k) in p.exponents() {
                need[j].0 = need[j].0.min(k);
                need[j].1 = need[j].1.max(k);
            }
        }
        let chain = |m: &mut BTreeMap<i64, (Coeffs, Vec<f64>)>, base: (Coeffs, Vec<f64>), sign: i64, count: i64| {
            let mut p = base.clone();
            for k in 1..=count {
                if k > 1 {
                    p = (mul(&p.0, &base.0), mul_abs(&p.1, &base.1));
                }
                m.insert(sign * k, p.clone());
            }
        };
        let pows = x
            .iter()
            .zip(&need)
            .map(|(xj, &(lo, hi))| {
                let mut m = BTreeMap::new();
                chain(&mut m, (xj.clone(), xj.iter().map(|z| z.norm()).collect()), 1, hi);
                if lo < 0 {
                    chain(&mut m, inv_with_majorant(xj), -1, -lo);
                }
                m
            })
            .collect();
        Powers { pows }
    }

    fn get(&self, j: usize, k: i64) -> &(Coeffs, Vec<f64>) {
        &self.pows[j][&k]
    }
}

/// `f(x)`.
pub fn eval(f: &DensePoly, pw: &Powers) -> Coeffs {
    eval_with_majorant(f, pw, false).0
}

/// `f(x)` together with a coefficientwise majorant of all the sums that went
/// into it when `majorant` is set.
pub fn eval_with_majorant(f: &DensePoly, pw: &Powers, majorant: bool) -> (Coeffs, Vec<f64>) {
    let n = f.terms.first().map_or(0, |(_, a)| a.len());
    let mut value = vec![Complex64::zero(); n];
    let mut bound = vec![0.0; if majorant { n } else { 0 }];
    for (c, a) in &f.terms {
        let mut t = a.clone();
        let mut m: Vec<f64> = if majorant { a.iter().map(|z| z.norm()).collect() } else { Vec::new() };
        for (j, &k) in c.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let (p, pm) = pw.get(j, k);
            t = mul(&t, p);
            if majorant {
                m = mul_abs(&m, pm);
            }
        }
        for (v, z) in value.iter_mut().zip(&t) {
            *v += z;
        }
        for (b, z) in bound.iter_mut().zip(&m) {
            *b += z;
        }
    }
    (value, bound)
}

/// Zeros the coefficients of `v` that are at most `tol` times the majorant.
pub fn denoise(v: &mut [Complex64], majorant: &[f64], tol: f64) {
    for (z, &m) in v.iter_mut().zip(majorant) {
        if z.norm() <= tol * m {
            *z = Complex64::zero();
        }
    }
}

/// Solves `J δ = b` slot by slot; `J₀` must be invertible.
pub fn solve(j: &[Vec<Coeffs>], b: &[Coeffs]) -> Option<Vec<Coeffs>> {
    let m = b.len();
    let n = b.first().map_or(0, Vec::len);
    let j0 = DMatrix::from_fn(m, m, |r, c| j[r][c][0]);
    let lu = j0.lu();
    if !lu.is_invertible() {
        return None;
    }
    let mut delta = vec![vec![Complex64::zero(); n]; m];
    for k in 0..n {
        let mut rhs = nalgebra::DVector::from_fn(m, |r, _| b[r][k]);
        for r in 0..m {
            for c in 0..m {
                let s: Complex64 = (1..=k).map(|i| j[r][c][i] * delta[c][k - i]).sum();
                rhs[r] -= s;
            }
        }
        let x = lu.solve(&rhs)?;
        for c in 0..m {
            delta[c][k] = x[c];
        }
    }
    Some(delta)
}

pub fn is_finite(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
fn one(n: usize) -> Coeffs {
    let mut v = vec![Complex64::zero(); n];
    if n > 0 {
        v[0] = Complex64::new(1.0, 0.0);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_fit() {
        let exps = [ratio(1, 6), ratio(3, 4)];
        let g = Grid::fit(exps.iter(), &ratio(5, 2), 1000).unwrap();
        assert_eq!(g.d, 12);
        assert_eq!(g.n, 30);
        assert_eq!(g.slots_below(&int(1)), 12);
        assert_eq!(g.index(&ratio(1, 3)), Some(4));
        assert_eq!(g.index(&ratio(1, 5)), None);
        // terms past the precision need not lie on the grid
        let s = NovikovSeries::from_terms([(int(0), Scalar::int(1)), (ratio(26, 5), Scalar::int(1))], Valuation::Infinite);
        assert_eq!(g.coefficients(&s).unwrap()[0], Complex64::new(1.0, 0.0));
        assert!(Grid::fit(exps.iter(), &int(100), 1000).is_none());
    }

    #[test]
    fn inverse_of_one_plus_t() {
        let a = vec![c(1.0), c(1.0), c(0.0), c(0.0)];
        let b = inv(&a);
        assert_eq!(b, vec![c(1.0), c(-1.0), c(1.0), c(-1.0)]);
        assert_eq!(mul(&a, &b), one(4));
    }

    #[test]
    fn solve_triangular_system() {
        // (1 + T) δ = 1  ⇒  δ = 1 − T + T² − …
        let j = vec![vec![vec![c(1.0), c(1.0), c(0.0)]]];
        let d = solve(&j, &[one(3)]).unwrap();
        assert_eq!(d[0], vec![c(1.0), c(-1.0), c(1.0)]);
    }

    #[test]
    fn majorant_bounds_cancellation() {
        // x − x with x = 1 + 10⁶ T
        let f = DensePoly {
            terms: vec![(vec![1], vec![c(1.0), c(0.0), c(0.0)]), (vec![1], vec![c(-1.0), c(0.0), c(0.0)])],
        };
        let x = vec![vec![c(1.0), c(1e6), c(0.0)]];
        let pw = Powers::new(&x, [&f]);
        let (mut v, m) = eval_with_majorant(&f, &pw, true);
        assert_eq!(m, vec![2.0, 2e6, 0.0]);
        v[1] += c(1e-6);
        denoise(&mut v, &m, 1e-9);
        assert!(v.iter().all(|z| z.norm() == 0.0));
    }
}
