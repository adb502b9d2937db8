//! Laurent polynomials over the Novikov field, the potential and the
//! equivariant critical system.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{annihilator_basis, IntMatrix};
use crate::novikov::{NovikovSeries, Scalar, Valuation};
use crate::polytope::Polytope;
use crate::rational::{int, serde_q, Rational};

/// Exponent vector `c ∈ ℤⁿ`, ordered by total degree (descending), then by
/// `|c|` and `c` lexicographically (descending). This puts `y1` before `y2`
/// and `y1^-1` before `y2^-1` in printed output.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Exponent(pub Vec<i64>);

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        let deg = |c: &[i64]| c.iter().sum::<i64>();
        let abs = |c: &[i64]| c.iter().map(|x| x.abs()).collect::<Vec<_>>();
        deg(&other.0)
            .cmp(&deg(&self.0))
            .then_with(|| abs(&other.0).cmp(&abs(&self.0)))
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `Σ a_c y^c` with Novikov coefficients; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly {
    n: usize,
    terms: BTreeMap<Exponent, NovikovSeries>,
}

impl LaurentPoly {
    pub fn zero(n: usize) -> Self {
        LaurentPoly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(c: Vec<i64>, coef: NovikovSeries) -> Self {
        let mut p = Self::zero(c.len());
        p.add_term(c, coef);
        p
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Vec<i64>, NovikovSeries)>) -> Result<Self> {
        let mut p = Self::zero(n);
        for (c, a) in terms {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.len(),
                });
            }
            p.add_term(c, a);
        }
        Ok(p)
    }

    /// Adds `coef·y^c`, merging with an existing term and dropping cancellations.
    pub fn add_term(&mut self, c: Vec<i64>, coef: NovikovSeries) {
        debug_assert_eq!(c.len(), self.n);
        let key = Exponent(c);
        let sum = match self.terms.remove(&key) {
            Some(old) => &old + &coef,
            None => coef,
        };
        if !sum.is_zero() {
            self.terms.insert(key, sum);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[i64], &NovikovSeries)> {
        self.terms.iter().map(|(c, a)| (c.0.as_slice(), a))
    }

    pub fn coefficient(&self, c: &[i64]) -> Option<&NovikovSeries> {
        self.terms.get(&Exponent(c.to_vec()))
    }

    pub fn scale(&self, s: &NovikovSeries) -> Self {
        let mut p = Self::zero(self.n);
        for (c, a) in &self.terms {
            p.add_term(c.0.clone(), a * s);
        }
        p
    }

    pub fn add(&self, other: &LaurentPoly) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut p = self.clone();
        for (c, a) in &other.terms {
            p.add_term(c.0.clone(), a.clone());
        }
        Ok(p)
    }

    /// `y_j ∂/∂y_j`: each term `(c, a)` becomes `(c, c_j·a)`.
    pub fn log_derivative(&self, j: usize) -> Result<Self> {
        self.check_index(j)?;
        let mut p = Self::zero(self.n);
        for (c, a) in &self.terms {
            p.add_term(c.0.clone(), a.scale(&Scalar::int(c.0[j])));
        }
        Ok(p)
    }

    /// `∂/∂y_j`.
    pub fn partial_derivative(&self, j: usize) -> Result<Self> {
        self.check_index(j)?;
        let mut p = Self::zero(self.n);
        for (c, a) in &self.terms {
            if c.0[j] == 0 {
                continue;
            }
            let mut d = c.0.clone();
            d[j] -= 1;
            p.add_term(d, a.scale(&Scalar::int(c.0[j])));
        }
        Ok(p)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.n {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.n,
            });
        }
        Ok(())
    }

    /// Evaluates at `y`, with the result known modulo `T^{order}`.
    ///
    /// Each term is computed at the relative precision it needs to contribute
    /// below `order`; terms whose valuation already reaches `order` are dropped.
    pub fn eval(&self, y: &[NovikovSeries], order: &Rational) -> Result<NovikovSeries> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        let mut vals = Vec::with_capacity(self.n);
        for (j, yj) in y.iter().enumerate() {
            match yj.val() {
                Valuation::Finite(v) => vals.push(v),
                Valuation::Infinite => return Err(Error::ZeroCoordinate(j)),
            }
        }
        let target = Valuation::Finite(order.clone());
        let mut acc = NovikovSeries::zero_to(target.clone());
        for (c, a) in &self.terms {
            let Valuation::Finite(va) = a.val() else {
                continue;
            };
            let tv: Rational = c.0.iter().zip(&vals).map(|(&k, v)| v * int(k)).sum::<Rational>() + &va;
            if &tv >= order {
                continue;
            }
            let rel = order - &tv;
            let mut term = a.clone();
            for (j, &k) in c.0.iter().enumerate() {
                if k != 0 {
                    term = &term * &y[j].powi(k, &rel)?;
                }
            }
            acc = &acc + &term.truncate(&target);
        }
        Ok(acc)
    }

    /// Exact evaluation when every `y_j` is an exact monomial; `None` otherwise.
    pub fn eval_exact(&self, y: &[NovikovSeries]) -> Result<Option<NovikovSeries>> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        if let Some(j) = y.iter().position(NovikovSeries::is_zero) {
            return Err(Error::ZeroCoordinate(j));
        }
        if !y.iter().all(|s| s.is_exact() && s.terms().len() == 1) {
            return Ok(None);
        }
        let mut acc = NovikovSeries::zero();
        for (c, a) in &self.terms {
            let mut term = a.clone();
            for (j, &k) in c.0.iter().enumerate() {
                if k != 0 {
                    // exact monomials invert exactly; the order is unused
                    term = &term * &y[j].powi(k, &Rational::one())?;
                }
            }
            acc = &acc + &term;
        }
        Ok(Some(acc))
    }

    /// Fraction-style rendering with negative powers in a denominator,
    /// e.g. `y1 + y2 + T/(y1*y2)`.
    pub fn to_fraction_string(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (c, a)) in self.terms.iter().enumerate() {
            let (neg, coef) = split_sign(a);
            push_sign(&mut out, i == 0, neg);
            let mut num: Vec<String> = Vec::new();
            let mut den: Vec<String> = Vec::new();
            if let Some(s) = coef_string(&coef, true) {
                num.push(s);
            }
            for (j, &k) in c.0.iter().enumerate() {
                match k.cmp(&0) {
                    Ordering::Greater => num.push(var_power(j, k)),
                    Ordering::Less => den.push(var_power(j, -k)),
                    Ordering::Equal => {}
                }
            }
            let numer = if num.is_empty() { "1".to_string() } else { num.join("*") };
            out.push_str(&numer);
            match den.len() {
                0 => {}
                1 => out.push_str(&format!("/{}", den[0])),
                _ => out.push_str(&format!("/({})", den.join("*"))),
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polynomial serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn var_power(j: usize, k: i64) -> String {
    if k == 1 {
        format!("y{}", j + 1)
    } else {
        format!("y{}^{}", j + 1, k)
    }
}

fn push_sign(out: &mut String, first: bool, neg: bool) {
    match (first, neg) {
        (true, true) => out.push('-'),
        (true, false) => {}
        (false, true) => out.push_str(" - "),
        (false, false) => out.push_str(" + "),
    }
}

/// A single exact term with negative coefficient is printed with a leading minus.
fn split_sign(a: &NovikovSeries) -> (bool, NovikovSeries) {
    if let [(_, Scalar::Exact(q))] = a.terms() {
        if q.is_negative() && a.is_exact() {
            return (true, -a);
        }
    }
    (false, a.clone())
}

fn t_power(e: &Rational, short: bool) -> String {
    if short && e.is_one() {
        "T".into()
    } else if e.is_integer() {
        format!("T^{e}")
    } else {
        format!("T^({e})")
    }
}

/// `None` when the coefficient is exactly one.
fn coef_string(a: &NovikovSeries, short: bool) -> Option<String> {
    if let [(e, s)] = a.terms() {
        if a.is_exact() {
            let unit = matches!(s, Scalar::Exact(q) if q.is_one());
            return match (unit, e.is_zero()) {
                (true, true) => None,
                (true, false) => Some(t_power(e, short)),
                (false, true) => Some(scalar_string(s)),
                (false, false) => Some(format!("{}*{}", scalar_string(s), t_power(e, short))),
            };
        }
    }
    Some(format!("({a})"))
}

fn scalar_string(s: &Scalar) -> String {
    match s {
        Scalar::Exact(q) if q.is_integer() => q.to_string(),
        _ => format!("({s})"),
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut out = String::new();
        for (i, (c, a)) in self.terms.iter().enumerate() {
            let (neg, coef) = split_sign(a);
            push_sign(&mut out, i == 0, neg);
            let mut parts: Vec<String> = coef_string(&coef, false).into_iter().collect();
            parts.extend(
                c.0.iter()
                    .enumerate()
                    .filter(|(_, &k)| k != 0)
                    .map(|(j, &k)| var_power(j, k)),
            );
            if parts.is_empty() {
                parts.push("1".into());
            }
            out.push_str(&parts.join("*"));
        }
        f.write_str(&out)
    }
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    c: Vec<i64>,
    coef: NovikovSeries,
}

#[derive(Serialize, Deserialize)]
struct RawPoly {
    n: usize,
    terms: Vec<RawTerm>,
}

const MAX_VARS: usize = 16;

impl Serialize for LaurentPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawPoly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(c, a)| RawTerm {
                    c: c.0.clone(),
                    coef: a.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawPoly::deserialize(d)?;
        if raw.n > MAX_VARS {
            return Err(D::Error::custom("too many variables"));
        }
        LaurentPoly::from_terms(raw.n, raw.terms.into_iter().map(|t| (t.c, t.coef)))
            .map_err(D::Error::custom)
    }
}

/// A higher-order term `r · ∏ᵢ (y^{vᵢ} T^{−λᵢ})^{eⁱ} · T^{ρ}` of the potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTerm {
    #[serde(with = "serde_q")]
    pub r: Rational,
    pub e: Vec<i64>,
    #[serde(with = "serde_q")]
    pub rho: Rational,
}

impl CorrectionTerm {
    pub fn new(r: Rational, e: Vec<i64>, rho: Rational) -> Result<Self> {
        let c = CorrectionTerm { r, e, rho };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_positive() {
            return Err(Error::InvalidCorrection("rho must be positive".into()));
        }
        if self.e.iter().any(|&x| x < 0) {
            return Err(Error::InvalidCorrection("e must be nonnegative".into()));
        }
        if self.e.iter().sum::<i64>() <= 0 {
            return Err(Error::InvalidCorrection("sum of e must be positive".into()));
        }
        if self.e.iter().any(|&x| x > 1 << 16) {
            return Err(Error::InvalidCorrection("e entry too large".into()));
        }
        Ok(())
    }
}

/// A subtorus `G = K·T^r` given by an `n × r` integer matrix of rank `r`,
/// together with the annihilator rows `A` (`A·K = 0`, saturated).
#[derive(Clone, Debug, PartialEq)]
pub struct SubtorusSpec {
    k: IntMatrix,
    a: IntMatrix,
}

impl SubtorusSpec {
    pub fn new(k: IntMatrix) -> Result<Self> {
        let a = annihilator_basis(&k)?;
        Ok(SubtorusSpec { k, a })
    }

    /// From columns of `K`, each of length `n`.
    pub fn from_columns(n: usize, cols: &[Vec<i64>]) -> Result<Self> {
        if cols.is_empty() {
            return Self::new(IntMatrix::zeros(n, 0));
        }
        let k = IntMatrix::from_columns(cols)?;
        if k.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: k.rows(),
            });
        }
        Self::new(k)
    }

    pub fn k(&self) -> &IntMatrix {
        &self.k
    }

    pub fn annihilator(&self) -> &IntMatrix {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.k.rows()
    }

    pub fn r(&self) -> usize {
        self.k.cols()
    }
}

/// `PO = Σᵢ T^{−λᵢ} y^{vᵢ}`.
pub fn leading_potential(p: &Polytope) -> LaurentPoly {
    let mut po = LaurentPoly::zero(p.dim());
    for f in p.facets() {
        po.add_term(f.normal.clone(), NovikovSeries::t_pow(-f.offset.clone()));
    }
    po
}

/// Adds each correction's monomial `Σ eⁱvᵢ` with coefficient `r·T^{ρ − Σ eⁱλᵢ}`.
pub fn with_corrections(f: &LaurentPoly, p: &Polytope, cs: &[CorrectionTerm]) -> Result<LaurentPoly> {
    let mut out = f.clone();
    for c in cs {
        if c.e.len() != p.num_facets() {
            return Err(Error::LengthMismatch {
                expected: p.num_facets(),
                found: c.e.len(),
            });
        }
        c.validate()?;
        let mut exp = vec![0i64; p.dim()];
        let mut shift = c.rho.clone();
        for (facet, &ei) in p.facets().iter().zip(&c.e) {
            for (x, &v) in exp.iter_mut().zip(&facet.normal) {
                *x += ei * v;
            }
            shift -= &facet.offset * int(ei);
        }
        out.add_term(exp, NovikovSeries::monomial(Scalar::Exact(c.r.clone()), shift));
    }
    Ok(out)
}

/// The full potential with corrections.
pub fn potential(p: &Polytope, cs: &[CorrectionTerm]) -> Result<LaurentPoly> {
    with_corrections(&leading_potential(p), p, cs)
}

/// `fᵢ = Σⱼ a_{ij} y_j ∂PO/∂y_j` for each annihilator row `aᵢ`.
pub fn critical_system(p: &Polytope, s: &SubtorusSpec, cs: &[CorrectionTerm]) -> Result<Vec<LaurentPoly>> {
    if s.n() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: s.n(),
        });
    }
    let po = potential(p, cs)?;
    let derivs: Vec<LaurentPoly> = (0..p.dim()).map(|j| po.log_derivative(j)).collect::<Result<_>>()?;
    let a = s.annihilator();
    (0..a.rows())
        .map(|i| {
            let mut f = LaurentPoly::zero(p.dim());
            for (j, d) in derivs.iter().enumerate() {
                let aij = Rational::from_integer(a.get(i, j).clone());
                if !aij.is_zero() {
                    f = f.add(&d.scale(&NovikovSeries::constant(Scalar::Exact(aij))))?;
                }
            }
            Ok(f)
        })
        .collect()
}
