//! Truncated arithmetic in the Novikov field.
//!
//! A [`NovikovSeries`] is a finite sum `Σ aᵢ T^{λᵢ}` with strictly increasing
//! rational exponents, together with a truncation order: nothing is known about
//! the coefficients at exponents `>= trunc`. Exact inputs (polytope data, the
//! potential) carry infinite truncation; every operation propagates precision
//! honestly so that composite results report what is actually determined.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, format_rational, parse_rational, Rational};

/// Complex coefficients with modulus below this are treated as zero.
pub const COMPLEX_ZERO_TOL: f64 = 1e-10;

/// Default truncation order for lifting and evaluation.
pub fn default_order() -> Rational {
    rational::int(5)
}

/// A rational number or `+∞`; used both for valuations and truncation orders.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(Rational),
    Infinite,
}

impl Valuation {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Valuation::Finite(q) => Some(q),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinite)
    }

    pub fn plus(&self, other: &Valuation) -> Valuation {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }

    pub fn plus_q(&self, q: &Rational) -> Valuation {
        match self {
            Valuation::Finite(a) => Valuation::Finite(a + q),
            Valuation::Infinite => Valuation::Infinite,
        }
    }

    /// True when `q` lies strictly below this bound.
    pub fn exceeds(&self, q: &Rational) -> bool {
        match self {
            Valuation::Finite(a) => q < a,
            Valuation::Infinite => true,
        }
    }
}

impl From<Rational> for Valuation {
    fn from(q: Rational) -> Self {
        Valuation::Finite(q)
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(q) => write!(f, "{q}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Valuation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Valuation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_valuation(&s).map_err(serde::de::Error::custom)
    }
}

pub fn parse_valuation(s: &str) -> Result<Valuation> {
    match s.trim() {
        "inf" | "+inf" | "∞" => Ok(Valuation::Infinite),
        other => parse_rational(other).map(Valuation::Finite),
    }
}

/// A coefficient: exact rational or a complex float.
#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(Rational),
    Complex(Complex64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(Rational::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(Rational::one())
    }

    pub fn int(n: i64) -> Self {
        Scalar::Exact(rational::int(n))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_zero(),
            Scalar::Complex(z) => z.norm() <= COMPLEX_ZERO_TOL,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            Scalar::Exact(q) => Complex64::new(rational::to_f64(q), 0.0),
            Scalar::Complex(z) => *z,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Complex(_) => None,
        }
    }

    pub fn abs(&self) -> f64 {
        self.to_complex().norm()
    }

    pub fn conj(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(q.clone()),
            Scalar::Complex(z) => Scalar::Complex(z.conj()),
        }
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::ZeroDivision);
        }
        Ok(match self {
            Scalar::Exact(q) => Scalar::Exact(q.recip()),
            Scalar::Complex(z) => Scalar::Complex(z.inv()),
        })
    }

    /// `e^self`; exact only for zero.
    pub fn exp(&self) -> Scalar {
        if let Scalar::Exact(q) = self {
            if q.is_zero() {
                return Scalar::one();
            }
        }
        Scalar::Complex(self.to_complex().exp())
    }

    /// `self / k` for a positive integer `k`.
    pub fn div_int(&self, k: u64) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(q / Rational::from_integer(k.into())),
            Scalar::Complex(z) => Scalar::Complex(z / k as f64),
        }
    }

    /// Numerical closeness; exact values compare exactly.
    pub fn approx_eq(&self, other: &Scalar, tol: f64) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => {
                let (a, b) = (self.to_complex(), other.to_complex());
                (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
            }
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => self.to_complex() == other.to_complex(),
        }
    }
}

impl From<Rational> for Scalar {
    fn from(q: Rational) -> Self {
        Scalar::Exact(q)
    }
}

impl From<Complex64> for Scalar {
    fn from(z: Complex64) -> Self {
        Scalar::Complex(z)
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    _ => Scalar::Complex(self.to_complex() $op rhs.to_complex()),
                }
            }
        }
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                &self $op &rhs
            }
        }
    };
}

scalar_binop!(Add, add, +);
scalar_binop!(Sub, sub, -);
scalar_binop!(Mul, mul, *);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(-q),
            Scalar::Complex(z) => Scalar::Complex(-z),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) => write!(f, "{q}"),
            Scalar::Complex(z) if z.im == 0.0 => write!(f, "{}", z.re),
            Scalar::Complex(z) => write!(f, "({}{:+}i)", z.re, z.im),
        }
    }
}

/// A truncated Novikov series `Σ aᵢ T^{λᵢ} + O(T^{trunc})`.
#[derive(Clone, Debug, PartialEq)]
pub struct NovikovSeries {
    terms: Vec<(Rational, Scalar)>,
    trunc: Valuation,
}

impl NovikovSeries {
    /// The exact zero.
    pub fn zero() -> Self {
        NovikovSeries {
            terms: Vec::new(),
            trunc: Valuation::Infinite,
        }
    }

    /// Zero known only below `trunc`.
    pub fn zero_to(trunc: Valuation) -> Self {
        NovikovSeries {
            terms: Vec::new(),
            trunc,
        }
    }

    pub fn one() -> Self {
        Self::constant(Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        Self::monomial(c, Rational::zero())
    }

    /// The exact term `c·T^{exp}`.
    pub fn monomial(c: Scalar, exp: Rational) -> Self {
        Self::from_terms(vec![(exp, c)], Valuation::Infinite)
    }

    /// `T^{exp}` with coefficient one.
    pub fn t_pow(exp: Rational) -> Self {
        Self::monomial(Scalar::one(), exp)
    }

    /// Builds a series from arbitrary terms: sorts, merges equal exponents,
    /// drops zero coefficients and everything at or above `trunc`.
    pub fn from_terms(terms: impl IntoIterator<Item = (Rational, Scalar)>, trunc: Valuation) -> Self {
        let mut merged: BTreeMap<Rational, Scalar> = BTreeMap::new();
        for (e, c) in terms {
            if !trunc.exceeds(&e) {
                continue;
            }
            match merged.get_mut(&e) {
                Some(acc) => *acc = &*acc + &c,
                None => {
                    merged.insert(e, c);
                }
            }
        }
        NovikovSeries {
            terms: merged.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            trunc,
        }
    }

    pub fn terms(&self) -> &[(Rational, Scalar)] {
        &self.terms
    }

    pub fn truncation(&self) -> &Valuation {
        &self.trunc
    }

    /// No nonzero term below the truncation order.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.trunc.is_infinite()
    }

    pub fn has_exact_coefficients(&self) -> bool {
        self.terms.iter().all(|(_, c)| c.is_exact())
    }

    /// Least exponent with nonzero coefficient; `∞` for the zero series.
    pub fn val(&self) -> Valuation {
        match self.terms.first() {
            Some((e, _)) => Valuation::Finite(e.clone()),
            None => Valuation::Infinite,
        }
    }

    pub fn leading(&self) -> Option<(&Rational, &Scalar)> {
        self.terms.first().map(|(e, c)| (e, c))
    }

    pub fn coefficient(&self, exp: &Rational) -> Scalar {
        self.terms
            .binary_search_by(|(e, _)| e.cmp(exp))
            .map(|i| self.terms[i].1.clone())
            .unwrap_or_else(|_| Scalar::zero())
    }

    /// Lowers the truncation order to `min(trunc, order)`.
    pub fn truncate(&self, order: &Valuation) -> Self {
        let trunc = self.trunc.clone().min(order.clone());
        NovikovSeries {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| trunc.exceeds(e))
                .cloned()
                .collect(),
            trunc,
        }
    }

    /// Multiplication by `T^{q}`.
    pub fn shift(&self, q: &Rational) -> Self {
        NovikovSeries {
            terms: self.terms.iter().map(|(e, c)| (e + q, c.clone())).collect(),
            trunc: self.trunc.plus_q(q),
        }
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        Self::from_terms(
            self.terms.iter().map(|(e, c)| (e.clone(), c * s)),
            self.trunc.clone(),
        )
    }

    pub fn conj(&self) -> Self {
        NovikovSeries {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c.conj())).collect(),
            trunc: self.trunc.clone(),
        }
    }

    /// Multiplicative inverse with `a · b = 1 + O(T^{order})`.
    ///
    /// The leading term `c·T^v` is factored out and the geometric series of the
    /// remainder is summed. The relative precision is also capped by the
    /// precision of `self`.
    pub fn invert(&self, order: &Rational) -> Result<Self> {
        let (v, c) = self.leading().ok_or(Error::ZeroDivision)?;
        let (v, c_inv) = (v.clone(), c.inv()?);
        if self.terms.len() == 1 && self.is_exact() {
            return Ok(Self::monomial(c_inv, -v));
        }
        let rel = Valuation::Finite(order.clone()).min(self.trunc.plus_q(&-&v));
        // 1 + r with val(r) > 0
        let unit = NovikovSeries::from_terms(
            self.terms.iter().map(|(e, a)| (e - &v, a * &c_inv)),
            rel.clone(),
        );
        let r = &unit - &NovikovSeries::one();
        let neg_r = -&r;
        let mut sum = NovikovSeries::one().truncate(&rel);
        let mut power = sum.clone();
        while !power.is_zero() {
            power = (&power * &neg_r).truncate(&rel);
            sum = &sum + &power;
        }
        Ok(NovikovSeries::from_terms(
            sum.terms.iter().map(|(e, a)| (e - &v, a * &c_inv)),
            rel.plus_q(&-&v),
        ))
    }

    /// `exp(b) = e^{b₀} · Σ b₊ᵏ/k!` where `b₀` is the constant coefficient.
    pub fn exp(&self, order: &Rational) -> Result<Self> {
        if let Some((v, _)) = self.leading() {
            if v.is_negative() {
                return Err(Error::NegativeValuation);
            }
        }
        let prec = Valuation::Finite(order.clone()).min(self.trunc.clone());
        let b0 = self.coefficient(&Rational::zero());
        let rest = NovikovSeries {
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| !e.is_zero())
                .cloned()
                .collect(),
            trunc: self.trunc.clone(),
        };
        let mut sum = NovikovSeries::one().truncate(&prec);
        let mut term = sum.clone();
        let mut k: u64 = 1;
        while !term.is_zero() {
            term = (&term * &rest).truncate(&prec);
            term = NovikovSeries {
                terms: term.terms.iter().map(|(e, c)| (e.clone(), c.div_int(k))).collect(),
                trunc: term.trunc,
            };
            sum = &sum + &term;
            k += 1;
        }
        Ok(sum.scale(&b0.exp()))
    }

    /// Integer power; negative exponents invert at relative precision `rel`.
    pub fn powi(&self, k: i64, rel: &Rational) -> Result<Self> {
        if k == 0 {
            return Ok(NovikovSeries::one());
        }
        let base = if k < 0 { self.invert(rel)? } else { self.clone() };
        let mut acc = base.clone();
        for _ in 1..k.unsigned_abs() {
            acc = &acc * &base;
        }
        Ok(acc)
    }

    /// Largest coefficient modulus difference and truncation-aware term match.
    pub fn approx_eq(&self, other: &NovikovSeries, tol: f64) -> bool {
        let diff = self - other;
        diff.terms.iter().all(|(_, c)| c.abs() <= tol)
    }

    pub fn leading_exponent_f64(&self) -> Option<f64> {
        self.leading().map(|(e, _)| rational::to_f64(e))
    }

    /// Checks the representation invariants: sorted strictly increasing
    /// exponents, no zero coefficients, everything below the truncation.
    pub fn check_invariants(&self) -> bool {
        self.terms.windows(2).all(|w| w[0].0 < w[1].0)
            && self.terms.iter().all(|(e, c)| !c.is_zero() && self.trunc.exceeds(e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("series serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn merge_add(a: &NovikovSeries, b: &NovikovSeries, negate_b: bool) -> NovikovSeries {
    let trunc = a.trunc.clone().min(b.trunc.clone());
    let mut out = Vec::with_capacity(a.terms.len() + b.terms.len());
    let (mut i, mut j) = (0, 0);
    let bterm = |c: &Scalar| if negate_b { -c } else { c.clone() };
    while i < a.terms.len() || j < b.terms.len() {
        let ord = match (a.terms.get(i), b.terms.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        let (e, c) = match ord {
            Ordering::Less => {
                i += 1;
                (a.terms[i - 1].0.clone(), a.terms[i - 1].1.clone())
            }
            Ordering::Greater => {
                j += 1;
                (b.terms[j - 1].0.clone(), bterm(&b.terms[j - 1].1))
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
                let c = &a.terms[i - 1].1 + &bterm(&b.terms[j - 1].1);
                (a.terms[i - 1].0.clone(), c)
            }
        };
        if !trunc.exceeds(&e) {
            break;
        }
        if !c.is_zero() {
            out.push((e, c));
        }
    }
    NovikovSeries { terms: out, trunc }
}

impl Add for &NovikovSeries {
    type Output = NovikovSeries;
    fn add(self, rhs: &NovikovSeries) -> NovikovSeries {
        merge_add(self, rhs, false)
    }
}

impl Sub for &NovikovSeries {
    type Output = NovikovSeries;
    fn sub(self, rhs: &NovikovSeries) -> NovikovSeries {
        merge_add(self, rhs, true)
    }
}

impl Neg for &NovikovSeries {
    type Output = NovikovSeries;
    fn neg(self) -> NovikovSeries {
        NovikovSeries {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
            trunc: self.trunc.clone(),
        }
    }
}

impl Mul for &NovikovSeries {
    type Output = NovikovSeries;
    fn mul(self, rhs: &NovikovSeries) -> NovikovSeries {
        let trunc = self
            .trunc
            .plus(&rhs.val())
            .min(rhs.trunc.plus(&self.val()));
        let mut acc: BTreeMap<Rational, Scalar> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = ea + eb;
                if !trunc.exceeds(&e) {
                    // rhs terms are sorted; later ones only grow the exponent
                    break;
                }
                let c = ca * cb;
                match acc.get_mut(&e) {
                    Some(x) => *x = &*x + &c,
                    None => {
                        acc.insert(e, c);
                    }
                }
            }
        }
        NovikovSeries {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            trunc,
        }
    }
}

macro_rules! owned_series_ops {
    ($trait:ident, $method:ident) => {
        impl $trait for NovikovSeries {
            type Output = NovikovSeries;
            fn $method(self, rhs: NovikovSeries) -> NovikovSeries {
                (&self).$method(&rhs)
            }
        }
    };
}
owned_series_ops!(Add, add);
owned_series_ops!(Sub, sub);
owned_series_ops!(Mul, mul);

impl Neg for NovikovSeries {
    type Output = NovikovSeries;
    fn neg(self) -> NovikovSeries {
        -&self
    }
}

fn fmt_exponent(e: &Rational) -> String {
    if e.is_integer() {
        format!("{e}")
    } else {
        format!("({e})")
    }
}

impl fmt::Display for NovikovSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let (negative, mag) = match c {
                Scalar::Exact(q) if q.is_negative() => (true, Scalar::Exact(-q)),
                _ => (false, c.clone()),
            };
            if i == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if negative { " - " } else { " + " })?;
            }
            let unit = matches!(&mag, Scalar::Exact(q) if q.is_one());
            match (e.is_zero(), unit) {
                (true, _) => write!(f, "{mag}")?,
                (false, true) => write!(f, "T^{}", fmt_exponent(e))?,
                (false, false) => write!(f, "{mag}*T^{}", fmt_exponent(e))?,
            }
        }
        if let Valuation::Finite(t) = &self.trunc {
            write!(f, " + O(T^{})", fmt_exponent(t))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    exp: String,
    re: RawComponent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawComponent {
    Exact(String),
    Float(f64),
}

#[derive(Serialize, Deserialize)]
struct RawSeries {
    terms: Vec<RawTerm>,
    trunc: Valuation,
}

impl Serialize for NovikovSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawSeries {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| match c {
                    Scalar::Exact(q) => RawTerm {
                        exp: format_rational(e),
                        re: RawComponent::Exact(format_rational(q)),
                        im: None,
                    },
                    Scalar::Complex(z) => RawTerm {
                        exp: format_rational(e),
                        re: RawComponent::Float(z.re),
                        im: Some(z.im),
                    },
                })
                .collect(),
            trunc: self.trunc.clone(),
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NovikovSeries {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawSeries::deserialize(d)?;
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            let exp = parse_rational(&t.exp).map_err(D::Error::custom)?;
            let c = match (t.re, t.im) {
                (RawComponent::Exact(s), None) => {
                    Scalar::Exact(parse_rational(&s).map_err(D::Error::custom)?)
                }
                (RawComponent::Exact(s), Some(im)) => {
                    let re = rational::to_f64(&parse_rational(&s).map_err(D::Error::custom)?);
                    Scalar::Complex(Complex64::new(re, im))
                }
                (RawComponent::Float(re), im) => {
                    let z = Complex64::new(re, im.unwrap_or(0.0));
                    if !z.re.is_finite() || !z.im.is_finite() {
                        return Err(D::Error::custom("non-finite coefficient"));
                    }
                    Scalar::Complex(z)
                }
            };
            terms.push((exp, c));
        }
        Ok(NovikovSeries::from_terms(terms, raw.trunc))
    }
}
