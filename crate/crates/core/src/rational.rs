//! Exact rationals and their string form `"p/q"`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p/q"`, `"p"` or a terminating decimal such as `"-0.25"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational {s:?}"));
    if s.is_empty() || s.len() > 4096 {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if !whole_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{whole_digits}{frac}");
        let mut num: BigInt = digits.parse().map_err(|_| bad())?;
        if negative {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(num, den));
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

pub fn format_rational(q: &Rational) -> String {
    q.to_string()
}

pub fn to_f64(q: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 only fails on overflow of both parts.
        let n = q.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

pub fn ceil_to_i64(q: &Rational) -> i64 {
    use num_traits::ToPrimitive;
    q.ceil().to_integer().to_i64().unwrap_or(i64::MAX)
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(qs: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    qs.into_iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

/// Scales `v` by a positive rational so that its entries are coprime integers.
/// The zero vector is returned unchanged.
pub fn primitive_scale(v: &[Rational]) -> Vec<Rational> {
    if v.iter().all(Zero::is_zero) {
        return v.to_vec();
    }
    let den = common_denominator(v.iter());
    let ints: Vec<BigInt> = v.iter().map(|q| (q * &den).to_integer()).collect();
    let g = ints
        .iter()
        .fold(BigInt::zero(), |acc, x| acc.gcd(x))
        .abs();
    ints.into_iter()
        .map(|x| Rational::from_integer(x / &g))
        .collect()
}

pub(crate) mod serde_q {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let raw = RawRational::deserialize(d)?;
        raw.into_rational().map_err(serde::de::Error::custom)
    }

    /// Accepts either a string (`"1/2"`) or a JSON integer.
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum RawRational {
        Text(String),
        Int(i64),
    }

    impl RawRational {
        pub(crate) fn into_rational(self) -> Result<Rational> {
            match self {
                RawRational::Text(s) => parse_rational(&s),
                RawRational::Int(i) => Ok(int(i)),
            }
        }
    }
}

/// Serializes a rational vector as strings.
pub(crate) mod serde_q_vec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for q in v {
            seq.serialize_element(&format_rational(q))?;
        }
        seq.end()
    }
}
