//! Problem files and named presets.

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::novikov::default_order;
use crate::polytope::Polytope;
use crate::potential::{CorrectionTerm, SubtorusSpec};
use crate::rational::{int, parse_rational, serde_q, Rational};

fn default_samples() -> usize {
    5
}

/// A complete pipeline input.
///
/// ```json
/// {"polytope":{"dim":2,"facets":[...]},"generators":[[1,2]],"order":"5"}
/// ```
/// `generators` are the columns of `K`; an empty list means the trivial subtorus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub polytope: Polytope,
    #[serde(default)]
    pub generators: Vec<Vec<i64>>,
    #[serde(default)]
    pub corrections: Vec<CorrectionTerm>,
    #[serde(default = "default_order", with = "serde_q")]
    pub order: Rational,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(polytope: Polytope, generators: Vec<Vec<i64>>) -> Result<Self> {
        let spec = ProblemSpec {
            polytope,
            generators,
            corrections: Vec::new(),
            order: default_order(),
            samples: default_samples(),
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.order.is_positive() {
            return Err(Error::Parse("order must be positive".into()));
        }
        for c in &self.corrections {
            c.validate()?;
            if c.e.len() != self.polytope.num_facets() {
                return Err(Error::LengthMismatch {
                    expected: self.polytope.num_facets(),
                    found: c.e.len(),
                });
            }
        }
        self.subtorus().map(|_| ())
    }

    pub fn subtorus(&self) -> Result<SubtorusSpec> {
        SubtorusSpec::from_columns(self.polytope.dim(), &self.generators)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Parameters for the parametrized presets.
#[derive(Clone, Debug)]
pub struct PresetParams {
    pub alpha: Rational,
    pub c: Rational,
    pub d: Rational,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            alpha: Rational::new(1.into(), 4.into()),
            c: int(1),
            d: int(2),
        }
    }
}

pub const PRESETS: &[&str] = &["cp2", "cp3", "cp2-blowup1", "cp2-blowup2", "s2xs2"];

pub fn preset(name: &str, params: &PresetParams) -> Result<Polytope> {
    match name {
        "cp2" => Ok(Polytope::cp_n(2)),
        "cp3" => Ok(Polytope::cp_n(3)),
        "cp2-blowup1" => Polytope::cp2_blowup1(&params.alpha),
        "cp2-blowup2" => Polytope::cp2_blowup2(&params.alpha),
        "s2xs2" => Polytope::s2xs2(&params.c, &params.d),
        _ => Err(Error::Parse(format!("unknown preset {name:?}"))),
    }
}

/// Parses `K` columns written as `k11,k21;k12,k22` (columns separated by `;`).
///
/// The empty string (or `-`) is the trivial subtorus.
pub fn parse_generators(s: &str) -> Result<Vec<Vec<i64>>> {
    let s = s.trim();
    if s.is_empty() || s == "-" {
        return Ok(Vec::new());
    }
    if s.len() > 4096 {
        return Err(Error::Parse("generator list too long".into()));
    }
    let cols: Vec<Vec<i64>> = s
        .split(';')
        .map(|col| {
            col.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::Parse(format!("bad integer {x:?}")))
                        .and_then(|v| {
                            if v.abs() > 1 << 20 {
                                Err(Error::Parse(format!("entry {v} too large")))
                            } else {
                                Ok(v)
                            }
                        })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if cols.iter().any(|c| c.len() != cols[0].len()) {
        return Err(Error::Parse("columns of different lengths".into()));
    }
    Ok(cols)
}

/// Parses a positive rational order such as `5` or `7/2`.
pub fn parse_order(s: &str) -> Result<Rational> {
    let q = parse_rational(s)?;
    if !q.is_positive() {
        return Err(Error::Parse("order must be positive".into()));
    }
    Ok(q)
}
