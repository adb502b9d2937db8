//! The worked two-dimensional examples: CP², CP² blown up at one and two
//! points, and S²×S², each with generic and degenerate circle subgroups.

use crate::error::Result;
use crate::polytope::Polytope;
use crate::potential::SubtorusSpec;
use crate::rational::{format_rational, int, ratio, Rational};
use crate::tropical::{crit_trop, PolyhedralComplex};

#[derive(Clone, Debug)]
pub struct GalleryCase {
    pub name: String,
    pub family: &'static str,
    pub polytope: Polytope,
    /// The single column of `K`.
    pub k: Vec<i64>,
}

impl GalleryCase {
    pub fn subtorus(&self) -> SubtorusSpec {
        SubtorusSpec::from_columns(2, std::slice::from_ref(&self.k)).expect("rank one")
    }

    pub fn compute(&self) -> Result<PolyhedralComplex> {
        crit_trop(&self.polytope, &self.subtorus(), &[])
    }
}

pub const FAMILIES: &[&str] = &["cp2", "cp2-blowup1", "cp2-blowup2", "s2xs2"];

const GENERIC: [i64; 2] = [1, 2];
const DEGENERATE: [(&str, [i64; 2]); 3] = [("k1-zero", [0, 1]), ("k2-zero", [1, 0]), ("k1-eq-k2", [1, 1])];

fn alpha_tag(a: &Rational) -> String {
    format_rational(a).replace('/', "_").replace('-', "m")
}

fn case(name: String, family: &'static str, polytope: Polytope, k: [i64; 2]) -> GalleryCase {
    GalleryCase {
        name,
        family,
        polytope,
        k: k.to_vec(),
    }
}

/// All figure cases, in a fixed order.
pub fn gallery() -> Vec<GalleryCase> {
    let mut out = Vec::new();
    let cp2 = Polytope::cp_n(2);
    out.push(case("cp2-generic".into(), "cp2", cp2.clone(), GENERIC));
    for (tag, k) in DEGENERATE {
        out.push(case(format!("cp2-{tag}"), "cp2", cp2.clone(), k));
    }

    for a in [ratio(1, 4), ratio(1, 3), ratio(1, 2)] {
        let p = Polytope::cp2_blowup1(&a).expect("valid alpha");
        out.push(case(format!("cp2-blowup1-generic-alpha-{}", alpha_tag(&a)), "cp2-blowup1", p, GENERIC));
    }
    let b1 = Polytope::cp2_blowup1(&ratio(1, 4)).expect("valid alpha");
    for (tag, k) in DEGENERATE {
        out.push(case(format!("cp2-blowup1-{tag}"), "cp2-blowup1", b1.clone(), k));
    }

    for a in [ratio(-1, 2), int(0), ratio(1, 2)] {
        let p = Polytope::cp2_blowup2(&a).expect("valid alpha");
        out.push(case(format!("cp2-blowup2-generic-alpha-{}", alpha_tag(&a)), "cp2-blowup2", p, GENERIC));
    }
    let b2 = Polytope::cp2_blowup2(&ratio(1, 2)).expect("valid alpha");
    for (tag, k) in DEGENERATE {
        out.push(case(format!("cp2-blowup2-{tag}"), "cp2-blowup2", b2.clone(), k));
    }

    let sq = Polytope::s2xs2(&int(1), &int(2)).expect("valid sizes");
    out.push(case("s2xs2-generic".into(), "s2xs2", sq.clone(), [1, 1]));
    out.push(case("s2xs2-k1-zero".into(), "s2xs2", sq.clone(), [0, 1]));
    out.push(case("s2xs2-k2-zero".into(), "s2xs2", sq, [1, 0]));
    out
}
