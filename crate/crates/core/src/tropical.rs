//! Tropicalization and exact polyhedral cells of tropical hypersurfaces
//! inside a moment polytope.
//!
//! A [`Cell`] is a relatively open or half-open polytope: a closed polytope
//! with some faces removed. It is stored canonically (equalities in reduced
//! echelon form, one inequality per facet, extra strict forms for excluded
//! lower-dimensional faces), so equal sets have equal representations.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use itertools::Itertools;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::novikov::{NovikovSeries, Valuation};
use crate::polytope::{affine_rank, Polytope};
use crate::potential::{critical_system, CorrectionTerm, LaurentPoly, SubtorusSpec};
use crate::rational::{int, primitive_scale, to_f64, Rational};

/// `min_k (w_k + ⟨u, c_k⟩)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TropPoly {
    n: usize,
    terms: Vec<(Vec<i64>, Rational)>,
}

impl TropPoly {
    pub fn new(n: usize, terms: Vec<(Vec<i64>, Rational)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::ZeroPolynomial);
        }
        for (c, _) in &terms {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.len(),
                });
            }
        }
        Ok(TropPoly { n, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Vec<i64>, Rational)] {
        &self.terms
    }

    fn term_value(&self, k: usize, u: &[Rational]) -> Rational {
        let (c, w) = &self.terms[k];
        c.iter().zip(u).map(|(&ci, x)| x * int(ci)).sum::<Rational>() + w
    }

    pub fn eval(&self, u: &[Rational]) -> Rational {
        (0..self.terms.len())
            .map(|k| self.term_value(k, u))
            .min()
            .expect("nonempty")
    }

    /// Indices of the terms attaining the minimum at `u`.
    pub fn argmin_terms(&self, u: &[Rational]) -> Vec<usize> {
        let vals: Vec<Rational> = (0..self.terms.len()).map(|k| self.term_value(k, u)).collect();
        let m = vals.iter().min().expect("nonempty").clone();
        (0..vals.len()).filter(|&k| vals[k] == m).collect()
    }

    /// The minimum is attained at least twice.
    pub fn is_on_variety(&self, u: &[Rational]) -> bool {
        self.argmin_terms(u).len() >= 2
    }

    /// The affine form `(w_k + ⟨u,c_k⟩) − (w_l + ⟨u,c_l⟩)`.
    fn difference(&self, k: usize, l: usize) -> AffineForm {
        let (ck, wk) = &self.terms[k];
        let (cl, wl) = &self.terms[l];
        AffineForm {
            a: ck.iter().zip(cl).map(|(x, y)| int(x - y)).collect(),
            b: wk - wl,
        }
    }
}

/// One `(c, val(a_c))` per term.
pub fn tropicalize(f: &LaurentPoly) -> Result<TropPoly> {
    let terms = f
        .terms()
        .map(|(c, a)| match a.val() {
            Valuation::Finite(v) => (c.to_vec(), v),
            Valuation::Infinite => unreachable!("zero coefficients are never stored"),
        })
        .collect();
    TropPoly::new(f.n(), terms)
}

/// `u ↦ ⟨a, u⟩ + b`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AffineForm {
    pub a: Vec<Rational>,
    pub b: Rational,
}

impl AffineForm {
    pub fn eval(&self, u: &[Rational]) -> Rational {
        linalg::dot(&self.a, u) + &self.b
    }

    fn as_row(&self) -> Vec<Rational> {
        let mut r = self.a.clone();
        r.push(self.b.clone());
        r
    }

    fn from_row(mut r: Vec<Rational>) -> Self {
        let b = r.pop().expect("row has constant column");
        AffineForm { a: r, b }
    }

    fn plus(&self, o: &AffineForm) -> Self {
        AffineForm {
            a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect(),
            b: &self.b + &o.b,
        }
    }
}

impl Serialize for AffineForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("AffineForm", 2)?;
        st.serialize_field("a", &self.a.iter().map(|q| q.to_string()).collect::<Vec<_>>())?;
        st.serialize_field("b", &self.b.to_string())?;
        st.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Inequality {
    pub form: AffineForm,
    pub strict: bool,
}

impl Serialize for Inequality {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Inequality", 3)?;
        st.serialize_field("a", &self.form.a.iter().map(|q| q.to_string()).collect::<Vec<_>>())?;
        st.serialize_field("b", &self.form.b.to_string())?;
        st.serialize_field("strict", &self.strict)?;
        st.end()
    }
}

/// A nonempty polytope with some faces removed, in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    dim: usize,
    vertices: Vec<Vec<Rational>>,
    eq: Vec<AffineForm>,
    ineq: Vec<Inequality>,
    /// `included[k]` iff vertex `k` of the closure belongs to the cell.
    included: Vec<bool>,
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let verts: Vec<Vec<String>> = self
            .vertices
            .iter()
            .map(|v| v.iter().map(|q| q.to_string()).collect())
            .collect();
        let mut st = s.serialize_struct("Cell", 5)?;
        st.serialize_field("eq", &self.eq)?;
        st.serialize_field("ineq", &self.ineq)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("vertices", &verts)?;
        st.serialize_field("included", &self.included)?;
        st.end()
    }
}

impl Cell {
    /// Canonicalizes `{u : e(u) = 0 ∀e, g(u) ≥ 0 (> 0 if strict)}`.
    ///
    /// Returns `None` for the empty set. The inequalities must bound the set.
    pub fn from_constraints(n: usize, eqs: &[AffineForm], ineqs: &[Inequality]) -> Option<Cell> {
        let rows: Vec<Vec<Rational>> = eqs.iter().map(AffineForm::as_row).collect();
        let (eq_rref, pivots) = linalg::rref(&rows, n + 1);
        if pivots.contains(&n) {
            return None;
        }
        let ineqs: Vec<Inequality> = {
            let mut v: Vec<Inequality> = ineqs
                .iter()
                .filter_map(|g| reduce_inequality(&g.form, &eq_rref, &pivots).map(|f| (f, g.strict)))
                .filter_map(|(f, strict)| match f {
                    Reduced::Form(form) => Some(Ok(Inequality { form, strict })),
                    Reduced::Positive => None,
                    Reduced::Zero if strict => Some(Err(())),
                    Reduced::Zero => None,
                    Reduced::Negative => Some(Err(())),
                })
                .collect::<std::result::Result<_, ()>>()
                .ok()?;
            v.sort();
            v.dedup();
            v
        };
        let vertices = enumerate_vertices(n, &eq_rref, &pivots, &ineqs);
        if vertices.is_empty() {
            return None;
        }
        let dim = affine_rank(&vertices);

        // affine hull of the vertices, possibly smaller than the equality set
        let hull_rows: Vec<Vec<Rational>> = vertices
            .iter()
            .map(|v| {
                let mut r = v.clone();
                r.push(int(1));
                r
            })
            .collect();
        let hull_eqs = linalg::nullspace(&hull_rows, n + 1);
        let (hull_rref, hull_pivots) = linalg::rref(&hull_eqs, n + 1);

        let tight_set = |f: &AffineForm| -> BTreeSet<usize> {
            (0..vertices.len()).filter(|&k| f.eval(&vertices[k]).is_zero()).collect()
        };
        let mut facets: Vec<(AffineForm, BTreeSet<usize>)> = Vec::new();
        let mut excluded: Vec<BTreeSet<usize>> = Vec::new();
        for g in &ineqs {
            let form = match reduce_inequality(&g.form, &hull_rref, &hull_pivots)? {
                Reduced::Form(f) => f,
                Reduced::Zero if g.strict => return None,
                _ => continue,
            };
            let tight = tight_set(&form);
            if dim >= 1 && !tight.is_empty() {
                let pts: Vec<Vec<Rational>> = tight.iter().map(|&k| vertices[k].clone()).collect();
                if affine_rank(&pts) + 1 == dim && !facets.iter().any(|(_, t)| *t == tight) {
                    facets.push((form, tight.clone()));
                }
            }
            if g.strict && !tight.is_empty() {
                if tight.len() == vertices.len() {
                    return None;
                }
                excluded.push(tight);
            }
        }
        let maximal: Vec<BTreeSet<usize>> = excluded
            .iter()
            .filter(|f| !excluded.iter().any(|g| g != *f && g.is_superset(f)))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let mut out: Vec<Inequality> = facets
            .iter()
            .map(|(form, t)| Inequality {
                form: form.clone(),
                strict: maximal.contains(t),
            })
            .collect();
        for face in &maximal {
            if facets.iter().any(|(_, t)| t == face) {
                continue;
            }
            let sum = facets
                .iter()
                .filter(|(_, t)| t.is_superset(face))
                .fold(None::<AffineForm>, |acc, (f, _)| {
                    Some(match acc {
                        Some(a) => a.plus(f),
                        None => f.clone(),
                    })
                })
                .expect("every proper face lies in a facet");
            if let Some(Reduced::Form(form)) = reduce_inequality(&sum, &hull_rref, &hull_pivots) {
                out.push(Inequality { form, strict: true });
            }
        }
        out.sort();
        out.dedup();

        let included = (0..vertices.len())
            .map(|k| !maximal.iter().any(|f| f.contains(&k)))
            .collect();
        let eq = hull_rref
            .iter()
            .map(|r| AffineForm::from_row(primitive_scale(r)))
            .collect();
        Some(Cell {
            dim,
            vertices,
            eq,
            ineq: out,
            included,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn equalities(&self) -> &[AffineForm] {
        &self.eq
    }

    pub fn inequalities(&self) -> &[Inequality] {
        &self.ineq
    }

    /// Vertices of the closure, sorted.
    pub fn vertices(&self) -> &[Vec<Rational>] {
        &self.vertices
    }

    /// Closure vertices belonging to the cell.
    pub fn included_vertices(&self) -> impl Iterator<Item = &Vec<Rational>> {
        self.vertices.iter().zip(&self.included).filter(|(_, &i)| i).map(|(v, _)| v)
    }

    /// Closure vertices removed from the cell.
    pub fn excluded_vertices(&self) -> impl Iterator<Item = &Vec<Rational>> {
        self.vertices.iter().zip(&self.included).filter(|(_, &i)| !i).map(|(v, _)| v)
    }

    pub fn contains(&self, u: &[Rational]) -> bool {
        self.eq.iter().all(|e| e.eval(u).is_zero())
            && self.ineq.iter().all(|g| {
                let v = g.form.eval(u);
                if g.strict {
                    v.is_positive()
                } else {
                    !v.is_negative()
                }
            })
    }

    fn closure_contains(&self, u: &[Rational]) -> bool {
        self.eq.iter().all(|e| e.eval(u).is_zero())
            && self.ineq.iter().all(|g| !g.form.eval(u).is_negative())
    }

    /// Set inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Cell) -> bool {
        if !self.vertices.iter().all(|v| other.closure_contains(v)) {
            return false;
        }
        // the face of our closure where a strict form of `other` vanishes
        // must be fully removed from us; test its centroid
        other.ineq.iter().filter(|g| g.strict).all(|g| {
            let face: Vec<&Vec<Rational>> =
                self.vertices.iter().filter(|v| g.form.eval(v).is_zero()).collect();
            face.is_empty() || !self.contains(&centroid(&face))
        })
    }

    pub fn intersect(&self, other: &Cell) -> Option<Cell> {
        let eqs: Vec<AffineForm> = self.eq.iter().chain(&other.eq).cloned().collect();
        let ineqs: Vec<Inequality> = self.ineq.iter().chain(&other.ineq).cloned().collect();
        Cell::from_constraints(self.n(), &eqs, &ineqs)
    }

    /// A point in the relative interior: the weighted average of the closure
    /// vertices with the given positive weights (cycled if too short).
    pub fn interior_point(&self, weights: &[u32]) -> Vec<Rational> {
        let w: Vec<Rational> = (0..self.vertices.len())
            .map(|k| int(weights.get(k % weights.len().max(1)).copied().unwrap_or(1).max(1) as i64))
            .collect();
        let total: Rational = w.iter().sum();
        (0..self.n())
            .map(|j| {
                self.vertices
                    .iter()
                    .zip(&w)
                    .map(|(v, wk)| &v[j] * wk)
                    .sum::<Rational>()
                    / &total
            })
            .collect()
    }

    /// The same polytope with every face kept.
    pub fn closure(&self) -> Cell {
        let ineq: Vec<Inequality> = self
            .ineq
            .iter()
            .filter(|g| {
                // strict forms for lower faces are not facets; drop them
                let t = self.vertices.iter().filter(|v| g.form.eval(v).is_zero()).collect::<Vec<_>>();
                let pts: Vec<Vec<Rational>> = t.into_iter().cloned().collect();
                self.dim == 0 || affine_rank(&pts) + 1 == self.dim
            })
            .map(|g| Inequality {
                form: g.form.clone(),
                strict: false,
            })
            .collect();
        Cell {
            dim: self.dim,
            vertices: self.vertices.clone(),
            eq: self.eq.clone(),
            ineq,
            included: vec![true; self.vertices.len()],
        }
    }
}

fn centroid(pts: &[&Vec<Rational>]) -> Vec<Rational> {
    let k = int(pts.len() as i64);
    (0..pts[0].len())
        .map(|j| pts.iter().map(|p| p[j].clone()).sum::<Rational>() / &k)
        .collect()
}

enum Reduced {
    Form(AffineForm),
    Positive,
    Zero,
    Negative,
}

/// Reduces `g` modulo the row space of an RREF equality system and scales the
/// result to primitive integers.
fn reduce_inequality(g: &AffineForm, rref: &[Vec<Rational>], pivots: &[usize]) -> Option<Reduced> {
    let mut row = g.as_row();
    for (r, &p) in rref.iter().zip(pivots) {
        if row[p].is_zero() {
            continue;
        }
        let f = row[p].clone();
        for (x, y) in row.iter_mut().zip(r) {
            *x -= &f * y;
        }
    }
    let n = row.len() - 1;
    if row[..n].iter().all(Zero::is_zero) {
        return Some(if row[n].is_positive() {
            Reduced::Positive
        } else if row[n].is_zero() {
            Reduced::Zero
        } else {
            Reduced::Negative
        });
    }
    Some(Reduced::Form(AffineForm::from_row(primitive_scale(&row))))
}

fn enumerate_vertices(
    n: usize,
    eq_rref: &[Vec<Rational>],
    pivots: &[usize],
    ineqs: &[Inequality],
) -> Vec<Vec<Rational>> {
    let h = n - pivots.len();
    let feasible = |x: &[Rational]| ineqs.iter().all(|g| !g.form.eval(x).is_negative());
    let mut out: Vec<Vec<Rational>> = Vec::new();
    for subset in (0..ineqs.len()).combinations(h) {
        let mut a: Vec<Vec<Rational>> = eq_rref.iter().map(|r| r[..n].to_vec()).collect();
        let mut b: Vec<Rational> = eq_rref.iter().map(|r| -r[n].clone()).collect();
        for &i in &subset {
            a.push(ineqs[i].form.a.clone());
            b.push(-ineqs[i].form.b.clone());
        }
        let Some(x) = linalg::solve(&a, &b) else {
            continue;
        };
        if feasible(&x) && !out.contains(&x) {
            out.push(x);
        }
    }
    out.sort();
    out
}

/// A finite set of pairwise distinct, inclusion-maximal cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyhedralComplex {
    pub n: usize,
    pub cells: Vec<Cell>,
    /// True when the complex is the tropicalization itself rather than an
    /// outer approximation.
    pub exact: bool,
}

impl PolyhedralComplex {
    pub fn new(n: usize, cells: Vec<Cell>, exact: bool) -> Self {
        PolyhedralComplex {
            n,
            cells: maximal_cells(cells),
            exact,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, u: &[Rational]) -> bool {
        self.cells.iter().any(|c| c.contains(u))
    }

    pub fn max_dim(&self) -> Option<usize> {
        self.cells.iter().map(Cell::dim).max()
    }

    /// Closure vertices that belong to the complex, deduplicated.
    pub fn nodes(&self) -> Vec<Vec<Rational>> {
        let set: BTreeSet<Vec<Rational>> = self
            .cells
            .iter()
            .flat_map(|c| c.included_vertices().cloned())
            .collect();
        set.into_iter().collect()
    }

    /// Closure vertices missing from the complex (e.g. endpoints on `∂Δ`).
    pub fn excluded_endpoints(&self) -> Vec<Vec<Rational>> {
        let set: BTreeSet<Vec<Rational>> = self
            .cells
            .iter()
            .flat_map(|c| c.excluded_vertices().cloned())
            .filter(|v| !self.contains(v))
            .collect();
        set.into_iter().collect()
    }

    /// Closure vertex pairs of the one-dimensional cells.
    pub fn segments(&self) -> Vec<(Vec<Rational>, Vec<Rational>)> {
        self.cells
            .iter()
            .filter(|c| c.dim == 1)
            .map(|c| (c.vertices[0].clone(), c.vertices[1].clone()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("complex serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("complex serializes")
    }
}

fn maximal_cells(mut cells: Vec<Cell>) -> Vec<Cell> {
    cells.sort();
    cells.dedup();
    let keep: Vec<bool> = (0..cells.len())
        .map(|i| {
            !cells
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && cells[i].is_subset_of(other))
        })
        .collect();
    cells
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(c, _)| c)
        .collect()
}

fn clip_inequalities(clip: &Polytope, open: bool) -> Vec<Inequality> {
    clip.facets()
        .iter()
        .map(|f| Inequality {
            form: AffineForm {
                a: f.normal.iter().map(|&v| int(v)).collect(),
                b: -f.offset.clone(),
            },
            strict: open,
        })
        .collect()
}

/// The whole of `Δ` (or its interior) as a single cell.
pub fn polytope_cell(clip: &Polytope, open: bool) -> Cell {
    Cell::from_constraints(clip.dim(), &[], &clip_inequalities(clip, open))
        .expect("polytope has nonempty interior")
}

/// Cells of `V(trop f) ∩ Δ` (or `∩ int Δ` when `open`), one candidate per
/// pair of terms.
pub fn hypersurface_cells(tp: &TropPoly, clip: &Polytope, open: bool) -> Result<PolyhedralComplex> {
    if tp.n != clip.dim() {
        return Err(Error::DimensionMismatch {
            expected: clip.dim(),
            found: tp.n,
        });
    }
    if tp.n > 3 {
        return Err(Error::UnsupportedDimension(tp.n));
    }
    let clip_ineqs = clip_inequalities(clip, open);
    let pairs: Vec<(usize, usize)> = (0..tp.terms.len()).tuple_combinations().collect();
    let cells: Vec<Cell> = pairs
        .par_iter()
        .filter_map(|&(k, l)| {
            let mut ineqs: Vec<Inequality> = (0..tp.terms.len())
                .filter(|&m| m != k && m != l)
                .map(|m| Inequality {
                    form: tp.difference(m, k),
                    strict: false,
                })
                .collect();
            ineqs.extend(clip_ineqs.iter().cloned());
            Cell::from_constraints(tp.n, &[tp.difference(k, l)], &ineqs)
        })
        .collect();
    Ok(PolyhedralComplex::new(tp.n, cells, true))
}

/// Pairwise intersections of all cells across the complexes.
pub fn intersect_complexes(cs: &[PolyhedralComplex]) -> Result<PolyhedralComplex> {
    let Some(first) = cs.first() else {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    };
    for c in cs {
        if c.n != first.n {
            return Err(Error::DimensionMismatch {
                expected: first.n,
                found: c.n,
            });
        }
    }
    let mut acc = first.clone();
    for c in &cs[1..] {
        let pairs: Vec<(&Cell, &Cell)> = acc.cells.iter().cartesian_product(&c.cells).collect();
        let cells: Vec<Cell> = pairs.par_iter().filter_map(|(a, b)| a.intersect(b)).collect();
        acc = PolyhedralComplex::new(first.n, cells, acc.exact && c.exact);
    }
    Ok(acc)
}

/// Tropicalization of the critical locus inside `int Δ` for a given system.
///
/// Exact when the system has at most one equation; otherwise the intersection
/// of the hypersurfaces, which contains the true tropicalization.
pub fn crit_trop_system(p: &Polytope, system: &[LaurentPoly]) -> Result<PolyhedralComplex> {
    let n = p.dim();
    if n > 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let full = PolyhedralComplex::new(n, vec![polytope_cell(p, true)], true);
    let mut parts = vec![full];
    for f in linear_circuits(system) {
        parts.push(hypersurface_cells(&tropicalize(&f)?, p, true)?);
    }
    let mut out = intersect_complexes(&parts)?;
    out.exact = system.len() <= 1;
    Ok(out)
}

/// The system together with the circuits of its linear span over `Λ`.
///
/// The equations share most of their monomials, so their hypersurfaces meet
/// non-transversally; the circuits (combinations of minimal support, built
/// from cofactors) cut away most of the excess. Zero polynomials are dropped.
pub fn linear_circuits(system: &[LaurentPoly]) -> Vec<LaurentPoly> {
    let system: Vec<&LaurentPoly> = system.iter().filter(|f| !f.is_empty()).collect();
    let mut out: Vec<LaurentPoly> = system.iter().map(|f| (*f).clone()).collect();
    let s = system.len();
    if s < 2 {
        return out;
    }
    let n = system[0].n();
    let monomials: Vec<Vec<i64>> = system
        .iter()
        .flat_map(|f| f.terms().map(|(c, _)| c.to_vec()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let entry = |i: usize, k: usize| {
        system[i]
            .coefficient(&monomials[k])
            .cloned()
            .unwrap_or_else(NovikovSeries::zero)
    };
    for zero_cols in (0..monomials.len()).combinations(s - 1) {
        let cofactors: Vec<NovikovSeries> = (0..s)
            .map(|i| {
                let minor: Vec<Vec<NovikovSeries>> = (0..s)
                    .filter(|&r| r != i)
                    .map(|r| zero_cols.iter().map(|&k| entry(r, k)).collect())
                    .collect();
                let d = series_det(&minor);
                if i % 2 == 1 { -d } else { d }
            })
            .collect();
        if cofactors.iter().all(NovikovSeries::is_zero) {
            continue;
        }
        let mut g = LaurentPoly::zero(n);
        for (f, c) in system.iter().zip(&cofactors) {
            if !c.is_zero() {
                g = g.add(&f.scale(c)).expect("same variables");
            }
        }
        if !g.is_empty() && !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

/// Laplace expansion; the matrices here are at most 2 × 2.
fn series_det(m: &[Vec<NovikovSeries>]) -> NovikovSeries {
    match m.len() {
        0 => NovikovSeries::one(),
        1 => m[0][0].clone(),
        k => (0..k).fold(NovikovSeries::zero(), |acc, j| {
            let minor: Vec<Vec<NovikovSeries>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, x)| x.clone()).collect())
                .collect();
            let term = &m[0][j] * &series_det(&minor);
            if j % 2 == 1 { &acc - &term } else { &acc + &term }
        }),
    }
}

pub fn crit_trop(p: &Polytope, s: &SubtorusSpec, cs: &[CorrectionTerm]) -> Result<PolyhedralComplex> {
    crit_trop_system(p, &critical_system(p, s, cs)?)
}

/// Renders a planar complex over its polytope: outline black, cells red,
/// excluded endpoints as hollow circles. The y axis points up.
pub fn to_svg(complex: &PolyhedralComplex, p: &Polytope) -> Result<String> {
    if complex.n != 2 || p.dim() != 2 {
        return Err(Error::UnsupportedDimension(complex.n));
    }
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 20.0;
    let bbox = p.bounding_box();
    let (x0, x1) = (to_f64(&bbox[0].0), to_f64(&bbox[0].1));
    let (y0, y1) = (to_f64(&bbox[1].0), to_f64(&bbox[1].1));
    let scale = SIZE / (x1 - x0).max(y1 - y0);
    let px = |v: &[Rational]| {
        (
            MARGIN + (to_f64(&v[0]) - x0) * scale,
            MARGIN + (y1 - to_f64(&v[1])) * scale,
        )
    };
    let w = 2.0 * MARGIN + (x1 - x0) * scale;
    let h = 2.0 * MARGIN + (y1 - y0) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let outline = polygon_points(p.vertex_list(), &px);
    let _ = writeln!(s, r#"  <polygon points="{outline}" fill="none" stroke="black" stroke-width="1.5"/>"#);
    for c in &complex.cells {
        match c.dim {
            0 => {
                let (x, y) = px(&c.vertices[0]);
                let _ = writeln!(s, r##"  <circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#d0021b"/>"##);
            }
            1 => {
                let (ax, ay) = px(&c.vertices[0]);
                let (bx, by) = px(&c.vertices[1]);
                let _ = writeln!(
                    s,
                    r##"  <line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="#d0021b" stroke-width="2.5"/>"##
                );
            }
            _ => {
                let pts = polygon_points(&c.vertices, &px);
                let _ = writeln!(
                    s,
                    r##"  <polygon points="{pts}" fill="#d0021b" fill-opacity="0.35" stroke="#d0021b"/>"##
                );
            }
        }
    }
    for v in complex.excluded_endpoints() {
        let (x, y) = px(&v);
        let _ = writeln!(
            s,
            r##"  <circle cx="{x:.2}" cy="{y:.2}" r="4" fill="white" stroke="#d0021b" stroke-width="1.5"/>"##
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Vertices of a convex polygon in angular order, as an SVG points list.
fn polygon_points(vs: &[Vec<Rational>], px: &impl Fn(&[Rational]) -> (f64, f64)) -> String {
    let pts: Vec<(f64, f64)> = vs.iter().map(|v| px(v)).collect();
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&i, &j| {
        let ai = (pts[i].1 - cy).atan2(pts[i].0 - cx);
        let aj = (pts[j].1 - cy).atan2(pts[j].0 - cx);
        ai.total_cmp(&aj)
    });
    order
        .iter()
        .map(|&i| format!("{:.2},{:.2}", pts[i].0, pts[i].1))
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::novikov::Scalar;
    use crate::rational::ratio;

    fn pt(xs: &[(i64, i64)]) -> Vec<Rational> {
        xs.iter().map(|&(p, q)| ratio(p, q)).collect()
    }

    fn cp2_generic() -> TropPoly {
        TropPoly::new(
            2,
            vec![(vec![1, 0], int(0)), (vec![0, 1], int(0)), (vec![-1, -1], int(1))],
        )
        .unwrap()
    }

    #[test]
    fn tropicalize_examples() {
        let p = Polytope::cp_n(2);
        let s = SubtorusSpec::from_columns(2, &[vec![1, 2]]).unwrap();
        let f = critical_system(&p, &s, &[]).unwrap();
        let tp = tropicalize(&f[0]).unwrap();
        let mut terms = tp.terms().to_vec();
        terms.sort();
        let mut expected = cp2_generic().terms().to_vec();
        expected.sort();
        assert_eq!(terms, expected);

        let m = LaurentPoly::monomial(vec![1, 0], NovikovSeries::t_pow(int(2)));
        assert_eq!(tropicalize(&m).unwrap().terms(), &[(vec![1, 0], int(2))]);
        assert_eq!(tropicalize(&LaurentPoly::zero(2)), Err(Error::ZeroPolynomial));
    }

    #[test]
    fn argmin_examples() {
        let tp = cp2_generic();
        assert_eq!(tp.argmin_terms(&pt(&[(1, 3), (1, 3)])), vec![0, 1, 2]);
        assert_eq!(tp.argmin_terms(&pt(&[(1, 10), (1, 10)])), vec![0, 1]);
        assert_eq!(tp.argmin_terms(&pt(&[(1, 10), (1, 2)])), vec![0]);
        assert!(!tp.is_on_variety(&pt(&[(1, 10), (1, 2)])));
        let k1 = TropPoly::new(2, vec![(vec![1, 0], int(0)), (vec![-1, -1], int(1))]).unwrap();
        assert!(k1.is_on_variety(&pt(&[(1, 4), (1, 2)])));
        let single = TropPoly::new(2, vec![(vec![3, 1], int(0))]).unwrap();
        assert!(!single.is_on_variety(&pt(&[(1, 4), (1, 2)])));
    }

    #[test]
    fn cp2_generic_cells() {
        let c = hypersurface_cells(&cp2_generic(), &Polytope::cp_n(2), true).unwrap();
        assert_eq!(c.cells.len(), 3);
        assert!(c.cells.iter().all(|x| x.dim() == 1));
        assert_eq!(c.nodes(), vec![pt(&[(1, 3), (1, 3)])]);
        assert_eq!(
            c.excluded_endpoints(),
            vec![pt(&[(0, 1), (0, 1)]), pt(&[(0, 1), (1, 1)]), pt(&[(1, 1), (0, 1)])]
        );
        let closed = hypersurface_cells(&cp2_generic(), &Polytope::cp_n(2), false).unwrap();
        assert!(closed.excluded_endpoints().is_empty());
    }

    #[test]
    fn canonical_form_merges_equal_sets() {
        let x = |a: i64, b: i64, c: i64| AffineForm { a: vec![int(a), int(b)], b: int(c) };
        let ge = |f: AffineForm, strict| Inequality { form: f, strict };
        // the open unit square, written two ways
        let a = Cell::from_constraints(
            2,
            &[],
            &[ge(x(1, 0, 0), true), ge(x(0, 1, 0), true), ge(x(-1, 0, 1), true), ge(x(0, -1, 1), true)],
        )
        .unwrap();
        let b = Cell::from_constraints(
            2,
            &[],
            &[
                ge(x(2, 0, 0), true),
                ge(x(0, 3, 0), true),
                ge(x(-1, 0, 1), true),
                ge(x(0, -1, 1), true),
                ge(x(1, 1, 5), false),
            ],
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 2);
        // a closed square minus one corner needs an extra strict form
        let c = Cell::from_constraints(
            2,
            &[],
            &[
                ge(x(1, 0, 0), false),
                ge(x(0, 1, 0), false),
                ge(x(-1, 0, 1), false),
                ge(x(0, -1, 1), false),
                ge(x(1, 1, 0), true),
            ],
        )
        .unwrap();
        assert!(!c.contains(&pt(&[(0, 1), (0, 1)])));
        assert!(c.contains(&pt(&[(0, 1), (1, 2)])));
        assert_eq!(c.excluded_vertices().count(), 1);
        assert!(c.is_subset_of(&c.closure()));
        assert!(!c.closure().is_subset_of(&c));
        // implicit equality from opposite inequalities
        let d = Cell::from_constraints(
            2,
            &[],
            &[ge(x(1, -1, 0), false), ge(x(-1, 1, 0), false), ge(x(1, 0, 0), false), ge(x(-1, 0, 1), false)],
        )
        .unwrap();
        assert_eq!(d.dim(), 1);
        assert_eq!(d.equalities().len(), 1);
        // strict form vanishing on the whole set
        assert!(Cell::from_constraints(
            2,
            &[],
            &[ge(x(1, -1, 0), true), ge(x(-1, 1, 0), false), ge(x(1, 0, 0), false), ge(x(-1, 0, 1), false)],
        )
        .is_none());
    }

    #[test]
    fn intersect_examples() {
        let p = Polytope::s2xs2(&int(2), &int(2)).unwrap();
        let h = |c: Vec<i64>| {
            hypersurface_cells(
                &TropPoly::new(2, vec![(c, int(0)), (vec![0, 0], int(1))]).unwrap(),
                &p,
                true,
            )
            .unwrap()
        };
        let only = h(vec![1, 0]);
        assert_eq!(intersect_complexes(std::slice::from_ref(&only)).unwrap(), only);
        let both = intersect_complexes(&[h(vec![1, 0]), h(vec![0, 1])]).unwrap();
        assert_eq!(both.cells.len(), 1);
        assert_eq!(both.cells[0].dim(), 0);
        assert_eq!(both.nodes(), vec![pt(&[(1, 1), (1, 1)])]);
        // n - r = 2 on CP³ gives a curve
        let cp3 = Polytope::cp_n(3);
        let s = SubtorusSpec::from_columns(3, &[vec![1, 2, 4]]).unwrap();
        let c = crit_trop(&cp3, &s, &[]).unwrap();
        assert_eq!(c.max_dim(), Some(1));
        assert!(!c.exact);
    }

    #[test]
    fn trivial_subtorus_gives_center() {
        let p = Polytope::cp_n(2);
        let s = SubtorusSpec::from_columns(2, &[]).unwrap();
        let c = crit_trop(&p, &s, &[]).unwrap();
        assert_eq!(c.cells.len(), 1);
        assert_eq!(c.nodes(), vec![pt(&[(1, 3), (1, 3)])]);
    }

    #[test]
    fn full_subtorus_gives_interior() {
        let p = Polytope::cp_n(2);
        let s = SubtorusSpec::from_columns(2, &[vec![1, 0], vec![0, 1]]).unwrap();
        let c = crit_trop(&p, &s, &[]).unwrap();
        assert_eq!(c.cells, vec![polytope_cell(&p, true)]);
        assert!(c.exact);
    }

    #[test]
    fn scaling_invariance() {
        let p = Polytope::cp_n(2);
        let s = SubtorusSpec::from_columns(2, &[vec![1, 2]]).unwrap();
        let f = &critical_system(&p, &s, &[]).unwrap()[0];
        let g = f.scale(&NovikovSeries::monomial(Scalar::int(-3), ratio(7, 5)));
        let a = hypersurface_cells(&tropicalize(f).unwrap(), &p, true).unwrap();
        let b = hypersurface_cells(&tropicalize(&g).unwrap(), &p, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn svg_output() {
        let p = Polytope::cp_n(2);
        let c = hypersurface_cells(&cp2_generic(), &p, true).unwrap();
        let svg = to_svg(&c, &p).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<line").count(), 3);
        assert_eq!(svg.matches(r#"r="4""#).count(), 3);
        let cp3 = Polytope::cp_n(3);
        let full = PolyhedralComplex::new(3, vec![polytope_cell(&cp3, true)], true);
        assert_eq!(to_svg(&full, &cp3), Err(Error::UnsupportedDimension(3)));
    }
}
