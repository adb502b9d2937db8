//! Delzant moment polytopes in H-representation.

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::IntMatrix;
use crate::linalg;
use crate::rational::{int, serde_q, Rational};

/// The half-space `⟨u, v⟩ − λ ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Facet {
    #[serde(rename = "v")]
    pub normal: Vec<i64>,
    #[serde(rename = "lambda", with = "serde_q")]
    pub offset: Rational,
}

impl Facet {
    pub fn new(normal: Vec<i64>, offset: Rational) -> Self {
        Facet { normal, offset }
    }

    pub fn value(&self, u: &[Rational]) -> Rational {
        let dot: Rational = self
            .normal
            .iter()
            .zip(u)
            .map(|(&v, x)| x * int(v))
            .sum();
        dot - &self.offset
    }

    fn normal_q(&self) -> Vec<Rational> {
        self.normal.iter().map(|&v| int(v)).collect()
    }
}

#[derive(Deserialize)]
struct RawPolytope {
    dim: usize,
    facets: Vec<Facet>,
}

/// A bounded full-dimensional polytope `Δ = ∩ {u : ⟨u, vᵢ⟩ − λᵢ ≥ 0}` with
/// no redundant inequality. Vertices are computed once at construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polytope {
    dim: usize,
    facets: Vec<Facet>,
    #[serde(skip)]
    vertices: Vec<Vec<Rational>>,
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPolytope::deserialize(d)?;
        Polytope::new(raw.dim, raw.facets).map_err(serde::de::Error::custom)
    }
}

/// Cap on dimension for input files; enumeration is combinatorial in `m`.
const MAX_DIM: usize = 6;
const MAX_FACETS: usize = 64;

impl Polytope {
    pub fn new(dim: usize, facets: Vec<Facet>) -> Result<Self> {
        let invalid = |s: &str| Err(Error::InvalidPolytope(s.to_string()));
        if dim == 0 || dim > MAX_DIM {
            return invalid("dimension must be between 1 and 6");
        }
        if facets.len() > MAX_FACETS {
            return invalid("too many facets");
        }
        for f in &facets {
            if f.normal.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.normal.len(),
                });
            }
            if f.normal.iter().all(|&x| x == 0) {
                return invalid("zero facet normal");
            }
            if f.normal.iter().any(|x| x.unsigned_abs() > 1 << 20) {
                return invalid("facet normal entry too large");
            }
        }
        let normals: Vec<Vec<Rational>> = facets.iter().map(Facet::normal_q).collect();
        if linalg::rank(&normals, dim) < dim {
            return invalid("unbounded: facet normals do not span");
        }
        if !recession_cone_trivial(&normals, dim) {
            return invalid("unbounded");
        }
        let vertices = enumerate_vertices(dim, &facets);
        if vertices.is_empty() {
            return invalid("empty");
        }
        let p = Polytope {
            dim,
            facets,
            vertices,
        };
        let c = p.vertex_centroid();
        if !p.facets.iter().all(|f| f.value(&c).is_positive()) {
            return invalid("empty interior");
        }
        // each facet must be tight on an (n-1)-face, and on a different one
        let mut faces: Vec<Vec<usize>> = Vec::new();
        for (i, f) in p.facets.iter().enumerate() {
            let tight = p.tight_vertex_indices(f);
            if affine_rank(&tight.iter().map(|&k| p.vertices[k].clone()).collect::<Vec<_>>()) + 1 < dim {
                return Err(Error::InvalidPolytope(format!("facet {i} is redundant")));
            }
            if faces.contains(&tight) {
                return Err(Error::InvalidPolytope(format!("facet {i} duplicates another")));
            }
            faces.push(tight);
        }
        Ok(p)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polytope serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    /// `lᵢ(u) = ⟨u, vᵢ⟩ − λᵢ`.
    pub fn facet_value(&self, i: usize, u: &[Rational]) -> Result<Rational> {
        let f = self.facets.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.facets.len(),
        })?;
        self.check_dim(u)?;
        Ok(f.value(u))
    }

    pub fn contains(&self, u: &[Rational], strict: bool) -> Result<bool> {
        self.check_dim(u)?;
        Ok(self.facets.iter().all(|f| {
            let v = f.value(u);
            if strict {
                v.is_positive()
            } else {
                !v.is_negative()
            }
        }))
    }

    fn check_dim(&self, u: &[Rational]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Vertices sorted lexicographically.
    pub fn vertices(&self) -> Result<Vec<Vec<Rational>>> {
        if self.dim > 3 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        Ok(self.vertices.clone())
    }

    pub(crate) fn vertex_list(&self) -> &[Vec<Rational>] {
        &self.vertices
    }

    /// Average of the vertices; an interior point.
    pub fn vertex_centroid(&self) -> Vec<Rational> {
        let k = int(self.vertices.len() as i64);
        (0..self.dim)
            .map(|j| self.vertices.iter().map(|v| v[j].clone()).sum::<Rational>() / &k)
            .collect()
    }

    fn tight_vertex_indices(&self, f: &Facet) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&k| f.value(&self.vertices[k]).is_zero())
            .collect()
    }

    /// True iff every vertex is simple with tight normals forming a ℤ-basis.
    pub fn delzant_check(&self) -> Result<bool> {
        if self.dim > 3 {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        for v in &self.vertices {
            let tight: Vec<Vec<i64>> = self
                .facets
                .iter()
                .filter(|f| f.value(v).is_zero())
                .map(|f| f.normal.clone())
                .collect();
            if tight.len() != self.dim {
                return Ok(false);
            }
            let det = IntMatrix::from_rows(&tight).det()?;
            if det.abs() != BigInt::from(1) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `[min, max]` of each coordinate over the polytope.
    pub fn bounding_box(&self) -> Vec<(Rational, Rational)> {
        (0..self.dim)
            .map(|j| {
                let it = self.vertices.iter().map(|v| &v[j]);
                let lo = it.clone().min().expect("has vertices").clone();
                let hi = it.max().expect("has vertices").clone();
                (lo, hi)
            })
            .collect()
    }

    /// Projective space `CPⁿ`: the standard simplex.
    pub fn cp_n(n: usize) -> Self {
        let mut facets: Vec<Facet> = (0..n)
            .map(|i| {
                let mut v = vec![0; n];
                v[i] = 1;
                Facet::new(v, int(0))
            })
            .collect();
        facets.push(Facet::new(vec![-1; n], int(-1)));
        Polytope::new(n, facets).expect("simplex is valid")
    }

    /// One-point blowup of CP², valid for `0 < α < 1`.
    pub fn cp2_blowup1(alpha: &Rational) -> Result<Self> {
        Polytope::new(
            2,
            vec![
                Facet::new(vec![1, 0], int(0)),
                Facet::new(vec![0, 1], int(0)),
                Facet::new(vec![-1, -1], int(-1)),
                Facet::new(vec![0, -1], alpha - int(1)),
            ],
        )
    }

    /// Two-point blowup of CP², valid for `-1 < α < 1`.
    pub fn cp2_blowup2(alpha: &Rational) -> Result<Self> {
        Polytope::new(
            2,
            vec![
                Facet::new(vec![1, 0], int(-1)),
                Facet::new(vec![0, 1], int(-1)),
                Facet::new(vec![-1, -1], -(int(1) + alpha)),
                Facet::new(vec![-1, 0], int(-1)),
                Facet::new(vec![0, -1], int(-1)),
            ],
        )
    }

    /// `[0, c] × [0, d]`.
    pub fn s2xs2(c: &Rational, d: &Rational) -> Result<Self> {
        Polytope::new(
            2,
            vec![
                Facet::new(vec![1, 0], int(0)),
                Facet::new(vec![0, 1], int(0)),
                Facet::new(vec![-1, 0], -c.clone()),
                Facet::new(vec![0, -1], -d.clone()),
            ],
        )
    }
}

/// Checks `{d : ⟨d, vᵢ⟩ ≥ 0 ∀i} = {0}` given that the normals span.
///
/// A nonzero pointed cone has an extreme ray, and every extreme ray is cut out
/// by `n − 1` independent normals, so it suffices to test those lines.
fn recession_cone_trivial(normals: &[Vec<Rational>], n: usize) -> bool {
    if n == 1 {
        let pos = normals.iter().any(|v| v[0].is_positive());
        let neg = normals.iter().any(|v| v[0].is_negative());
        return pos && neg;
    }
    for subset in (0..normals.len()).combinations(n - 1) {
        let rows: Vec<Vec<Rational>> = subset.iter().map(|&i| normals[i].clone()).collect();
        let ns = linalg::nullspace(&rows, n);
        if ns.len() != 1 {
            continue;
        }
        let d = &ns[0];
        for sign in [1, -1] {
            let ok = normals.iter().all(|v| {
                let x = linalg::dot(v, d) * int(sign);
                !x.is_negative()
            });
            if ok {
                return false;
            }
        }
    }
    true
}

fn enumerate_vertices(n: usize, facets: &[Facet]) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = Vec::new();
    for subset in (0..facets.len()).combinations(n) {
        let a: Vec<Vec<Rational>> = subset.iter().map(|&i| facets[i].normal_q()).collect();
        let b: Vec<Rational> = subset.iter().map(|&i| facets[i].offset.clone()).collect();
        let Some(x) = linalg::solve(&a, &b) else {
            continue;
        };
        if facets.iter().all(|f| !f.value(&x).is_negative()) && !out.contains(&x) {
            out.push(x);
        }
    }
    out.sort();
    out
}

/// Dimension of the affine hull of a point set (`-1` maps to 0 for empty sets).
pub(crate) fn affine_rank(points: &[Vec<Rational>]) -> usize {
    let Some(p0) = points.first() else {
        return 0;
    };
    let diffs: Vec<Vec<Rational>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    linalg::rank(&diffs, p0.len())
}
