//! Tropical critical loci of equivariant toric potentials over the Novikov field.
//!
//! Given a Delzant polytope `Δ` and a subtorus `K`, the pipeline builds the
//! potential `PO = Σ T^{−λᵢ} y^{vᵢ}`, forms the critical system along the
//! annihilator of `K`, computes its tropicalization inside `int Δ` as an exact
//! polyhedral complex, and checks points of it by Newton lifting.

pub mod error;
pub mod gallery;
pub mod lattice;
mod dense;
mod linalg;
pub mod newton;
pub mod novikov;
pub mod polytope;
pub mod potential;
pub mod problem;
pub mod rational;
pub mod tropical;

pub use error::{Error, Result};
pub use novikov::{NovikovSeries, Scalar, Valuation};
pub use polytope::{Facet, Polytope};
pub use potential::{critical_system, potential, CorrectionTerm, LaurentPoly, SubtorusSpec};
pub use problem::ProblemSpec;
pub use rational::Rational;
pub use tropical::{crit_trop, PolyhedralComplex};
