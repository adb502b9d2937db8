//! Lifting residue-field solutions of initial systems to Novikov-field
//! solutions, and empirical dimension probes.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dense::{self, DensePoly, Grid, Powers};
use crate::error::{Error, Result};
use crate::novikov::{NovikovSeries, Scalar, Valuation};
use crate::polytope::Polytope;
use crate::potential::{critical_system, CorrectionTerm, LaurentPoly, SubtorusSpec};
use crate::rational::{int, to_f64, Rational};
use crate::tropical::{crit_trop_system, tropicalize};

/// Relative residual below which a residue point counts as a root.
pub const SEED_TOL: f64 = 1e-10;
/// `|det|` (relative to the row scales) below which a Jacobian is singular.
pub const SINGULAR_TOL: f64 = 1e-9;
const MAX_NEWTON_STEPS: usize = 64;
const MAX_SETBACKS: usize = 3;

/// `in_u(f) = Σ_{c ∈ argmin} lc(a_c) y^c`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialForm {
    n: usize,
    terms: Vec<(Vec<i64>, Scalar)>,
}

impl InitialForm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Vec<i64>, Scalar)] {
        &self.terms
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() <= 1
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms.iter().map(|(c, a)| a.to_complex() * monomial(c, z)).sum()
    }

    /// As a Laurent polynomial with constant coefficients, for printing.
    pub fn to_poly(&self) -> LaurentPoly {
        LaurentPoly::from_terms(
            self.n,
            self.terms.iter().map(|(c, a)| (c.clone(), NovikovSeries::constant(a.clone()))),
        )
        .expect("consistent length")
    }
}

fn monomial(c: &[i64], z: &[Complex64]) -> Complex64 {
    c.iter()
        .zip(z)
        .fold(Complex64::new(1.0, 0.0), |acc, (&k, zj)| acc * zj.powi(k as i32))
}

pub fn initial_form(f: &LaurentPoly, u: &[Rational]) -> Result<InitialForm> {
    let tp = tropicalize(f)?;
    if u.len() != f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            found: u.len(),
        });
    }
    let coefs: Vec<&NovikovSeries> = f.terms().map(|(_, a)| a).collect();
    let terms = tp
        .argmin_terms(u)
        .into_iter()
        .map(|k| {
            let lead = coefs[k].leading().expect("nonzero coefficient").1.clone();
            (tp.terms()[k].0.clone(), lead)
        })
        .collect();
    Ok(InitialForm { n: f.n(), terms })
}

/// Outcome of one Newton lift.
#[derive(Clone, Debug, Serialize)]
pub struct LiftReport {
    pub solution: Vec<NovikovSeries>,
    /// `val fᵢ(y)`; a finite value equal to `order` means "at least `order`".
    pub residual_vals: Vec<Valuation>,
    #[serde(with = "crate::rational::serde_q")]
    pub order: Rational,
    pub free_coords: Vec<(usize, NovikovSeries)>,
    /// Smallest residual valuation before each Newton step; not always
    /// monotone for floating data.
    pub history: Vec<Valuation>,
}

impl LiftReport {
    pub fn succeeded(&self) -> bool {
        let order = Valuation::Finite(self.order.clone());
        self.residual_vals.iter().all(|v| *v >= order)
    }

    /// Residue of `y_j / T^{val y_j}`.
    pub fn residues(&self) -> Vec<Complex64> {
        self.solution
            .iter()
            .map(|y| y.leading().map_or(Complex64::zero(), |(_, c)| c.to_complex()))
            .collect()
    }

    pub fn valuations(&self) -> Vec<Valuation> {
        self.solution.iter().map(NovikovSeries::val).collect()
    }
}

/// The system in the unit coordinates `x = T^{-u} y`: `gᵢ(x) = T^{-wᵢ} fᵢ(T^u x)`
/// with `wᵢ = trop(fᵢ)(u)`, so that every `gᵢ` has coefficients in `Λ₀` and
/// residue equal to the initial form.
struct Rescaled {
    g: Vec<LaurentPoly>,
    w: Vec<Rational>,
    residue: Vec<InitialForm>,
}

fn rescale(system: &[LaurentPoly], u: &[Rational]) -> Result<Rescaled> {
    let mut g = Vec::with_capacity(system.len());
    let mut w = Vec::with_capacity(system.len());
    let mut residue = Vec::with_capacity(system.len());
    for f in system {
        let wi = tropicalize(f)?.eval(u);
        let gi = LaurentPoly::from_terms(
            f.n(),
            f.terms().map(|(c, a)| {
                let s: Rational = c.iter().zip(u).map(|(&k, x)| x * int(k)).sum::<Rational>() - &wi;
                (c.to_vec(), a.shift(&s))
            }),
        )?;
        residue.push(initial_form(f, u)?);
        g.push(gi);
        w.push(wi);
    }
    Ok(Rescaled { g, w, residue })
}

/// Values of the residue system and its Jacobian in the coordinates `vars`.
fn residue_eval(forms: &[InitialForm], z: &[Complex64], vars: &[usize]) -> (DVector<Complex64>, DMatrix<Complex64>, Vec<f64>) {
    let s = forms.len();
    let mut f = DVector::zeros(s);
    let mut jac = DMatrix::zeros(s, vars.len());
    let mut scale = vec![0.0f64; s];
    for (i, form) in forms.iter().enumerate() {
        for (c, a) in form.terms() {
            let t = a.to_complex() * monomial(c, z);
            f[i] += t;
            scale[i] = scale[i].max(t.norm());
            for (col, &j) in vars.iter().enumerate() {
                if c[j] != 0 {
                    jac[(i, col)] += t * c[j] as f64 / z[j];
                }
            }
        }
    }
    (f, jac, scale)
}

fn relative_residual(f: &DVector<Complex64>, scale: &[f64]) -> f64 {
    f.iter()
        .zip(scale)
        .map(|(v, s)| v.norm() / s.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// `|det J|` after dividing each row by its largest entry.
fn scaled_det(jac: &DMatrix<Complex64>) -> f64 {
    if jac.nrows() == 0 {
        return 1.0;
    }
    let mut m = jac.clone();
    for mut row in m.row_iter_mut() {
        let s = row.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if s > 0.0 {
            row /= Complex64::new(s, 0.0);
        }
    }
    m.determinant().norm()
}

/// Complex Newton on the residue system in `vars`, other coordinates fixed.
fn polish(forms: &[InitialForm], z: &mut [Complex64], vars: &[usize], steps: usize) -> f64 {
    let mut res = f64::INFINITY;
    for _ in 0..steps {
        let (f, jac, scale) = residue_eval(forms, z, vars);
        res = relative_residual(&f, &scale);
        if res < 1e-15 {
            break;
        }
        let Some(delta) = jac.lu().solve(&f) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<Complex64> = z
                .iter()
                .enumerate()
                .map(|(j, &x)| match vars.iter().position(|&v| v == j) {
                    Some(col) => x - delta[col] * t,
                    None => x,
                })
                .collect();
            if trial.iter().any(|x| !x.re.is_finite() || !x.im.is_finite() || x.norm() < 1e-12) {
                t *= 0.5;
                continue;
            }
            let (ft, _, st) = residue_eval(forms, &trial, vars);
            if ft.norm() < f.norm() || relative_residual(&ft, &st) < res {
                z.copy_from_slice(&trial);
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    res
}

/// Solves `J δ = b` over `Λ₀` at precision `prec`; `J` must have an invertible residue.
fn solve_series(mut j: Vec<Vec<NovikovSeries>>, mut b: Vec<NovikovSeries>, prec: &Rational) -> Result<Vec<NovikovSeries>> {
    let s = b.len();
    let p = Valuation::Finite(prec.clone());
    let zero = Rational::zero();
    for col in 0..s {
        let pivot = (col..s)
            .filter(|&r| j[r][col].val() == Valuation::Finite(zero.clone()))
            .max_by(|&a, &c| {
                let na = j[a][col].coefficient(&zero).abs();
                let nc = j[c][col].coefficient(&zero).abs();
                na.total_cmp(&nc)
            })
            .ok_or(Error::SingularJacobian(0.0))?;
        j.swap(col, pivot);
        b.swap(col, pivot);
        let inv = j[col][col].invert(prec)?;
        for x in &mut j[col][col..s] {
            *x = (&*x * &inv).truncate(&p);
        }
        b[col] = (&b[col] * &inv).truncate(&p);
        let pivot_row = j[col].clone();
        for r in 0..s {
            if r == col || j[r][col].is_zero() {
                continue;
            }
            let f = j[r][col].clone();
            for (x, y) in j[r][col..s].iter_mut().zip(&pivot_row[col..s]) {
                let d = (&f * y).truncate(&p);
                *x = (&*x - &d).truncate(&p);
            }
            let d = (&f * &b[col]).truncate(&p);
            b[r] = (&b[r] - &d).truncate(&p);
        }
    }
    Ok(b)
}

/// Relative size below which a floating-point coefficient is rounding noise.
const NOISE_TOL: f64 = 1e-9;

/// Evaluates `f(y)` and drops floating coefficients that are small compared
/// with the sum of absolute values of the contributions to the same exponent.
#[cfg(test)]
fn eval_denoised(f: &LaurentPoly, y: &[NovikovSeries], order: &Rational) -> Result<NovikovSeries> {
    let value = f.eval(y, order)?;
    if value.has_exact_coefficients() {
        return Ok(value);
    }
    let mut majorant: std::collections::BTreeMap<Rational, f64> = Default::default();
    for (c, a) in f.terms() {
        let term = LaurentPoly::monomial(c.to_vec(), a.clone()).eval(y, order)?;
        for (e, s) in term.terms() {
            *majorant.entry(e.clone()).or_default() += s.abs();
        }
    }
    let kept: Vec<(Rational, Scalar)> = value
        .terms()
        .iter()
        .filter(|(e, s)| s.is_exact() || s.abs() > NOISE_TOL * majorant.get(e).copied().unwrap_or(0.0))
        .cloned()
        .collect();
    Ok(NovikovSeries::from_terms(kept, value.truncation().clone()))
}

fn zero_lower_bound(s: &NovikovSeries) -> Valuation {
    if s.is_zero() {
        s.truncation().clone()
    } else {
        s.val()
    }
}

/// Lifts a residue solution to `y ∈ (Λ \ 0)ⁿ` with `val y = u` and
/// `val fᵢ(y) ≥ order`.
///
/// `free` fixes `r` coordinates (with valuations `u_j`); `seed` holds the
/// residues of the remaining coordinates in increasing index order.
pub fn newton_lift(
    system: &[LaurentPoly],
    u: &[Rational],
    free: &[(usize, NovikovSeries)],
    seed: &[Complex64],
    order: &Rational,
) -> Result<LiftReport> {
    let n = u.len();
    for f in system {
        if f.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.n(),
            });
        }
    }
    if system.len() + free.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n - free.len().min(n),
            found: system.len(),
        });
    }
    let mut x: Vec<Option<NovikovSeries>> = vec![None; n];
    let mut z = vec![Complex64::zero(); n];
    for (j, y) in free {
        if *j >= n {
            return Err(Error::IndexOutOfRange { index: *j, len: n });
        }
        if y.val() != Valuation::Finite(u[*j].clone()) {
            return Err(Error::ValuationMismatch(*j));
        }
        if x[*j].is_some() {
            return Err(Error::ValuationMismatch(*j));
        }
        let xj = y.shift(&-u[*j].clone());
        z[*j] = xj.leading().expect("nonzero").1.to_complex();
        x[*j] = Some(xj);
    }
    let vars: Vec<usize> = (0..n).filter(|&j| x[j].is_none()).collect();
    if seed.len() != vars.len() {
        return Err(Error::LengthMismatch {
            expected: vars.len(),
            found: seed.len(),
        });
    }
    for (&j, &c) in vars.iter().zip(seed) {
        if c.norm() <= crate::novikov::COMPLEX_ZERO_TOL || !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NoRoot(f64::INFINITY));
        }
        z[j] = c;
    }

    let sys = rescale(system, u)?;
    let (f0, jac0, scale0) = residue_eval(&sys.residue, &z, &vars);
    let res0 = relative_residual(&f0, &scale0);
    if res0 > SEED_TOL {
        return Err(Error::NoRoot(res0));
    }
    let det = scaled_det(&jac0);
    if det < SINGULAR_TOL {
        return Err(Error::SingularJacobian(det));
    }
    let mut zp = z.clone();
    polish(&sys.residue, &mut zp, &vars, 8);

    let prec = sys
        .w
        .iter()
        .map(|w| order - w)
        .max()
        .unwrap_or_else(|| order.clone())
        .max(Rational::new(1.into(), 1_000_000.into()));
    let exact_seed = res0 == 0.0;
    let xs: Vec<NovikovSeries> = (0..n)
        .map(|j| match &x[j] {
            Some(s) => s.clone(),
            None => {
                let c = if exact_seed { z[j] } else { zp[j] };
                NovikovSeries::constant(exact_if_integral(c))
            }
        })
        .collect();

    let exact_data = sys.g.iter().all(|g| g.terms().all(|(_, a)| a.has_exact_coefficients()))
        && xs.iter().all(NovikovSeries::has_exact_coefficients);
    // exact rational arithmetic is kept for small exact problems only; its
    // coefficients grow quickly with the number of exponents involved
    let exact_slots = if exact_data { MAX_EXACT_GRID } else { 0 };
    if let Some(rep) = dense_newton(system, u, free, &sys, &xs, &vars, order, &prec, exact_slots)? {
        return Ok(rep);
    }
    let (xs, history) = series_newton(&sys.g, &sys.w, xs, &vars, &prec)?;

    let solution: Vec<NovikovSeries> = xs.iter().zip(u).map(|(xj, uj)| xj.shift(uj)).collect();
    let mut residual_vals = Vec::with_capacity(system.len());
    // val fᵢ(y) = val gᵢ(x) + wᵢ
    for ((f, gi), w) in system.iter().zip(&sys.g).zip(&sys.w) {
        let v = match f.eval_exact(&solution)? {
            Some(exact) if exact.is_exact() => exact.val(),
            _ => zero_lower_bound(&gi.eval(&xs, &(order - w))?).plus_q(w),
        };
        residual_vals.push(v);
    }
    Ok(LiftReport {
        solution,
        residual_vals,
        order: order.clone(),
        free_coords: free.to_vec(),
        history,
    })
}

/// Tracks the smallest residual valuation per step and decides when the
/// iteration has stopped making progress.
#[derive(Default)]
struct Progress {
    history: Vec<Valuation>,
    best: Option<Valuation>,
    setbacks: usize,
}

impl Progress {
    fn record(&mut self, low: Valuation) -> Result<()> {
        self.history.push(low.clone());
        if self.best.as_ref().is_some_and(|b| low <= *b) {
            self.setbacks += 1;
            if self.setbacks > MAX_SETBACKS {
                return Err(Error::Stalled(low.to_string()));
            }
        } else {
            self.best = Some(low);
            self.setbacks = 0;
        }
        Ok(())
    }

    fn give_up(self) -> Error {
        Error::Stalled(self.history.last().map(ToString::to_string).unwrap_or_default())
    }
}

/// Newton's method over `Λ₀` in series arithmetic, for exact data.
fn series_newton(
    g: &[LaurentPoly],
    w: &[Rational],
    mut xs: Vec<NovikovSeries>,
    vars: &[usize],
    prec: &Rational,
) -> Result<(Vec<NovikovSeries>, Vec<Valuation>)> {
    let derivs: Vec<Vec<LaurentPoly>> = g
        .iter()
        .map(|gi| vars.iter().map(|&j| gi.partial_derivative(j)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut progress = Progress::default();
    let p = Valuation::Finite(prec.clone());
    for step in 0..=MAX_NEWTON_STEPS {
        let res: Vec<NovikovSeries> = g.iter().map(|gi| gi.eval(&xs, prec)).collect::<Result<_>>()?;
        let low = res
            .iter()
            .zip(w)
            .map(|(r, wi)| zero_lower_bound(r).plus_q(wi))
            .min()
            .unwrap_or(Valuation::Infinite);
        progress.record(low)?;
        if res.iter().all(NovikovSeries::is_zero) {
            return Ok((xs, progress.history));
        }
        if step == MAX_NEWTON_STEPS {
            break;
        }
        let jac: Vec<Vec<NovikovSeries>> = derivs
            .iter()
            .map(|row| row.iter().map(|d| d.eval(&xs, prec)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let rhs: Vec<NovikovSeries> = res.iter().map(|r| -r).collect();
        let delta = solve_series(jac, rhs, prec)?;
        for (&j, d) in vars.iter().zip(&delta) {
            xs[j] = (&xs[j] + d).truncate(&p);
        }
    }
    Err(progress.give_up())
}

/// Largest grid used by [`dense_newton`] before falling back to series
/// arithmetic.
const MAX_GRID: usize = 4096;
/// Exact data on grids up to this size is lifted in exact arithmetic.
const MAX_EXACT_GRID: usize = 24;

/// Newton's method in dense floating arithmetic on the exponent grid of the
/// data. `None` when the grid would be too large, or has at most
/// `exact_slots` slots.
#[allow(clippy::too_many_arguments)]
fn dense_newton(
    system: &[LaurentPoly],
    u: &[Rational],
    free: &[(usize, NovikovSeries)],
    sys: &Rescaled,
    xs: &[NovikovSeries],
    vars: &[usize],
    order: &Rational,
    prec: &Rational,
    exact_slots: usize,
) -> Result<Option<LiftReport>> {
    // coefficients and free coordinates may be known only to some order
    let mut data_prec = Valuation::Finite(prec.clone());
    let mut exps: Vec<&Rational> = Vec::new();
    for gi in &sys.g {
        for (_, a) in gi.terms() {
            data_prec = data_prec.min(a.truncation().clone());
            exps.extend(a.terms().iter().map(|(e, _)| e).filter(|e| *e < prec));
        }
    }
    for x in xs {
        data_prec = data_prec.min(x.truncation().clone());
        exps.extend(x.terms().iter().map(|(e, _)| e).filter(|e| *e < prec));
    }
    let Some(grid) = Grid::fit(exps, prec, MAX_GRID).filter(|g| g.n > exact_slots) else {
        return Ok(None);
    };
    let Some(g) = sys.g.iter().map(|gi| DensePoly::new(gi, &grid)).collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    let derivs: Vec<Vec<DensePoly>> = sys
        .g
        .iter()
        .map(|gi| {
            vars.iter()
                .map(|&j| Ok(DensePoly::new(&gi.partial_derivative(j)?, &grid).expect("same grid")))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let Some(mut x) = xs.iter().map(|s| grid.coefficients(s)).collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    // gᵢ is checked below min(order − wᵢ, data precision)
    let bounds: Vec<Rational> = sys
        .w
        .iter()
        .map(|w| match &data_prec {
            Valuation::Finite(d) => (order - w).min(d.clone()),
            Valuation::Infinite => order - w,
        })
        .collect();

    let mut progress = Progress::default();
    let mut converged = false;
    let mut lows = Vec::new();
    for step in 0..=MAX_NEWTON_STEPS {
        if !x.iter().all(|v| dense::is_finite(v)) {
            return Err(Error::Stalled("overflow".into()));
        }
        let pw = Powers::new(&x, g.iter().chain(derivs.iter().flatten()));
        let mut res = Vec::with_capacity(g.len());
        lows.clear();
        for ((gi, b), w) in g.iter().zip(&bounds).zip(&sys.w) {
            let (mut r, m) = dense::eval_with_majorant(gi, &pw, true);
            dense::denoise(&mut r, &m, NOISE_TOL);
            let low = match r[..grid.slots_below(b)].iter().position(|z| z.norm() > 0.0) {
                Some(k) => grid.exponent(k) + w,
                None => b + w,
            };
            lows.push(low);
            res.push(r);
        }
        let low = lows.iter().min().cloned().map_or(Valuation::Infinite, Valuation::Finite);
        progress.record(low)?;
        if lows.iter().zip(&bounds).zip(&sys.w).all(|((l, b), w)| *l == b + w) {
            converged = true;
            break;
        }
        if step == MAX_NEWTON_STEPS {
            break;
        }
        let jac: Vec<Vec<_>> = derivs
            .iter()
            .map(|row| row.iter().map(|d| dense::eval(d, &pw)).collect())
            .collect();
        let rhs: Vec<_> = res.iter().map(|r| r.iter().map(|z| -z).collect::<Vec<_>>()).collect();
        let delta = dense::solve(&jac, &rhs).ok_or(Error::SingularJacobian(0.0))?;
        for (&j, d) in vars.iter().zip(&delta) {
            for (a, b) in x[j].iter_mut().zip(d) {
                *a += b;
            }
        }
    }
    if !converged {
        return Err(progress.give_up());
    }
    let mut solution: Vec<NovikovSeries> = free.iter().fold(
        vec![NovikovSeries::zero(); u.len()],
        |mut acc, (j, y)| {
            acc[*j] = y.clone();
            acc
        },
    );
    // a residue point that already solves the system keeps its exact form
    let untouched = progress.history.len() == 1;
    for &j in vars {
        solution[j] = if untouched {
            xs[j].shift(&u[j])
        } else {
            grid.series(&x[j], prec, &u[j])
        };
    }
    let mut residual_vals = Vec::with_capacity(system.len());
    for (f, low) in system.iter().zip(lows) {
        residual_vals.push(match f.eval_exact(&solution)? {
            Some(exact) if exact.is_exact() => exact.val(),
            _ => Valuation::Finite(low),
        });
    }
    Ok(Some(LiftReport {
        solution,
        residual_vals,
        order: order.clone(),
        free_coords: free.to_vec(),
        history: progress.history,
    }))
}

/// Small Gaussian integers stay exact so exact inputs give exact solutions.
fn exact_if_integral(c: Complex64) -> Scalar {
    let r = c.re.round();
    if c.im == 0.0 && c.re == r && r.abs() < 1e6 {
        Scalar::Exact(int(r as i64))
    } else {
        Scalar::Complex(c)
    }
}

/// Roots in `ℂ*` of a Laurent polynomial `Σ a_k z^k`, from the eigenvalues of
/// the companion matrix, polished by Newton and deduplicated.
pub fn laurent_roots(terms: &[(i64, Complex64)]) -> Vec<Complex64> {
    let terms: Vec<(i64, Complex64)> = terms.iter().filter(|(_, a)| a.norm() > 0.0).copied().collect();
    let Some(lo) = terms.iter().map(|t| t.0).min() else {
        return Vec::new();
    };
    let hi = terms.iter().map(|t| t.0).max().expect("nonempty");
    let d = (hi - lo) as usize;
    if d == 0 {
        return Vec::new();
    }
    let mut p = vec![Complex64::zero(); d + 1];
    for (k, a) in &terms {
        p[(k - lo) as usize] += a;
    }
    let lead = p[d];
    let companion = DMatrix::from_fn(d, d, |i, j| {
        if i == 0 {
            -p[d - 1 - j] / lead
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::zero()
        }
    });
    // the unbounded QR iteration can cycle on symmetric root sets such as
    // z⁶ = c, so cap it and fall back to Aberth's method
    let eig: Vec<Complex64> = match Schur::try_new(companion, 1e-15, 2000).and_then(|s| s.eigenvalues()) {
        Some(v) => v.iter().copied().collect(),
        None => aberth(&p),
    };
    let eval = |z: Complex64| p.iter().rev().fold(Complex64::zero(), |acc, c| acc * z + c);
    let deriv = |z: Complex64| {
        p.iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::zero(), |acc, (k, c)| acc * z + c * k as f64)
    };
    let mut out: Vec<Complex64> = Vec::new();
    for mut z in eig {
        for _ in 0..8 {
            let dz = deriv(z);
            if dz.norm() == 0.0 {
                break;
            }
            let step = eval(z) / dz;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            z -= step;
        }
        if z.norm() > 1e-12 && !out.iter().any(|w| (w - z).norm() <= 1e-7 * (1.0 + z.norm())) {
            out.push(z);
        }
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

/// Simultaneous root iteration for `Σ p_k z^k` with `p₀, p_d ≠ 0`.
fn aberth(p: &[Complex64]) -> Vec<Complex64> {
    let d = p.len() - 1;
    let eval = |z: Complex64| p.iter().rev().fold(Complex64::zero(), |acc, c| acc * z + c);
    let deriv = |z: Complex64| {
        p.iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::zero(), |acc, (k, c)| acc * z + c * k as f64)
    };
    let r = (p[0].norm() / p[d].norm()).powf(1.0 / d as f64);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / d as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = false;
        for k in 0..d {
            let w = eval(z[k]) / deriv(z[k]);
            let s: Complex64 = (0..d).filter(|&j| j != k).map(|j| (z[k] - z[j]).inv()).sum();
            let step = w / (Complex64::new(1.0, 0.0) - w * s);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
                moved |= step.norm() > 1e-15 * (1.0 + z[k].norm());
            }
        }
        if !moved {
            break;
        }
    }
    z
}

/// Residue solutions of the square initial system in the non-free coordinates.
///
/// A single unknown uses companion-matrix roots; larger systems use damped
/// Newton from `starts` random points on the torus.
pub fn residue_roots(
    system: &[LaurentPoly],
    u: &[Rational],
    free_residues: &[(usize, Complex64)],
    starts: usize,
    seed: u64,
) -> Result<Vec<Vec<Complex64>>> {
    let n = u.len();
    let forms: Vec<InitialForm> = system.iter().map(|f| initial_form(f, u)).collect::<Result<_>>()?;
    let mut z = vec![Complex64::new(1.0, 0.0); n];
    for &(j, c) in free_residues {
        z[j] = c;
    }
    let vars: Vec<usize> = (0..n).filter(|j| !free_residues.iter().any(|(k, _)| k == j)).collect();
    if vars.len() != forms.len() {
        return Err(Error::DimensionMismatch {
            expected: vars.len(),
            found: forms.len(),
        });
    }
    if vars.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    if vars.len() == 1 {
        let j = vars[0];
        let mut coefs: Vec<(i64, Complex64)> = Vec::new();
        for (c, a) in forms[0].terms() {
            let mut rest = c.clone();
            rest[j] = 0;
            coefs.push((c[j], a.to_complex() * monomial(&rest, &z)));
        }
        let mut merged: std::collections::BTreeMap<i64, Complex64> = Default::default();
        for (k, a) in coefs {
            *merged.entry(k).or_default() += a;
        }
        let terms: Vec<(i64, Complex64)> = merged.into_iter().collect();
        return Ok(laurent_roots(&terms).into_iter().map(|r| vec![r]).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<Vec<Complex64>> = Vec::new();
    for _ in 0..starts {
        let mut trial = z.clone();
        for &j in &vars {
            let modulus = (rng.random::<f64>() * 2.0 - 1.0).exp();
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            trial[j] = Complex64::from_polar(modulus, angle);
        }
        let res = polish(&forms, &mut trial, &vars, 100);
        if res > 1e-12 {
            continue;
        }
        let root: Vec<Complex64> = vars.iter().map(|&j| trial[j]).collect();
        let dup = found.iter().any(|r| {
            r.iter()
                .zip(&root)
                .all(|(a, b)| (a - b).norm() <= 1e-7 * (1.0 + a.norm()))
        });
        if !dup {
            found.push(root);
        }
    }
    found.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
            if o.is_ne() {
                return o;
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(found)
}

/// Lifts every residue root at `u` for the given free coordinates, in parallel.
pub fn lift_all_seeds(
    system: &[LaurentPoly],
    u: &[Rational],
    free: &[(usize, NovikovSeries)],
    order: &Rational,
    seed: u64,
) -> Result<Vec<Result<LiftReport>>> {
    let free_res: Vec<(usize, Complex64)> = free
        .iter()
        .map(|(j, y)| (*j, y.leading().map_or(Complex64::zero(), |(_, c)| c.to_complex())))
        .collect();
    let seeds = residue_roots(system, u, &free_res, 64, seed)?;
    Ok(seeds
        .par_iter()
        .map(|s| newton_lift(system, u, free, s, order))
        .collect())
}

/// A root of a univariate polynomial found from one Newton-polygon edge.
#[derive(Clone, Debug)]
pub struct PuiseuxRoot {
    /// Valuation of the root, `-slope` of the edge.
    pub val: Rational,
    /// Lattice length of the edge.
    pub edge_length: i64,
    pub lift: Result<LiftReport>,
}

/// Newton–Puiseux: for each lower edge of the Newton polygon of `f ∈ Λ[y^±]`,
/// lift every root of its initial form.
pub fn puiseux_roots(f: &LaurentPoly, order: &Rational) -> Result<Vec<PuiseuxRoot>> {
    if f.n() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: f.n(),
        });
    }
    let tp = tropicalize(f)?;
    let mut pts: Vec<(i64, Rational)> = tp.terms().iter().map(|(c, w)| (c[0], w.clone())).collect();
    pts.sort();
    let mut hull: Vec<(i64, Rational)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (&hull[hull.len() - 2], &hull[hull.len() - 1]);
            // drop b if it lies on or above the segment a-p
            let cross = (&b.1 - &a.1) * int(p.0 - a.0) - (&p.1 - &a.1) * int(b.0 - a.0);
            if !cross.is_negative() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::new();
    for e in hull.windows(2) {
        let (c1, w1) = &e[0];
        let (c2, w2) = &e[1];
        let val = (w1 - w2) / int(c2 - c1);
        let u = vec![val.clone()];
        for s in residue_roots(std::slice::from_ref(f), &u, &[], 0, 0)? {
            out.push(PuiseuxRoot {
                val: val.clone(),
                edge_length: c2 - c1,
                lift: newton_lift(std::slice::from_ref(f), &u, &[], &s, order),
            });
        }
    }
    Ok(out)
}

/// Result of one probe sample.
#[derive(Clone, Debug, Serialize)]
pub struct SampleReport {
    #[serde(with = "crate::rational::serde_q_vec")]
    pub u: Vec<Rational>,
    pub free: Vec<usize>,
    pub status: SampleStatus,
    pub residual_vals: Vec<Valuation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Lifted,
    Singular,
    Failed,
}

/// Summary of a dimension probe.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub successes: usize,
    pub singular: usize,
    pub failures: usize,
    /// Local dimension of the solution set at the lifted points, when all
    /// successful samples agree.
    pub probed_dim: Option<usize>,
    /// Largest cell dimension of the tropical complex.
    pub trop_dim: Option<usize>,
    pub r: usize,
    pub reports: Vec<SampleReport>,
}

/// Numerical rank by singular values relative to the largest.
fn numeric_rank(m: &DMatrix<Complex64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-8 * top.max(1e-300)).count()
}

/// Samples random points of the tropical critical locus and random free
/// coordinates with the prescribed valuations, and lifts them.
pub fn dimension_probe(
    p: &Polytope,
    s: &SubtorusSpec,
    cs: &[CorrectionTerm],
    samples: usize,
    order: &Rational,
    seed: u64,
) -> Result<ProbeReport> {
    let system = critical_system(p, s, cs)?;
    let complex = crit_trop_system(p, &system)?;
    let n = p.dim();
    let r = n - system.len();
    let trop_dim = complex.max_dim();
    let top: Vec<_> = complex
        .cells
        .iter()
        .filter(|c| Some(c.dim()) == trop_dim)
        .collect();
    let reports: Vec<SampleReport> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
            if top.is_empty() {
                return SampleReport {
                    u: Vec::new(),
                    free: Vec::new(),
                    status: SampleStatus::Failed,
                    residual_vals: Vec::new(),
                    local_dim: None,
                    message: Some("empty tropical locus".into()),
                };
            }
            let cell = top[rng.random_range(0..top.len())];
            let weights: Vec<u32> = (0..cell.vertices().len()).map(|_| rng.random_range(1..=16)).collect();
            let u = cell.interior_point(&weights);
            probe_point(&system, &u, order, &mut rng)
        })
        .collect();
    let successes = reports.iter().filter(|r| r.status == SampleStatus::Lifted).count();
    let singular = reports.iter().filter(|r| r.status == SampleStatus::Singular).count();
    let dims: Vec<usize> = reports.iter().filter_map(|r| r.local_dim).collect();
    let probed_dim = match dims.first() {
        Some(&d) if dims.iter().all(|&e| e == d) => Some(d),
        _ => None,
    };
    Ok(ProbeReport {
        samples,
        successes,
        singular,
        failures: samples - successes - singular,
        probed_dim,
        trop_dim,
        r,
        reports,
    })
}

fn probe_point(system: &[LaurentPoly], u: &[Rational], order: &Rational, rng: &mut ChaCha8Rng) -> SampleReport {
    let n = u.len();
    let r = n - system.len();
    let fail = |free: Vec<usize>, status, msg: String| SampleReport {
        u: u.to_vec(),
        free,
        status,
        residual_vals: Vec::new(),
        local_dim: None,
        message: Some(msg),
    };
    let forms: Vec<InitialForm> = match system.iter().map(|f| initial_form(f, u)).collect::<Result<Vec<_>>>() {
        Ok(f) => f,
        Err(e) => return fail(Vec::new(), SampleStatus::Failed, e.to_string()),
    };
    // find a residue point on the initial variety, trying each free set
    let mut last_err = String::from("no residue root");
    let all: Vec<usize> = (0..n).collect();
    for candidate in itertools::Itertools::combinations(all.iter().copied(), r) {
        let free_res: Vec<(usize, Complex64)> = candidate
            .iter()
            .map(|&j| {
                let modulus = (rng.random::<f64>() - 0.5).exp();
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                (j, Complex64::from_polar(modulus, angle))
            })
            .collect();
        let roots = match residue_roots(system, u, &free_res, 32, rng.random()) {
            Ok(r) => r,
            Err(e) => {
                last_err = e.to_string();
                continue;
            }
        };
        let Some(root) = roots.first() else {
            continue;
        };
        let mut z = vec![Complex64::zero(); n];
        for &(j, c) in &free_res {
            z[j] = c;
        }
        for (k, j) in (0..n).filter(|j| !candidate.contains(j)).enumerate() {
            z[j] = root[k];
        }
        // free coordinates: complement of the best-conditioned square minor
        let (_, full_jac, _) = residue_eval(&forms, &z, &all);
        let local_dim = n - numeric_rank(&full_jac);
        let free: Vec<usize> = itertools::Itertools::combinations(all.iter().copied(), r)
            .map(|fr| {
                let cols: Vec<usize> = (0..n).filter(|j| !fr.contains(j)).collect();
                let minor = full_jac.select_columns(cols.iter());
                (fr, scaled_det(&minor))
            })
            .fold((Vec::new(), -1.0), |best, (fr, d)| if d > best.1 { (fr, d) } else { best })
            .0;
        let free_series: Vec<(usize, NovikovSeries)> = free
            .iter()
            .map(|&j| (j, NovikovSeries::monomial(Scalar::Complex(z[j]), u[j].clone())))
            .collect();
        let seed: Vec<Complex64> = (0..n).filter(|j| !free.contains(j)).map(|j| z[j]).collect();
        return match newton_lift(system, u, &free_series, &seed, order) {
            Ok(rep) if rep.succeeded() => SampleReport {
                u: u.to_vec(),
                free,
                status: SampleStatus::Lifted,
                residual_vals: rep.residual_vals,
                local_dim: Some(local_dim),
                message: None,
            },
            Ok(rep) => SampleReport {
                u: u.to_vec(),
                free,
                status: SampleStatus::Failed,
                residual_vals: rep.residual_vals,
                local_dim: None,
                message: Some("residual below order".into()),
            },
            Err(e @ Error::SingularJacobian(_)) => fail(free, SampleStatus::Singular, e.to_string()),
            Err(e) => fail(free, SampleStatus::Failed, e.to_string()),
        };
    }
    fail(Vec::new(), SampleStatus::Failed, last_err)
}

/// Valuation vector as floats, for diagnostics.
pub fn valuation_f64(y: &[NovikovSeries]) -> Vec<f64> {
    y.iter()
        .map(|s| s.val().finite().map_or(f64::INFINITY, to_f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::tropical::crit_trop;

    fn q(p: i64, d: i64) -> Rational {
        ratio(p, d)
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cp2_system(k: Vec<i64>) -> Vec<LaurentPoly> {
        let s = SubtorusSpec::from_columns(2, &[k]).unwrap();
        critical_system(&Polytope::cp_n(2), &s, &[]).unwrap()
    }

    #[test]
    fn initial_forms() {
        let f = &cp2_system(vec![1, 2])[0];
        let at_center = initial_form(f, &[q(1, 3), q(1, 3)]).unwrap();
        assert_eq!(at_center.to_poly().to_string(), "2*y1 - y2 - y1^-1*y2^-1");
        let f = &cp2_system(vec![0, 1])[0];
        let seg = initial_form(f, &[q(1, 4), q(1, 2)]).unwrap();
        assert_eq!(seg.terms().len(), 2);
        let off = initial_form(f, &[q(1, 10), q(1, 2)]).unwrap();
        assert!(off.is_monomial());
        assert_eq!(initial_form(&LaurentPoly::zero(2), &[q(0, 1), q(0, 1)]), Err(Error::ZeroPolynomial));
    }

    #[test]
    fn exact_family_lifts_exactly() {
        // y1^2 y2 = T with y2 = T^{u2}
        let sys = cp2_system(vec![0, 1]);
        let u2 = q(2, 5);
        let u = vec![(int(1) - &u2) / int(2), u2.clone()];
        let free = vec![(1, NovikovSeries::t_pow(u2))];
        let rep = newton_lift(&sys, &u, &free, &[c(1.0)], &int(5)).unwrap();
        assert_eq!(rep.residual_vals, vec![Valuation::Infinite]);
        assert_eq!(rep.solution[0], NovikovSeries::t_pow(q(3, 10)));
        let rep = newton_lift(&sys, &u, &free, &[c(-1.0)], &int(5)).unwrap();
        assert_eq!(rep.residual_vals, vec![Valuation::Infinite]);
        assert_eq!(
            newton_lift(&sys, &u, &free, &[c(2.0)], &int(5)).unwrap_err(),
            Error::NoRoot(0.75)
        );
    }

    #[test]
    fn center_lifts_with_two_roots() {
        // annihilator (3,-1): 3y1 - y2 - 2T/(y1y2); residues z2 = 1, 2
        let sys = cp2_system(vec![1, 3]);
        let u = vec![q(1, 3), q(1, 3)];
        let free = vec![(0, NovikovSeries::t_pow(q(1, 3)))];
        let lifts = lift_all_seeds(&sys, &u, &free, &int(5), 1).unwrap();
        assert_eq!(lifts.len(), 2);
        for l in &lifts {
            let rep = l.as_ref().unwrap();
            assert!(rep.succeeded(), "{:?}", rep.residual_vals);
            assert_eq!(rep.solution[1].val(), Valuation::Finite(q(1, 3)));
        }
        let mut res: Vec<f64> = lifts.iter().map(|l| l.as_ref().unwrap().residues()[1].re).collect();
        res.sort_by(f64::total_cmp);
        assert!((res[0] - 1.0).abs() < 1e-9 && (res[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn double_root_is_singular() {
        let sys = cp2_system(vec![1, 2]);
        let u = vec![q(1, 3), q(1, 3)];
        let free = vec![(0, NovikovSeries::t_pow(q(1, 3)))];
        let err = newton_lift(&sys, &u, &free, &[c(1.0)], &int(5)).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian(_)));
    }

    #[test]
    fn product_annulus() {
        let p = Polytope::s2xs2(&int(1), &int(2)).unwrap();
        let s = SubtorusSpec::from_columns(2, &[vec![0, 1]]).unwrap();
        let sys = critical_system(&p, &s, &[]).unwrap();
        let u = vec![q(1, 2), q(3, 4)];
        let free = vec![(1, NovikovSeries::monomial(Scalar::Complex(Complex64::new(0.3, 0.8)), q(3, 4)))];
        let lifts = lift_all_seeds(&sys, &u, &free, &int(5), 0).unwrap();
        assert_eq!(lifts.len(), 2);
        for l in lifts {
            let rep = l.unwrap();
            assert_eq!(rep.residual_vals, vec![Valuation::Infinite]);
            let r = rep.residues()[0];
            assert!((r.norm() - 1.0).abs() < 1e-12 && r.im.abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_subtorus_has_three_points() {
        let sys = cp2_system_trivial();
        let u = vec![q(1, 3), q(1, 3)];
        let lifts = lift_all_seeds(&sys, &u, &[], &int(5), 7).unwrap();
        assert_eq!(lifts.len(), 3);
        for l in lifts {
            let rep = l.unwrap();
            assert!(rep.succeeded());
            let z = rep.residues();
            assert!((z[0] - z[1]).norm() < 1e-9);
            assert!((z[0].powi(3) - c(1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn conjugate_of_a_lift_is_a_lift() {
        let sys = cp2_system_trivial();
        let u = vec![q(1, 3), q(1, 3)];
        let lifts: Vec<LiftReport> = lift_all_seeds(&sys, &u, &[], &int(5), 7)
            .unwrap()
            .into_iter()
            .map(|l| l.unwrap())
            .collect();
        for rep in &lifts {
            let conj: Vec<NovikovSeries> = rep.solution.iter().map(NovikovSeries::conj).collect();
            for f in &sys {
                let r = eval_denoised(f, &conj, &int(5)).unwrap();
                assert!(r.is_zero(), "{r}");
            }
            let seed: Vec<Complex64> = rep.residues().iter().map(|z| z.conj()).collect();
            let other = newton_lift(&sys, &u, &[], &seed, &int(5)).unwrap();
            assert!(other.solution.iter().zip(&conj).all(|(a, b)| a.approx_eq(b, 1e-9)));
        }
    }

    fn cp2_system_trivial() -> Vec<LaurentPoly> {
        let s = SubtorusSpec::from_columns(2, &[]).unwrap();
        critical_system(&Polytope::cp_n(2), &s, &[]).unwrap()
    }

    #[test]
    fn residual_history_increases() {
        let p = Polytope::cp2_blowup1(&q(1, 4)).unwrap();
        let s = SubtorusSpec::from_columns(2, &[vec![1, 2]]).unwrap();
        let sys = critical_system(&p, &s, &[]).unwrap();
        let c = crit_trop(&p, &s, &[]).unwrap();
        let u = c.cells[0].interior_point(&[2, 3]);
        let free = vec![(1, NovikovSeries::monomial(Scalar::Complex(Complex64::new(0.7, 0.2)), u[1].clone()))];
        for l in lift_all_seeds(&sys, &u, &free, &int(5), 3).unwrap() {
            let rep = l.unwrap();
            assert!(rep.succeeded());
            assert!(rep.history.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn binomial_root_count() {
        // y^2 - T
        let f = LaurentPoly::from_terms(
            1,
            vec![
                (vec![2], NovikovSeries::one()),
                (vec![0], -&NovikovSeries::t_pow(int(1))),
            ],
        )
        .unwrap();
        let roots = puiseux_roots(&f, &int(5)).unwrap();
        assert_eq!(roots.len(), 2);
        for r in roots {
            assert_eq!(r.val, q(1, 2));
            assert_eq!(r.lift.unwrap().residual_vals, vec![Valuation::Infinite]);
        }
    }

    #[test]
    fn companion_roots() {
        let r = laurent_roots(&[(0, c(2.0)), (1, c(-3.0)), (2, c(1.0))]);
        assert_eq!(r.len(), 2);
        assert!((r[0] - c(1.0)).norm() < 1e-12 && (r[1] - c(2.0)).norm() < 1e-12);
        let r = laurent_roots(&[(-1, c(1.0)), (2, c(-1.0))]);
        assert_eq!(r.len(), 3);
        assert!(laurent_roots(&[(3, c(1.0))]).is_empty());
        // z⁶ = −1/4 once made the QR iteration cycle
        let r = laurent_roots(&[(-2, c(-1.0 / 3.0)), (4, c(-4.0 / 3.0))]);
        assert_eq!(r.len(), 6);
        for z in r {
            assert!((z.powi(6) + c(0.25)).norm() < 1e-12);
        }
    }

    #[test]
    fn aberth_roots() {
        let mut z = aberth(&[c(-8.0), c(0.0), c(0.0), c(1.0)]);
        z.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((z[2] - c(2.0)).norm() < 1e-12);
        assert!(z.iter().all(|w| (w.powi(3) - c(8.0)).norm() < 1e-10));
    }

    #[test]
    fn probe_cp2() {
        let p = Polytope::cp_n(2);
        let s = SubtorusSpec::from_columns(2, &[vec![0, 1]]).unwrap();
        let rep = dimension_probe(&p, &s, &[], 5, &int(5), 11).unwrap();
        assert_eq!(rep.successes, 5, "{:?}", rep.reports);
        assert_eq!(rep.probed_dim, Some(1));
        let empty = dimension_probe(&p, &s, &[], 0, &int(5), 11).unwrap();
        assert_eq!(empty.samples, 0);
    }
}
