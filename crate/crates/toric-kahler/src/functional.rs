//! Stability functionals on a moment polytope.
//!
//! The linear functional `L_A(f) = int_dP f dsigma - int_P A f dx` controls
//! existence of metrics with prescribed scalar curvature `A`: a solution
//! forces `L_A` to vanish on affine functions and to be positive on convex
//! non-affine ones. The module provides `L_A` on exact and quadrature paths,
//! the toric Futaki invariant, the unique extremal affine target, the
//! Mabuchi-type functional `F_A`, its weak form, and a single-crease
//! piecewise-linear stability probe with exact rational certificates.

use crate::curvature;
use crate::dualquad::{DualIntegrator, DualQuadError, DualWeight};
use crate::exact::{self, dot_rat, rat, Rat};
use crate::polytope::{
    cut_moments, graded_boundary_rule, DelzantPolytope, Facet, PolytopeError, QuadratureScheme,
};
use crate::potential::{PotentialError, SymplecticPotential};
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    DualQuad(#[from] DualQuadError),
    #[error(transparent)]
    Curvature(#[from] curvature::CurvatureError),
}

/// An affine function `A(x) = constant + gradient . x` with exact
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineData {
    pub constant: Rat,
    pub gradient: Vec<Rat>,
}

impl AffineData {
    pub fn constant_fn(n: usize, c: Rat) -> Self {
        AffineData {
            constant: c,
            gradient: vec![rat(0); n],
        }
    }

    pub fn eval_exact(&self, x: &[Rat]) -> Rat {
        &self.constant + dot_rat(&self.gradient, x)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        exact::to_f64(&self.constant)
            + self
                .gradient
                .iter()
                .zip(x)
                .map(|(g, xi)| exact::to_f64(g) * xi)
                .sum::<f64>()
    }

    pub fn constant_f64(&self) -> f64 {
        exact::to_f64(&self.constant)
    }

    pub fn gradient_f64(&self) -> Vec<f64> {
        self.gradient.iter().map(exact::to_f64).collect()
    }
}

/// A piecewise-linear convex function `max over pieces of (g . x + c)`.
#[derive(Debug, Clone, Serialize)]
pub struct PLConvexFunction {
    /// (gradient, constant) per affine piece
    pub pieces: Vec<(Vec<f64>, f64)>,
}

impl PLConvexFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|(g, c)| g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + c)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// For a two-piece function, the unit normal of the crease line
    /// (difference of the piece gradients, normalized).
    pub fn crease_normal(&self) -> Option<Vec<f64>> {
        if self.pieces.len() != 2 {
            return None;
        }
        let d: Vec<f64> = self.pieces[0]
            .0
            .iter()
            .zip(&self.pieces[1].0)
            .map(|(a, b)| a - b)
            .collect();
        let norm: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        Some(d.into_iter().map(|v| v / norm).collect())
    }
}

/// `L_A(f)` by quadrature for arbitrary continuous integrands.
pub fn l_a_quadrature(
    scheme: &QuadratureScheme,
    a: impl Fn(&[f64]) -> f64,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    scheme.integrate_boundary(&f) - scheme.integrate_interior(|x| a(x) * f(x))
}

/// Exact `L_A(f)` for affine `A` and affine `f`.
pub fn l_a_affine_exact(p: &DelzantPolytope, a: &AffineData, f: &AffineData) -> Rat {
    let m = p.moments();
    let boundary = m.boundary_integrate_affine(&f.constant, &f.gradient);
    let interior = m
        .interior()
        .integrate_affine_product((&a.constant, &a.gradient), (&f.constant, &f.gradient));
    boundary - interior
}

/// The constant `A` making `L_A` vanish on constants:
/// `Vol(dP, dsigma) / Vol(P, dx)`.
pub fn constant_a(p: &DelzantPolytope) -> Rat {
    p.boundary_volume() / p.volume()
}

/// The toric Futaki invariant: the vector `(L_A(x_1), ..., L_A(x_n))` with
/// `A = constant_a`. Equal to `Vol(dP) (barycenter(dP) - barycenter(P))`.
pub fn futaki(p: &DelzantPolytope) -> Vec<Rat> {
    let a = AffineData::constant_fn(p.dim(), constant_a(p));
    (0..p.dim())
        .map(|i| {
            let mut grad = vec![rat(0); p.dim()];
            grad[i] = rat(1);
            let f = AffineData {
                constant: rat(0),
                gradient: grad,
            };
            l_a_affine_exact(p, &a, &f)
        })
        .collect()
}

/// The unique affine `A` with `L_A(f) = 0` for all affine `f`, from the exact
/// rational moment system.
pub fn extremal_affine(p: &DelzantPolytope) -> AffineData {
    let n = p.dim();
    let m = p.moments();
    // unknowns (a0, a1..an); equations from f = 1, x_1, ..., x_n
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(n + 1);
    let mut rhs: Vec<Rat> = Vec::with_capacity(n + 1);
    let mut row0 = vec![m.volume.clone()];
    row0.extend(m.m1.iter().cloned());
    rows.push(row0);
    rhs.push(m.boundary_volume());
    for i in 0..n {
        let mut row = vec![m.m1[i].clone()];
        row.extend((0..n).map(|j| m.m2[i][j].clone()));
        rows.push(row);
        rhs.push(m.facets.iter().map(|f| f.m1[i].clone()).sum());
    }
    let sol = exact::solve_rational(&rows, &rhs)
        .expect("affine moment Gram matrix is positive definite");
    AffineData {
        constant: sol[0].clone(),
        gradient: sol[1..].to_vec(),
    }
}

/// The Mabuchi-type functional
/// `F_A(u) = L_A(u) - int_P log det Hess(u) dx`.
///
/// The boundary term integrates the continuous function `u` against `dsigma`
/// with corner-graded Gauss panels; both interior integrals are pushed to the
/// dual space where the integrands are smooth with exponential decay, so the
/// `log det` boundary singularity never meets a quadrature node.
pub fn mabuchi_f_a(
    u: &SymplecticPotential,
    a: impl Fn(&[f64]) -> f64,
) -> Result<f64, FunctionalError> {
    let p = u.polytope();
    let boundary = match p.dim() {
        1 => {
            let g = p.float();
            g.vertices
                .iter()
                .map(|v| u.value(&near_boundary_value_point(p, v)))
                .sum::<Result<f64, _>>()?
        }
        _ => {
            let rule = graded_boundary_rule(p, 16, 40)?;
            let mut total = 0.0;
            for facet_nodes in &rule {
                for (x, w) in facet_nodes {
                    total += w * u.value(&clip_inside(p, x))?;
                }
            }
            total
        }
    };
    let dual = DualIntegrator::build(u, DualWeight::VolumeForm)?;
    let interior_af = dual.integrate(|nd| a(&nd.x) * value_at(u, &nd.x));
    let log_det = dual.integrate(|nd| -nd.inv_hess.clone().lu().determinant().ln());
    Ok(boundary - interior_af - log_det)
}

fn value_at(u: &SymplecticPotential, x: &[f64]) -> f64 {
    u.value(x).unwrap_or(f64::NAN)
}

/// u extends continuously to the boundary but the closed form needs strictly
/// positive facet distances; evaluate a hair inside.
fn clip_inside(p: &DelzantPolytope, x: &[f64]) -> Vec<f64> {
    let g = p.float();
    let mut y = x.to_vec();
    for k in 0..6 {
        if p.contains_f64(&y, 0.0) {
            return y;
        }
        let eps = 1e-13 * 10f64.powi(k) * g.diameter.max(1.0);
        for i in 0..y.len() {
            y[i] += eps * (g.center[i] - y[i]);
        }
    }
    y
}

fn near_boundary_value_point(p: &DelzantPolytope, v: &[f64]) -> Vec<f64> {
    // x log x -> 0: evaluating 1e-14 inside changes u by ~3e-13
    let g = p.float();
    v.iter()
        .zip(&g.center)
        .map(|(vi, ci)| vi + 1e-14 * (ci - vi))
        .collect()
}

/// Both sides of the weak form of the prescribed-curvature equation:
/// `(L_A(f), int_P u^{ij} f_ij dx)`. They agree when `S(u) = A`.
pub fn weak_form_check(
    u: &SymplecticPotential,
    scheme: &QuadratureScheme,
    a: impl Fn(&[f64]) -> f64,
    f: impl Fn(&[f64]) -> crate::potential::Jet2,
) -> Result<(f64, f64), FunctionalError> {
    let lhs = l_a_quadrature(scheme, &a, |x| f(x).value);
    let dual = DualIntegrator::build(u, DualWeight::VolumeForm)?;
    let rhs = dual.integrate(|nd| {
        let jet = f(&nd.x);
        (0..jet.hess.nrows())
            .flat_map(|i| (0..jet.hess.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| nd.inv_hess[(i, j)] * jet.hess[(i, j)])
            .sum()
    });
    Ok((lhs, rhs))
}

/// Exact `L_A(max(0, ell))` for affine `A` and an exact rational crease
/// `ell(x) = g . x - c`, computed by cutting the polytope along the crease.
/// Also returns the normalization mass `int_P max(0, ell) dx`.
pub fn l_a_crease_exact(
    p: &DelzantPolytope,
    a: &AffineData,
    crease_normal: &[i64],
    crease_offset: &Rat,
) -> (Rat, Rat) {
    let mut facets = p.facets().to_vec();
    // the positive side {ell >= 0}
    let crease = Facet::new(crease_normal.to_vec(), crease_offset.clone())
        .expect("crease normal must be primitive");
    facets.push(crease);
    let (interior, per_facet) = cut_moments(p.dim(), &facets);
    let ell = AffineData {
        constant: -crease_offset.clone(),
        gradient: crease_normal.iter().map(|&g| rat(g)).collect(),
    };
    // int_P ell^+ dx
    let mass = interior.integrate_affine(&ell.constant, &ell.gradient);
    // boundary term: original facets only, clipped to the positive side
    let mut boundary = rat(0);
    for fm in per_facet.iter().take(p.facets().len()).flatten() {
        boundary += &ell.constant * &fm.mass + dot_rat(&ell.gradient, &fm.m1);
    }
    // interior term int A ell^+ over the cut region
    let interior_term = interior
        .integrate_affine_product((&a.constant, &a.gradient), (&ell.constant, &ell.gradient));
    (boundary - interior_term, mass)
}

/// Outcome of the single-crease stability scan.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// smallest normalized `L_A` value found
    pub value: f64,
    /// exact rational value as a string, for the certificate
    pub value_exact: String,
    /// minimizing crease as a piecewise-linear witness `max(0, ell)`
    pub crease: PLConvexFunction,
    pub crease_normal: Vec<i64>,
    pub crease_offset: String,
    /// `"unstable"` when the exact value is negative
    pub certificate: String,
    pub creases_scanned: usize,
}

/// Scan `L_A(f)` over normalized single-crease functions `f = max(0, ell)`
/// with `ell` running over lattice lines through pairs of rational boundary
/// points. A negative exact value certifies that no solution of `S(u) = A`
/// exists; a positive minimum is evidence only.
///
/// `budget` bounds the per-edge subdivision count of the generator family.
pub fn stability_probe(p: &DelzantPolytope, a: &AffineData, budget: usize) -> StabilityReport {
    let budget = budget.max(2);
    let candidates = crease_candidates(p, budget);
    let results: Vec<(Rat, Vec<i64>, Rat)> = candidates
        .par_iter()
        .filter_map(|(normal, offset)| {
            let (val, mass) = l_a_crease_exact(p, a, normal, offset);
            if !mass.is_positive() {
                return None; // crease misses the interior
            }
            // normalize by int f = 1; L_A is degree-1 homogeneous in f
            Some((val / mass, normal.clone(), offset.clone()))
        })
        .collect();
    let mut best: Option<(Rat, Vec<i64>, Rat)> = None;
    let scanned = results.len();
    for r in results {
        if best.as_ref().is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    let (value, normal, offset) = best.expect("crease family is nonempty");
    let (_, mass_norm) = l_a_crease_exact(p, a, &normal, &offset);
    let scale = 1.0 / exact::to_f64(&mass_norm);
    let crease = PLConvexFunction {
        pieces: vec![
            (vec![0.0; p.dim()], 0.0),
            (
                normal.iter().map(|&g| g as f64 * scale).collect(),
                -exact::to_f64(&offset) * scale,
            ),
        ],
    };
    let certificate = if value.is_negative() {
        "unstable"
    } else {
        "no-violation-found"
    };
    StabilityReport {
        value: exact::to_f64(&value),
        value_exact: exact::format_rat(&value),
        crease_normal: normal,
        crease_offset: exact::format_rat(&offset),
        crease,
        certificate: certificate.to_string(),
        creases_scanned: scanned,
    }
}

/// Rational crease lines through pairs of boundary subdivision points.
fn crease_candidates(p: &DelzantPolytope, budget: usize) -> Vec<(Vec<i64>, Rat)> {
    let n = p.dim();
    let mut out: Vec<(Vec<i64>, Rat)> = Vec::new();
    fn push(normal: Vec<i64>, offset: Rat, out: &mut Vec<(Vec<i64>, Rat)>) {
        let neg: Vec<i64> = normal.iter().map(|&g| -g).collect();
        let negoff = -offset.clone();
        if !out.iter().any(|(g, c)| g == &normal && c == &offset) {
            out.push((normal, offset));
        }
        if !out.iter().any(|(g, c)| g == &neg && c == &negoff) {
            out.push((neg, negoff));
        }
    }
    if n == 1 {
        let a = &p.vertices()[0][0];
        let b = &p.vertices()[1][0];
        for k in 1..budget {
            let c = a + (b - a) * exact::ratio(k as i64, budget as i64);
            push(vec![1], c.clone(), &mut out);
        }
        return out;
    }
    // boundary sample points: edge subdivisions at k/budget
    let mut points: Vec<Vec<Rat>> = Vec::new();
    for (r, _) in p.facets().iter().enumerate() {
        let ends: Vec<&Vec<Rat>> = (0..p.vertices().len())
            .filter(|&v| p.vertex_facets()[v].contains(&r))
            .map(|v| &p.vertices()[v])
            .collect();
        if ends.len() != 2 {
            continue;
        }
        for k in 0..=budget {
            let s = exact::ratio(k as i64, budget as i64);
            let pt: Vec<Rat> = ends[0]
                .iter()
                .zip(ends[1])
                .map(|(x, y)| x + (y - x) * &s)
                .collect();
            if !points.contains(&pt) {
                points.push(pt);
            }
        }
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d: Vec<Rat> = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| b - a)
                .collect();
            // rotate the direction to get the line normal
            let normal_rat = vec![-d[1].clone(), d[0].clone()];
            let Some(normal) = exact::primitive_direction(&normal_rat) else {
                continue;
            };
            let offset = dot_rat(
                &normal.iter().map(|&g| rat(g)).collect::<Vec<_>>(),
                &points[i],
            );
            push(normal, offset, &mut out);
        }
    }
    out
}

/// Sampled values of `s -> F_A(u + s w)` for convexity or minimization scans.
pub fn f_a_along_segment(
    u: &SymplecticPotential,
    w: &std::sync::Arc<dyn crate::potential::Correction>,
    a: impl Fn(&[f64]) -> f64 + Copy,
    s_values: &[f64],
) -> Result<Vec<f64>, FunctionalError> {
    s_values
        .iter()
        .map(|&s| mabuchi_f_a(&u.perturbed(s, std::sync::Arc::clone(w)), a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::exact::ratio;
    use crate::polytope::build_quadrature;
    use crate::potential::{Jet2, PolyCorrection};
    use num_traits::Zero;
    use std::sync::Arc;

    #[test]
    fn constant_a_values() {
        assert_eq!(constant_a(&builtin::interval(rat(0), rat(1))), rat(2));
        assert_eq!(constant_a(&builtin::unit_square()), rat(4));
        assert_eq!(constant_a(&builtin::bl1cp2()), rat(2));
        assert_eq!(constant_a(&builtin::unit_simplex()), rat(6));
    }

    #[test]
    fn futaki_values() {
        assert_eq!(futaki(&builtin::interval(rat(0), rat(1))), vec![rat(0)]);
        assert_eq!(futaki(&builtin::cp2_anticanonical()), vec![rat(0), rat(0)]);
        assert_eq!(futaki(&builtin::bl1cp2()), vec![ratio(1, 3), ratio(1, 3)]);
        // futaki = bvol (bb - b)
        let p = builtin::bl1cp2();
        let m = p.moments();
        let bb = m.boundary_barycenter();
        let b = m.barycenter();
        let check: Vec<Rat> = bb
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * m.boundary_volume())
            .collect();
        assert_eq!(futaki(&p), check);
    }

    #[test]
    fn l_a_pinned_value_on_bl1cp2() {
        // A = 2, f = x: boundary moment 1 minus 2 * (1/3)
        let p = builtin::bl1cp2();
        let a = AffineData::constant_fn(2, rat(2));
        let f = AffineData {
            constant: rat(0),
            gradient: vec![rat(1), rat(0)],
        };
        assert_eq!(l_a_affine_exact(&p, &a, &f), ratio(1, 3));
        // quadrature path agrees
        let scheme = build_quadrature(&p, 6, 12).unwrap();
        let got = l_a_quadrature(&scheme, |_| 2.0, |x| x[0]);
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn extremal_affine_symmetric_cases() {
        let p = builtin::unit_square();
        let a = extremal_affine(&p);
        assert_eq!(a.constant, rat(4));
        assert!(a.gradient.iter().all(|g| g.is_zero()));
        let interval = builtin::interval(rat(0), rat(1));
        let a1 = extremal_affine(&interval);
        assert_eq!(a1.constant, rat(2));
        assert!(a1.gradient[0].is_zero());
    }

    #[test]
    fn extremal_affine_bl1cp2_regression() {
        // solving the exact moment system by hand gives
        // A = 21/11 + (6/11)(x + y)
        let p = builtin::bl1cp2();
        let a = extremal_affine(&p);
        assert_eq!(a.constant, ratio(21, 11));
        assert_eq!(a.gradient, vec![ratio(6, 11), ratio(6, 11)]);
        // extremal A annihilates all affine functions exactly
        for f in [
            AffineData::constant_fn(2, rat(1)),
            AffineData {
                constant: rat(0),
                gradient: vec![rat(1), rat(0)],
            },
            AffineData {
                constant: ratio(-3, 7),
                gradient: vec![rat(2), rat(-5)],
            },
        ] {
            assert!(l_a_affine_exact(&p, &a, &f).is_zero());
        }
    }

    #[test]
    fn l_a_linearity_quadrature() {
        let p = builtin::bl1cp2();
        let scheme = build_quadrature(&p, 8, 16).unwrap();
        let a = |x: &[f64]| 1.0 + 0.3 * x[0] - 0.2 * x[1];
        let f = |x: &[f64]| x[0] * x[0] - x[1];
        let g = |x: &[f64]| 0.5 * x[0] * x[1] + 1.0;
        let lf = l_a_quadrature(&scheme, a, f);
        let lg = l_a_quadrature(&scheme, a, g);
        let combo = l_a_quadrature(&scheme, a, |x| 2.5 * f(x) - 1.25 * g(x));
        assert!((combo - (2.5 * lf - 1.25 * lg)).abs() < 1e-12);
    }

    #[test]
    fn mabuchi_finite_and_gauge_shift() {
        // F_A(u + affine) - F_A(u) = L_A(affine); with extremal A it vanishes
        let p = Arc::new(builtin::unit_square());
        let u = SymplecticPotential::guillemin(Arc::clone(&p));
        let a = extremal_affine(&p);
        let af = move |x: &[f64]| a.eval(x);
        let f0 = mabuchi_f_a(&u, &af).unwrap();
        assert!(f0.is_finite());
        let shifted = u.perturbed(
            1.0,
            Arc::new(PolyCorrection::new(
                2,
                vec![(0.8, vec![0, 0]), (-0.3, vec![1, 0]), (0.15, vec![0, 1])],
            )),
        );
        let f1 = mabuchi_f_a(&shifted, &af).unwrap();
        assert!((f1 - f0).abs() < 2e-6, "{f1} vs {f0}");
    }

    #[test]
    fn mabuchi_minimized_by_solution_1d() {
        // round sphere minimizes F_2 along u + s x(1-x)(x-1/3)
        let p = Arc::new(builtin::interval(rat(0), rat(1)));
        let u = SymplecticPotential::guillemin(Arc::clone(&p));
        // x(1-x)(x-1/3) = -x^3 + (4/3)x^2 - x/3
        let w: Arc<dyn crate::potential::Correction> =
            Arc::new(PolyCorrection::from_coeffs_1d(&[0.0, -1.0 / 3.0, 4.0 / 3.0, -1.0]));
        let s_values: Vec<f64> = (-5..=5).map(|k| k as f64 * 0.1).collect();
        let vals = f_a_along_segment(&u, &w, |_| 2.0, &s_values).unwrap();
        let min_idx = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(s_values[min_idx], 0.0, "{vals:?}");
        // convexity along the segment
        for w in vals.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] > -1e-8);
        }
    }

    #[test]
    fn weak_form_round_sphere() {
        // L_A(x^2) = 1/3 = int u^11 (x^2)'' for the round sphere, A = 2
        let p = Arc::new(builtin::interval(rat(0), rat(1)));
        let u = SymplecticPotential::guillemin(Arc::clone(&p));
        let scheme = build_quadrature(&p, 8, 1).unwrap();
        let f = |x: &[f64]| {
            let mut jet = Jet2::zero(1);
            jet.value = x[0] * x[0];
            jet.grad[0] = 2.0 * x[0];
            jet.hess[(0, 0)] = 2.0;
            jet
        };
        let (lhs, rhs) = weak_form_check(&u, &scheme, |_| 2.0, f).unwrap();
        assert!((lhs - 1.0 / 3.0).abs() < 1e-10, "{lhs}");
        assert!((rhs - 1.0 / 3.0).abs() < 1e-9, "{rhs}");
        // affine f gives (0, 0)
        let aff = |x: &[f64]| {
            let mut jet = Jet2::zero(1);
            jet.value = 3.0 - 2.0 * x[0];
            jet.grad[0] = -2.0;
            jet
        };
        let (l2, r2) = weak_form_check(&u, &scheme, |_| 2.0, aff).unwrap();
        assert!(l2.abs() < 1e-12 && r2.abs() < 1e-12);
        // negative control: a non-solution separates the two sides
        let bad = u.perturbed(
            1.0,
            Arc::new(PolyCorrection::from_coeffs_1d(&[0.0, 0.0, 0.0, 0.5])),
        );
        let (l3, r3) = weak_form_check(&bad, &scheme, |_| 2.0, f).unwrap();
        assert!((l3 - r3).abs() > 1e-3, "sides should differ: {l3} vs {r3}");
    }

    #[test]
    fn probe_positive_on_interval() {
        // L_A(max(0, x - c)) = c(1-c) > 0 on (0,1) with A = 2
        let p = builtin::interval(rat(0), rat(1));
        let a = AffineData::constant_fn(1, rat(2));
        // spot-check one crease against the closed form, unnormalized
        let (val, mass) = l_a_crease_exact(&p, &a, &[1], &ratio(1, 4));
        // f = x - 1/4 on (1/4, 1): boundary 3/4, interior 2 * 9/32
        assert_eq!(val, ratio(3, 16));
        assert_eq!(mass, ratio(9, 32));
        let report = stability_probe(&p, &a, 16);
        assert!(report.value > 0.0, "{report:?}");
        assert_eq!(report.certificate, "no-violation-found");
    }

    #[test]
    fn probe_exact_zero_for_affine_crease_exit() {
        // a crease along a facet makes f = max(0, ell) affine on P, where
        // the extremal A annihilates it exactly
        let p = builtin::unit_square();
        let a = extremal_affine(&p);
        let (val, mass) = l_a_crease_exact(&p, &a, &[1, 0], &rat(0));
        assert!(val.is_zero());
        assert_eq!(mass, ratio(1, 2));
    }

    #[test]
    fn probe_value_continuous_toward_exit() {
        let p = builtin::unit_square();
        let a = extremal_affine(&p);
        // creases x > 1 - 1/k approach the exit; the unnormalized value
        // tends to 0 like the cut mass
        let mut prev: Option<f64> = None;
        for k in [4i64, 8, 16, 32] {
            let (val, _) = l_a_crease_exact(&p, &a, &[1, 0], &ratio(k - 1, k));
            let v = exact::to_f64(&val);
            if let Some(pv) = prev {
                assert!(v.abs() < pv.abs() || v.abs() < 1e-12);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn square_blowup_probe_finds_instability() {
        // constant-A probe on the corner blow-up of the square: the Futaki
        // invariant is nonzero, so near-affine creases certify L_A < 0
        let p = builtin::square_blowup(ratio(1, 2)).unwrap();
        assert_eq!(futaki(&p), vec![ratio(1, 12), ratio(1, 12)]);
        let a = AffineData::constant_fn(2, constant_a(&p));
        let report = stability_probe(&p, &a, 8);
        assert!(
            report.value < 0.0,
            "expected a destabilizing crease: {report:?}"
        );
        assert_eq!(report.certificate, "unstable");
    }
}
