//! The Kahler-Ricci soliton algebra on Fano polytopes.
//!
//! Coordinates are always translated so the anticanonical center sits at the
//! origin; every facet offset is then exactly -1. For a symplectic potential
//! u on the centered polytope,
//!
//! ```text
//! h = x . Du - u,    L = log det Hess(u),    rho = L - h,
//! ```
//!
//! and the soliton equation reads `rho = sum_i c_i x^i` for the constants
//! picked out by the unique critical point of `F(c) = int_P e^{c.x} dx`.
//! The second-variation operator `Box f = u^{ij} f_ij - x^i f_i + f` is
//! self-adjoint for the weighted inner products with density `e^{rho} dx`,
//! which this module evaluates in the dual space where the density pulls
//! back to `e^{-phi} dt`.

use crate::curvature;
use crate::dualquad::{DualIntegrator, DualQuadError, DualWeight};
use crate::exact::{rat, Rat};
use crate::polytope::{
    build_quadrature, verify_delzant, DelzantPolytope, Facet, FanoPolytope, PolytopeError,
};
use crate::potential::{Correction, Jet2, PotentialError, SymplecticPotential};
use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolitonError {
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    DualQuad(#[from] DualQuadError),
    #[error(transparent)]
    Curvature(#[from] curvature::CurvatureError),
    #[error("Newton for the soliton constants did not converge: |grad F| = {grad_norm}")]
    NonConvergence { grad_norm: f64 },
}

/// A Fano polytope translated so its center is the origin.
#[derive(Debug, Clone)]
pub struct FanoContext {
    polytope: Arc<DelzantPolytope>,
    shift: Vec<Rat>,
}

impl FanoContext {
    /// Center the polytope; all offsets become exactly -1.
    pub fn new(fano: &FanoPolytope) -> Self {
        let base = fano.base();
        let facets: Vec<Facet> = base
            .facets()
            .iter()
            .map(|f| Facet::new(f.normal().to_vec(), rat(-1)).expect("primitive normal"))
            .collect();
        let centered = verify_delzant(
            base.dim(),
            facets,
            format!("{}@centered", base.label()),
        )
        .expect("translation preserves the Delzant property");
        FanoContext {
            polytope: Arc::new(centered),
            shift: fano.center().to_vec(),
        }
    }

    pub fn polytope(&self) -> &Arc<DelzantPolytope> {
        &self.polytope
    }

    /// Translation applied to the original coordinates.
    pub fn shift(&self) -> &[Rat] {
        &self.shift
    }

    pub fn guillemin(&self) -> SymplecticPotential {
        SymplecticPotential::guillemin(Arc::clone(&self.polytope))
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }
}

/// Soliton data attached to a Fano polytope: the canonical constants `c`,
/// the correction constants `gamma` for a prescribed target, and the target
/// itself.
#[derive(Debug, Clone)]
pub struct SolitonData {
    pub context: FanoContext,
    /// canonical soliton constants, critical point of F
    pub c: Vec<f64>,
    /// gamma correction for a generic prescribed right-hand side (zero for
    /// the canonical problem)
    pub gamma: Vec<f64>,
}

impl SolitonData {
    /// The canonical problem `rho = c . x`: gamma vanishes and `c` is the
    /// unique critical point of `F(c) = int_P e^{c.x} dx`.
    pub fn canonical(context: FanoContext, tol: f64) -> Result<Self, SolitonError> {
        let constants = soliton_constants(&context, tol, 100)?;
        let n = context.dim();
        Ok(SolitonData {
            context,
            c: constants.c,
            gamma: vec![0.0; n],
        })
    }

    /// The generalized problem `rho = A + gamma . x` for a prescribed smooth
    /// right-hand side: the unique `gamma` makes the moment constraint
    /// `int_P x e^{A + gamma.x} dx = 0` hold, found by Newton on the strictly
    /// convex `G(gamma) = int_P e^{A + gamma.x} dx`.
    pub fn for_target(
        context: FanoContext,
        target: impl Fn(&[f64]) -> f64,
        tol: f64,
    ) -> Result<Self, SolitonError> {
        let p = context.polytope();
        let scheme = build_quadrature(p, 30, 8)?;
        let n = p.dim();
        let mut gamma = DVector::zeros(n);
        for _ in 0..100 {
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            for (x, w) in scheme.interior_nodes() {
                let e = w
                    * (target(x)
                        + gamma
                            .iter()
                            .zip(x.iter())
                            .map(|(g, xi)| g * xi)
                            .sum::<f64>())
                    .exp();
                for i in 0..n {
                    grad[i] += e * x[i];
                    for j in 0..n {
                        hess[(i, j)] += e * x[i] * x[j];
                    }
                }
            }
            let gn = grad.norm();
            if gn <= tol {
                let constants = soliton_constants(&context, tol, 100)?;
                return Ok(SolitonData {
                    context,
                    c: constants.c,
                    gamma: gamma.as_slice().to_vec(),
                });
            }
            let chol = Cholesky::new(hess).expect("G is strictly convex");
            gamma -= chol.solve(&grad);
        }
        Err(SolitonError::NonConvergence { grad_norm: f64::NAN })
    }
}

/// `(h, L, rho)` at an interior point of the centered polytope.
pub fn h_and_rho(
    u: &SymplecticPotential,
    x: &[f64],
) -> Result<(f64, f64, f64), SolitonError> {
    let jet = u.jet(x)?;
    let h = x
        .iter()
        .zip(jet.grad.iter())
        .map(|(xi, gi)| xi * gi)
        .sum::<f64>()
        - jet.value;
    let det = jet.hess.clone().lu().determinant();
    if det <= 0.0 {
        return Err(PotentialError::SingularHessian(x.to_vec()).into());
    }
    let l = det.ln();
    Ok((h, l, l - h))
}

/// `Box f = u^{ij} f_ij - x^i f_i + f` at an interior point; `f` is given by
/// its 2-jet at x.
pub fn box_operator(
    u: &SymplecticPotential,
    f: &Jet2,
    x: &[f64],
) -> Result<f64, SolitonError> {
    let inv = u.inverse_hessian(x)?;
    let n = x.len();
    let mut val = f.value;
    for i in 0..n {
        val -= x[i] * f.grad[i];
        for j in 0..n {
            val += inv[(i, j)] * f.hess[(i, j)];
        }
    }
    Ok(val)
}

/// Newton minimization of `F(c) = int_P e^{c.x} dx` on the centered
/// polytope; the critical point gives the soliton constants.
pub fn soliton_constants(
    context: &FanoContext,
    tol: f64,
    max_iter: usize,
) -> Result<SolitonConstantsResult, SolitonError> {
    let p = context.polytope();
    let scheme = build_quadrature(p, 30, 8)?;
    let n = p.dim();
    let mut c = DVector::zeros(n);
    for iter in 0..max_iter {
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut value = 0.0;
        for (x, w) in scheme.interior_nodes() {
            let e = (c
                .iter()
                .zip(x.iter())
                .map(|(ci, xi)| ci * xi)
                .sum::<f64>())
            .exp()
                * w;
            value += e;
            for i in 0..n {
                grad[i] += e * x[i];
                for j in 0..n {
                    hess[(i, j)] += e * x[i] * x[j];
                }
            }
        }
        let gn = grad.norm();
        if gn <= tol {
            return Ok(SolitonConstantsResult {
                c: c.as_slice().to_vec(),
                grad_norm: gn,
                iterations: iter,
                f_value: value,
            });
        }
        let chol = Cholesky::new(hess).expect("F is strictly convex");
        let step = chol.solve(&grad);
        // backtracking on F
        let f0 = value;
        let mut alpha = 1.0;
        for _ in 0..40 {
            let cand: DVector<f64> = &c - alpha * &step;
            let f_cand: f64 = scheme
                .interior_nodes()
                .iter()
                .map(|(x, w)| {
                    w * (cand
                        .iter()
                        .zip(x.iter())
                        .map(|(ci, xi)| ci * xi)
                        .sum::<f64>())
                    .exp()
                })
                .sum();
            if f_cand < f0 {
                c = cand;
                break;
            }
            alpha *= 0.5;
        }
    }
    let grad_norm = {
        let mut grad: DVector<f64> = DVector::zeros(n);
        for (x, w) in scheme.interior_nodes() {
            let e = (c
                .iter()
                .zip(x.iter())
                .map(|(ci, xi)| ci * xi)
                .sum::<f64>())
            .exp()
                * w;
            for i in 0..n {
                grad[i] += e * x[i];
            }
        }
        grad.norm()
    };
    Err(SolitonError::NonConvergence { grad_norm })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolitonConstantsResult {
    pub c: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub f_value: f64,
}

/// Cached weighted inner products `<f, g>_u = int f g e^{rho} dx` and their
/// gradient and Hessian versions, all evaluated in the dual space.
pub struct WeightedInner {
    integrator: DualIntegrator,
}

/// A scalar test function given by value, gradient and Hessian.
pub trait TestFn: Sync {
    fn jet(&self, x: &[f64]) -> Jet2;
    /// third derivative d^3 f / dx_i dx_j dx_k; only polynomial test
    /// functions need to implement this (for the gradient of Box f)
    fn third(&self, _x: &[f64], _i: usize, _j: usize, _k: usize) -> f64 {
        unimplemented!("third derivatives not available for this test function")
    }
}

/// Polynomial test function with closed-form derivatives of every order.
#[derive(Debug, Clone)]
pub struct PolyTestFn {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl PolyTestFn {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == dim));
        PolyTestFn { dim, terms }
    }

    pub fn monomial(dim: usize, exps: Vec<u32>) -> Self {
        PolyTestFn::new(dim, vec![(1.0, exps)])
    }

    fn derivative_value(&self, x: &[f64], orders: &[u32]) -> f64 {
        let mut total = 0.0;
        'terms: for (c, exps) in &self.terms {
            let mut coeff = *c;
            let mut rem = Vec::with_capacity(self.dim);
            for i in 0..self.dim {
                let e = exps[i] as i64;
                let d = orders[i] as i64;
                if e < d {
                    continue 'terms;
                }
                for k in 0..d {
                    coeff *= (e - k) as f64;
                }
                rem.push((e - d) as i32);
            }
            let mono: f64 = rem
                .iter()
                .zip(x)
                .map(|(&e, &xi)| xi.powi(e))
                .product();
            total += coeff * mono;
        }
        total
    }
}

impl TestFn for PolyTestFn {
    fn jet(&self, x: &[f64]) -> Jet2 {
        let n = self.dim;
        let mut jet = Jet2::zero(n);
        let mut orders = vec![0u32; n];
        jet.value = self.derivative_value(x, &orders);
        for i in 0..n {
            orders[i] += 1;
            jet.grad[i] = self.derivative_value(x, &orders);
            for j in i..n {
                orders[j] += 1;
                let v = self.derivative_value(x, &orders);
                jet.hess[(i, j)] = v;
                jet.hess[(j, i)] = v;
                orders[j] -= 1;
            }
            orders[i] -= 1;
        }
        jet
    }

    fn third(&self, x: &[f64], i: usize, j: usize, k: usize) -> f64 {
        let mut orders = vec![0u32; self.dim];
        orders[i] += 1;
        orders[j] += 1;
        orders[k] += 1;
        self.derivative_value(x, &orders)
    }
}

impl WeightedInner {
    /// Build the `e^{rho} dx` node cache for an admissible potential on a
    /// centered Fano polytope.
    pub fn new(u: &SymplecticPotential) -> Result<Self, SolitonError> {
        Ok(WeightedInner {
            integrator: DualIntegrator::build(u, DualWeight::ExpNegPhi)?,
        })
    }

    pub fn integrator(&self) -> &DualIntegrator {
        &self.integrator
    }

    /// `<f, g>_u`
    pub fn inner(&self, f: &dyn TestFn, g: &dyn TestFn) -> f64 {
        self.integrator
            .integrate(|nd| f.jet(&nd.x).value * g.jet(&nd.x).value)
    }

    /// `<grad f, grad g>_u = int f_i g_j u^{ij} e^{rho}`
    pub fn inner_grad(&self, f: &dyn TestFn, g: &dyn TestFn) -> f64 {
        self.integrator.integrate(|nd| {
            let fj = f.jet(&nd.x);
            let gj = g.jet(&nd.x);
            (&nd.inv_hess * &gj.grad).dot(&fj.grad)
        })
    }

    /// `<Hess f, Hess g>_u = int f_ij g_ab u^{ia} u^{jb} e^{rho}`
    pub fn inner_hess(&self, f: &dyn TestFn, g: &dyn TestFn) -> f64 {
        self.integrator.integrate(|nd| {
            let fj = f.jet(&nd.x);
            let gj = g.jet(&nd.x);
            (&nd.inv_hess * &fj.hess * &nd.inv_hess * &gj.hess).trace()
        })
    }

    /// `<Box f, g>_u`
    pub fn inner_box(&self, f: &dyn TestFn, g: &dyn TestFn) -> f64 {
        self.integrator.integrate(|nd| {
            let fj = f.jet(&nd.x);
            let gj = g.jet(&nd.x);
            let box_f = box_value(&nd.inv_hess, &fj, &nd.x);
            box_f * gj.value
        })
    }

    /// `<Box f, Box g>_u`
    pub fn inner_box_box(&self, f: &dyn TestFn, g: &dyn TestFn) -> f64 {
        self.integrator.integrate(|nd| {
            let fj = f.jet(&nd.x);
            let gj = g.jet(&nd.x);
            box_value(&nd.inv_hess, &fj, &nd.x) * box_value(&nd.inv_hess, &gj, &nd.x)
        })
    }

    /// total weighted mass `<1, 1>_u`
    pub fn mass(&self) -> f64 {
        self.integrator.integrate(|_| 1.0)
    }
}

fn box_value(inv: &DMatrix<f64>, f: &Jet2, x: &[f64]) -> f64 {
    let n = x.len();
    let mut val = f.value;
    for i in 0..n {
        val -= x[i] * f.grad[i];
        for j in 0..n {
            val += inv[(i, j)] * f.hess[(i, j)];
        }
    }
    val
}

/// `F(u) = int_P e^{rho} dx`.
pub fn functional_fcal(u: &SymplecticPotential) -> Result<f64, SolitonError> {
    let w = WeightedInner::new(u)?;
    Ok(w.mass())
}

/// One identity check: both sides and the gap.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub rel_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    pub pass: bool,
}

fn check(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> IdentityCheck {
    let gap = (lhs - rhs).abs();
    let scale = 1.0 + lhs.abs().max(rhs.abs());
    IdentityCheck {
        name: name.into(),
        lhs,
        rhs,
        gap,
        rel_gap: gap / scale,
        pass: gap <= tol * scale,
    }
}

/// Run the integral-identity suite for the second-variation operator on the
/// given admissible potential over a centered Fano polytope:
///
/// - pointwise: `Box 1 = 1`, `Box x_i = 0`;
/// - self-adjointness `<Box f, g> = -<grad f, grad g> + <f, g>`;
/// - the second-variation identity
///   `<Box f, Box f> - <Hess f, Hess f> = <f, Box f>`;
/// - `<grad f, grad Box f> = -<Hess f, Hess f>`;
/// - the boundedness identity `int e^{rho} u_i x^i dx = int e^{rho} dx`
///   for each index separately;
/// - the moment identity `int x_i e^{rho} dx = 0`;
/// - the convexity inequality in Cauchy-Schwarz form
///   `<1, f>^2 - <1, 1><f, Box f> >= 0`, with equality for affine f.
pub fn identity_suite(
    u: &SymplecticPotential,
    test_fns: &[PolyTestFn],
    tol: f64,
) -> Result<IdentityReport, SolitonError> {
    let n = u.dim();
    let w = WeightedInner::new(u)?;
    let mut checks = Vec::new();
    // pointwise Box on constants and linears at interior samples
    let samples = crate::potential::interior_samples(u.polytope(), 6);
    let one = PolyTestFn::new(n, vec![(1.0, vec![0; n])]);
    let mut worst_one: f64 = 0.0;
    let mut worst_lin: f64 = 0.0;
    for x in &samples {
        let b1 = box_operator(u, &one.jet(x), x)?;
        worst_one = worst_one.max((b1 - 1.0).abs());
        for i in 0..n {
            let mut exps = vec![0u32; n];
            exps[i] = 1;
            let xi = PolyTestFn::monomial(n, exps);
            let bx = box_operator(u, &xi.jet(x), x)?;
            worst_lin = worst_lin.max(bx.abs());
        }
    }
    checks.push(check("box(1) = 1 pointwise", worst_one, 0.0, tol));
    checks.push(check("box(x_i) = 0 pointwise", worst_lin, 0.0, tol));
    // cache per-node data once: all pairwise forms then reduce to flat sums
    let mass = w.mass();
    let nodes = w.integrator().nodes();
    struct FnCache {
        value: Vec<f64>,
        box_val: Vec<f64>,
        grad: Vec<DVector<f64>>,
        u_grad: Vec<DVector<f64>>,
        hess: Vec<DMatrix<f64>>,
        u_hess_u: Vec<DMatrix<f64>>,
        grad_box: Vec<DVector<f64>>,
    }
    // gradients of the inverse-Hessian field, shared by every test function
    let skip = 1e-13 * mass.abs();
    let dinv: Vec<Option<Vec<DMatrix<f64>>>> = nodes
        .par_iter()
        .map(|nd| {
            if nd.weight.abs() < skip {
                return Ok(None);
            }
            crate::curvature::inverse_hessian_gradient(u, &nd.x).map(Some)
        })
        .collect::<Result<_, _>>()?;
    let cache_of = |f: &PolyTestFn| -> FnCache {
        let mut c = FnCache {
            value: Vec::with_capacity(nodes.len()),
            box_val: Vec::with_capacity(nodes.len()),
            grad: Vec::with_capacity(nodes.len()),
            u_grad: Vec::with_capacity(nodes.len()),
            hess: Vec::with_capacity(nodes.len()),
            u_hess_u: Vec::with_capacity(nodes.len()),
            grad_box: Vec::with_capacity(nodes.len()),
        };
        for (nd, di) in nodes.iter().zip(&dinv) {
            let jet = f.jet(&nd.x);
            let mut bval = jet.value;
            for i in 0..n {
                bval -= nd.x[i] * jet.grad[i];
                for j in 0..n {
                    bval += nd.inv_hess[(i, j)] * jet.hess[(i, j)];
                }
            }
            // gradient of Box f needs the inverse-Hessian derivatives
            let gb = match di {
                Some(dinv_k) => {
                    let mut gb = DVector::zeros(n);
                    for k in 0..n {
                        let mut v = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                v += dinv_k[k][(i, j)] * jet.hess[(i, j)];
                                v += nd.inv_hess[(i, j)] * f.third(&nd.x, i, j, k);
                            }
                            v -= nd.x[i] * jet.hess[(i, k)];
                        }
                        gb[k] = v;
                    }
                    gb
                }
                None => DVector::zeros(n),
            };
            c.value.push(jet.value);
            c.box_val.push(bval);
            c.u_grad.push(&nd.inv_hess * &jet.grad);
            c.u_hess_u.push(&nd.inv_hess * &jet.hess * &nd.inv_hess);
            c.grad.push(jet.grad);
            c.hess.push(jet.hess);
            c.grad_box.push(gb);
        }
        c
    };
    let caches: Vec<FnCache> = test_fns.par_iter().map(cache_of).collect();
    let weights: Vec<f64> = nodes.iter().map(|nd| nd.weight).collect();
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    };
    for (fi, f) in caches.iter().enumerate() {
        for (gi, g) in caches.iter().enumerate() {
            if gi > fi {
                continue;
            }
            let lhs = dot(&f.box_val, &g.value);
            let grad_pair: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * f.grad[k].dot(&g.u_grad[k]))
                .sum();
            let rhs = -grad_pair + dot(&f.value, &g.value);
            checks.push(check(
                format!("self-adjoint form f{fi} g{gi}"),
                lhs,
                rhs,
                tol,
            ));
        }
        let hess_pair: f64 = weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (&f.u_hess_u[k] * &f.hess[k]).trace())
            .sum();
        let lhs19 = dot(&f.box_val, &f.box_val) - hess_pair;
        let rhs19 = dot(&f.box_val, &f.value);
        checks.push(check(format!("second variation f{fi}"), lhs19, rhs19, tol));
        // (20): <grad f, grad Box f> = -<Hess f, Hess f>; nodes whose
        // inverse-Hessian stencils sit too close to the boundary carry
        // negligible weight and are skipped on both sides consistently
        let lhs20: f64 = weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                if dinv[k].is_some() {
                    w * f.grad_box[k].dot(&f.u_grad[k])
                } else {
                    0.0
                }
            })
            .sum();
        let rhs20 = -hess_pair;
        checks.push(check(format!("gradient pairing f{fi}"), lhs20, rhs20, tol));
        // convexity inequality, Cauchy-Schwarz form
        let ones = vec![1.0; nodes.len()];
        let a = dot(&f.value, &ones);
        let b = dot(&f.box_val, &f.value);
        let q = a * a - mass * b;
        let scale = 1.0 + (a * a).abs().max((mass * b).abs());
        checks.push(IdentityCheck {
            name: format!("convexity inequality f{fi}"),
            lhs: q,
            rhs: 0.0,
            gap: (-q).max(0.0),
            rel_gap: (-q).max(0.0) / scale,
            pass: q >= -tol * scale,
        });
    }
    // equality in the convexity inequality for affine f
    for i in 0..n {
        let mut exps = vec![0u32; n];
        exps[i] = 1;
        let aff = PolyTestFn::new(n, vec![(0.7, vec![0; n]), (1.3, exps)]);
        let a = w.inner(&one, &aff);
        let b = w.inner_box(&aff, &aff);
        checks.push(check(
            format!("convexity equality affine x{i}"),
            a * a,
            mass * b,
            tol,
        ));
    }
    // boundedness identity, each index separately: int e^rho u_i x^i = mass
    for i in 0..n {
        let lhs = w
            .integrator()
            .integrate(|nd| nd.t[i] * nd.x[i]);
        checks.push(check(format!("boundedness index {i}"), lhs, mass, tol));
    }
    // moment identity int x_i e^rho = 0
    for i in 0..n {
        let lhs = w.integrator().integrate(|nd| nd.x[i]);
        checks.push(check(format!("moment index {i}"), lhs, 0.0, tol));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(IdentityReport { checks, pass })
}

/// Directional derivative of `F` along a correction, by central difference,
/// against the first-variation formula `<f, 1>_u`.
pub fn fcal_variation_check(
    u: &SymplecticPotential,
    f: &Arc<dyn Correction>,
    f_test: &PolyTestFn,
    eps: f64,
) -> Result<(f64, f64), SolitonError> {
    let plus = functional_fcal(&u.perturbed(eps, Arc::clone(f)))?;
    let minus = functional_fcal(&u.perturbed(-eps, Arc::clone(f)))?;
    let fd = (plus - minus) / (2.0 * eps);
    let w = WeightedInner::new(u)?;
    let one = PolyTestFn::new(u.dim(), vec![(1.0, vec![0; u.dim()])]);
    let first_variation = w.inner(f_test, &one);
    Ok((fd, first_variation))
}

/// Monomial test functions up to the given total degree (excluding the
/// constant), plus seeded random smooth polynomial bumps.
pub fn standard_test_functions(n: usize, max_degree: u32, bumps: usize, seed: u64) -> Vec<PolyTestFn> {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut out = Vec::new();
    let mut exps = vec![vec![0u32; n]];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for e in &exps {
            for i in 0..n {
                let mut e2 = e.clone();
                e2[i] += 1;
                if !next.contains(&e2) {
                    next.push(e2);
                }
            }
        }
        for e in &next {
            let total: u32 = e.iter().sum();
            if total >= 1 && !out.iter().any(|p: &PolyTestFn| p.terms == vec![(1.0, e.clone())]) {
                out.push(PolyTestFn::monomial(n, e.clone()));
            }
        }
        exps = next;
    }
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..bumps {
        let mut terms = Vec::new();
        for _ in 0..4 {
            let e: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=2u32)).collect();
            terms.push((rng.gen_range(-0.5..0.5), e));
        }
        out.push(PolyTestFn::new(n, terms));
    }
    out
}

impl PolyTestFn {
    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::exact;
    use crate::potential::PolyCorrection;

    fn ke_interval() -> SymplecticPotential {
        let fano = Arc::new(builtin::fano_interval()).fano_structure().unwrap();
        FanoContext::new(&fano).guillemin()
    }

    #[test]
    fn rho_constant_on_ke_interval() {
        // u = (1+x)log(1+x) + (1-x)log(1-x): h = -log(1-x^2),
        // L = log(2/(1-x^2)), rho = log 2 everywhere
        let u = ke_interval();
        for x in [-0.9, -0.5, 0.0, 0.3, 0.85] {
            let (h, l, rho) = h_and_rho(&u, &[x]).unwrap();
            assert!((h + (1.0 - x * x).ln()).abs() < 1e-12, "h at {x}");
            assert!((l - (2.0 / (1.0 - x * x)).ln()).abs() < 1e-12, "L at {x}");
            assert!((rho - 2f64.ln()).abs() < 1e-12, "rho at {x}");
        }
    }

    #[test]
    fn rho_invariant_under_centered_linear_shift() {
        let u = ke_interval();
        let shifted = u.perturbed(1.0, Arc::new(PolyCorrection::from_coeffs_1d(&[0.0, 0.37])));
        for x in [-0.6, 0.2, 0.7] {
            let (_, _, rho0) = h_and_rho(&u, &[x]).unwrap();
            let (_, _, rho1) = h_and_rho(&shifted, &[x]).unwrap();
            assert!((rho0 - rho1).abs() < 1e-12);
        }
        // a constant shift of u moves rho by the same constant
        let bumped = u.perturbed(1.0, Arc::new(PolyCorrection::from_coeffs_1d(&[0.25])));
        let (_, _, rho0) = h_and_rho(&u, &[0.3]).unwrap();
        let (_, _, rho1) = h_and_rho(&bumped, &[0.3]).unwrap();
        assert!((rho1 - rho0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn box_on_ke_interval_oracle() {
        // u^{11} = (1-x^2)/2; f = x^2: Box f = 1 - 2x^2
        let u = ke_interval();
        let f = PolyTestFn::monomial(1, vec![2]);
        for x in [-0.7, 0.0, 0.4] {
            let got = box_operator(&u, &f.jet(&[x]), &[x]).unwrap();
            assert!((got - (1.0 - 2.0 * x * x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn soliton_constants_symmetric_cases() {
        let fano = Arc::new(builtin::fano_interval()).fano_structure().unwrap();
        let r = soliton_constants(&FanoContext::new(&fano), 1e-10, 50).unwrap();
        assert!(r.c[0].abs() < 1e-10);
        let cp2 = Arc::new(builtin::cp2_anticanonical()).fano_structure().unwrap();
        let r2 = soliton_constants(&FanoContext::new(&cp2), 1e-10, 50).unwrap();
        assert!(r2.c[0].abs() < 1e-10 && r2.c[1].abs() < 1e-10);
    }

    #[test]
    fn soliton_constants_bl1cp2() {
        let fano = Arc::new(builtin::bl1cp2()).fano_structure().unwrap();
        let ctx = FanoContext::new(&fano);
        // gradient of F at 0 is the interior first moment (1/3, 1/3)
        let p = ctx.polytope();
        let m = p.moments();
        assert_eq!(m.m1, vec![exact::ratio(1, 3), exact::ratio(1, 3)]);
        let r = soliton_constants(&ctx, 1e-10, 60).unwrap();
        assert!(r.grad_norm <= 1e-10);
        assert!((r.c[0] - r.c[1]).abs() < 1e-9, "symmetry under x <-> y");
        assert!(r.c[0] < 0.0);
        // coarse independent grid search on the diagonal (F is symmetric)
        let scheme = build_quadrature(p, 30, 8).unwrap();
        let f_of = |c: f64| -> f64 {
            scheme
                .interior_nodes()
                .iter()
                .map(|(x, w)| w * (c * (x[0] + x[1])).exp())
                .sum()
        };
        let mut best = (0.0, f_of(0.0));
        let mut lo = -1.0;
        let mut hi = 1.0;
        for _ in 0..8 {
            let step = (hi - lo) / 40.0;
            for k in 0..=40 {
                let c = lo + k as f64 * step;
                let v = f_of(c);
                if v < best.1 {
                    best = (c, v);
                }
            }
            lo = best.0 - step;
            hi = best.0 + step;
        }
        assert!(
            (best.0 - r.c[0]).abs() < 1e-4,
            "grid {} vs newton {}",
            best.0,
            r.c[0]
        );
    }

    #[test]
    fn soliton_data_gamma_for_targets() {
        let fano = Arc::new(builtin::bl1cp2()).fano_structure().unwrap();
        let ctx = FanoContext::new(&fano);
        // A = 0: gamma must equal the canonical constants
        let data = SolitonData::for_target(ctx.clone(), |_| 0.0, 1e-10).unwrap();
        assert!((data.gamma[0] - data.c[0]).abs() < 1e-8);
        assert!((data.gamma[1] - data.c[1]).abs() < 1e-8);
        // A already the canonical affine target: gamma vanishes
        let c = data.c.clone();
        let data2 = SolitonData::for_target(
            ctx.clone(),
            move |x: &[f64]| c[0] * x[0] + c[1] * x[1],
            1e-10,
        )
        .unwrap();
        assert!(data2.gamma[0].abs() < 1e-8 && data2.gamma[1].abs() < 1e-8);
        let canonical = SolitonData::canonical(ctx, 1e-10).unwrap();
        assert!(canonical.gamma.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn soliton_constants_equivariant_under_unimodular_maps() {
        // conjugating the polytope by the shear x -> (x1 + x2, x2) transforms
        // the constants by the inverse transpose
        use crate::polytope::{verify_delzant, Facet};
        let fano = Arc::new(builtin::bl1cp2()).fano_structure().unwrap();
        let base = FanoContext::new(&fano);
        let c = soliton_constants(&base, 1e-11, 60).unwrap().c;
        // normals transform by A^{-T} with A = [[1,1],[0,1]]: (a,b) -> (a, b - a)
        let sheared: Vec<Facet> = base
            .polytope()
            .facets()
            .iter()
            .map(|f| {
                let n = f.normal();
                Facet::new(vec![n[0], n[1] - n[0]], rat(-1)).unwrap()
            })
            .collect();
        let p2 = Arc::new(verify_delzant(2, sheared, "sheared").unwrap());
        let fano2 = p2.fano_structure().unwrap();
        let c2 = soliton_constants(&FanoContext::new(&fano2), 1e-11, 60).unwrap().c;
        // c' = A^{-T} c = (c1, c2 - c1)
        assert!((c2[0] - c[0]).abs() < 1e-8, "{c2:?} vs {c:?}");
        assert!((c2[1] - (c[1] - c[0])).abs() < 1e-8, "{c2:?} vs {c:?}");
    }

    #[test]
    fn weighted_forms_ke_interval() {
        let u = ke_interval();
        let w = WeightedInner::new(&u).unwrap();
        // <1,1> = int e^{log 2} over (-1,1) = 4
        assert!((w.mass() - 4.0).abs() < 1e-9);
        // <grad x, grad x> = int u^{11} e^rho = int (1-x^2) dx = 4/3
        let xf = PolyTestFn::monomial(1, vec![1]);
        assert!((w.inner_grad(&xf, &xf) - 4.0 / 3.0).abs() < 1e-9);
        // symmetry of the plain form
        let f = PolyTestFn::new(1, vec![(1.0, vec![2]), (-0.3, vec![1])]);
        let g = PolyTestFn::new(1, vec![(0.5, vec![3]), (1.0, vec![0])]);
        assert!((w.inner(&f, &g) - w.inner(&g, &f)).abs() < 1e-12);
    }

    #[test]
    fn fcal_value_and_variation() {
        let u = ke_interval();
        assert!((functional_fcal(&u).unwrap() - 4.0).abs() < 1e-9);
        // directional derivative along f = x^2(1-x^2) matches <f, 1>
        let corr: Arc<dyn Correction> = Arc::new(PolyCorrection::from_coeffs_1d(&[
            0.0, 0.0, 1.0, 0.0, -1.0,
        ]));
        let f_test = PolyTestFn::new(1, vec![(1.0, vec![2]), (-1.0, vec![4])]);
        let (fd, first_var) = fcal_variation_check(&u, &corr, &f_test, 1e-4).unwrap();
        assert!((fd - first_var).abs() < 1e-6, "{fd} vs {first_var}");
    }

    #[test]
    fn step3_lemma_exact_value() {
        // int e^rho u' x dx = int e^rho dx = 4 on the KE interval
        let u = ke_interval();
        let w = WeightedInner::new(&u).unwrap();
        let lhs = w.integrator().integrate(|nd| nd.t[0] * nd.x[0]);
        assert!((lhs - 4.0).abs() < 1e-9, "{lhs}");
    }

    #[test]
    fn identity_suite_ke_interval() {
        let u = ke_interval();
        let fns = standard_test_functions(1, 4, 4, 42);
        let report = identity_suite(&u, &fns, 1e-7).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{}: lhs {} rhs {} gap {}", c.name, c.lhs, c.rhs, c.gap);
        }
    }

    #[test]
    fn identity_suite_perturbed_interval() {
        let fano = Arc::new(builtin::fano_interval()).fano_structure().unwrap();
        let u = FanoContext::new(&fano)
            .guillemin()
            .perturbed(1.0, Arc::new(PolyCorrection::from_coeffs_1d(&[0.0, 0.0, 0.05, 0.02])));
        let fns = standard_test_functions(1, 3, 2, 7);
        let report = identity_suite(&u, &fns, 1e-7).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{}: gap {}", c.name, c.rel_gap);
        }
    }

    #[test]
    fn minus_log_fcal_convex_along_segment() {
        let u = ke_interval();
        let corr: Arc<dyn Correction> = Arc::new(PolyCorrection::from_coeffs_1d(&[
            0.0, 0.0, 1.0, 0.0, -1.0,
        ]));
        let vals: Vec<f64> = (-3..=3)
            .map(|k| {
                let s = k as f64 * 0.05;
                -functional_fcal(&u.perturbed(s, Arc::clone(&corr)))
                    .unwrap()
                    .ln()
            })
            .collect();
        for w in vals.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-8, "{vals:?}");
        }
    }

    #[test]
    fn spectral_sign_on_polynomial_space() {
        // on the complement of affine functions, the Box quadratic form lies
        // strictly below the plain form: M - A positive definite there, and
        // the Box Gram matrix is symmetric
        let u = ke_interval();
        let w = WeightedInner::new(&u).unwrap();
        let fns = standard_test_functions(1, 4, 0, 0);
        let k = fns.len();
        let mut gram_box = DMatrix::zeros(k, k);
        let mut gram_plain = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                gram_box[(i, j)] = w.inner_box(&fns[i], &fns[j]);
                gram_plain[(i, j)] = w.inner(&fns[i], &fns[j]);
            }
        }
        // symmetry of <Box f, g>
        for i in 0..k {
            for j in 0..k {
                assert!(
                    (gram_box[(i, j)] - gram_box[(j, i)]).abs() < 1e-8,
                    "asymmetry at ({i},{j})"
                );
            }
        }
        // project out constants and linears: basis includes x (index 0);
        // build the quotient on monomials of degree >= 2
        let sub: Vec<usize> = (0..k)
            .filter(|&i| fns[i].terms().iter().all(|(_, e)| e.iter().sum::<u32>() >= 2))
            .collect();
        // orthogonalize against span{1, x} within the weighted form
        let one = PolyTestFn::new(1, vec![(1.0, vec![0])]);
        let xf = PolyTestFn::monomial(1, vec![1]);
        let m11 = w.mass();
        let mx1 = w.inner(&one, &xf);
        let mxx = w.inner(&xf, &xf);
        let mut m_proj = DMatrix::zeros(sub.len(), sub.len());
        let mut a_proj = DMatrix::zeros(sub.len(), sub.len());
        // coefficients of the projection of f onto {1, x}
        let coeffs: Vec<(f64, f64)> = sub
            .iter()
            .map(|&i| {
                let b1 = w.inner(&fns[i], &one);
                let bx = w.inner(&fns[i], &xf);
                let det = m11 * mxx - mx1 * mx1;
                ((b1 * mxx - bx * mx1) / det, (m11 * bx - mx1 * b1) / det)
            })
            .collect();
        for (ii, &i) in sub.iter().enumerate() {
            for (jj, &j) in sub.iter().enumerate() {
                let (a1, ax) = coeffs[ii];
                let (b1, bx) = coeffs[jj];
                // <f - proj f, g - proj g> for both forms; Box kills linears
                // and maps 1 to 1, so its cross terms only involve constants
                let plain = w.inner(&fns[i], &fns[j])
                    - a1 * w.inner(&one, &fns[j])
                    - ax * w.inner(&xf, &fns[j])
                    - b1 * w.inner(&fns[i], &one)
                    - bx * w.inner(&fns[i], &xf)
                    + (a1 * b1 * m11 + a1 * bx * mx1 + ax * b1 * mx1 + ax * bx * mxx);
                let boxed = w.inner_box(&fns[i], &fns[j])
                    - b1 * w.inner_box(&fns[i], &one)
                    - a1 * w.inner_box(&one, &fns[j])
                    + a1 * b1 * m11
                    - ax * 0.0
                    - bx * 0.0;
                m_proj[(ii, jj)] = plain;
                a_proj[(ii, jj)] = boxed;
            }
        }
        let diff = &m_proj - &a_proj;
        let sym = 0.5 * (&diff + &diff.transpose());
        assert!(
            Cholesky::new(sym).is_some(),
            "eigenvalues of Box exceed 1 on the complement of affines"
        );
    }
}
