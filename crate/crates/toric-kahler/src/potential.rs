//! Symplectic potentials on a moment polytope, Kahler potentials on the dual
//! space, and the Legendre transform between them.
//!
//! A symplectic potential is stored as the Guillemin reference
//! `u_G = sum_r ell_r log ell_r` plus a smooth correction `v`, so the
//! boundary singularities are always differentiated in closed form and
//! numerics only ever touch `v`.

use crate::exact;
use crate::polytope::DelzantPolytope;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde_json::json;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("evaluation point {0:?} is outside the polytope")]
    OutsideDomain(Vec<f64>),
    #[error("correction does not support evaluation at {0:?}")]
    Unsupported(Vec<f64>),
    #[error("Hessian is singular or not positive definite at {0:?}")]
    SingularHessian(Vec<f64>),
    #[error("Newton iteration for the Legendre transform diverged at t = {0:?}")]
    NewtonDivergence(Vec<f64>),
    #[error("gradient of the Kahler potential leaves the polytope at t = {0:?}")]
    RangeViolation(Vec<f64>),
    #[error("grid function: {0}")]
    Grid(String),
}

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet2 {
    pub fn zero(n: usize) -> Self {
        Jet2 {
            value: 0.0,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
        }
    }
}

/// Smooth correction `v` added to the Guillemin reference.
pub trait Correction: Send + Sync + fmt::Debug {
    fn jet(&self, x: &[f64]) -> Result<Jet2, PotentialError>;
    /// Can `jet` be called here? Grid-backed corrections are only defined on
    /// cells fully inside the polytope.
    fn supports(&self, x: &[f64]) -> bool;
    /// Descriptor for the potential JSON format.
    fn descriptor(&self) -> serde_json::Value;
}

/// The zero correction: the potential is the bare Guillemin reference.
#[derive(Debug, Clone, Default)]
pub struct ZeroCorrection {
    dim: usize,
}

impl ZeroCorrection {
    pub fn new(dim: usize) -> Self {
        ZeroCorrection { dim }
    }
}

impl Correction for ZeroCorrection {
    fn jet(&self, _x: &[f64]) -> Result<Jet2, PotentialError> {
        Ok(Jet2::zero(self.dim))
    }
    fn supports(&self, _x: &[f64]) -> bool {
        true
    }
    fn descriptor(&self) -> serde_json::Value {
        json!({"kind": "zero"})
    }
}

/// Polynomial correction `sum_k c_k prod_i x_i^{e_ki}` with closed-form jets.
#[derive(Debug, Clone)]
pub struct PolyCorrection {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl PolyCorrection {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == dim));
        PolyCorrection { dim, terms }
    }

    /// 1d helper from coefficients of 1, x, x^2, ...
    pub fn from_coeffs_1d(coeffs: &[f64]) -> Self {
        PolyCorrection {
            dim: 1,
            terms: coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (c, vec![k as u32]))
                .collect(),
        }
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }
}

fn pow_checked(x: f64, e: i64) -> f64 {
    if e < 0 {
        0.0
    } else {
        x.powi(e as i32)
    }
}

impl Correction for PolyCorrection {
    fn jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        let n = self.dim;
        let mut jet = Jet2::zero(n);
        for (c, exps) in &self.terms {
            let mono: f64 = exps
                .iter()
                .zip(x)
                .map(|(&e, &xi)| pow_checked(xi, e as i64))
                .product();
            jet.value += c * mono;
            for i in 0..n {
                let ei = exps[i] as i64;
                if ei >= 1 {
                    let mut dmono = ei as f64;
                    for j in 0..n {
                        let e = exps[j] as i64 - i64::from(i == j);
                        dmono *= pow_checked(x[j], e);
                    }
                    jet.grad[i] += c * dmono;
                }
                for j in 0..n {
                    let (ei, ej) = (exps[i] as i64, exps[j] as i64);
                    let factor = if i == j {
                        (ei * (ei - 1)) as f64
                    } else {
                        (ei * ej) as f64
                    };
                    if factor != 0.0 {
                        let mut dd = factor;
                        for k in 0..n {
                            let e =
                                exps[k] as i64 - i64::from(i == k) - i64::from(j == k);
                            dd *= pow_checked(x[k], e);
                        }
                        jet.hess[(i, j)] += c * dd;
                    }
                }
            }
        }
        Ok(jet)
    }
    fn supports(&self, _x: &[f64]) -> bool {
        true
    }
    fn descriptor(&self) -> serde_json::Value {
        json!({
            "kind": "poly",
            "terms": self.terms.iter().map(|(c, e)| json!({"coeff": c, "exps": e})).collect::<Vec<_>>(),
        })
    }
}

/// Weighted sum of corrections; deformation families `v0 + s f`.
#[derive(Debug, Clone)]
pub struct SumCorrection {
    parts: Vec<(f64, Arc<dyn Correction>)>,
    dim: usize,
}

impl SumCorrection {
    pub fn new(dim: usize, parts: Vec<(f64, Arc<dyn Correction>)>) -> Self {
        SumCorrection { parts, dim }
    }
}

impl Correction for SumCorrection {
    fn jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        let mut total = Jet2::zero(self.dim);
        for (c, part) in &self.parts {
            let j = part.jet(x)?;
            total.value += c * j.value;
            total.grad += *c * j.grad;
            total.hess += *c * j.hess;
        }
        Ok(total)
    }
    fn supports(&self, x: &[f64]) -> bool {
        self.parts.iter().all(|(_, p)| p.supports(x))
    }
    fn descriptor(&self) -> serde_json::Value {
        json!({
            "kind": "sum",
            "parts": self.parts.iter().map(|(c, p)| json!({"scale": c, "part": p.descriptor()})).collect::<Vec<_>>(),
        })
    }
}

/// Closed-form correction given by an arbitrary jet function.
pub struct ClosedFormCorrection {
    name: String,
    f: Arc<dyn Fn(&[f64]) -> Jet2 + Send + Sync>,
}

impl ClosedFormCorrection {
    pub fn new(
        name: impl Into<String>,
        f: Arc<dyn Fn(&[f64]) -> Jet2 + Send + Sync>,
    ) -> Self {
        ClosedFormCorrection { name: name.into(), f }
    }
}

impl fmt::Debug for ClosedFormCorrection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosedFormCorrection({})", self.name)
    }
}

impl Correction for ClosedFormCorrection {
    fn jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        Ok((self.f)(x))
    }
    fn supports(&self, _x: &[f64]) -> bool {
        true
    }
    fn descriptor(&self) -> serde_json::Value {
        json!({"kind": format!("builtin:{}", self.name)})
    }
}

/// A convex symplectic potential `u = u_G + v` on a Delzant polytope.
#[derive(Debug, Clone)]
pub struct SymplecticPotential {
    polytope: Arc<DelzantPolytope>,
    correction: Arc<dyn Correction>,
}

impl SymplecticPotential {
    /// The Guillemin potential `sum_r ell_r log ell_r`.
    pub fn guillemin(polytope: Arc<DelzantPolytope>) -> Self {
        let dim = polytope.dim();
        SymplecticPotential {
            polytope,
            correction: Arc::new(ZeroCorrection::new(dim)),
        }
    }

    pub fn with_correction(
        polytope: Arc<DelzantPolytope>,
        correction: Arc<dyn Correction>,
    ) -> Self {
        SymplecticPotential {
            polytope,
            correction,
        }
    }

    /// Same polytope, correction replaced by `v + scale * extra`.
    pub fn perturbed(&self, scale: f64, extra: Arc<dyn Correction>) -> Self {
        SymplecticPotential {
            polytope: Arc::clone(&self.polytope),
            correction: Arc::new(SumCorrection::new(
                self.polytope.dim(),
                vec![(1.0, Arc::clone(&self.correction)), (scale, extra)],
            )),
        }
    }

    pub fn polytope(&self) -> &Arc<DelzantPolytope> {
        &self.polytope
    }

    pub fn correction(&self) -> &Arc<dyn Correction> {
        &self.correction
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    /// Jet of the Guillemin reference at an interior point.
    pub fn guillemin_jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        let n = self.dim();
        let mut jet = Jet2::zero(n);
        for f in self.polytope.facets() {
            let ell = f.ell_f64(x);
            if ell <= 0.0 {
                return Err(PotentialError::OutsideDomain(x.to_vec()));
            }
            let log = ell.ln();
            jet.value += ell * log;
            for i in 0..n {
                let li = f.normal()[i] as f64;
                jet.grad[i] += li * (log + 1.0);
                for j in 0..n {
                    jet.hess[(i, j)] += li * f.normal()[j] as f64 / ell;
                }
            }
        }
        Ok(jet)
    }

    /// Jet of the correction `v` alone.
    pub fn correction_jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        if !self.correction.supports(x) {
            return Err(PotentialError::Unsupported(x.to_vec()));
        }
        self.correction.jet(x)
    }

    /// Full jet of `u = u_G + v`.
    pub fn jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        let mut jet = self.guillemin_jet(x)?;
        let v = self.correction_jet(x)?;
        jet.value += v.value;
        jet.grad += v.grad;
        jet.hess += v.hess;
        Ok(jet)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, PotentialError> {
        Ok(self.jet(x)?.value)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>, PotentialError> {
        Ok(self.jet(x)?.grad)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, PotentialError> {
        Ok(self.jet(x)?.hess)
    }

    /// Inverse Hessian `u^{ij}`, requiring positive definiteness.
    pub fn inverse_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, PotentialError> {
        let h = self.hessian(x)?;
        invert_spd(&h).ok_or_else(|| PotentialError::SingularHessian(x.to_vec()))
    }

    /// Potential descriptor JSON.
    pub fn descriptor(&self) -> serde_json::Value {
        json!({
            "reference": "guillemin",
            "correction": self.correction.descriptor(),
        })
    }
}

pub(crate) fn invert_spd(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(h.clone()).map(|c| c.inverse())
}

/// Evaluator behind a Kahler potential.
pub trait KahlerEval: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn jet(&self, t: &[f64]) -> Result<Jet2, PotentialError>;
}

/// A convex Kahler potential `phi` on the dual space.
#[derive(Debug, Clone)]
pub struct KahlerPotential {
    eval: Arc<dyn KahlerEval>,
    /// vertices of the polytope, when known: `Phi(t) = max_p p . t`
    vertices: Option<Vec<Vec<f64>>>,
}

impl KahlerPotential {
    pub fn new(eval: Arc<dyn KahlerEval>, vertices: Option<Vec<Vec<f64>>>) -> Self {
        KahlerPotential { eval, vertices }
    }

    pub fn dim(&self) -> usize {
        self.eval.dim()
    }

    pub fn jet(&self, t: &[f64]) -> Result<Jet2, PotentialError> {
        self.eval.jet(t)
    }

    pub fn value(&self, t: &[f64]) -> Result<f64, PotentialError> {
        Ok(self.jet(t)?.value)
    }

    pub fn gradient(&self, t: &[f64]) -> Result<DVector<f64>, PotentialError> {
        Ok(self.jet(t)?.grad)
    }

    pub fn hessian(&self, t: &[f64]) -> Result<DMatrix<f64>, PotentialError> {
        Ok(self.jet(t)?.hess)
    }

    /// The asymptotic support function `Phi(t) = max over vertices of p . t`.
    pub fn support_function(&self, t: &[f64]) -> Option<f64> {
        self.vertices.as_ref().map(|vs| {
            vs.iter()
                .map(|p| p.iter().zip(t).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
    }

    pub fn vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.as_deref()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        // convergence is measured on |Du - t|
        NewtonParams {
            tol: 1e-12,
            max_iter: 120,
        }
    }
}

/// Solve `Du(x) = t` by damped Newton from the vertex average.
///
/// `g(x) = u(x) - t . x` is strictly convex with gradient blowing up at the
/// boundary, so backtracking that keeps iterates strictly inside converges
/// for admissible u.
pub fn moment_inverse(
    u: &SymplecticPotential,
    t: &[f64],
    params: NewtonParams,
) -> Result<Vec<f64>, PotentialError> {
    let p = u.polytope();
    let geom = p.float();
    let mut x = DVector::from_column_slice(&geom.center);
    let tvec = DVector::from_column_slice(t);
    // close to a facet the computed gradient carries a relative error of
    // machine epsilon over the facet distance, so demand no more than the
    // data supports
    let tol_at = |x: &DVector<f64>| -> f64 {
        let margin = p.stencil_margin(x.as_slice()).max(1e-300);
        params.tol * (1.0 + tvec.norm()) + 1e-15 / margin
    };
    let mut residual = f64::INFINITY;
    let mut stall = 0usize;
    for _ in 0..params.max_iter {
        let jet = u.jet(x.as_slice())?;
        let r = &jet.grad - &tvec;
        let prev = residual;
        residual = r.norm();
        if residual <= tol_at(&x) {
            return Ok(x.as_slice().to_vec());
        }
        // floating-point floor: residual no longer improves
        if residual >= 0.5 * prev {
            stall += 1;
            if stall >= 5 && residual <= 1e-6 * (1.0 + tvec.norm()) {
                return Ok(x.as_slice().to_vec());
            }
        } else {
            stall = 0;
        }
        let chol = Cholesky::new(jet.hess.clone())
            .ok_or_else(|| PotentialError::SingularHessian(x.as_slice().to_vec()))?;
        let step = chol.solve(&r);
        // backtrack on the residual norm, staying strictly inside
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let cand = &x - alpha * &step;
            if p.contains_f64(cand.as_slice(), 0.0) {
                if let Ok(jc) = u.jet(cand.as_slice()) {
                    let rc = (&jc.grad - &tvec).norm();
                    if rc < residual {
                        x = cand;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // the residual cannot improve further in floating point
            if residual <= 100.0 * tol_at(&x) {
                return Ok(x.as_slice().to_vec());
            }
            return Err(PotentialError::NewtonDivergence(t.to_vec()));
        }
    }
    if residual <= 100.0 * tol_at(&x) {
        Ok(x.as_slice().to_vec())
    } else {
        Err(PotentialError::NewtonDivergence(t.to_vec()))
    }
}

/// Kahler potential obtained from a symplectic potential by the Legendre
/// transform: `phi(t) = x . t - u(x)` at the point where `Du(x) = t`.
#[derive(Debug, Clone)]
pub struct LegendreKahler {
    u: SymplecticPotential,
    params: NewtonParams,
}

impl KahlerEval for LegendreKahler {
    fn dim(&self) -> usize {
        self.u.dim()
    }
    fn jet(&self, t: &[f64]) -> Result<Jet2, PotentialError> {
        let x = moment_inverse(&self.u, t, self.params)?;
        let jet = self.u.jet(&x)?;
        let xv = DVector::from_column_slice(&x);
        let value = xv.dot(&DVector::from_column_slice(t)) - jet.value;
        let hess =
            invert_spd(&jet.hess).ok_or_else(|| PotentialError::SingularHessian(x.clone()))?;
        Ok(Jet2 {
            value,
            grad: xv,
            hess,
        })
    }
}

/// Legendre transform of a symplectic potential.
pub fn legendre_to_kahler(u: &SymplecticPotential) -> KahlerPotential {
    let vertices = u.polytope().float().vertices.clone();
    KahlerPotential::new(
        Arc::new(LegendreKahler {
            u: u.clone(),
            params: NewtonParams::default(),
        }),
        Some(vertices),
    )
}

/// Correction produced by transforming a Kahler potential back to the
/// polytope: `v(x) = (x . t - phi(t)) - u_G(x)` at `Dphi(t) = x`.
pub struct LegendreCorrection {
    phi: KahlerPotential,
    polytope: Arc<DelzantPolytope>,
    params: NewtonParams,
}

impl fmt::Debug for LegendreCorrection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LegendreCorrection(dim {})", self.phi.dim())
    }
}

impl LegendreCorrection {
    /// Solve `Dphi(t) = x` by damped Newton, starting from the Guillemin
    /// moment image of x.
    fn dual_inverse(&self, x: &[f64]) -> Result<DVector<f64>, PotentialError> {
        let u_g = SymplecticPotential::guillemin(Arc::clone(&self.polytope));
        let mut t = u_g.gradient(x)?;
        let xv = DVector::from_column_slice(x);
        let floor = 1e-8 * (1.0 + xv.norm());
        let mut residual = f64::INFINITY;
        for _ in 0..self.params.max_iter {
            let jet = self.phi.jet(t.as_slice())?;
            let r = &jet.grad - &xv;
            residual = r.norm();
            if residual <= self.params.tol * (1.0 + xv.norm()) {
                return Ok(t);
            }
            let chol = Cholesky::new(jet.hess.clone())
                .ok_or_else(|| PotentialError::SingularHessian(x.to_vec()))?;
            let step = chol.solve(&r);
            let mut accepted = false;
            let mut alpha = 1.0;
            for _ in 0..60 {
                let cand = &t - alpha * &step;
                if let Ok(jc) = self.phi.jet(cand.as_slice()) {
                    if (&jc.grad - &xv).norm() < residual {
                        t = cand;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                if residual <= floor {
                    return Ok(t);
                }
                return Err(PotentialError::NewtonDivergence(x.to_vec()));
            }
        }
        if residual <= floor {
            Ok(t)
        } else {
            Err(PotentialError::NewtonDivergence(x.to_vec()))
        }
    }
}

impl Correction for LegendreCorrection {
    fn jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        let t = self.dual_inverse(x)?;
        let pjet = self.phi.jet(t.as_slice())?;
        let xv = DVector::from_column_slice(x);
        let u_value = xv.dot(&t) - pjet.value;
        let u_hess =
            invert_spd(&pjet.hess).ok_or_else(|| PotentialError::SingularHessian(x.to_vec()))?;
        // subtract the Guillemin reference
        let u_g = SymplecticPotential::guillemin(Arc::clone(&self.polytope));
        let gjet = u_g.guillemin_jet(x)?;
        Ok(Jet2 {
            value: u_value - gjet.value,
            grad: t - gjet.grad,
            hess: u_hess - gjet.hess,
        })
    }
    fn supports(&self, x: &[f64]) -> bool {
        self.polytope.contains_f64(x, 0.0)
    }
    fn descriptor(&self) -> serde_json::Value {
        json!({"kind": "legendre-transform"})
    }
}

/// Inverse Legendre transform: recover the symplectic potential of a Kahler
/// potential whose gradient maps into the given polytope.
///
/// Fails with [`PotentialError::RangeViolation`] when `Dphi` is detected to
/// leave the closed polytope on a sample of the dual space.
pub fn legendre_to_symplectic(
    phi: &KahlerPotential,
    polytope: Arc<DelzantPolytope>,
) -> Result<SymplecticPotential, PotentialError> {
    let n = polytope.dim();
    let samples = sample_dual_points(n, 8.0, 3);
    for t in &samples {
        let grad = phi.gradient(t)?;
        let inside = polytope
            .facets()
            .iter()
            .all(|f| f.ell_f64(grad.as_slice()) > -1e-9);
        if !inside {
            return Err(PotentialError::RangeViolation(t.clone()));
        }
    }
    Ok(SymplecticPotential::with_correction(
        Arc::clone(&polytope),
        Arc::new(LegendreCorrection {
            phi: phi.clone(),
            polytope,
            params: NewtonParams::default(),
        }),
    ))
}

fn sample_dual_points(n: usize, radius: f64, per_axis_levels: i32) -> Vec<Vec<f64>> {
    let mut vals = vec![0.0];
    for l in 1..=per_axis_levels {
        let r = radius * l as f64 / per_axis_levels as f64;
        vals.push(r);
        vals.push(-r);
    }
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for partial in &out {
            for &v in &vals {
                let mut p = partial.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Interior sample points of the polytope: a tensor grid clipped strictly
/// inside, plus points pushed toward every vertex.
pub fn interior_samples(p: &DelzantPolytope, per_axis: usize) -> Vec<Vec<f64>> {
    let g = p.float();
    let n = p.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for v in &g.vertices {
        for i in 0..n {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    let slack = 1e-7 * g.diameter;
    'outer: loop {
        let x: Vec<f64> = (0..n)
            .map(|i| lo[i] + (hi[i] - lo[i]) * (idx[i] as f64 + 0.5) / per_axis as f64)
            .collect();
        if p.contains_f64(&x, slack) {
            out.push(x);
        }
        for i in (0..n).rev() {
            idx[i] += 1;
            if idx[i] < per_axis {
                continue 'outer;
            }
            idx[i] = 0;
            if i == 0 {
                break 'outer;
            }
        }
    }
    // points sliding toward each vertex from the center
    for v in &g.vertices {
        for s in [0.5, 0.9, 0.99] {
            let x: Vec<f64> = g
                .center
                .iter()
                .zip(v)
                .map(|(c, vi)| c + s * (vi - c))
                .collect();
            if p.contains_f64(&x, slack) {
                out.push(x);
            }
        }
    }
    out
}

/// Sup of |u1 - u2| over a dense interior sample.
pub fn sup_distance(u1: &SymplecticPotential, u2: &SymplecticPotential, per_axis: usize) -> f64 {
    let mut sup: f64 = 0.0;
    for x in interior_samples(u1.polytope(), per_axis) {
        if let (Ok(a), Ok(b)) = (u1.value(&x), u2.value(&x)) {
            sup = sup.max((a - b).abs());
        }
    }
    sup
}

/// Sup of |phi1 - phi2| over a dual-space sample of the given radius.
pub fn sup_distance_dual(
    phi1: &KahlerPotential,
    phi2: &KahlerPotential,
    radius: f64,
    per_axis_levels: i32,
) -> Result<f64, PotentialError> {
    let mut sup: f64 = 0.0;
    for t in sample_dual_points(phi1.dim(), radius, per_axis_levels) {
        let a = phi1.value(&t)?;
        let b = phi2.value(&t)?;
        sup = sup.max((a - b).abs());
    }
    Ok(sup)
}

/// Structured admissibility report with witness points.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub hessian_positive: bool,
    pub hessian_witness: Option<Vec<f64>>,
    pub boundary_finite: bool,
    pub boundary_witness: Option<Vec<f64>>,
    pub faces_convex: bool,
    pub face_witness: Option<Vec<f64>>,
}

impl AdmissibilityReport {
    pub fn pass(&self) -> bool {
        self.hessian_positive && self.boundary_finite && self.faces_convex
    }
}

/// Verify positive-definite Hessians at interior samples, finite correction
/// values at near-boundary samples, and strict convexity of the restriction
/// of u to each facet.
pub fn check_admissible(
    u: &SymplecticPotential,
    tolerance: f64,
    per_axis: usize,
) -> AdmissibilityReport {
    let p = u.polytope();
    let n = p.dim();
    let mut report = AdmissibilityReport {
        hessian_positive: true,
        hessian_witness: None,
        boundary_finite: true,
        boundary_witness: None,
        faces_convex: true,
        face_witness: None,
    };
    for x in interior_samples(p, per_axis) {
        match u.hessian(&x) {
            Ok(h) => {
                if Cholesky::new(h).is_none() {
                    report.hessian_positive = false;
                    report.hessian_witness = Some(x);
                    break;
                }
            }
            Err(_) => {
                report.hessian_positive = false;
                report.hessian_witness = Some(x);
                break;
            }
        }
    }
    // near-boundary samples: v and its first derivatives stay finite
    let eps = 1e-6 * p.float().diameter;
    'facets: for (r, _) in p.facets().iter().enumerate() {
        for x in facet_samples(p, r, 7, eps) {
            if !u.correction().supports(&x) {
                continue;
            }
            match u.correction_jet(&x) {
                Ok(j) if j.value.is_finite() && j.grad.iter().all(|g| g.is_finite()) => {}
                _ => {
                    report.boundary_finite = false;
                    report.boundary_witness = Some(x);
                    break 'facets;
                }
            }
        }
    }
    // strict convexity along each facet: the singular normal term drops out
    // of tangential second derivatives, so evaluate them just inside
    if n >= 2 {
        'outer: for (r, facet) in p.facets().iter().enumerate() {
            let tangents = facet_tangents(facet.normal());
            for x in facet_samples(p, r, 7, eps) {
                let Ok(jet) = (|| -> Result<Jet2, PotentialError> {
                    let mut jet = Jet2::zero(n);
                    for (s, other) in p.facets().iter().enumerate() {
                        if s == r {
                            continue;
                        }
                        let ell = other.ell_f64(&x);
                        if ell <= 0.0 {
                            return Err(PotentialError::OutsideDomain(x.clone()));
                        }
                        for i in 0..n {
                            for j in 0..n {
                                jet.hess[(i, j)] +=
                                    other.normal()[i] as f64 * other.normal()[j] as f64 / ell;
                            }
                        }
                    }
                    let v = u.correction_jet(&x)?;
                    jet.hess += v.hess;
                    Ok(jet)
                })() else {
                    continue;
                };
                for tau in &tangents {
                    let tv = DVector::from_column_slice(tau);
                    let q = tv.dot(&(&jet.hess * &tv));
                    if q <= tolerance {
                        report.faces_convex = false;
                        report.face_witness = Some(x.clone());
                        break 'outer;
                    }
                }
            }
        }
    }
    report
}

/// Integer tangent directions of a facet hyperplane.
fn facet_tangents(normal: &[i64]) -> Vec<Vec<f64>> {
    let (basis, _) = exact::lattice_completion(normal);
    basis
        .into_iter()
        .map(|b| b.into_iter().map(|x| x as f64).collect())
        .collect()
}

/// Points just inside the relative interior of facet `r`.
fn facet_samples(p: &DelzantPolytope, r: usize, count: usize, eps: f64) -> Vec<Vec<f64>> {
    let g = p.float();
    let verts: Vec<&Vec<f64>> = (0..p.vertices().len())
        .filter(|&v| p.vertex_facets()[v].contains(&r))
        .map(|v| &g.vertices[v])
        .collect();
    if verts.is_empty() {
        return Vec::new();
    }
    let n = p.dim();
    let centroid: Vec<f64> = (0..n)
        .map(|i| verts.iter().map(|v| v[i]).sum::<f64>() / verts.len() as f64)
        .collect();
    // the facet normal points inward by the sign convention
    let nrm = &g.normals[r];
    let nn: f64 = nrm.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut out = Vec::new();
    for k in 0..count {
        let s = (k as f64 + 0.5) / count as f64;
        for v in &verts {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(*v)
                .map(|(c, vi)| c + s * (vi - c) * 0.95)
                .collect();
            for i in 0..n {
                x[i] += eps * nrm[i] / nn;
            }
            out.push(x);
        }
    }
    out
}

/// Node classification of a tensor grid over the closed polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Outside,
}

/// Scalar values on a tensor grid clipped to the polytope.
#[derive(Debug, Clone)]
pub struct GridFunction {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
    flags: Vec<NodeClass>,
}

impl GridFunction {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>, flags: Vec<NodeClass>) -> Self {
        let count: usize = axes.iter().map(|a| a.len()).product();
        assert_eq!(values.len(), count);
        assert_eq!(flags.len(), count);
        assert!(axes.iter().all(|a| a.windows(2).all(|w| w[1] > w[0])));
        GridFunction { axes, values, flags }
    }

    /// Grid over the bounding box of the polytope, with nodes classified by
    /// position and values filled from `f` at non-outside nodes.
    pub fn sample(p: &DelzantPolytope, per_axis: usize, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let g = p.float();
        let n = p.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for v in &g.vertices {
            for i in 0..n {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..per_axis)
                    .map(|k| lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64)
                    .collect()
            })
            .collect();
        let tol = 1e-9 * g.diameter;
        let count: usize = axes.iter().map(|a| a.len()).product();
        let mut values = vec![f64::NAN; count];
        let mut flags = vec![NodeClass::Outside; count];
        let dims: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        for flat in 0..count {
            let x = unflatten(&axes, &dims, flat);
            let min_ell = p
                .facets()
                .iter()
                .map(|fc| fc.ell_f64(&x))
                .fold(f64::INFINITY, f64::min);
            if min_ell > tol {
                flags[flat] = NodeClass::Interior;
                values[flat] = f(&x);
            } else if min_ell > -tol {
                flags[flat] = NodeClass::Boundary;
                values[flat] = f(&x);
            }
        }
        GridFunction { axes, values, flags }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn flags(&self) -> &[NodeClass] {
        &self.flags
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.axes[axis][i])
            .collect()
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.flatten(idx)]
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (axis, &i) in idx.iter().enumerate() {
            flat = flat * self.axes[axis].len() + i;
        }
        flat
    }

    /// Write the CSV format: one `axis` row per axis, a `values` marker, then
    /// value rows over the last axis (first axis outermost).
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        let names = ["x", "y", "z"];
        for (i, axis) in self.axes.iter().enumerate() {
            let coords: Vec<String> = axis.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "axis,{},{}", names.get(i).unwrap_or(&"w"), coords.join(","))?;
        }
        writeln!(w, "values")?;
        let inner = self.axes.last().unwrap().len();
        for row in self.values.chunks(inner) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| {
                    if v.is_nan() {
                        "NaN".to_string()
                    } else {
                        format!("{v}")
                    }
                })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Parse the CSV format written by [`GridFunction::write_csv`].
    pub fn read_csv(r: impl BufRead) -> Result<Self, PotentialError> {
        let mut axes: Vec<Vec<f64>> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut in_values = false;
        for line in r.lines() {
            let line = line.map_err(|e| PotentialError::Grid(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("axis,") {
                let mut parts = rest.split(',');
                let _name = parts.next();
                let axis: Result<Vec<f64>, _> = parts.map(|s| s.trim().parse::<f64>()).collect();
                axes.push(axis.map_err(|e| PotentialError::Grid(e.to_string()))?);
            } else if line == "values" {
                in_values = true;
            } else if in_values {
                for cell in line.split(',') {
                    let cell = cell.trim();
                    if cell.eq_ignore_ascii_case("nan") {
                        values.push(f64::NAN);
                    } else {
                        values.push(
                            cell.parse::<f64>()
                                .map_err(|e| PotentialError::Grid(e.to_string()))?,
                        );
                    }
                }
            }
        }
        let count: usize = axes.iter().map(|a| a.len()).product();
        if axes.is_empty() || values.len() != count {
            return Err(PotentialError::Grid(format!(
                "expected {count} values, found {}",
                values.len()
            )));
        }
        let flags = values
            .iter()
            .map(|v| {
                if v.is_nan() {
                    NodeClass::Outside
                } else {
                    NodeClass::Interior
                }
            })
            .collect();
        Ok(GridFunction { axes, values, flags })
    }

    /// Gnuplot-compatible nonuniform matrix variant (2d only).
    pub fn write_matrix(&self, w: &mut impl Write) -> std::io::Result<()> {
        assert_eq!(self.dim(), 2, "matrix output is for 2d fields");
        let (xs, ys) = (&self.axes[0], &self.axes[1]);
        let header: Vec<String> = std::iter::once(ys.len().to_string())
            .chain(ys.iter().map(|v| format!("{v}")))
            .collect();
        writeln!(w, "{}", header.join(" "))?;
        for (i, x) in xs.iter().enumerate() {
            let mut row = vec![format!("{x}")];
            for j in 0..ys.len() {
                let v = self.values[i * ys.len() + j];
                row.push(if v.is_nan() { "NaN".into() } else { format!("{v}") });
            }
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn unflatten(axes: &[Vec<f64>], dims: &[usize], mut flat: usize) -> Vec<f64> {
    let n = dims.len();
    let mut idx = vec![0usize; n];
    for i in (0..n).rev() {
        idx[i] = flat % dims[i];
        flat /= dims[i];
    }
    idx.iter()
        .enumerate()
        .map(|(axis, &i)| axes[axis][i])
        .collect()
}

/// Correction backed by node values on a uniform tensor grid, evaluated with
/// tensor-product cubic (Catmull-Rom) interpolation. Only points whose full
/// 4^n interpolation neighborhood carries finite values are evaluable.
#[derive(Debug, Clone)]
pub struct GridCorrection {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
    dims: Vec<usize>,
}

impl GridCorrection {
    pub fn new(grid: &GridFunction) -> Self {
        GridCorrection {
            axes: grid.axes().to_vec(),
            values: grid.values().to_vec(),
            dims: grid.axes().iter().map(|a| a.len()).collect(),
        }
    }

    fn locate(&self, x: &[f64]) -> Option<Vec<(usize, f64, f64)>> {
        // per axis: base index of a 4-point window plus local coordinate
        let mut out = Vec::with_capacity(x.len());
        for (axis, &xi) in x.iter().enumerate() {
            let a = &self.axes[axis];
            if a.len() < 4 {
                return None;
            }
            let h = a[1] - a[0];
            let pos = (xi - a[0]) / h;
            if pos < -1e-9 || pos > (a.len() - 1) as f64 + 1e-9 {
                return None;
            }
            let cell = pos.floor() as isize;
            let base = (cell - 1).clamp(0, a.len() as isize - 4) as usize;
            let local = pos - (base as f64 + 1.0);
            out.push((base, local, h));
        }
        Some(out)
    }

    fn window_finite(&self, loc: &[(usize, f64, f64)]) -> bool {
        let n = self.dims.len();
        let mut idx = vec![0usize; n];
        loop {
            let mut flat = 0;
            for i in 0..n {
                flat = flat * self.dims[i] + (loc[i].0 + idx[i]);
            }
            if !self.values[flat].is_finite() {
                return false;
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return true;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < 4 {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

/// Catmull-Rom basis values and first/second derivatives at local coordinate
/// s in [0,1] over nodes at -1, 0, 1, 2.
fn catmull_rom(s: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let (s2, s3) = (s * s, s * s * s);
    let b = [
        -0.5 * s3 + s2 - 0.5 * s,
        1.5 * s3 - 2.5 * s2 + 1.0,
        -1.5 * s3 + 2.0 * s2 + 0.5 * s,
        0.5 * s3 - 0.5 * s2,
    ];
    let db = [
        -1.5 * s2 + 2.0 * s - 0.5,
        4.5 * s2 - 5.0 * s,
        -4.5 * s2 + 4.0 * s + 0.5,
        1.5 * s2 - s,
    ];
    let ddb = [-3.0 * s + 2.0, 9.0 * s - 5.0, -9.0 * s + 4.0, 3.0 * s - 1.0];
    (b, db, ddb)
}

impl Correction for GridCorrection {
    fn jet(&self, x: &[f64]) -> Result<Jet2, PotentialError> {
        let n = self.dims.len();
        let loc = self
            .locate(x)
            .ok_or_else(|| PotentialError::Unsupported(x.to_vec()))?;
        if !self.window_finite(&loc) {
            return Err(PotentialError::Unsupported(x.to_vec()));
        }
        let bases: Vec<([f64; 4], [f64; 4], [f64; 4])> =
            loc.iter().map(|&(_, s, _)| catmull_rom(s)).collect();
        let mut jet = Jet2::zero(n);
        let mut idx = vec![0usize; n];
        loop {
            let mut flat = 0;
            for i in 0..n {
                flat = flat * self.dims[i] + (loc[i].0 + idx[i]);
            }
            let v = self.values[flat];
            let w: f64 = (0..n).map(|i| bases[i].0[idx[i]]).product();
            jet.value += v * w;
            for d in 0..n {
                let mut wd = v;
                for i in 0..n {
                    wd *= if i == d {
                        bases[i].1[idx[i]] / loc[i].2
                    } else {
                        bases[i].0[idx[i]]
                    };
                }
                jet.grad[d] += wd;
                for e in d..n {
                    let mut wdd = v;
                    for i in 0..n {
                        wdd *= if i == d && i == e {
                            bases[i].2[idx[i]] / (loc[i].2 * loc[i].2)
                        } else if i == d || i == e {
                            bases[i].1[idx[i]] / loc[i].2
                        } else {
                            bases[i].0[idx[i]]
                        };
                    }
                    jet.hess[(d, e)] += wdd;
                    if e != d {
                        jet.hess[(e, d)] += wdd;
                    }
                }
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return Ok(jet);
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < 4 {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
    fn supports(&self, x: &[f64]) -> bool {
        match self.locate(x) {
            Some(loc) => self.window_finite(&loc),
            None => false,
        }
    }
    fn descriptor(&self) -> serde_json::Value {
        json!({"kind": "grid", "dims": self.dims})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn interval01() -> Arc<DelzantPolytope> {
        Arc::new(builtin::interval(exact::rat(0), exact::rat(1)))
    }

    #[test]
    fn guillemin_interval_closed_form() {
        let u = SymplecticPotential::guillemin(interval01());
        // u(x) = x log x + (1-x) log(1-x)
        let x = [0.3];
        let jet = u.jet(&x).unwrap();
        let want = 0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln();
        assert!((jet.value - want).abs() < 1e-14);
        assert!((jet.grad[0] - (0.3f64.ln() - 0.7f64.ln())).abs() < 1e-13);
        assert!((jet.hess[(0, 0)] - (1.0 / 0.3 + 1.0 / 0.7)).abs() < 1e-12);
        // u(1/2) = -log 2
        assert!((u.value(&[0.5]).unwrap() + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn guillemin_square_is_separable() {
        let p = Arc::new(builtin::unit_square());
        let u = SymplecticPotential::guillemin(p);
        let jet = u.jet(&[0.3, 0.6]).unwrap();
        let u1 = |x: f64| x * x.ln() + (1.0 - x) * (1.0 - x).ln();
        assert!((jet.value - u1(0.3) - u1(0.6)).abs() < 1e-14);
        assert!(jet.hess[(0, 1)].abs() < 1e-15, "Hessian is diagonal");
    }

    #[test]
    fn legendre_round_sphere_matches_log1pexp() {
        let u = SymplecticPotential::guillemin(interval01());
        let phi = legendre_to_kahler(&u);
        // phi(0) = log 2 at matched x = 1/2
        let jet = phi.jet(&[0.0]).unwrap();
        assert!((jet.value - 2f64.ln()).abs() < 1e-11);
        assert!((jet.grad[0] - 0.5).abs() < 1e-11);
        for t in [-6.0, -2.0, -0.5, 0.0, 1.0, 3.0, 7.0] {
            let got = phi.value(&[t]).unwrap();
            let want = (1.0 + t.exp()).ln();
            assert!((got - want).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn legendre_involution_and_hessian_duality() {
        let p = interval01();
        let bump = Arc::new(PolyCorrection::from_coeffs_1d(&[0.0, 0.0, 0.1, -0.05]));
        let u = SymplecticPotential::guillemin(Arc::clone(&p)).perturbed(1.0, bump);
        let phi = legendre_to_kahler(&u);
        let u_back = legendre_to_symplectic(&phi, Arc::clone(&p)).unwrap();
        for x in [0.05, 0.2, 0.5, 0.77, 0.95] {
            let a = u.value(&[x]).unwrap();
            let b = u_back.value(&[x]).unwrap();
            assert!((a - b).abs() < 1e-9, "x = {x}: {a} vs {b}");
        }
        // Hessian duality at matched points
        for t in [-3.0, 0.0, 2.0] {
            let pj = phi.jet(&[t]).unwrap();
            let x = pj.grad.as_slice().to_vec();
            let uh = u.hessian(&x).unwrap();
            let prod = &uh * &pj.hess;
            assert!((prod[(0, 0)] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn moment_inverse_on_guillemin_interval() {
        // Du = log(x/(1-x)) = 1 solves to x = e/(1+e)
        let p = interval01();
        let u_g = SymplecticPotential::guillemin(Arc::clone(&p));
        let x = moment_inverse(&u_g, &[1.0], NewtonParams::default()).unwrap();
        let want = std::f64::consts::E / (1.0 + std::f64::consts::E);
        assert!((x[0] - want).abs() < 1e-11);
    }

    #[test]
    fn sup_distance_constant_shift() {
        let p = interval01();
        let u1 = SymplecticPotential::guillemin(Arc::clone(&p));
        let u2 = u1.perturbed(1.0, Arc::new(PolyCorrection::from_coeffs_1d(&[0.25])));
        let d = sup_distance(&u1, &u2, 101);
        assert!((d - 0.25).abs() < 1e-12);
        assert_eq!(sup_distance(&u1, &u1, 51), 0.0);
    }

    #[test]
    fn sup_distance_isometry_on_interval() {
        // u2 = u1 + 0.1 x(1-x): sup difference 0.025 at x = 1/2, and the
        // dual-side sup over a wide sample agrees within 1e-3
        let p = interval01();
        let u1 = SymplecticPotential::guillemin(Arc::clone(&p));
        let u2 = u1.perturbed(1.0, Arc::new(PolyCorrection::from_coeffs_1d(&[0.0, 0.1, -0.1])));
        let d_primal = sup_distance(&u1, &u2, 400);
        assert!((d_primal - 0.025).abs() < 1e-6);
        let d_dual =
            sup_distance_dual(&legendre_to_kahler(&u1), &legendre_to_kahler(&u2), 30.0, 60)
                .unwrap();
        assert!((d_primal - d_dual).abs() < 1e-3, "{d_primal} vs {d_dual}");
    }

    #[test]
    fn admissibility_guillemin_passes() {
        let p = Arc::new(builtin::bl1cp2());
        let u = SymplecticPotential::guillemin(p);
        let rep = check_admissible(&u, 1e-9, 15);
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn admissibility_catches_cubic_blowup() {
        // u_G + 100 (x - 1/2)^3 has u'' < 0 somewhere left of center
        let p = interval01();
        let cubic = PolyCorrection::from_coeffs_1d(&[-12.5, 75.0, -150.0, 100.0]);
        let u = SymplecticPotential::guillemin(Arc::clone(&p)).perturbed(1.0, Arc::new(cubic));
        let rep = check_admissible(&u, 1e-9, 201);
        assert!(!rep.hessian_positive);
        let w = rep.hessian_witness.unwrap()[0];
        // u'' = 1/x + 1/(1-x) + 600(x - 1/2) is negative only left of center
        assert!(w < 0.5, "witness at {w}");
        let h = u.hessian(&[w]).unwrap()[(0, 0)];
        assert!(h <= 0.0);
    }

    #[test]
    fn admissibility_affine_shift_passes() {
        let p = interval01();
        let u = SymplecticPotential::guillemin(Arc::clone(&p))
            .perturbed(1.0, Arc::new(PolyCorrection::from_coeffs_1d(&[3.0, -2.0])));
        assert!(check_admissible(&u, 1e-9, 101).pass());
    }

    #[test]
    fn moment_map_blows_up_at_boundary() {
        let p = interval01();
        let u = SymplecticPotential::guillemin(p);
        let g_mid = u.gradient(&[0.5]).unwrap()[0].abs();
        let g_near = u.gradient(&[1e-9]).unwrap()[0].abs();
        assert!(g_mid < 1.0 && g_near > 10.0);
    }

    #[test]
    fn grid_function_csv_round_trip() {
        let p = builtin::bl1cp2();
        let gf = GridFunction::sample(&p, 9, |x| x[0] * x[0] - 0.37 * x[1]);
        let mut buf = Vec::new();
        gf.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(&buf[..]).unwrap();
        assert_eq!(back.values().len(), gf.values().len());
        for (a, b) in gf.values().iter().zip(back.values()) {
            if a.is_nan() {
                assert!(b.is_nan());
            } else {
                assert_eq!(a.to_bits(), b.to_bits(), "bit-exact round trip");
            }
        }
    }

    #[test]
    fn grid_correction_reproduces_smooth_function() {
        let p = builtin::unit_square();
        let f = |x: &[f64]| 0.1 * (x[0] * x[0] * x[1] + 0.3 * x[1] * x[1]);
        let gf = GridFunction::sample(&p, 41, f);
        let gc = GridCorrection::new(&gf);
        let x = [0.4317, 0.586];
        let jet = gc.jet(&x).unwrap();
        assert!((jet.value - f(&x)).abs() < 1e-6);
        let want_dx = 0.1 * 2.0 * x[0] * x[1];
        assert!((jet.grad[0] - want_dx).abs() < 1e-4);
        let want_dxy = 0.1 * 2.0 * x[0];
        assert!((jet.hess[(0, 1)] - want_dxy).abs() < 1e-2);
        // outside the node hull the correction refuses to evaluate
        assert!(!gc.supports(&[1.4, 0.5]));
    }
}
