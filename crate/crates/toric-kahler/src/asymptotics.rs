//! Algebraic metrics and their large-degree asymptotics.
//!
//! A positive weight `a_nu` for each lattice point `nu` of the dilate `k P`
//! defines the Kahler potential
//!
//! ```text
//! phi_k(t) = (1/k) log sum_nu a_nu e^{nu . t},
//! ```
//!
//! the level-k algebraic metric. Conversely a symplectic potential induces
//! L^2 coefficients `a_nu = I_nu(k)^{-1}` through the dual-space integrals
//! `I_nu(k) = int e^{-k phi + nu . t} det(Hess phi) dt`, and the Laplace
//! method identifies `(1/k) log a_nu` with `-u(nu/k)` up to `O(log k / k)`.
//! All logs are normalized by k so every comparison happens on the fixed
//! polytope.

use crate::dualquad::{DualIntegrator, DualQuadError, DualWeight};
use crate::exact::Rat;
use crate::polytope::DelzantPolytope;
use crate::potential::{
    legendre_to_kahler, Jet2, KahlerEval, KahlerPotential, PotentialError, SymplecticPotential,
};
use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    DualQuad(#[from] DualQuadError),
    #[error("coefficient support must be the lattice points of the dilate: {0}")]
    BadSupport(String),
    #[error("support lies in a hyperplane; the algebraic Hessian is degenerate")]
    DegenerateSupport,
}

/// Positive weights on the lattice points of `k P`, stored as logs.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    polytope: Arc<DelzantPolytope>,
    k: u64,
    points: Vec<Vec<i64>>,
    log_weights: Vec<f64>,
}

impl CoefficientVector {
    /// Build from plain weights; the support must match `k P` exactly.
    pub fn new(
        polytope: Arc<DelzantPolytope>,
        k: u64,
        weights: &[f64],
    ) -> Result<Self, AsymptoticsError> {
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(AsymptoticsError::BadSupport(
                "weights must be strictly positive".into(),
            ));
        }
        let points = polytope.lattice_points(k);
        if points.len() != weights.len() {
            return Err(AsymptoticsError::BadSupport(format!(
                "expected {} weights for k = {k}, got {}",
                points.len(),
                weights.len()
            )));
        }
        Ok(CoefficientVector {
            polytope,
            k,
            points,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn from_log_weights(
        polytope: Arc<DelzantPolytope>,
        k: u64,
        log_weights: Vec<f64>,
    ) -> Result<Self, AsymptoticsError> {
        let points = polytope.lattice_points(k);
        if points.len() != log_weights.len() {
            return Err(AsymptoticsError::BadSupport(format!(
                "expected {} weights for k = {k}, got {}",
                points.len(),
                log_weights.len()
            )));
        }
        Ok(CoefficientVector {
            polytope,
            k,
            points,
            log_weights,
        })
    }

    pub fn polytope(&self) -> &Arc<DelzantPolytope> {
        &self.polytope
    }

    pub fn level(&self) -> u64 {
        self.k
    }

    /// Lattice points of `k P`, lexicographic.
    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_weight_at(&self, nu: &[i64]) -> Option<f64> {
        self.points
            .iter()
            .position(|p| p == nu)
            .map(|i| self.log_weights[i])
    }

    /// `(1/k) log a_nu` as a function of the rescaled point `nu / k`.
    pub fn normalized_log(&self, idx: usize) -> (Vec<f64>, f64) {
        let k = self.k as f64;
        (
            self.points[idx].iter().map(|&c| c as f64 / k).collect(),
            self.log_weights[idx] / k,
        )
    }
}

/// Evaluator of the level-k algebraic potential.
#[derive(Debug, Clone)]
pub struct AlgebraicKahler {
    dim: usize,
    k: f64,
    points: Vec<DVector<f64>>,
    log_weights: Vec<f64>,
}

impl KahlerEval for AlgebraicKahler {
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, t: &[f64]) -> Result<Jet2, PotentialError> {
        let tv = DVector::from_column_slice(t);
        let exps: Vec<f64> = self
            .points
            .iter()
            .zip(&self.log_weights)
            .map(|(nu, lw)| lw + nu.dot(&tv))
            .collect();
        let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut probs = Vec::with_capacity(exps.len());
        for &e in &exps {
            let p = (e - max).exp();
            z += p;
            probs.push(p);
        }
        for p in probs.iter_mut() {
            *p /= z;
        }
        let value = (max + z.ln()) / self.k;
        // softmax mean and covariance
        let n = self.dim;
        let mut mean = DVector::zeros(n);
        for (p, nu) in probs.iter().zip(&self.points) {
            mean += *p * nu;
        }
        let mut cov = DMatrix::zeros(n, n);
        for (p, nu) in probs.iter().zip(&self.points) {
            let d = nu - &mean;
            cov += *p * &d * d.transpose();
        }
        Ok(Jet2 {
            value,
            grad: mean / self.k,
            hess: cov / self.k,
        })
    }
}

/// The Kahler potential of an algebraic metric (closed-form softmax jets).
pub fn algebraic_potential(a: &CoefficientVector) -> Result<KahlerPotential, AsymptoticsError> {
    let n = a.polytope.dim();
    // support must affinely span
    let p0 = &a.points[0];
    let span: Vec<Vec<Rat>> = a.points[1..]
        .iter()
        .map(|p| {
            p.iter()
                .zip(p0)
                .map(|(x, y)| crate::exact::rat(x - y))
                .collect()
        })
        .collect();
    if crate::exact::rank_rational(&span) < n {
        return Err(AsymptoticsError::DegenerateSupport);
    }
    let eval = AlgebraicKahler {
        dim: n,
        k: a.k as f64,
        points: a
            .points
            .iter()
            .map(|p| DVector::from_iterator(n, p.iter().map(|&c| c as f64)))
            .collect(),
        log_weights: a.log_weights.clone(),
    };
    Ok(KahlerPotential::new(
        Arc::new(eval),
        Some(a.polytope.float().vertices.clone()),
    ))
}

/// L^2 coefficients of a symplectic potential at level k:
/// `a_nu = I_nu(k)^{-1}` with
/// `I_nu(k) = int e^{-k(phi - t . nu/k)} det(Hess phi) dt`.
pub fn l2_coefficients(
    u: &SymplecticPotential,
    k: u64,
) -> Result<CoefficientVector, AsymptoticsError> {
    let p = Arc::clone(u.polytope());
    let dual = DualIntegrator::build(u, DualWeight::VolumeForm)?;
    let points = p.lattice_points(k);
    let kf = k as f64;
    let log_i: Vec<f64> = points
        .par_iter()
        .map(|nu| {
            // log-sum-exp over nodes of w * e^{-k phi + t . nu}
            let mut max = f64::NEG_INFINITY;
            for nd in dual.nodes() {
                if nd.weight <= 0.0 {
                    continue;
                }
                let e = -kf * nd.phi
                    + nd.t.iter().zip(nu).map(|(ti, &ni)| ti * ni as f64).sum::<f64>()
                    + nd.weight.ln();
                max = max.max(e);
            }
            let mut z = 0.0;
            for nd in dual.nodes() {
                if nd.weight <= 0.0 {
                    continue;
                }
                let e = -kf * nd.phi
                    + nd.t.iter().zip(nu).map(|(ti, &ni)| ti * ni as f64).sum::<f64>()
                    + nd.weight.ln();
                z += (e - max).exp();
            }
            max + z.ln()
        })
        .collect();
    CoefficientVector::from_log_weights(p, k, log_i.iter().map(|li| -li).collect())
}

/// k-fold convolution of level-1 coefficients, in log space:
/// `B_mu = sum over nu_1 + ... + nu_k = mu of a_{nu_1} ... a_{nu_k}`.
pub fn veronese_convolution(
    a: &CoefficientVector,
    k: u64,
) -> Result<CoefficientVector, AsymptoticsError> {
    assert!(k >= 1);
    assert_eq!(a.level(), 1, "convolution starts from level-1 data");
    let mut current = a.clone();
    for level in 1..k {
        let next_points = a.polytope.lattice_points(level + 1);
        let mut next_logs = vec![f64::NEG_INFINITY; next_points.len()];
        for (mu_idx, mu) in next_points.iter().enumerate() {
            // log-sum-exp over nu with mu - nu in the current support
            let mut terms: Vec<f64> = Vec::new();
            for (nu, lw) in a.points.iter().zip(&a.log_weights) {
                let rest: Vec<i64> = mu.iter().zip(nu).map(|(m, n)| m - n).collect();
                if let Some(lcur) = current.log_weight_at(&rest) {
                    terms.push(lw + lcur);
                }
            }
            if terms.is_empty() {
                return Err(AsymptoticsError::BadSupport(format!(
                    "no decomposition reaches lattice point {mu:?}"
                )));
            }
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = terms.iter().map(|e| (e - max).exp()).sum();
            next_logs[mu_idx] = max + z.ln();
        }
        current = CoefficientVector::from_log_weights(
            Arc::clone(&a.polytope),
            level + 1,
            next_logs,
        )?;
    }
    Ok(current)
}

/// Exact integer convolution for integer level-1 weights; oracle path for
/// the binomial cross-check.
pub fn veronese_convolution_exact(
    polytope: &DelzantPolytope,
    weights: &[num_bigint::BigInt],
    k: u64,
) -> Vec<(Vec<i64>, num_bigint::BigInt)> {
    use num_bigint::BigInt;
    let base: Vec<(Vec<i64>, BigInt)> = polytope
        .lattice_points(1)
        .into_iter()
        .zip(weights.iter().cloned())
        .collect();
    let mut current = base.clone();
    for level in 1..k {
        let next_points = polytope.lattice_points(level + 1);
        let mut next: Vec<(Vec<i64>, BigInt)> = next_points
            .into_iter()
            .map(|p| (p, BigInt::zero()))
            .collect();
        for (mu, acc) in next.iter_mut() {
            for (nu, a) in &base {
                let rest: Vec<i64> = mu.iter().zip(nu).map(|(m, n)| m - n).collect();
                if let Some((_, b)) = current.iter().find(|(p, _)| p == &rest) {
                    *acc += a * b;
                }
            }
        }
        current = next;
    }
    current
}

/// Sup-distance between the level-k algebraic potential recovered from the
/// L^2 coefficients of u and the Kahler potential of u, after removing the
/// additive normalization, over a compact dual sample.
pub fn density_roundtrip(u: &SymplecticPotential, k: u64) -> Result<f64, AsymptoticsError> {
    let a = l2_coefficients(u, k)?;
    let phi_k = algebraic_potential(&a)?;
    let phi = legendre_to_kahler(u);
    let n = u.dim();
    let mut sample: Vec<Vec<f64>> = Vec::new();
    let radius = 4.0;
    let per_axis = 9;
    let mut idx = vec![0usize; n];
    'outer: loop {
        let t: Vec<f64> = idx
            .iter()
            .map(|&i| -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64)
            .collect();
        sample.push(t);
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
    let mut diffs = Vec::with_capacity(sample.len());
    for t in &sample {
        diffs.push(phi_k.value(t)? - phi.value(t)?);
    }
    let mean: f64 = diffs.iter().sum::<f64>() / diffs.len() as f64;
    Ok(diffs
        .iter()
        .map(|d| (d - mean).abs())
        .fold(0.0, f64::max))
}

/// Laplace-approximation ratio at interior `nu`: the corrected leading-order
/// prefactor drives
/// `I_nu(k) (k / 2 pi)^{n/2} e^{k (phi(t0) - t0 . nu)} / sqrt(det Hess phi(t0))`
/// to 1 as k grows, where `t0 = Du(nu)` is the Laplace point.
pub fn laplace_ratio(
    u: &SymplecticPotential,
    nu: &[f64],
    k: u64,
) -> Result<f64, AsymptoticsError> {
    let n = u.dim();
    let phi = legendre_to_kahler(u);
    let t0 = u.gradient(nu)?;
    let jet = phi.jet(t0.as_slice())?;
    let det = jet.hess.clone().lu().determinant();
    // log I at real-valued nu via the same dual integral
    let dual = DualIntegrator::build(u, DualWeight::VolumeForm)?;
    let kf = k as f64;
    let mut max = f64::NEG_INFINITY;
    for nd in dual.nodes() {
        if nd.weight <= 0.0 {
            continue;
        }
        let e = -kf * (nd.phi - nd.t.iter().zip(nu).map(|(t, x)| t * x).sum::<f64>())
            + nd.weight.ln();
        max = max.max(e);
    }
    let mut z = 0.0;
    for nd in dual.nodes() {
        if nd.weight <= 0.0 {
            continue;
        }
        let e = -kf * (nd.phi - nd.t.iter().zip(nu).map(|(t, x)| t * x).sum::<f64>())
            + nd.weight.ln();
        z += (e - max).exp();
    }
    let log_i = max + z.ln();
    let t0nu: f64 = t0.iter().zip(nu).map(|(t, x)| t * x).sum();
    let log_ratio = log_i + (n as f64 / 2.0) * (kf / (2.0 * std::f64::consts::PI)).ln()
        + kf * (jet.value - t0nu)
        - 0.5 * det.ln();
    Ok(log_ratio.exp())
}
