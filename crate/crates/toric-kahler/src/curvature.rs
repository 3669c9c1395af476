//! Curvature operators in symplectic coordinates.
//!
//! Everything is built from the inverse Hessian field `u^{ij}`, which extends
//! smoothly to the closed polytope for admissible potentials. The scalar
//! curvature is Abreu's expression with the extremal-equation sign
//! convention
//!
//! ```text
//! S(u) = - sum_ij d^2 u^{ij} / dx_i dx_j,
//! ```
//!
//! so the round sphere has S = 2. Derivatives of `u^{ij}` are taken by
//! fourth-order centered stencils on the assembled inverse-Hessian field with
//! spacing adapted to the distance from the boundary; the Guillemin part of
//! the Hessian itself is exact, so stencils only ever touch smooth data.

use crate::potential::{GridFunction, Jet2, NodeClass, PotentialError, SymplecticPotential};
use crate::stencil::fd_weights;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurvatureError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("weight is not positive at {0:?}")]
    NonpositiveWeight(Vec<f64>),
    #[error("curvature operators support dimensions 1 and 2, got {0}")]
    UnsupportedDimension(usize),
}

/// Scalar curvature and curvature tensors at one point.
///
/// The Ricci-equivalent tensor is `G = Hessian_x(L)` with
/// `L = log det Hessian(u)`; the scalar curvature contracts it through
/// `S = u^{ij} G_ij - u^{ij} L_i L_j`, which reproduces Abreu's
/// `-d^2 u^{ij}/dx_i dx_j` identically. The relation between `G` and the
/// contraction of the four-index tensor carries the cubic-derivative square:
/// `G_ij = -F_ijkl u^{kl} + u^{ab} u^{kl} u_iak u_jbl` (see [`cubic_square`]).
#[derive(Debug, Clone)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    /// scalar curvature, computed through the log-det route
    pub s: f64,
    /// Ricci-equivalent tensor `G = Hessian_x(log det Hessian(u))`
    pub g: DMatrix<f64>,
    /// four-index curvature tensor `F_ijkl = u_ia u_jb d^2 u^{ab}/dx^k dx^l`,
    /// flat in row-major i,j,k,l order
    pub f: Vec<f64>,
    /// squared norm `F_ijkl F_abcd u^{ia} u^{jb} u^{kc} u^{ld}`
    pub norm_f2: f64,
    /// `L = log det Hessian(u)`
    pub log_det: f64,
    /// gradient of `L` in x
    pub grad_log_det: DVector<f64>,
}

impl CurvatureSample {
    pub fn f_at(&self, n: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.f[((i * n + j) * n + k) * n + l]
    }

    /// The contraction `-F_ijkl u^{kl}`; differs from `g` by the
    /// cubic-derivative square.
    pub fn f_contraction(&self, inv: &DMatrix<f64>) -> DMatrix<f64> {
        let n = inv.nrows();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += self.f[((i * n + j) * n + k) * n + l] * inv[(k, l)];
                    }
                }
                out[(i, j)] = -acc;
            }
        }
        out
    }
}

/// Base stencil spacing relative to the polytope diameter.
const H_SCALE: f64 = 2.0e-3;

fn stencil_spacing(u: &SymplecticPotential, x: &[f64]) -> Result<f64, CurvatureError> {
    let p = u.polytope();
    let margin = p.stencil_margin(x);
    if margin <= 0.0 {
        return Err(CurvatureError::Potential(PotentialError::OutsideDomain(
            x.to_vec(),
        )));
    }
    Ok((H_SCALE * p.float().diameter).min(margin / 3.0))
}

/// Matrix-valued samples on a (2w+1)^n tensor patch around `x`; the sampled
/// matrices may have any fixed shape (n x n inverse Hessians, 1 x 1 scalars).
struct Patch {
    space_dim: usize,
    shape: (usize, usize),
    w: usize,
    h: f64,
    /// row-major over the offset grid
    mats: Vec<DMatrix<f64>>,
}

impl Patch {
    fn build(
        u: &SymplecticPotential,
        x: &[f64],
        h: f64,
        w: usize,
        f: impl Fn(&SymplecticPotential, &[f64]) -> Result<DMatrix<f64>, PotentialError>,
    ) -> Result<Patch, CurvatureError> {
        let n = u.dim();
        if n > 2 {
            return Err(CurvatureError::UnsupportedDimension(n));
        }
        let side = 2 * w + 1;
        let count = side.pow(n as u32);
        let mut mats = Vec::with_capacity(count);
        for flat in 0..count {
            let mut rem = flat;
            let mut point = x.to_vec();
            for axis in (0..n).rev() {
                let off = (rem % side) as isize - w as isize;
                rem /= side;
                point[axis] += off as f64 * h;
            }
            mats.push(f(u, &point)?);
        }
        let shape = (mats[0].nrows(), mats[0].ncols());
        Ok(Patch {
            space_dim: n,
            shape,
            w,
            h,
            mats,
        })
    }

    fn at(&self, offsets: &[isize]) -> &DMatrix<f64> {
        let side = 2 * self.w + 1;
        let mut flat = 0;
        for &o in offsets {
            flat = flat * side + (o + self.w as isize) as usize;
        }
        &self.mats[flat]
    }

    fn nodes(&self) -> Vec<f64> {
        (-(self.w as isize)..=self.w as isize)
            .map(|i| i as f64 * self.h)
            .collect()
    }

    /// Second derivative of every matrix entry in directions (k, l).
    fn d2(&self, k: usize, l: usize) -> DMatrix<f64> {
        let nodes = self.nodes();
        let mut out = DMatrix::zeros(self.shape.0, self.shape.1);
        if k == l {
            let wts = fd_weights(0.0, &nodes, 2);
            for (idx, &wt) in wts.iter().enumerate() {
                let mut off = vec![0isize; self.space_dim];
                off[k] = idx as isize - self.w as isize;
                out += wt * self.at(&off);
            }
        } else {
            let w1 = fd_weights(0.0, &nodes, 1);
            for (ik, &wk) in w1.iter().enumerate() {
                for (il, &wl) in w1.iter().enumerate() {
                    let mut off = vec![0isize; self.space_dim];
                    off[k] = ik as isize - self.w as isize;
                    off[l] = il as isize - self.w as isize;
                    out += wk * wl * self.at(&off);
                }
            }
        }
        out
    }

    /// First derivative of every matrix entry in direction k.
    fn d1(&self, k: usize) -> DMatrix<f64> {
        let nodes = self.nodes();
        let wts = fd_weights(0.0, &nodes, 1);
        let mut out = DMatrix::zeros(self.shape.0, self.shape.1);
        for (idx, &wt) in wts.iter().enumerate() {
            let mut off = vec![0isize; self.space_dim];
            off[k] = idx as isize - self.w as isize;
            out += wt * self.at(&off);
        }
        out
    }
}

/// Abreu's scalar curvature `S = -d^2 u^{ij}/dx^i dx^j` at an interior point.
pub fn abreu_scalar(u: &SymplecticPotential, x: &[f64]) -> Result<f64, CurvatureError> {
    let h = stencil_spacing(u, x)?;
    let patch = Patch::build(u, x, h, 2, |u, p| u.inverse_hessian(p))?;
    let n = u.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s -= patch.d2(i, j)[(i, j)];
        }
    }
    Ok(s)
}

/// Full curvature tensor data at an interior point.
pub fn curvature_tensor(
    u: &SymplecticPotential,
    x: &[f64],
) -> Result<CurvatureSample, CurvatureError> {
    let n = u.dim();
    let h = stencil_spacing(u, x)?;
    let patch = Patch::build(u, x, h, 2, |u, p| u.inverse_hessian(p))?;
    let hess = u.hessian(x)?;
    let inv = patch.at(&vec![0isize; n]).clone();
    // F_ijkl = (H d2_kl(U) H)_ij
    let mut f = vec![0.0; n * n * n * n];
    for k in 0..n {
        for l in 0..n {
            let m = &hess * patch.d2(k, l) * &hess;
            for i in 0..n {
                for j in 0..n {
                    f[((i * n + j) * n + k) * n + l] = m[(i, j)];
                }
            }
        }
    }
    // |F|^2 with all four indices raised by u^{..}
    let mut norm_f2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut lifted = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            for c in 0..n {
                                for d in 0..n {
                                    lifted += f[((a * n + b) * n + c) * n + d]
                                        * inv[(i, a)]
                                        * inv[(j, b)]
                                        * inv[(k, c)]
                                        * inv[(l, d)];
                                }
                            }
                        }
                    }
                    norm_f2 += f[((i * n + j) * n + k) * n + l] * lifted;
                }
            }
        }
    }
    // L = log det Hessian; its x-gradient and x-Hessian by stencils on the
    // L field, an evaluation path independent of the U-field stencils
    let lpatch = Patch::build(u, x, h, 2, |u, p| {
        let hess = u.hessian(p)?;
        let det = hess.clone().lu().determinant();
        if det <= 0.0 {
            return Err(PotentialError::SingularHessian(p.to_vec()));
        }
        Ok(DMatrix::from_element(1, 1, det.ln()))
    })?;
    let log_det = lpatch.at(&vec![0isize; n])[(0, 0)];
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = lpatch.d2(i, j)[(0, 0)];
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let grad_log_det = DVector::from_iterator(n, (0..n).map(|k| lpatch.d1(k)[(0, 0)]));
    // S = u^{ij} L_ij - u^{ij} L_i L_j
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += inv[(i, j)] * (g[(i, j)] - grad_log_det[i] * grad_log_det[j]);
        }
    }
    Ok(CurvatureSample {
        point: x.to_vec(),
        s,
        g,
        f,
        norm_f2,
        log_det,
        grad_log_det,
    })
}

/// The cubic-derivative square `X_ij = u^{ab} u^{kl} u_iak u_jbl`, assembled
/// from first derivatives of the inverse-Hessian field. The two Ricci routes
/// satisfy `hess_log_det = G + X` (see the module tests).
pub fn cubic_square(u: &SymplecticPotential, x: &[f64]) -> Result<DMatrix<f64>, CurvatureError> {
    let n = u.dim();
    let h = stencil_spacing(u, x)?;
    let patch = Patch::build(u, x, h, 2, |u, p| u.inverse_hessian(p))?;
    let hess = u.hessian(x)?;
    let inv = patch.at(&vec![0isize; n]).clone();
    // H_k = -H (d1_k U) H
    let hgrads: Vec<DMatrix<f64>> = (0..n).map(|k| -(&hess * patch.d1(k) * &hess)).collect();
    let mut xmat = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            xmat += inv[(k, l)] * (&hgrads[k] * &inv * &hgrads[l]);
        }
    }
    Ok(xmat)
}

/// Weight function for the multiplicity-free generalization.
pub trait WeightFn: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Weight given by closures.
pub struct ClosedWeight<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub value: V,
    pub gradient: G,
}

impl<V, G> WeightFn for ClosedWeight<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

/// Weighted scalar curvature
/// `S_W = -(1/W) d^2 (W u^{ij}) / dx^i dx^j + (W_i sigma^i) / W`,
/// the divergence term carrying the same sign convention as [`abreu_scalar`].
/// With `W = 1` and `sigma = 0` it reduces to the toric formula.
pub fn weighted_abreu(
    u: &SymplecticPotential,
    weight: &dyn WeightFn,
    sigma: &[f64],
    x: &[f64],
) -> Result<f64, CurvatureError> {
    let n = u.dim();
    let h = stencil_spacing(u, x)?;
    let w0 = weight.value(x);
    if w0 <= 0.0 {
        return Err(CurvatureError::NonpositiveWeight(x.to_vec()));
    }
    let patch = Patch::build(u, x, h, 2, |u, p| {
        let w = weight.value(p);
        if w <= 0.0 {
            return Err(PotentialError::SingularHessian(p.to_vec()));
        }
        Ok(w * u.inverse_hessian(p)?)
    })?;
    let mut div = 0.0;
    for i in 0..n {
        for j in 0..n {
            div -= patch.d2(i, j)[(i, j)];
        }
    }
    let grad_w = weight.gradient(x);
    let f_g: f64 = grad_w.iter().zip(sigma).map(|(wi, si)| wi * si).sum::<f64>() / w0;
    Ok(div / w0 + f_g)
}

/// Which scalar field to evaluate over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    LogDet,
    NormF2,
}

impl FieldKind {
    pub fn parse(s: &str) -> Option<FieldKind> {
        match s {
            "S" => Some(FieldKind::Scalar),
            "L" => Some(FieldKind::LogDet),
            "normF2" => Some(FieldKind::NormF2),
            _ => None,
        }
    }
}

/// Evaluate a curvature field at the interior nodes of a grid template.
/// Nodes are evaluated in parallel; boundary and outside nodes stay NaN.
pub fn curvature_field(
    u: &SymplecticPotential,
    template: &GridFunction,
    kind: FieldKind,
) -> Result<GridFunction, CurvatureError> {
    let dims: Vec<usize> = template.axes().iter().map(|a| a.len()).collect();
    let count: usize = dims.iter().product();
    let results: Vec<Result<f64, CurvatureError>> = (0..count)
        .into_par_iter()
        .map(|flat| {
            if template.flags()[flat] != NodeClass::Interior {
                return Ok(f64::NAN);
            }
            let mut rem = flat;
            let mut idx = vec![0usize; dims.len()];
            for i in (0..dims.len()).rev() {
                idx[i] = rem % dims[i];
                rem /= dims[i];
            }
            let x = template.node(&idx);
            match kind {
                FieldKind::Scalar => abreu_scalar(u, &x),
                FieldKind::LogDet => {
                    let h = u.hessian(&x)?;
                    let det = h.lu().determinant();
                    if det <= 0.0 {
                        Err(PotentialError::SingularHessian(x.clone()).into())
                    } else {
                        Ok(det.ln())
                    }
                }
                FieldKind::NormF2 => curvature_tensor(u, &x).map(|c| c.norm_f2),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(count);
    for r in results {
        values.push(r?);
    }
    let flags = template.flags().to_vec();
    Ok(GridFunction::new(template.axes().to_vec(), values, flags))
}

/// Box-operator ingredient: gradient of the field `u^{ij} f_ij` for a test
/// jet supplier; used by the soliton identity suite.
pub fn inverse_hessian_gradient(
    u: &SymplecticPotential,
    x: &[f64],
) -> Result<Vec<DMatrix<f64>>, CurvatureError> {
    let n = u.dim();
    let h = stencil_spacing(u, x)?;
    let patch = Patch::build(u, x, h, 2, |u, p| u.inverse_hessian(p))?;
    Ok((0..n).map(|k| patch.d1(k)).collect())
}

/// Convenience: evaluate S, fitting the affine target residual `S(u) - A`.
pub fn scalar_residual(
    u: &SymplecticPotential,
    a: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
) -> Result<f64, CurvatureError> {
    Ok(abreu_scalar(u, x)? - a(x))
}

#[allow(dead_code)]
fn unused(_: DVector<f64>, _: Jet2) {}
