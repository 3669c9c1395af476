//! Quadrature on the dual space through the moment map.
//!
//! For an admissible potential the gradient `Du` is a bijection from the
//! polytope onto R^n, so interior integrals transform as
//!
//! ```text
//! int_P f(x) det(Hess u)^{-1} ... dx  <->  int_{R^n} f(grad phi(t)) w(t) dt
//! ```
//!
//! with either the volume-form weight `det Hess(phi)` (plain `dx`) or the
//! exponential weight `e^{-phi}` (the measure `e^{rho} dx` of the soliton
//! theory, valid when the origin is interior). Both integrands are smooth
//! with exponentially decaying tails, which is what makes them the right home
//! for quantities whose x-space factors blow up at the boundary.

use crate::polytope::gauss_legendre;
use crate::potential::{
    legendre_to_kahler, moment_inverse, NewtonParams, PotentialError, SymplecticPotential,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DualQuadError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("truncation budget exceeded: tail not below {want:.1e} at radius {radius}")]
    TruncationBudgetExceeded { radius: f64, want: f64 },
    #[error("the exponential weight needs the origin in the polytope interior")]
    OriginNotInterior,
}

/// Weight carried by the dual measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualWeight {
    /// `det Hess(phi) dt`, the pullback of plain Lebesgue measure `dx`
    VolumeForm,
    /// `e^{-phi} dt`, the pullback of `e^{rho} dx`
    ExpNegPhi,
}

/// One cached quadrature node in the dual space.
#[derive(Debug, Clone)]
pub struct DualNode {
    pub t: Vec<f64>,
    /// matched interior point `x = grad phi(t)`
    pub x: Vec<f64>,
    pub phi: f64,
    /// `Hess phi(t) = u^{ij}(x)`, the inverse Hessian of u
    pub inv_hess: DMatrix<f64>,
    /// full measure weight: quadrature weight times the mode weight
    pub weight: f64,
}

/// Cached dual-space quadrature for one potential.
#[derive(Debug, Clone)]
pub struct DualIntegrator {
    nodes: Vec<DualNode>,
    radius: f64,
}

/// Per-axis composite Gauss panels with geometrically growing width.
fn axis_nodes(radius: f64, per_panel: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(per_panel);
    let mut breaks = vec![0.0, 1.0];
    while *breaks.last().unwrap() < radius {
        let last = *breaks.last().unwrap();
        breaks.push((last * 2.0).min(radius));
    }
    let mut out = Vec::new();
    let mut panels: Vec<(f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        panels.push((w[0], w[1]));
        panels.push((-w[1], -w[0]));
    }
    panels.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (a, b) in panels {
        for &(z, w) in &gl {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * z, 0.5 * (b - a) * w));
        }
    }
    out
}

impl DualIntegrator {
    /// Build the node cache, growing the truncation radius until the outer
    /// shell carries a negligible share of the total mass.
    pub fn build(u: &SymplecticPotential, weight: DualWeight) -> Result<Self, DualQuadError> {
        if weight == DualWeight::ExpNegPhi {
            let origin = vec![0.0; u.dim()];
            if !u.polytope().contains_f64(&origin, 0.0) {
                return Err(DualQuadError::OriginNotInterior);
            }
        }
        // decay rate seen from the polytope center
        let geom = u.polytope().float();
        let r_c: f64 = u
            .polytope()
            .facets()
            .iter()
            .map(|f| f.ell_f64(&geom.center) / f.normal_norm())
            .fold(f64::INFINITY, f64::min);
        let mut radius = (45.0 / r_c.max(1e-2)).clamp(30.0, 400.0);
        for _ in 0..4 {
            let me = Self::build_at_radius(u, weight, radius, 12)?;
            // mass of the outer half-shell estimates the truncated tail
            let mass = me.integrate(|_| 1.0).abs().max(1e-300);
            let shell = me
                .nodes
                .iter()
                .filter(|nd| nd.t.iter().any(|ti| ti.abs() > radius / 2.0))
                .map(|nd| nd.weight.abs())
                .sum::<f64>();
            if shell <= 1e-12 * mass {
                return Ok(me);
            }
            radius *= 2.0;
            if radius > 1600.0 {
                return Err(DualQuadError::TruncationBudgetExceeded {
                    radius,
                    want: 1e-12,
                });
            }
        }
        Self::build_at_radius(u, weight, radius, 12)
    }

    pub fn build_at_radius(
        u: &SymplecticPotential,
        weight: DualWeight,
        radius: f64,
        per_panel: usize,
    ) -> Result<Self, DualQuadError> {
        let n = u.dim();
        let phi = legendre_to_kahler(u);
        let axis = axis_nodes(radius, per_panel);
        // tensor product of axis nodes
        let mut t_list: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 0..n {
            let mut next = Vec::with_capacity(t_list.len() * axis.len());
            for (t, w) in &t_list {
                for &(z, wz) in &axis {
                    let mut tt = t.clone();
                    tt.push(z);
                    next.push((tt, w * wz));
                }
            }
            t_list = next;
        }
        let params = NewtonParams::default();
        let geom = u.polytope().float();
        let diam = geom.diameter;
        let nodes: Result<Vec<DualNode>, PotentialError> = t_list
            .par_iter()
            .map(|(t, w)| {
                let compute = || -> Result<DualNode, PotentialError> {
                    let x = moment_inverse(u, t, params)?;
                    let jet = phi.jet(t)?;
                    let det = jet.hess.clone().lu().determinant();
                    let mode_weight = match weight {
                        DualWeight::VolumeForm => det,
                        DualWeight::ExpNegPhi => (-jet.value).exp(),
                    };
                    Ok(DualNode {
                        t: t.clone(),
                        x,
                        phi: jet.value,
                        inv_hess: jet.hess,
                        weight: w * mode_weight,
                    })
                };
                match compute() {
                    Ok(node) => Ok(node),
                    Err(err) => {
                        // nodes whose moment image hugs the boundary closer
                        // than floating point can resolve carry a measure
                        // below roundoff; drop them rather than fail
                        let negligible = match &err {
                            PotentialError::SingularHessian(x)
                            | PotentialError::OutsideDomain(x)
                            | PotentialError::Unsupported(x)
                                if x.len() == n =>
                            {
                                u.polytope().stencil_margin(x) < 1e-12 * diam
                            }
                            PotentialError::NewtonDivergence(t) => {
                                let tn: f64 =
                                    t.iter().map(|v| v * v).sum::<f64>().sqrt();
                                tn > 30.0 / 1e-2_f64.max(
                                    u.polytope()
                                        .facets()
                                        .iter()
                                        .map(|f| {
                                            f.ell_f64(&geom.center) / f.normal_norm()
                                        })
                                        .fold(f64::INFINITY, f64::min),
                                )
                            }
                            _ => false,
                        };
                        if negligible {
                            Ok(DualNode {
                                t: t.clone(),
                                x: geom.center.clone(),
                                phi: f64::INFINITY,
                                inv_hess: DMatrix::zeros(n, n),
                                weight: 0.0,
                            })
                        } else {
                            Err(err)
                        }
                    }
                }
            })
            .collect();
        Ok(DualIntegrator {
            nodes: nodes?,
            radius,
        })
    }

    pub fn nodes(&self) -> &[DualNode] {
        &self.nodes
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Deterministic sequential sum over nodes.
    pub fn integrate(&self, f: impl Fn(&DualNode) -> f64) -> f64 {
        self.nodes.iter().map(|nd| nd.weight * f(nd)).sum()
    }
}

/// Gradient vector as a DVector for convenience in integrands.
pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::exact::rat;
    use std::sync::Arc;

    #[test]
    fn volume_form_recovers_polytope_volume() {
        let p = Arc::new(builtin::interval(rat(0), rat(1)));
        let u = SymplecticPotential::guillemin(p);
        let q = DualIntegrator::build(&u, DualWeight::VolumeForm).unwrap();
        let vol = q.integrate(|_| 1.0);
        assert!((vol - 1.0).abs() < 1e-10, "{vol}");
        // first moment of the interval: 1/2
        let m1 = q.integrate(|nd| nd.x[0]);
        assert!((m1 - 0.5).abs() < 1e-10, "{m1}");
    }

    #[test]
    fn volume_form_2d() {
        let p = Arc::new(builtin::bl1cp2());
        let u = SymplecticPotential::guillemin(p);
        let q = DualIntegrator::build(&u, DualWeight::VolumeForm).unwrap();
        assert!((q.integrate(|_| 1.0) - 4.0).abs() < 1e-8);
        assert!((q.integrate(|nd| nd.x[0]) - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn exp_weight_on_ke_interval_gives_four() {
        // e^{rho} = 2 on (-1,1), so the weighted mass is 4
        let p = Arc::new(builtin::fano_interval());
        let u = SymplecticPotential::guillemin(p);
        let q = DualIntegrator::build(&u, DualWeight::ExpNegPhi).unwrap();
        let mass = q.integrate(|_| 1.0);
        assert!((mass - 4.0).abs() < 1e-9, "{mass}");
        // the odd moment identity: int x e^{rho} dx = 0
        let m1 = q.integrate(|nd| nd.x[0]);
        assert!(m1.abs() < 1e-10);
    }

    #[test]
    fn exp_weight_requires_interior_origin() {
        let p = Arc::new(builtin::interval(rat(0), rat(1)));
        let u = SymplecticPotential::guillemin(p);
        assert!(matches!(
            DualIntegrator::build(&u, DualWeight::ExpNegPhi),
            Err(DualQuadError::OriginNotInterior)
        ));
    }

    #[test]
    fn log_det_integral_on_interval() {
        // int_0^1 log(1/(x - x^2)) dx = 2 (known closed form):
        // the volume-form pullback of L = log det Hess u
        let p = Arc::new(builtin::interval(rat(0), rat(1)));
        let u = SymplecticPotential::guillemin(p);
        let q = DualIntegrator::build(&u, DualWeight::VolumeForm).unwrap();
        let val = q.integrate(|nd| -nd.inv_hess.clone().lu().determinant().ln());
        assert!((val - 2.0).abs() < 1e-9, "{val}");
    }
}
