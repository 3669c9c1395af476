//! Interior and boundary quadrature on polytopes of dimension 1 and 2.
//!
//! The interior rule fans the polygon into triangles about the vertex
//! average and places a Duffy-transformed tensor Gauss rule on each triangle,
//! exact for polynomials up to the requested total degree. The boundary rule
//! is a per-facet Gauss rule carrying the lattice measure `dsigma`: the total
//! weight of facet `r` is its Euclidean measure divided by `|lambda_r|_2`.

use super::{DelzantPolytope, PolytopeError};
use crate::exact;

/// Nodes and weights for integration over a polytope and its boundary.
#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    dim: usize,
    degree: usize,
    interior: Vec<(Vec<f64>, f64)>,
    /// per facet: nodes and dsigma weights
    boundary: Vec<Vec<(Vec<f64>, f64)>>,
}

impl QuadratureScheme {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Polynomial exactness degree of the interior rule.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interior_nodes(&self) -> &[(Vec<f64>, f64)] {
        &self.interior
    }

    pub fn boundary_nodes(&self, facet: usize) -> &[(Vec<f64>, f64)] {
        &self.boundary[facet]
    }

    pub fn integrate_interior(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.interior.iter().map(|(x, w)| w * f(x)).sum()
    }

    /// Integral over the whole boundary against `dsigma`.
    pub fn integrate_boundary(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.boundary
            .iter()
            .flatten()
            .map(|(x, w)| w * f(x))
            .sum()
    }

    pub fn integrate_facet(&self, facet: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.boundary[facet].iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    assert!(m >= 1);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        // Newton iteration from the Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_eval(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre_eval(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Build a quadrature scheme of the requested interior exactness degree with
/// `boundary_nodes_per_facet` Gauss nodes per facet.
pub fn build_quadrature(
    p: &DelzantPolytope,
    degree: usize,
    boundary_nodes_per_facet: usize,
) -> Result<QuadratureScheme, PolytopeError> {
    assert!(degree >= 1);
    let n = p.dim();
    match n {
        1 => build_1d(p, degree, boundary_nodes_per_facet),
        2 => build_2d(p, degree, boundary_nodes_per_facet),
        d => Err(PolytopeError::UnsupportedDimension {
            dim: d,
            what: "quadrature",
        }),
    }
}

fn build_1d(
    p: &DelzantPolytope,
    degree: usize,
    _bn: usize,
) -> Result<QuadratureScheme, PolytopeError> {
    let a = exact::to_f64(&p.vertices()[0][0]);
    let b = exact::to_f64(&p.vertices()[1][0]);
    let m = degree / 2 + 1;
    let interior = gauss_legendre(m)
        .into_iter()
        .map(|(x, w)| {
            (
                vec![0.5 * (a + b) + 0.5 * (b - a) * x],
                0.5 * (b - a) * w,
            )
        })
        .collect();
    // each endpoint facet carries dsigma-mass 1
    let boundary = p
        .facets()
        .iter()
        .enumerate()
        .map(|(r, _)| {
            let v = p
                .vertex_facets()
                .iter()
                .position(|active| active.contains(&r))
                .expect("facet has a vertex");
            vec![(vec![exact::to_f64(&p.vertices()[v][0])], 1.0)]
        })
        .collect();
    Ok(QuadratureScheme {
        dim: 1,
        degree,
        interior,
        boundary,
    })
}

/// Order the vertices of a polygon counterclockwise around the center.
fn polygon_order(p: &DelzantPolytope) -> Vec<usize> {
    let g = p.float();
    let mut idx: Vec<usize> = (0..g.vertices.len()).collect();
    idx.sort_by(|&i, &j| {
        let ai = (g.vertices[i][1] - g.center[1]).atan2(g.vertices[i][0] - g.center[0]);
        let aj = (g.vertices[j][1] - g.center[1]).atan2(g.vertices[j][0] - g.center[0]);
        ai.partial_cmp(&aj).unwrap()
    });
    idx
}

fn build_2d(
    p: &DelzantPolytope,
    degree: usize,
    bn: usize,
) -> Result<QuadratureScheme, PolytopeError> {
    let g = p.float();
    let order = polygon_order(p);
    let c = &g.center;
    let m = degree + 1;
    let gl = gauss_legendre(m);
    // map [-1,1] to [0,1]
    let gl01: Vec<(f64, f64)> = gl.iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut interior = Vec::new();
    for k in 0..order.len() {
        let a = &g.vertices[order[k]];
        let b = &g.vertices[order[(k + 1) % order.len()]];
        // triangle (c, a, b), Duffy transform of the unit square
        let e1 = [a[0] - c[0], a[1] - c[1]];
        let e2 = [b[0] - c[0], b[1] - c[1]];
        let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        for &(u, wu) in &gl01 {
            for &(v, wv) in &gl01 {
                // (s, t) = (u, v(1-u)) covers the unit triangle; weight (1-u)
                let s = u;
                let t = v * (1.0 - u);
                let x = c[0] + s * e1[0] + t * e2[0];
                let y = c[1] + s * e1[1] + t * e2[1];
                interior.push((vec![x, y], wu * wv * (1.0 - u) * jac));
            }
        }
    }
    // boundary: per facet, Gauss nodes along the edge with dsigma weights
    let moms = p.moments();
    let glb = gauss_legendre(bn.max(1));
    let mut boundary = vec![Vec::new(); p.facets().len()];
    for (r, _facet) in p.facets().iter().enumerate() {
        let ends: Vec<usize> = (0..p.vertices().len())
            .filter(|&v| p.vertex_facets()[v].contains(&r))
            .collect();
        debug_assert_eq!(ends.len(), 2, "polygon facet has two vertices");
        let a = &g.vertices[ends[0]];
        let b = &g.vertices[ends[1]];
        let mass = exact::to_f64(&moms.facets[r].mass);
        for &(x, w) in &glb {
            let s = 0.5 * (x + 1.0);
            boundary[r].push((
                vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                0.5 * w * mass,
            ));
        }
    }
    Ok(QuadratureScheme {
        dim: 2,
        degree,
        interior,
        boundary,
    })
}

/// Per-facet boundary rule with panels graded geometrically toward the facet
/// endpoints; resolves the `ell log ell` behavior of symplectic potentials at
/// polygon corners.
pub fn graded_boundary_rule(
    p: &DelzantPolytope,
    nodes_per_panel: usize,
    levels: usize,
) -> Result<Vec<Vec<(Vec<f64>, f64)>>, PolytopeError> {
    if p.dim() != 2 {
        return Err(PolytopeError::UnsupportedDimension {
            dim: p.dim(),
            what: "graded boundary rule",
        });
    }
    let g = p.float();
    let moms = p.moments();
    let gl = gauss_legendre(nodes_per_panel);
    let mut out = vec![Vec::new(); p.facets().len()];
    // breakpoints in [0, 1/2]: geometric refinement toward 0, mirrored
    let mut breaks = vec![0.0];
    for l in (0..levels).rev() {
        breaks.push(0.5f64.powi(l as i32 + 1));
    }
    for (r, _) in p.facets().iter().enumerate() {
        let ends: Vec<usize> = (0..p.vertices().len())
            .filter(|&v| p.vertex_facets()[v].contains(&r))
            .collect();
        let a = &g.vertices[ends[0]];
        let b = &g.vertices[ends[1]];
        let mass = exact::to_f64(&moms.facets[r].mass);
        let mut panels: Vec<(f64, f64)> = Vec::new();
        for w in breaks.windows(2) {
            panels.push((w[0], w[1]));
            panels.push((1.0 - w[1], 1.0 - w[0]));
        }
        for (s0, s1) in panels {
            for &(x, w) in &gl {
                let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x;
                out[r].push((
                    vec![a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
                    0.5 * (s1 - s0) * w * mass,
                ));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{bl1cp2, unit_square};
    use super::super::{verify_delzant, Facet};
    use super::*;
    use crate::exact::rat;

    #[test]
    fn gauss_legendre_exactness() {
        let gl = gauss_legendre(5);
        // degree 9 monomials on [-1,1]
        for d in 0..=9usize {
            let got: f64 = gl.iter().map(|(x, w)| w * x.powi(d as i32)).sum();
            let want = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
            assert!((got - want).abs() < 1e-13, "degree {d}");
        }
    }

    #[test]
    fn square_constant_exact() {
        let p = unit_square();
        let q = build_quadrature(&p, 4, 8).unwrap();
        assert!((q.integrate_interior(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((q.integrate_boundary(|_| 1.0) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn bl1cp2_pinned_integrals() {
        let p = bl1cp2();
        let q = build_quadrature(&p, 6, 12).unwrap();
        // volume 4, boundary 8, int_dP x = 1, int_P x = 1/3
        assert!((q.integrate_interior(|_| 1.0) - 4.0).abs() < 1e-12);
        assert!((q.integrate_boundary(|_| 1.0) - 8.0).abs() < 1e-12);
        assert!((q.integrate_boundary(|x| x[0]) - 1.0).abs() < 1e-12);
        assert!((q.integrate_interior(|x| x[0]) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn moments_match_exact_rational_values() {
        let p = bl1cp2();
        let q = build_quadrature(&p, 6, 10).unwrap();
        let m = p.moments();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let got = q.integrate_interior(|x| x[i] * x[j]);
            let want = crate::exact::to_f64(&m.m2[i][j]);
            assert!((got - want).abs() < 1e-12, "x{i} x{j}");
        }
        let got = q.integrate_boundary(|x| x[0] * x[1]);
        let want: f64 = m
            .facets
            .iter()
            .map(|f| crate::exact::to_f64(&f.m2[0][1]))
            .sum();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn interval_rule() {
        let p = verify_delzant(
            1,
            vec![
                Facet::new(vec![1], rat(0)).unwrap(),
                Facet::new(vec![-1], rat(-1)).unwrap(),
            ],
            "",
        )
        .unwrap();
        let q = build_quadrature(&p, 7, 1).unwrap();
        assert!((q.integrate_interior(|x| x[0].powi(3)) - 0.25).abs() < 1e-14);
        assert!((q.integrate_boundary(|x| x[0]) - 1.0).abs() < 1e-14);
        assert_eq!(q.boundary_nodes(0).len(), 1);
    }

    #[test]
    fn graded_rule_total_mass() {
        let p = bl1cp2();
        let rule = graded_boundary_rule(&p, 12, 20).unwrap();
        let total: f64 = rule.iter().flatten().map(|(_, w)| w).sum();
        assert!((total - 8.0).abs() < 1e-11);
    }
}
