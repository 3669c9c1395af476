//! Exact moments of a rational polytope and of its boundary under the
//! lattice-normalized measure `dsigma`.
//!
//! The `dsigma` mass of a facet with primitive normal `lambda` is the
//! Euclidean facet measure divided by `|lambda|_2`; equivalently it is the
//! measure in which a fundamental cell of the facet lattice has mass one, so
//! integral polygons get integer edge lengths. All quantities here are exact
//! rationals, computed by a pyramid decomposition that recurses through facet
//! lattice coordinates.

use super::{enumerate_vertices, DelzantPolytope, Facet};
use crate::exact::{
    dot_int_rat, gcd_slice, lattice_completion, rank_rational, rat, solve_rational, Rat,
};
use num_traits::{Signed, Zero};

/// Mass and first two moments of a measure on Q^n.
#[derive(Debug, Clone)]
pub struct MomentData {
    pub mass: Rat,
    /// integral of the coordinate vector
    pub m1: Vec<Rat>,
    /// integral of x x^T
    pub m2: Vec<Vec<Rat>>,
}

impl MomentData {
    fn zero(n: usize) -> Self {
        MomentData {
            mass: rat(0),
            m1: vec![rat(0); n],
            m2: vec![vec![rat(0); n]; n],
        }
    }

    /// Integral of the affine function `c + g . x`.
    pub fn integrate_affine(&self, constant: &Rat, gradient: &[Rat]) -> Rat {
        constant * &self.mass + crate::exact::dot_rat(gradient, &self.m1)
    }

    /// Integral of a product of two affine functions.
    pub fn integrate_affine_product(
        &self,
        (c1, g1): (&Rat, &[Rat]),
        (c2, g2): (&Rat, &[Rat]),
    ) -> Rat {
        let mut total = c1 * c2 * &self.mass;
        for i in 0..self.m1.len() {
            total += (c1 * &g2[i] + c2 * &g1[i]) * &self.m1[i];
            for j in 0..self.m1.len() {
                total += &g1[i] * &g2[j] * &self.m2[i][j];
            }
        }
        total
    }
}

/// Interior and per-facet boundary moments of a polytope.
#[derive(Debug, Clone)]
pub struct PolytopeMoments {
    pub volume: Rat,
    pub m1: Vec<Rat>,
    pub m2: Vec<Vec<Rat>>,
    /// parallel to the facet list; `dsigma` moments of each facet
    pub facets: Vec<FacetMoments>,
}

/// `dsigma` moments of a single facet.
#[derive(Debug, Clone)]
pub struct FacetMoments {
    pub mass: Rat,
    pub m1: Vec<Rat>,
    pub m2: Vec<Vec<Rat>>,
}

impl PolytopeMoments {
    pub fn boundary_volume(&self) -> Rat {
        self.facets.iter().map(|f| f.mass.clone()).sum()
    }

    pub fn barycenter(&self) -> Vec<Rat> {
        self.m1.iter().map(|x| x / &self.volume).collect()
    }

    pub fn boundary_barycenter(&self) -> Vec<Rat> {
        let total = self.boundary_volume();
        let n = self.m1.len();
        (0..n)
            .map(|i| {
                self.facets
                    .iter()
                    .map(|f| f.m1[i].clone())
                    .sum::<Rat>()
                    / &total
            })
            .collect()
    }

    pub fn interior(&self) -> MomentData {
        MomentData {
            mass: self.volume.clone(),
            m1: self.m1.clone(),
            m2: self.m2.clone(),
        }
    }

    /// Boundary integral of an affine function against `dsigma`.
    pub fn boundary_integrate_affine(&self, constant: &Rat, gradient: &[Rat]) -> Rat {
        self.facets
            .iter()
            .map(|f| constant * &f.mass + crate::exact::dot_rat(gradient, &f.m1))
            .sum()
    }
}

pub(super) fn compute(p: &DelzantPolytope) -> PolytopeMoments {
    let verts: Vec<(Vec<Rat>, Vec<usize>)> = p
        .vertices()
        .iter()
        .cloned()
        .zip(p.vertex_facets().iter().cloned())
        .collect();
    let (interior, facets) = polytope_moments(p.dim(), p.facets(), &verts);
    PolytopeMoments {
        volume: interior.mass,
        m1: interior.m1,
        m2: interior.m2,
        facets: facets
            .into_iter()
            .map(|f| f.expect("Delzant facets are all proper"))
            .collect(),
    }
}

/// Moments of a general rational H-polytope (not necessarily Delzant), given
/// its inequality list. Used for crease cuts in the stability probe.
///
/// Returns interior moments plus per-inequality facet moments (`None` when an
/// inequality carries no facet). A lower-dimensional or empty region yields
/// zero moments.
pub fn cut_moments(
    dim: usize,
    facets: &[Facet],
) -> (MomentData, Vec<Option<FacetMoments>>) {
    let verts = enumerate_vertices(dim, facets);
    polytope_moments(dim, facets, &verts)
}

fn polytope_moments(
    dim: usize,
    facets: &[Facet],
    verts: &[(Vec<Rat>, Vec<usize>)],
) -> (MomentData, Vec<Option<FacetMoments>>) {
    let mut interior = MomentData::zero(dim);
    let mut out: Vec<Option<FacetMoments>> = vec![None; facets.len()];
    if verts.is_empty() {
        return (interior, out);
    }
    // full-dimensionality check
    let v0 = &verts[0].0;
    let span: Vec<Vec<Rat>> = verts[1..]
        .iter()
        .map(|(v, _)| v.iter().zip(v0).map(|(a, b)| a - b).collect())
        .collect();
    if rank_rational(&span) < dim {
        return (interior, out);
    }
    // strictly interior base point: average of the vertices
    let count = rat(verts.len() as i64);
    let x0: Vec<Rat> = (0..dim)
        .map(|i| verts.iter().map(|(v, _)| v[i].clone()).sum::<Rat>() / &count)
        .collect();

    for (r, facet) in facets.iter().enumerate() {
        // duplicated inequalities (a crease equal to an original facet)
        // must not be double-counted in the pyramid decomposition
        if facets[..r].iter().any(|g| g == facet) {
            continue;
        }
        let on_facet: Vec<&Vec<Rat>> = verts
            .iter()
            .filter(|(_, active)| active.contains(&r))
            .map(|(v, _)| v)
            .collect();
        if on_facet.is_empty() {
            continue;
        }
        let face = facet_moments(dim, facets, r, &on_facet);
        let Some(face) = face else { continue };
        // pyramid over this facet from x0
        let d = facet.ell(&x0);
        debug_assert!(!d.is_negative());
        let m = rat(dim as i64);
        let vol = &d * &face.mass / &m;
        interior.mass += &vol;
        // m1: d * [ x0 * mass / (m(m+1)) + m1_f / (m+1) ]
        let mp1 = rat(dim as i64 + 1);
        let mp2 = rat(dim as i64 + 2);
        for i in 0..dim {
            interior.m1[i] +=
                &d * (&x0[i] * &face.mass / (&m * &mp1) + &face.m1[i] / &mp1);
        }
        // m2: d * [ x0 x0^T mass/m + (x0 (m1-mass x0)^T + sym)/(m+1) + M2w/(m+2) ]
        for i in 0..dim {
            for j in 0..dim {
                let w1_i = &face.m1[i] - &face.mass * &x0[i];
                let w1_j = &face.m1[j] - &face.mass * &x0[j];
                let m2w = &face.m2[i][j] - &x0[i] * &face.m1[j] - &x0[j] * &face.m1[i]
                    + &face.mass * &x0[i] * &x0[j];
                let term = &x0[i] * &x0[j] * &face.mass / &m
                    + (&x0[i] * w1_j + &x0[j] * w1_i) / &mp1
                    + m2w / &mp2;
                interior.m2[i][j] += &d * term;
            }
        }
        out[r] = Some(face);
    }
    (interior, out)
}

/// `dsigma` moments of facet `r`, expressed in ambient coordinates.
fn facet_moments(
    dim: usize,
    facets: &[Facet],
    r: usize,
    on_facet: &[&Vec<Rat>],
) -> Option<FacetMoments> {
    let facet = &facets[r];
    if dim == 1 {
        // a point with dsigma-mass 1
        let v = on_facet[0];
        return Some(FacetMoments {
            mass: rat(1),
            m1: v.clone(),
            m2: vec![vec![&v[0] * &v[0]]],
        });
    }
    // affine span must be a hyperplane
    let w0 = on_facet[0];
    let span: Vec<Vec<Rat>> = on_facet[1..]
        .iter()
        .map(|v| v.iter().zip(w0).map(|(a, b)| a - b).collect())
        .collect();
    if rank_rational(&span) < dim - 1 {
        return None;
    }
    // lattice chart of the hyperplane {lambda . x = c}: x = base + B y
    let (basis, apex) = lattice_completion(facet.normal());
    let base: Vec<Rat> = apex.iter().map(|&a| rat(a) * facet.offset()).collect();
    // invert [B | apex] once to get facet coordinates of each vertex
    let mut cols: Vec<Vec<Rat>> = basis
        .iter()
        .map(|b| b.iter().map(|&x| rat(x)).collect())
        .collect();
    cols.push(apex.iter().map(|&x| rat(x)).collect());
    // rows of the matrix M with columns cols
    let mat: Vec<Vec<Rat>> = (0..dim)
        .map(|i| (0..dim).map(|j| cols[j][i].clone()).collect())
        .collect();
    let sub_verts: Vec<Vec<Rat>> = on_facet
        .iter()
        .map(|v| {
            let rhs: Vec<Rat> = v.iter().zip(&base).map(|(a, b)| a - b).collect();
            let y = solve_rational(&mat, &rhs).expect("unimodular chart");
            debug_assert!(y[dim - 1].is_zero());
            y[..dim - 1].to_vec()
        })
        .collect();
    // inherited inequalities in chart coordinates
    let mut sub_facets: Vec<Facet> = Vec::new();
    for (s, other) in facets.iter().enumerate() {
        if s == r {
            continue;
        }
        let mut normal: Vec<i64> = basis
            .iter()
            .map(|b| b.iter().zip(other.normal()).map(|(&x, &l)| x * l).sum())
            .collect();
        let g = gcd_slice(&normal).abs();
        if g == 0 {
            continue; // parallel to the facet
        }
        let mut offset = other.offset() - dot_int_rat(other.normal(), &base);
        if g != 1 {
            for x in normal.iter_mut() {
                *x /= g;
            }
            offset /= rat(g);
        }
        let cand = Facet { normal, offset };
        if !sub_facets.contains(&cand) {
            sub_facets.push(cand);
        }
    }
    // active sets of the sub-vertices
    let sub_vert_data: Vec<(Vec<Rat>, Vec<usize>)> = {
        let mut distinct: Vec<(Vec<Rat>, Vec<usize>)> = Vec::new();
        for y in sub_verts {
            if distinct.iter().any(|(v, _)| v == &y) {
                continue;
            }
            let active: Vec<usize> = sub_facets
                .iter()
                .enumerate()
                .filter(|(_, f)| f.ell(&y).is_zero())
                .map(|(i, _)| i)
                .collect();
            distinct.push((y, active));
        }
        distinct
    };
    let (sub, _) = polytope_moments(dim - 1, &sub_facets, &sub_vert_data);
    // push forward through x = base + B y
    let bmat = &basis;
    let mut m1 = vec![rat(0); dim];
    let mut m2 = vec![vec![rat(0); dim]; dim];
    let bm1: Vec<Rat> = (0..dim)
        .map(|i| {
            (0..dim - 1)
                .map(|k| rat(bmat[k][i]) * &sub.m1[k])
                .sum::<Rat>()
        })
        .collect();
    for i in 0..dim {
        m1[i] = &base[i] * &sub.mass + &bm1[i];
        for j in 0..dim {
            // B m2 B^T
            let mut quad = rat(0);
            for k in 0..dim - 1 {
                for l in 0..dim - 1 {
                    quad += rat(bmat[k][i]) * rat(bmat[l][j]) * &sub.m2[k][l];
                }
            }
            m2[i][j] = &base[i] * &base[j] * &sub.mass
                + &base[i] * &bm1[j]
                + &base[j] * &bm1[i]
                + quad;
        }
    }
    Some(FacetMoments {
        mass: sub.mass,
        m1,
        m2,
    })
}

/// Lattice length of a segment between two rational points along a primitive
/// integer direction; test helper for the `dsigma` convention.
#[cfg(test)]
fn lattice_length(a: &[Rat], b: &[Rat]) -> Rat {
    let diff: Vec<Rat> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let dir = crate::exact::primitive_direction(&diff).expect("nonzero segment");
    // scale s with diff = s * dir
    let k = dir.iter().position(|&d| d != 0).unwrap();
    &diff[k] / rat(dir[k])
}
