//! Moment polytopes: facet representation, the Delzant test, lattice points,
//! exact moments of interior and boundary measures, and Fano centers.
//!
//! A polytope is stored by its defining inequalities `lambda_r(x) > c_r` with
//! primitive integer normals and rational offsets. The Delzant condition is a
//! lattice statement, so every combinatorial question here is answered in
//! exact arithmetic.

mod moments;
mod quadrature;

pub use moments::{cut_moments, FacetMoments, MomentData, PolytopeMoments};
pub use quadrature::{build_quadrature, gauss_legendre, graded_boundary_rule, QuadratureScheme};

use crate::exact::{
    self, dot_int_rat, gcd_slice, int_det, parse_rat, rank_rational, rat, rat_ceil, rat_floor,
    solve_rational, Rat,
};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::{Arc, OnceLock};
use thiserror::Error;

/// One defining inequality `normal . x > offset` of a polytope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    normal: Vec<i64>,
    offset: Rat,
}

impl Facet {
    /// Build a facet, normalizing nothing: the normal must already be
    /// primitive (nonzero, gcd of entries 1).
    pub fn new(normal: Vec<i64>, offset: Rat) -> Result<Self, PolytopeError> {
        if gcd_slice(&normal).abs() != 1 {
            return Err(PolytopeError::NonPrimitiveNormal {
                normal: normal.clone(),
            });
        }
        Ok(Facet { normal, offset })
    }

    pub fn normal(&self) -> &[i64] {
        &self.normal
    }

    pub fn offset(&self) -> &Rat {
        &self.offset
    }

    /// The affine function `ell_r(x) = normal . x - offset`, positive inside.
    pub fn ell(&self, x: &[Rat]) -> Rat {
        dot_int_rat(&self.normal, x) - &self.offset
    }

    /// Euclidean norm of the primitive normal.
    pub fn normal_norm(&self) -> f64 {
        self.normal
            .iter()
            .map(|&a| (a * a) as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// `ell_r` in floating point.
    pub fn ell_f64(&self, x: &[f64]) -> f64 {
        self.normal
            .iter()
            .zip(x)
            .map(|(&a, &xi)| a as f64 * xi)
            .sum::<f64>()
            - exact::to_f64(&self.offset)
    }
}

fn fmt_point(v: &[Rat]) -> String {
    let coords: Vec<String> = v.iter().map(exact::format_rat).collect();
    format!("({})", coords.join(", "))
}

#[derive(Debug, Error)]
pub enum PolytopeError {
    #[error("facet normal {normal:?} is not primitive")]
    NonPrimitiveNormal { normal: Vec<i64> },
    #[error("facet {facet} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        facet: usize,
        expected: usize,
        got: usize,
    },
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("polytope has empty interior")]
    EmptyInterior,
    #[error("vertex {} lies on more than {n} facets", fmt_point(vertex))]
    NonSimpleVertex { vertex: Vec<Rat>, n: usize },
    #[error("facet normals at vertex {} have |det| = {det}, not 1", fmt_point(vertex))]
    NonUnimodularVertex { vertex: Vec<Rat>, det: u64 },
    #[error("facet {facet} is redundant: it carries no face of the polytope")]
    RedundantFacet { facet: usize },
    #[error("polytope is not Fano: {reason}")]
    NotFano { reason: String },
    #[error("{what} is only supported in dimensions 1 and 2, got {dim}")]
    UnsupportedDimension { dim: usize, what: &'static str },
    #[error("invalid polytope file: {0}")]
    BadFile(String),
}

/// A Delzant polytope: bounded, full-dimensional, simple, with unimodular
/// vertex normal bases. Construct through [`verify_delzant`].
#[derive(Debug, Clone)]
pub struct DelzantPolytope {
    dim: usize,
    facets: Vec<Facet>,
    label: String,
    vertices: Vec<Vec<Rat>>,
    /// facet indices active at each vertex, parallel to `vertices`
    vertex_facets: Vec<Vec<usize>>,
    moments: OnceLock<Arc<PolytopeMoments>>,
    float: OnceLock<FloatGeometry>,
}

/// Floating-point view of the polytope geometry, cached for numerics.
#[derive(Debug, Clone)]
pub struct FloatGeometry {
    pub vertices: Vec<Vec<f64>>,
    pub normals: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    /// average of the vertices; strictly interior
    pub center: Vec<f64>,
    pub diameter: f64,
    /// radius of the largest coordinate box around `center` inside the polytope
    pub margin: f64,
}

/// Enumerate the vertices of `{x : normal_r . x >= offset_r}` exactly.
///
/// Returns distinct feasible points together with the full active set of each.
fn enumerate_vertices(
    dim: usize,
    facets: &[Facet],
) -> Vec<(Vec<Rat>, Vec<usize>)> {
    let m = facets.len();
    let mut found: Vec<(Vec<Rat>, Vec<usize>)> = Vec::new();
    let mut subset = vec![0usize; dim];
    enumerate_subsets(m, dim, &mut subset, 0, 0, &mut |chosen| {
        let rows: Vec<Vec<i64>> = chosen.iter().map(|&r| facets[r].normal.clone()).collect();
        if int_det(&rows) == 0 {
            return;
        }
        let a: Vec<Vec<Rat>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| rat(x)).collect())
            .collect();
        let b: Vec<Rat> = chosen.iter().map(|&r| facets[r].offset.clone()).collect();
        let Some(x) = solve_rational(&a, &b) else {
            return;
        };
        if facets.iter().any(|f| f.ell(&x).is_negative()) {
            return;
        }
        if !found.iter().any(|(v, _)| v == &x) {
            let active: Vec<usize> = facets
                .iter()
                .enumerate()
                .filter(|(_, f)| f.ell(&x).is_zero())
                .map(|(i, _)| i)
                .collect();
            found.push((x, active));
        }
    });
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    found
}

fn enumerate_subsets(
    m: usize,
    k: usize,
    buf: &mut Vec<usize>,
    depth: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        f(buf);
        return;
    }
    for i in start..m {
        buf[depth] = i;
        enumerate_subsets(m, k, buf, depth + 1, i + 1, f);
    }
}

/// Does the recession cone `{d : normal_r . d >= 0}` contain a nonzero ray?
fn has_recession_ray(dim: usize, facets: &[Facet]) -> bool {
    let rows: Vec<Vec<Rat>> = facets
        .iter()
        .map(|f| f.normal.iter().map(|&x| rat(x)).collect())
        .collect();
    if rank_rational(&rows) < dim {
        // the cone contains a line
        return true;
    }
    // the cone is pointed; a nonzero ray must be extreme, hence lie on
    // dim-1 independent active constraints
    let m = facets.len();
    if dim == 1 {
        // extreme rays of a pointed 1-d cone are +-1
        for d in [vec![rat(1)], vec![rat(-1)]] {
            if facets.iter().all(|f| !dot_int_rat(&f.normal, &d).is_negative()) {
                return true;
            }
        }
        return false;
    }
    let mut subset = vec![0usize; dim - 1];
    let mut hit = false;
    enumerate_subsets(m, dim - 1, &mut subset, 0, 0, &mut |chosen| {
        if hit {
            return;
        }
        // kernel of the chosen normals
        let rows: Vec<Vec<Rat>> = chosen
            .iter()
            .map(|&r| facets[r].normal.iter().map(|&x| rat(x)).collect())
            .collect();
        if rank_rational(&rows) != dim - 1 {
            return;
        }
        let Some(d) = kernel_direction(dim, &rows) else {
            return;
        };
        for cand in [d.clone(), d.iter().map(|x| -x).collect::<Vec<Rat>>()] {
            if facets
                .iter()
                .all(|f| !dot_int_rat(&f.normal, &cand).is_negative())
            {
                hit = true;
                return;
            }
        }
    });
    hit
}

/// A nonzero kernel vector of a rank dim-1 system of rows in Q^dim.
fn kernel_direction(dim: usize, rows: &[Vec<Rat>]) -> Option<Vec<Rat>> {
    // append each coordinate hyperplane until the system becomes invertible
    // with rhs e_last; the solution is then a kernel direction candidate
    for fix in 0..dim {
        let mut a = rows.to_vec();
        let mut e = vec![rat(0); dim];
        e[fix] = rat(1);
        a.push(e);
        let mut b = vec![rat(0); dim - 1];
        b.push(rat(1));
        if let Some(x) = solve_rational(&a, &b) {
            return Some(x);
        }
    }
    None
}

/// Check the Delzant conditions and enumerate the vertex structure.
pub fn verify_delzant(
    dim: usize,
    facets: Vec<Facet>,
    label: impl Into<String>,
) -> Result<DelzantPolytope, PolytopeError> {
    assert!(dim >= 1, "dimension must be positive");
    for (i, f) in facets.iter().enumerate() {
        if f.normal.len() != dim {
            return Err(PolytopeError::DimensionMismatch {
                facet: i,
                expected: dim,
                got: f.normal.len(),
            });
        }
    }
    for (i, f) in facets.iter().enumerate() {
        if facets[..i].iter().any(|g| g == f) {
            return Err(PolytopeError::RedundantFacet { facet: i });
        }
    }
    if has_recession_ray(dim, &facets) {
        return Err(PolytopeError::Unbounded);
    }
    let vertices = enumerate_vertices(dim, &facets);
    if vertices.is_empty() {
        return Err(PolytopeError::EmptyInterior);
    }
    // full-dimensionality: vertices must affinely span R^dim
    let v0 = &vertices[0].0;
    let span: Vec<Vec<Rat>> = vertices[1..]
        .iter()
        .map(|(v, _)| v.iter().zip(v0).map(|(a, b)| a - b).collect())
        .collect();
    if rank_rational(&span) < dim {
        return Err(PolytopeError::EmptyInterior);
    }
    for (v, active) in &vertices {
        if active.len() > dim {
            return Err(PolytopeError::NonSimpleVertex {
                vertex: v.clone(),
                n: dim,
            });
        }
        debug_assert_eq!(active.len(), dim, "bounded simple vertex has n facets");
        let rows: Vec<Vec<i64>> = active.iter().map(|&r| facets[r].normal.clone()).collect();
        let det = int_det(&rows).abs();
        if det != 1 {
            return Err(PolytopeError::NonUnimodularVertex {
                vertex: v.clone(),
                det: det.to_u64().unwrap_or(u64::MAX),
            });
        }
    }
    for (r, _) in facets.iter().enumerate() {
        if !vertices.iter().any(|(_, active)| active.contains(&r)) {
            return Err(PolytopeError::RedundantFacet { facet: r });
        }
    }
    let (vertices, vertex_facets) = vertices.into_iter().unzip();
    Ok(DelzantPolytope {
        dim,
        facets,
        label: label.into(),
        vertices,
        vertex_facets,
        moments: OnceLock::new(),
        float: OnceLock::new(),
    })
}

impl DelzantPolytope {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Vertices in lexicographic order.
    pub fn vertices(&self) -> &[Vec<Rat>] {
        &self.vertices
    }

    /// Indices of the facets through each vertex.
    pub fn vertex_facets(&self) -> &[Vec<usize>] {
        &self.vertex_facets
    }

    /// Exact interior/boundary moments, computed once.
    pub fn moments(&self) -> &PolytopeMoments {
        self.moments
            .get_or_init(|| Arc::new(moments::compute(self)))
    }

    pub fn volume(&self) -> Rat {
        self.moments().volume.clone()
    }

    pub fn boundary_volume(&self) -> Rat {
        self.moments().boundary_volume()
    }

    pub fn barycenter(&self) -> Vec<Rat> {
        self.moments().barycenter()
    }

    /// Center of mass of the boundary under the lattice measure `dsigma`.
    pub fn boundary_barycenter(&self) -> Vec<Rat> {
        self.moments().boundary_barycenter()
    }

    /// Floating-point geometry, cached.
    pub fn float(&self) -> &FloatGeometry {
        self.float.get_or_init(|| {
            let vertices: Vec<Vec<f64>> = self
                .vertices
                .iter()
                .map(|v| v.iter().map(exact::to_f64).collect())
                .collect();
            let normals: Vec<Vec<f64>> = self
                .facets
                .iter()
                .map(|f| f.normal.iter().map(|&a| a as f64).collect())
                .collect();
            let offsets: Vec<f64> = self
                .facets
                .iter()
                .map(|f| exact::to_f64(f.offset()))
                .collect();
            let n = self.dim;
            let mut center = vec![0.0; n];
            for v in &vertices {
                for i in 0..n {
                    center[i] += v[i];
                }
            }
            for c in center.iter_mut() {
                *c /= vertices.len() as f64;
            }
            let mut diameter: f64 = 0.0;
            for (i, v) in vertices.iter().enumerate() {
                for w in &vertices[i + 1..] {
                    let d: f64 = v
                        .iter()
                        .zip(w)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    diameter = diameter.max(d);
                }
            }
            // largest sup-norm box around the center inside P
            let mut margin = f64::INFINITY;
            for (nrm, off) in normals.iter().zip(&offsets) {
                let slack: f64 =
                    nrm.iter().zip(&center).map(|(a, c)| a * c).sum::<f64>() - off;
                let l1: f64 = nrm.iter().map(|a| a.abs()).sum();
                margin = margin.min(slack / l1);
            }
            FloatGeometry {
                vertices,
                normals,
                offsets,
                center,
                diameter,
                margin,
            }
        })
    }

    /// Is `x` strictly inside, by at least `slack` in every `ell_r`?
    pub fn contains_f64(&self, x: &[f64], slack: f64) -> bool {
        self.facets.iter().all(|f| f.ell_f64(x) > slack)
    }

    /// Distance budget for finite-difference stencils at `x`: the largest `h`
    /// such that the sup-norm box of radius `h` stays inside the polytope.
    pub fn stencil_margin(&self, x: &[f64]) -> f64 {
        let g = self.float();
        let mut m = f64::INFINITY;
        for (nrm, off) in g.normals.iter().zip(&g.offsets) {
            let slack: f64 = nrm.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() - off;
            let l1: f64 = nrm.iter().map(|a| a.abs()).sum();
            m = m.min(slack / l1);
        }
        m
    }

    /// All lattice points of the dilate `k * closure(P)`, lexicographic.
    pub fn lattice_points(&self, k: u64) -> Vec<Vec<i64>> {
        assert!(k >= 1, "dilation factor must be positive");
        let k = BigInt::from(k);
        let n = self.dim;
        let mut lo = vec![BigInt::zero(); n];
        let mut hi = vec![BigInt::zero(); n];
        for i in 0..n {
            let mut min: Option<Rat> = None;
            let mut max: Option<Rat> = None;
            for v in &self.vertices {
                let c = &v[i] * Rat::from_integer(k.clone());
                if min.as_ref().is_none_or(|m| &c < m) {
                    min = Some(c.clone());
                }
                if max.as_ref().is_none_or(|m| &c > m) {
                    max = Some(c);
                }
            }
            lo[i] = rat_ceil(&min.unwrap());
            hi[i] = rat_floor(&max.unwrap());
        }
        let mut out = Vec::new();
        let mut point = lo.clone();
        'outer: loop {
            let xr: Vec<Rat> = point.iter().map(|c| Rat::from_integer(c.clone())).collect();
            let inside = self.facets.iter().all(|f| {
                let val = dot_int_rat(f.normal(), &xr)
                    - f.offset() * Rat::from_integer(k.clone());
                !val.is_negative()
            });
            if inside {
                out.push(
                    point
                        .iter()
                        .map(|c| c.to_i64().expect("lattice point out of i64 range"))
                        .collect(),
                );
            }
            // lexicographic increment from the last coordinate
            for i in (0..n).rev() {
                point[i] += 1;
                if point[i] <= hi[i] {
                    continue 'outer;
                }
                point[i] = lo[i].clone();
                if i == 0 {
                    break 'outer;
                }
            }
            if n == 0 {
                break;
            }
        }
        out.sort();
        out
    }

    /// Solve for the Fano center `nu0` with `ell_r(nu0) = 1` for every facet.
    pub fn fano_structure(self: &Arc<Self>) -> Result<FanoPolytope, PolytopeError> {
        let n = self.dim;
        let rows: Vec<Vec<Rat>> = self
            .facets
            .iter()
            .map(|f| f.normal.iter().map(|&x| rat(x)).collect())
            .collect();
        let rhs: Vec<Rat> = self.facets.iter().map(|f| f.offset() + rat(1)).collect();
        // solve an invertible n-row subsystem, then check the rest
        let mut chosen: Vec<usize> = Vec::new();
        let mut basis: Vec<Vec<Rat>> = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let mut trial = basis.clone();
            trial.push(row.clone());
            if rank_rational(&trial) == trial.len() {
                basis = trial;
                chosen.push(i);
                if basis.len() == n {
                    break;
                }
            }
        }
        if basis.len() < n {
            return Err(PolytopeError::NotFano {
                reason: "facet normals do not span".into(),
            });
        }
        let b: Vec<Rat> = chosen.iter().map(|&i| rhs[i].clone()).collect();
        let nu0 = solve_rational(&basis, &b).ok_or_else(|| PolytopeError::NotFano {
            reason: "degenerate facet system".into(),
        })?;
        for (f, want) in self.facets.iter().zip(&rhs) {
            if &dot_int_rat(f.normal(), &nu0) != want {
                return Err(PolytopeError::NotFano {
                    reason: "no common center at lattice distance 1 from every facet".into(),
                });
            }
        }
        if self
            .facets
            .iter()
            .any(|f| !f.ell(&nu0).is_positive())
        {
            return Err(PolytopeError::NotFano {
                reason: format!("center {} is not interior", fmt_point(&nu0)),
            });
        }
        Ok(FanoPolytope {
            base: Arc::clone(self),
            center: nu0,
        })
    }

    /// Parse the polytope JSON file format.
    pub fn from_json(text: &str) -> Result<DelzantPolytope, PolytopeError> {
        let file: PolytopeFile =
            serde_json::from_str(text).map_err(|e| PolytopeError::BadFile(e.to_string()))?;
        let mut facets = Vec::new();
        for f in &file.facets {
            let offset = parse_rat(&f.offset)
                .ok_or_else(|| PolytopeError::BadFile(format!("bad offset {:?}", f.offset)))?;
            facets.push(Facet::new(f.normal.clone(), offset)?);
        }
        verify_delzant(file.dim, facets, file.label.unwrap_or_default())
    }

    pub fn to_json(&self) -> String {
        let file = PolytopeFile {
            dim: self.dim,
            facets: self
                .facets
                .iter()
                .map(|f| FacetFile {
                    normal: f.normal.clone(),
                    offset: exact::format_rat(f.offset()),
                })
                .collect(),
            label: Some(self.label.clone()),
        };
        serde_json::to_string_pretty(&file).expect("polytope serialization")
    }
}

impl fmt::Display for DelzantPolytope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (dim {}, {} facets, {} vertices)",
            if self.label.is_empty() { "polytope" } else { &self.label },
            self.dim,
            self.facets.len(),
            self.vertices.len()
        )
    }
}

#[derive(Serialize, Deserialize)]
struct PolytopeFile {
    dim: usize,
    facets: Vec<FacetFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct FacetFile {
    normal: Vec<i64>,
    offset: String,
}

/// A Delzant polytope with its anticanonical center: `ell_r(center) = 1`
/// for every facet.
#[derive(Debug, Clone)]
pub struct FanoPolytope {
    base: Arc<DelzantPolytope>,
    center: Vec<Rat>,
}

impl FanoPolytope {
    pub fn base(&self) -> &Arc<DelzantPolytope> {
        &self.base
    }

    pub fn center(&self) -> &[Rat] {
        &self.center
    }

    pub fn center_f64(&self) -> Vec<f64> {
        self.center.iter().map(exact::to_f64).collect()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }
}
