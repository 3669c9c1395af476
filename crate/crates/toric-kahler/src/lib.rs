//! Numerical Kahler geometry on toric manifolds.
//!
//! A toric Kahler manifold is encoded by its moment polytope, and a
//! torus-invariant metric by a convex symplectic potential on that polytope.
//! This crate provides, at desk scale:
//!
//! - exact lattice geometry of Delzant polytopes ([`polytope`]): facet
//!   representation, the Delzant test, lattice points, rational moments, and
//!   the lattice-normalized boundary measure;
//! - symplectic and Kahler potentials with the Legendre transform between
//!   them ([`potential`]);
//! - curvature operators in symplectic coordinates ([`curvature`]), including
//!   the scalar curvature as second derivatives of the inverse Hessian and a
//!   weighted variant for multiplicity-free geometries;
//! - the stability machinery ([`functional`]): the linear functional `L_A`,
//!   the Mabuchi-type functional, the toric Futaki invariant, the extremal
//!   affine target, and a piecewise-linear stability probe;
//! - the Ricci-soliton algebra on Fano polytopes ([`soliton`]): soliton
//!   constants, the weighted inner products, the second-variation operator,
//!   and its integral identities as numerical checks;
//! - algebraic metrics and their large-degree asymptotics ([`asymptotics`]);
//! - closed-form 1d and grid-based 2d solvers for the prescribed scalar
//!   curvature and soliton equations ([`solver`]), with a minimizing-sequence
//!   probe that watches for collapse along piecewise-linear directions;
//! - a command-line front end ([`cli`]) behind the thin `toric` binary.
//!
//! The `examples/` directory has one runnable example per capability; start
//! with `cargo run --release --example check_delzant`.

pub mod asymptotics;
pub mod builtin;
pub mod cli;
pub mod curvature;
pub mod dualquad;
pub mod exact;
pub mod functional;
pub mod polytope;
pub mod potential;
pub mod soliton;
pub mod solver;
pub mod stencil;

pub use polytope::{
    build_quadrature, verify_delzant, DelzantPolytope, Facet, FanoPolytope, PolytopeError,
    QuadratureScheme,
};
pub use potential::{GridFunction, KahlerPotential, SymplecticPotential};
