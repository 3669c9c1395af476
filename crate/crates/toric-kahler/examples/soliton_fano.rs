//! Kahler-Ricci solitons on toric Fano surfaces: the soliton constants from
//! the convex minimization, and the Newton solve of rho = c . x on the
//! one-point blow-up of CP^2 (the Koiso soliton).
//!
//!     cargo run --release --example soliton_fano

use std::sync::Arc;
use toric_kahler::builtin;
use toric_kahler::soliton::*;
use toric_kahler::solver::solve_soliton_2d;

fn main() {
    for name in ["fano-interval", "fano-square", "cp2", "bl1cp2"] {
        let fano = Arc::new(builtin::by_name(name).unwrap())
            .fano_structure()
            .unwrap();
        let ctx = FanoContext::new(&fano);
        let r = soliton_constants(&ctx, 1e-10, 60).unwrap();
        println!(
            "{name:13} c = {:?} (|grad F| = {:.1e}, {} Newton steps)",
            r.c.iter().map(|c| (c * 1e9).round() / 1e9).collect::<Vec<_>>(),
            r.grad_norm,
            r.iterations,
        );
    }

    println!("\nsolving rho = c . x on bl1cp2 (33x33 grid):");
    let fano = Arc::new(builtin::bl1cp2()).fano_structure().unwrap();
    let ctx = FanoContext::new(&fano);
    let rep = solve_soliton_2d(&ctx, 33, 1e-5, 40).unwrap();
    let (kappa, c) = rep.fitted_affine.clone().unwrap();
    println!(
        "  {:?} in {} iterations; recovered rho = {kappa:.6} + ({:.9}, {:.9}) . x",
        rep.status, rep.iterations, c[0], c[1],
    );
}
