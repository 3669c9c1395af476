//! Algebraic metrics and large-degree asymptotics: L^2 coefficients against
//! the Laplace approximation, the Veronese convolution against the central
//! limit theorem, and the density round trip.
//!
//!     cargo run --release --example bergman_asymptotics

use std::sync::Arc;
use toric_kahler::asymptotics::*;
use toric_kahler::builtin;
use toric_kahler::exact::rat;
use toric_kahler::potential::SymplecticPotential;

fn main() {
    let p = Arc::new(builtin::interval(rat(0), rat(1)));
    let u = SymplecticPotential::guillemin(Arc::clone(&p));

    println!("L^2 coefficients of the round sphere: |k^-1 log a_nu + u(nu)| at nu = 1/2");
    for k in [8u64, 16, 32, 64] {
        let a = l2_coefficients(&u, k).unwrap();
        let idx = a.points().iter().position(|pt| pt[0] as u64 == k / 2).unwrap();
        let (point, norm_log) = a.normalized_log(idx);
        let err = (norm_log + u.value(&point).unwrap()).abs();
        println!("  k = {k:2}: {err:.6} (bound 2 log k / k = {:.6})", 2.0 * (k as f64).ln() / k as f64);
    }

    println!("\nLaplace prefactor ratio -> 1 at nu = 1/2:");
    for k in [8u64, 16, 32, 64] {
        println!("  k = {k:2}: {:.8}", laplace_ratio(&u, &[0.5], k).unwrap());
    }

    let a1 = CoefficientVector::new(Arc::clone(&p), 1, &[1.0, 1.0]).unwrap();
    let b = veronese_convolution(&a1, 8).unwrap();
    println!("\nVeronese convolution of (1,1) at k = 8 (binomials):");
    let row: Vec<String> = b
        .log_weights()
        .iter()
        .map(|lw| format!("{:.0}", lw.exp()))
        .collect();
    println!("  {}", row.join(" "));

    println!("\ndensity round trip sup|phi_k/k - phi|:");
    for k in [8u64, 16, 32] {
        println!("  k = {k:2}: {:.6}", density_roundtrip(&u, k).unwrap());
    }
}
