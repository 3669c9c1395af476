//! The Legendre transform between symplectic and Kahler potentials: the
//! round-sphere pair u = x log x + (1-x) log(1-x) and phi = log(1 + e^t),
//! the involution property, and the sup-distance isometry.
//!
//!     cargo run --release --example legendre_duality

use std::sync::Arc;
use toric_kahler::builtin;
use toric_kahler::exact::rat;
use toric_kahler::potential::*;

fn main() {
    let p = Arc::new(builtin::interval(rat(0), rat(1)));
    let u = SymplecticPotential::guillemin(Arc::clone(&p));
    let phi = legendre_to_kahler(&u);
    println!("t      phi(t)        log(1+e^t)");
    for t in [-4.0f64, -1.0, 0.0, 1.0, 4.0] {
        println!(
            "{t:5.1}  {:.12}  {:.12}",
            phi.value(&[t]).unwrap(),
            (1.0 + t.exp()).ln()
        );
    }

    // involution through the dual space
    let back = legendre_to_symplectic(&phi, Arc::clone(&p)).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..100 {
        let x = k as f64 / 100.0;
        worst = worst.max((u.value(&[x]).unwrap() - back.value(&[x]).unwrap()).abs());
    }
    println!("\ninvolution sup gap on (0,1): {worst:.2e}");

    // the Legendre transform is an isometry for the sup distance
    let perturbed = u.perturbed(1.0, Arc::new(PolyCorrection::from_coeffs_1d(&[0.0, 0.1, -0.1])));
    let primal = sup_distance(&u, &perturbed, 400);
    let dual = sup_distance_dual(&phi, &legendre_to_kahler(&perturbed), 30.0, 60).unwrap();
    println!("sup|u1-u2| = {primal:.8}, sup|phi1-phi2| = {dual:.8}");
}
