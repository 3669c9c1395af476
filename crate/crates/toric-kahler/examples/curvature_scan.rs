//! Abreu's scalar curvature in symplectic coordinates: constant 2 for the
//! round sphere, constant 4 for the product metric on the square, and the
//! full curvature sample with Ricci data at a point.
//!
//!     cargo run --release --example curvature_scan

use std::sync::Arc;
use toric_kahler::builtin;
use toric_kahler::curvature::*;
use toric_kahler::exact::rat;
use toric_kahler::potential::{GridFunction, SymplecticPotential};

fn main() {
    let sphere = SymplecticPotential::guillemin(Arc::new(builtin::interval(rat(0), rat(1))));
    print!("round sphere S(x): ");
    for x in [0.1, 0.3, 0.5, 0.7, 0.9] {
        print!("{:.10} ", abreu_scalar(&sphere, &[x]).unwrap());
    }
    println!();

    let c = curvature_tensor(&sphere, &[0.5]).unwrap();
    println!(
        "sample at x=1/2: S = {:.8}, G11 = {:.6}, |F|^2 = {:.6}, L = {:.6}",
        c.s, c.g[(0, 0)], c.norm_f2, c.log_det
    );

    let square = Arc::new(builtin::unit_square());
    let u = SymplecticPotential::guillemin(Arc::clone(&square));
    let template = GridFunction::sample(&square, 9, |_| 0.0);
    let field = curvature_field(&u, &template, FieldKind::Scalar).unwrap();
    println!("\nscalar curvature field on the unit square (9x9, NaN = boundary):");
    let mut csv = Vec::new();
    field.write_csv(&mut csv).unwrap();
    println!("{}", String::from_utf8(csv).unwrap());

    // the weighted operator reduces to the toric one at weight 1
    let w = ClosedWeight {
        value: |x: &[f64]| 1.0 + 0.0 * x[0],
        gradient: |_: &[f64]| vec![0.0],
    };
    let s_w = weighted_abreu(&sphere, &w, &[0.0], &[0.4]).unwrap();
    println!("weighted S at weight 1: {s_w:.10}");
}
