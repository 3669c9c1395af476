//! Count lattice points of dilated polytopes: (k+1)^2 for the unit square,
//! the triangular numbers for the simplex.
//!
//!     cargo run --release --example lattice_counts

use toric_kahler::builtin;

fn main() {
    let square = builtin::unit_square();
    let simplex = builtin::unit_simplex();
    println!("k | square (k+1)^2 | simplex (k+1)(k+2)/2");
    for k in 1..=8u64 {
        println!(
            "{k} | {:14} | {}",
            square.lattice_points(k).len(),
            simplex.lattice_points(k).len(),
        );
    }
    println!("\nsquare k=1 points: {:?}", square.lattice_points(1));
}
