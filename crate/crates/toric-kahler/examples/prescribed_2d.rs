//! Newton iteration for the prescribed scalar curvature equation S(u) = A
//! on toric surfaces: the unit square with A = 4 (the product of round
//! spheres) and the simplex with A = 6 (Fubini-Study on CP^2).
//!
//!     cargo run --release --example prescribed_2d

use std::sync::Arc;
use toric_kahler::builtin;
use toric_kahler::exact::rat;
use toric_kahler::functional::AffineData;
use toric_kahler::solver::*;

fn main() {
    let square = Arc::new(builtin::unit_square());
    let a4 = AffineData::constant_fn(2, rat(4));
    // start away from the known solution to watch Newton work
    let grid = SolverGrid::new(&square, 17).unwrap();
    let v0: Vec<f64> = (0..grid.node_count())
        .map(|k| {
            let x = grid.node_point(k);
            0.05 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
        })
        .collect();
    let rep = solve_prescribed_2d(&square, &a4, 17, 1e-8, 40, Some(&v0)).unwrap();
    println!(
        "square, A=4: {:?} in {} iterations, residuals {:?}",
        rep.status,
        rep.iterations,
        rep.residual_history
            .iter()
            .map(|r| format!("{r:.1e}"))
            .collect::<Vec<_>>(),
    );

    let simplex = Arc::new(builtin::unit_simplex());
    let a6 = AffineData::constant_fn(2, rat(6));
    let rep = solve_prescribed_2d(&simplex, &a6, 17, 1e-6, 40, None).unwrap();
    println!(
        "simplex, A=6 (Fubini-Study): {:?}, final residual {:.2e}",
        rep.status,
        rep.residual_history.last().unwrap(),
    );
}
