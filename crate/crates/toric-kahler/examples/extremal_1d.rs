//! The 1d extremal equation (1/u'')'' = -A in closed form: on (0,1) with
//! A = 2 the solution is the round sphere, and targets other than the
//! extremal affine function are rejected as inconsistent.
//!
//!     cargo run --release --example extremal_1d

use std::sync::Arc;
use toric_kahler::builtin;
use toric_kahler::curvature::abreu_scalar;
use toric_kahler::exact::rat;
use toric_kahler::functional::AffineData;
use toric_kahler::solver::solve_extremal_1d;

fn main() {
    let p = Arc::new(builtin::interval(rat(0), rat(1)));
    let a = AffineData::constant_fn(1, rat(2));
    let u = solve_extremal_1d(&p, &a).unwrap();
    println!("x     u(x)            x log x + (1-x) log(1-x)   S(u)");
    for x in [0.1f64, 0.25, 0.5, 0.75, 0.9] {
        println!(
            "{x:.2}  {:+.12}  {:+.12}            {:.9}",
            u.value(&[x]).unwrap(),
            x * x.ln() + (1.0 - x) * (1.0 - x).ln(),
            abreu_scalar(&u, &[x]).unwrap(),
        );
    }

    let wrong = AffineData::constant_fn(1, rat(3));
    println!("\nA = 3: {}", solve_extremal_1d(&p, &wrong).unwrap_err());
}
