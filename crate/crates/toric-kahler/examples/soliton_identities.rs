//! The integral identities of the soliton operator Box f = u^{ij} f_ij -
//! x^i f_i + f: self-adjointness for the weighted inner products, the
//! second-variation identity, the boundedness identity, and the convexity
//! inequality, all checked by dual-space quadrature.
//!
//!     cargo run --release --example soliton_identities

use std::sync::Arc;
use toric_kahler::builtin;
use toric_kahler::soliton::*;

fn main() {
    let fano = Arc::new(builtin::fano_square()).fano_structure().unwrap();
    let u = FanoContext::new(&fano).guillemin();
    let fns = standard_test_functions(2, 3, 2, 42);
    let report = identity_suite(&u, &fns, 1e-7).unwrap();
    println!("identity suite on the Fano square ({} checks):", report.checks.len());
    let mut worst = (0.0f64, String::new());
    for c in &report.checks {
        if c.rel_gap > worst.0 {
            worst = (c.rel_gap, c.name.clone());
        }
    }
    for c in report.checks.iter().take(12) {
        println!(
            "  {:32} lhs {:+.9e} rhs {:+.9e} gap {:.1e} {}",
            c.name,
            c.lhs,
            c.rhs,
            c.gap,
            if c.pass { "ok" } else { "FAIL" },
        );
    }
    println!("  ... {} more", report.checks.len().saturating_sub(12));
    println!(
        "all pass: {} (worst relative gap {:.2e} at {:?})",
        report.pass, worst.0, worst.1
    );
}
