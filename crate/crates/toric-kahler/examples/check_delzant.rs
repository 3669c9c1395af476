//! Verify the Delzant conditions for the built-in polytopes and show how a
//! non-unimodular vertex is rejected.
//!
//!     cargo run --release --example check_delzant

use toric_kahler::exact::rat;
use toric_kahler::polytope::{verify_delzant, Facet};
use toric_kahler::builtin;

fn main() {
    for name in ["interval", "square", "simplex", "cp2", "bl1cp2", "pdelta:1/2"] {
        let p = builtin::by_name(name).expect("builtin");
        println!(
            "{name:12} dim {} facets {} vertices {}  volume {}",
            p.dim(),
            p.facets().len(),
            p.vertices().len(),
            toric_kahler::exact::format_rat(&p.volume()),
        );
    }

    // triangle with vertices (0,0), (2,0), (0,1): the normals meeting at
    // (0,1) span an index-2 sublattice, so the polytope is not Delzant
    let bad = verify_delzant(
        2,
        vec![
            Facet::new(vec![1, 0], rat(0)).unwrap(),
            Facet::new(vec![0, 1], rat(0)).unwrap(),
            Facet::new(vec![-1, -2], rat(-2)).unwrap(),
        ],
        "triangle",
    );
    match bad {
        Err(e) => println!("\ntriangle (0,0),(2,0),(0,1) rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
