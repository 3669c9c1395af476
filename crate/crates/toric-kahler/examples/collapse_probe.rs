//! Collapse of minimizing sequences: on a destabilized blow-up of the
//! square, gradient descent on the Mabuchi functional grows the correction
//! along a piecewise-linear crease whose direction matches the certified
//! destabilizer from the exact crease scan.
//!
//!     cargo run --release --example collapse_probe

use std::sync::Arc;
use toric_kahler::builtin;
use toric_kahler::exact::ratio;
use toric_kahler::functional::*;
use toric_kahler::solver::minimizing_sequence_probe;

fn main() {
    let p = Arc::new(builtin::square_blowup(ratio(1, 2)).unwrap());
    let a = AffineData::constant_fn(2, constant_a(&p));

    let certified = stability_probe(&p, &a, 8);
    println!(
        "exact scan: {} with L_A = {} along normal {:?}, offset {}",
        certified.certificate, certified.value_exact, certified.crease_normal, certified.crease_offset,
    );

    let traj = minimizing_sequence_probe(&p, &a, 17, 4000).unwrap();
    println!("\ndescent trajectory:");
    for c in &traj.checkpoints {
        println!(
            "  step {:5} |v| {:.5} residual {:8.3} crease {:?}",
            c.step,
            c.v_max_norm,
            c.residual,
            c.crease_normal.as_ref().map(|n| {
                (((n[0] * 1000.0).round()) / 1000.0, ((n[1] * 1000.0).round()) / 1000.0)
            }),
        );
    }
    println!(
        "\nverdict: {:?}, witness crease L_A = {:?}",
        traj.status, traj.witness_l_a
    );
}
