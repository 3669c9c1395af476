//! The toric Futaki invariant, the extremal affine target, and the
//! single-crease stability probe, all on exact rational paths.
//!
//!     cargo run --release --example futaki_stability

use toric_kahler::builtin;
use toric_kahler::exact::{format_rat, ratio};
use toric_kahler::functional::*;

fn main() {
    for name in ["interval", "square", "cp2", "bl1cp2"] {
        let p = builtin::by_name(name).unwrap();
        let f: Vec<String> = futaki(&p).iter().map(format_rat).collect();
        let a = extremal_affine(&p);
        println!(
            "{name:8} futaki ({}) extremal A = {} + ({}) . x",
            f.join(", "),
            format_rat(&a.constant),
            a.gradient.iter().map(format_rat).collect::<Vec<_>>().join(", "),
        );
    }

    // the corner blow-up of the square has nonvanishing Futaki invariant,
    // and with the constant target the crease scan certifies instability
    println!("\nblow-up family P_delta of the unit square, constant A:");
    for num in [1i64, 3, 5, 7, 9] {
        let p = builtin::square_blowup(ratio(num, 10)).unwrap();
        let a = AffineData::constant_fn(2, constant_a(&p));
        let report = stability_probe(&p, &a, 8);
        println!(
            "  delta = {num}/10: min L_A = {} ({}), crease normal {:?} offset {}",
            report.value_exact, report.certificate, report.crease_normal, report.crease_offset,
        );
    }
}
