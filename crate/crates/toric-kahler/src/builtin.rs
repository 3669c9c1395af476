//! Built-in polytopes referenced by the test suite and the CLI.

use crate::exact::{parse_rat, rat, Rat};
use crate::polytope::{verify_delzant, DelzantPolytope, Facet, PolytopeError};

/// The interval (a, b).
pub fn interval(a: Rat, b: Rat) -> DelzantPolytope {
    verify_delzant(
        1,
        vec![
            Facet::new(vec![1], a).unwrap(),
            Facet::new(vec![-1], -b).unwrap(),
        ],
        "interval",
    )
    .expect("interval")
}

/// The Fano interval (-1, 1).
pub fn fano_interval() -> DelzantPolytope {
    relabel(interval(rat(-1), rat(1)), "fano-interval")
}

/// The unit square (0,1)^2; moment polytope of S^2 x S^2.
pub fn unit_square() -> DelzantPolytope {
    verify_delzant(
        2,
        vec![
            Facet::new(vec![1, 0], rat(0)).unwrap(),
            Facet::new(vec![0, 1], rat(0)).unwrap(),
            Facet::new(vec![-1, 0], rat(-1)).unwrap(),
            Facet::new(vec![0, -1], rat(-1)).unwrap(),
        ],
        "square",
    )
    .expect("unit square")
}

/// The Fano square (-1,1)^2.
pub fn fano_square() -> DelzantPolytope {
    verify_delzant(
        2,
        vec![
            Facet::new(vec![1, 0], rat(-1)).unwrap(),
            Facet::new(vec![0, 1], rat(-1)).unwrap(),
            Facet::new(vec![-1, 0], rat(-1)).unwrap(),
            Facet::new(vec![0, -1], rat(-1)).unwrap(),
        ],
        "fano-square",
    )
    .expect("fano square")
}

/// The unit simplex {x > 0, y > 0, x + y < 1}; moment polytope of CP^2.
pub fn unit_simplex() -> DelzantPolytope {
    verify_delzant(
        2,
        vec![
            Facet::new(vec![1, 0], rat(0)).unwrap(),
            Facet::new(vec![0, 1], rat(0)).unwrap(),
            Facet::new(vec![-1, -1], rat(-1)).unwrap(),
        ],
        "simplex",
    )
    .expect("unit simplex")
}

/// The anticanonical simplex of CP^2, centered at the origin.
pub fn cp2_anticanonical() -> DelzantPolytope {
    verify_delzant(
        2,
        vec![
            Facet::new(vec![1, 0], rat(-1)).unwrap(),
            Facet::new(vec![0, 1], rat(-1)).unwrap(),
            Facet::new(vec![-1, -1], rat(-1)).unwrap(),
        ],
        "cp2",
    )
    .expect("cp2 anticanonical")
}

/// The anticanonical polytope of the one-point blow-up of CP^2.
pub fn bl1cp2() -> DelzantPolytope {
    verify_delzant(
        2,
        vec![
            Facet::new(vec![1, 0], rat(-1)).unwrap(),
            Facet::new(vec![0, 1], rat(-1)).unwrap(),
            Facet::new(vec![-1, -1], rat(-1)).unwrap(),
            Facet::new(vec![1, 1], rat(-1)).unwrap(),
        ],
        "bl1cp2",
    )
    .expect("bl1cp2")
}

/// The unit square blown up at the origin corner: the extra inequality
/// `x + y > delta` cuts the corner for 0 < delta < 1.
pub fn square_blowup(delta: Rat) -> Result<DelzantPolytope, PolytopeError> {
    verify_delzant(
        2,
        vec![
            Facet::new(vec![1, 0], rat(0)).unwrap(),
            Facet::new(vec![0, 1], rat(0)).unwrap(),
            Facet::new(vec![-1, 0], rat(-1)).unwrap(),
            Facet::new(vec![0, -1], rat(-1)).unwrap(),
            Facet::new(vec![1, 1], delta.clone()).unwrap(),
        ],
        format!("pdelta:{}", crate::exact::format_rat(&delta)),
    )
}

fn relabel(p: DelzantPolytope, label: &str) -> DelzantPolytope {
    let facets = p.facets().to_vec();
    verify_delzant(p.dim(), facets, label).expect("relabel")
}

/// Resolve a builtin polytope by name. Recognized names: `interval`,
/// `fano-interval`, `square`, `fano-square`, `simplex`, `cp2`, `bl1cp2`,
/// and `pdelta:<rational>`.
pub fn by_name(name: &str) -> Option<DelzantPolytope> {
    if let Some(d) = name.strip_prefix("pdelta:") {
        let delta = parse_rat(d)?;
        return square_blowup(delta).ok();
    }
    match name {
        "interval" => Some(interval(rat(0), rat(1))),
        "fano-interval" => Some(fano_interval()),
        "square" => Some(unit_square()),
        "fano-square" => Some(fano_square()),
        "simplex" => Some(unit_simplex()),
        "cp2" => Some(cp2_anticanonical()),
        "bl1cp2" => Some(bl1cp2()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "interval",
    "fano-interval",
    "square",
    "fano-square",
    "simplex",
    "cp2",
    "bl1cp2",
    "pdelta:<rational>",
];
