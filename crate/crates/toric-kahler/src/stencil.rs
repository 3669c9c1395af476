//! Finite-difference stencil weights on arbitrary node sets.
//!
//! Weights come from the Fornberg recurrence, then get a tiny moment
//! correction so that derivative stencils of order >= 1 annihilate constants
//! exactly and stencils of order >= 2 annihilate affine functions exactly.
//! That makes curvature quantities exactly invariant under adding an affine
//! function to the potential, which downstream tests rely on.

/// Weights for the m-th derivative at `z` from samples at `nodes`.
///
/// Requires `nodes.len() > m`; accuracy order is `nodes.len() - m` for
/// smooth functions (higher at symmetric configurations).
pub fn fd_weights(z: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > m, "need more than {m} nodes for derivative order {m}");
    // Fornberg, Mathematics of Computation 51 (1988): generation of finite
    // difference formulas on arbitrarily spaced grids
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    let mut w: Vec<f64> = c.into_iter().map(|row| row[m]).collect();
    if m >= 1 {
        for _ in 0..3 {
            enforce_moments(z, nodes, m, &mut w);
        }
    }
    w
}

/// Project out the residual zeroth (and for m >= 2, first) moment so the
/// stencil kills constants (and affine functions) to the last bit.
fn enforce_moments(z: f64, nodes: &[f64], m: usize, w: &mut [f64]) {
    let n = nodes.len() as f64;
    let e0: f64 = w.iter().sum();
    if m == 1 {
        for wi in w.iter_mut() {
            *wi -= e0 / n;
        }
        return;
    }
    let d: Vec<f64> = nodes.iter().map(|x| x - z).collect();
    let sd: f64 = d.iter().sum();
    let sdd: f64 = d.iter().map(|x| x * x).sum();
    let e1: f64 = w.iter().zip(&d).map(|(wi, di)| wi * di).sum();
    // least-change correction w -= a + b d with sum and first moment matched
    let det = n * sdd - sd * sd;
    if det.abs() < 1e-300 {
        return;
    }
    let a = (e0 * sdd - e1 * sd) / det;
    let b = (n * e1 - e0 * sd) / det;
    for (wi, di) in w.iter_mut().zip(&d) {
        *wi -= a + b * di;
    }
}

/// Stencil offsets for a node inside a contiguous run, preferring a centered
/// window of `width` and shifting at the run ends.
///
/// `pos` is the node index within a run of length `len`; returns the window's
/// first index.
pub fn window_start(pos: usize, len: usize, width: usize) -> usize {
    let width = width.min(len);
    let half = width / 2;
    pos.saturating_sub(half).min(len - width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_second_derivative_fourth_order() {
        let nodes: Vec<f64> = (-2..=2).map(|i| i as f64 * 0.1).collect();
        let w = fd_weights(0.0, &nodes, 2);
        // classic (-1/12, 4/3, -5/2, 4/3, -1/12)/h^2
        let h2 = 0.01;
        let want = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (got, want) in w.iter().zip(want) {
            assert!((got - want / h2).abs() < 1e-9);
        }
    }

    #[test]
    fn exactness_on_polynomials() {
        // 6-node windows differentiate quintics exactly, centered or not
        let nodes: Vec<f64> = (0..6).map(|i| 0.3 + 0.05 * i as f64).collect();
        for m in 1..=4usize {
            for z in [nodes[0], 0.41, nodes[5]] {
                let w = fd_weights(z, &nodes, m);
                for deg in 0..=5usize {
                    let got: f64 = w
                        .iter()
                        .zip(&nodes)
                        .map(|(wi, x)| wi * x.powi(deg as i32))
                        .sum();
                    // derivative of x^deg of order m at z
                    let mut want = 1.0;
                    for k in 0..m {
                        want *= (deg as f64) - k as f64;
                    }
                    let want = if deg < m {
                        0.0
                    } else {
                        want * z.powi((deg - m) as i32)
                    };
                    assert!(
                        (got - want).abs() < 1e-7 * (1.0 + want.abs()),
                        "m={m} deg={deg} z={z}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn affine_annihilation_below_roundoff() {
        let nodes: Vec<f64> = (0..6).map(|i| 1.0 + 0.07 * i as f64).collect();
        let w = fd_weights(1.1, &nodes, 2);
        // weight scale is ~1/h^2 = 200; the moment polish leaves residual
        // moments far below one ulp of that scale
        let on_const: f64 = w.iter().sum();
        let on_linear: f64 = w.iter().zip(&nodes).map(|(wi, x)| wi * (3.0 - 2.0 * x)).sum();
        assert!(on_const.abs() < 1e-13, "{on_const}");
        assert!(on_linear.abs() < 1e-12, "{on_linear}");
    }

    #[test]
    fn window_positions() {
        assert_eq!(window_start(0, 10, 5), 0);
        assert_eq!(window_start(5, 10, 5), 3);
        assert_eq!(window_start(9, 10, 5), 5);
        assert_eq!(window_start(2, 4, 6), 0);
    }
}
