//! Exact rational and integer linear algebra for lattice geometry.
//!
//! Everything combinatorial about a moment polytope (vertices, the Delzant
//! test, moments of the lattice-normalized boundary measure) is decided in
//! exact arithmetic; floating point enters only when quadrature nodes are
//! generated.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational p/q.
pub fn ratio(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Serialize as `p/q`, or just `p` when the denominator is 1.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse `p/q` or a bare integer `p`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(Rat::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().ok()?;
            Some(Rat::from_integer(p))
        }
    }
}

/// gcd of a slice, zero for an all-zero slice.
pub fn gcd_slice(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| g.gcd(&x))
}

/// Integer determinant of a square matrix given by rows.
pub fn int_det(rows: &[Vec<i64>]) -> i128 {
    let n = rows.len();
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    // fraction-free Gaussian elimination (Bareiss)
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            let swap = (k + 1..n).find(|&i| m[i][k] != 0);
            match swap {
                Some(i) => {
                    m.swap(k, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

/// Solve an n-by-n rational system `a x = b`. Returns `None` when singular.
pub fn solve_rational(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    for k in 0..n {
        let pivot = (k..n).find(|&i| !m[i][k].is_zero())?;
        m.swap(k, pivot);
        let p = m[k][k].clone();
        for j in k..=n {
            m[k][j] = &m[k][j] / &p;
        }
        for i in 0..n {
            if i != k && !m[i][k].is_zero() {
                let f = m[i][k].clone();
                for j in k..=n {
                    let sub = &f * &m[k][j];
                    m[i][j] = &m[i][j] - sub;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

/// Rank of a rational matrix.
pub fn rank_rational(rows: &[Vec<Rat>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let mut rank = 0;
    for col in 0..ncols {
        let pivot = (rank..m.len()).find(|&i| !m[i][col].is_zero());
        let Some(p) = pivot else { continue };
        m.swap(rank, p);
        let pv = m[rank][col].clone();
        for j in 0..ncols {
            m[rank][j] = &m[rank][j] / &pv;
        }
        for i in 0..m.len() {
            if i != rank && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in 0..ncols {
                    let sub = &f * &m[rank][j];
                    m[i][j] = &m[i][j] - sub;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Unimodular completion of a primitive integer vector.
///
/// For primitive `lambda` returns `(basis, apex)` where `basis` spans the
/// sublattice `{v : lambda . v = 0}` of Z^n and `apex` satisfies
/// `lambda . apex = 1`; together they form a basis of Z^n.
pub fn lattice_completion(lambda: &[i64]) -> (Vec<Vec<i64>>, Vec<i64>) {
    let n = lambda.len();
    // columns of u, transformed so that lambda^T u = (0, ..., 0, g)
    let mut u: Vec<Vec<i64>> = (0..n)
        .map(|j| (0..n).map(|i| i64::from(i == j)).collect())
        .collect();
    let mut l: Vec<i64> = lambda.to_vec();
    // chain of extended-gcd column operations
    for j in 0..n - 1 {
        let (a, b) = (l[j], l[j + 1]);
        if a == 0 && b == 0 {
            continue;
        }
        let e = a.extended_gcd(&b);
        let (g, s, t) = (e.gcd, e.x, e.y);
        // new col j+1 = s*col_j + t*col_{j+1};  new col j = (-b/g)*col_j + (a/g)*col_{j+1}
        let cj = u[j].clone();
        let cj1 = u[j + 1].clone();
        for i in 0..n {
            u[j][i] = (-b / g) * cj[i] + (a / g) * cj1[i];
            u[j + 1][i] = s * cj[i] + t * cj1[i];
        }
        l[j] = 0;
        l[j + 1] = g;
    }
    debug_assert_eq!(l[n - 1].abs(), 1, "lambda must be primitive");
    if l[n - 1] == -1 {
        for x in u[n - 1].iter_mut() {
            *x = -*x;
        }
    }
    let apex = u.pop().unwrap();
    (u, apex)
}

/// Clear denominators and divide by the content, mapping a nonzero rational
/// vector to the primitive integer vector on the same ray.
pub fn primitive_direction(v: &[Rat]) -> Option<Vec<i64>> {
    if v.iter().all(|x| x.is_zero()) {
        return None;
    }
    let mut denom_lcm = BigInt::one();
    for x in v {
        denom_lcm = denom_lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&denom_lcm / x.denom())).collect();
    let mut g = BigInt::zero();
    for x in &ints {
        g = g.gcd(x);
    }
    ints.iter()
        .map(|x| (x / &g).to_i64())
        .collect::<Option<Vec<i64>>>()
}

pub fn dot_rat(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_int_rat(a: &[i64], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(&x, y)| rat(x) * y).sum()
}

/// Ceiling of a rational.
pub fn rat_ceil(r: &Rat) -> BigInt {
    r.ceil().to_integer()
}

/// Floor of a rational.
pub fn rat_floor(r: &Rat) -> BigInt {
    r.floor().to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_small() {
        assert_eq!(int_det(&[vec![1, 0], vec![-1, -2]]), -2);
        assert_eq!(int_det(&[vec![1, 0], vec![0, 1]]), 1);
        assert_eq!(int_det(&[vec![2, 1], vec![1, 1]]), 1);
        assert_eq!(int_det(&[vec![1, 2], vec![2, 4]]), 0);
    }

    #[test]
    fn solve_2x2() {
        let a = vec![vec![rat(1), rat(1)], vec![rat(1), rat(-1)]];
        let b = vec![rat(3), rat(1)];
        let x = solve_rational(&a, &b).unwrap();
        assert_eq!(x, vec![rat(2), rat(1)]);
    }

    #[test]
    fn completion_is_unimodular() {
        for lambda in [vec![1i64, 0], vec![0, 1], vec![-1, -1], vec![3, 5], vec![2, -3, 6, -1]] {
            let g = gcd_slice(&lambda).abs();
            assert_eq!(g, 1);
            let (basis, apex) = lattice_completion(&lambda);
            for b in &basis {
                let d: i64 = b.iter().zip(&lambda).map(|(x, l)| x * l).sum();
                assert_eq!(d, 0);
            }
            let d: i64 = apex.iter().zip(&lambda).map(|(x, l)| x * l).sum();
            assert_eq!(d, 1);
            let mut rows = basis.clone();
            rows.push(apex);
            assert_eq!(int_det(&rows).abs(), 1);
        }
    }

    #[test]
    fn rat_round_trip() {
        let r = parse_rat("-7/3").unwrap();
        assert_eq!(format_rat(&r), "-7/3");
        assert_eq!(parse_rat("4").unwrap(), rat(4));
        assert!(parse_rat("1/0").is_none());
        assert!(parse_rat("x").is_none());
    }

    #[test]
    fn primitive_direction_clears_denominators() {
        let v = vec![ratio(1, 2), ratio(-3, 4)];
        assert_eq!(primitive_direction(&v).unwrap(), vec![2, -3]);
        assert!(primitive_direction(&[rat(0), rat(0)]).is_none());
    }
}
