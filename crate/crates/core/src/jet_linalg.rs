//! Small dense linear algebra over the jet ring.

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Relative pivot threshold applied to the constant terms.
pub const PIVOT_TOL: f64 = 1e-12;

/// Square matrix of jets, row-major.
pub type JetMatrix = Vec<Vec<Jet>>;

pub fn truncate_matrix(m: &JetMatrix, order: usize) -> JetMatrix {
    m.iter().map(|row| row.iter().map(|j| j.truncate(order)).collect()).collect()
}

pub fn constant_part(m: &JetMatrix) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.iter().map(Jet::value).collect()).collect()
}

/// Gaussian elimination with partial pivoting on constant-term magnitude.
/// Returns the solutions for each right-hand side together with the determinant.
fn eliminate(m: &JetMatrix, rhs: &[Vec<Jet>]) -> Result<(Vec<Vec<Jet>>, Jet)> {
    let n = m.len();
    if n == 0 || m.iter().any(|r| r.len() != n) {
        return Err(Error::Jet("matrix must be square and non-empty".into()));
    }
    for r in rhs {
        if r.len() != n {
            return Err(Error::Jet("right-hand side length mismatch".into()));
        }
    }
    let mut a: JetMatrix = m.to_vec();
    let mut b: Vec<Vec<Jet>> = rhs.to_vec();
    let mut det = a[0][0].lift(1.0);
    for col in 0..n {
        let scale = a[col..].iter().flat_map(|row| row.iter().map(|j| j.value().abs())).fold(0.0_f64, f64::max);
        let (piv, pmag) =
            (col..n)
                .map(|r| (r, a[r][col].value().abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmag <= PIVOT_TOL * scale || pmag == 0.0 {
            return Err(Error::Singular(format!(
                "pivot {pmag:.3e} in column {col} below tolerance (scale {scale:.3e})"
            )));
        }
        if piv != col {
            a.swap(piv, col);
            for r in b.iter_mut() {
                r.swap(piv, col);
            }
            det = -det;
        }
        let pivot = a[col][col].clone();
        det = &det * &pivot;
        let inv = pivot.recip()?;
        for row in col + 1..n {
            let factor = &a[row][col] * &inv;
            for k in col..n {
                let t = &factor * &a[col][k];
                a[row][k] = &a[row][k] - &t;
            }
            for r in b.iter_mut() {
                let t = &factor * &r[col];
                r[row] = &r[row] - &t;
            }
        }
    }
    let mut solutions = Vec::with_capacity(b.len());
    for r in &b {
        let mut x: Vec<Jet> = vec![r[0].lift(0.0); n];
        for row in (0..n).rev() {
            let mut acc = r[row].clone();
            for k in row + 1..n {
                acc = &acc - &(&a[row][k] * &x[k]);
            }
            x[row] = acc.checked_div(&a[row][row])?;
        }
        solutions.push(x);
    }
    Ok((solutions, det))
}

/// Solve `m * x = rhs`.
pub fn solve(m: &JetMatrix, rhs: &[Jet]) -> Result<Vec<Jet>> {
    let (mut sols, _) = eliminate(m, &[rhs.to_vec()])?;
    Ok(sols.pop().expect("one right-hand side"))
}

/// Solve `m * x = rhs_k` for several right-hand sides at once.
pub fn solve_many(m: &JetMatrix, rhs: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    Ok(eliminate(m, rhs)?.0)
}

/// Determinant by cofactor expansion; exact in the ring and valid for
/// singular constant parts, which elimination cannot handle.
pub fn det(m: &JetMatrix) -> Jet {
    let n = m.len();
    match n {
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        _ => {
            let mut acc = m[0][0].lift(0.0);
            for col in 0..n {
                let minor: JetMatrix = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, j)| j.clone()).collect())
                    .collect();
                let term = &m[0][col] * &det(&minor);
                acc = if col % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

pub fn inverse(m: &JetMatrix) -> Result<JetMatrix> {
    let n = m.len();
    let proto = &m[0][0];
    let identity: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| proto.lift(if i == j { 1.0 } else { 0.0 })).collect()).collect();
    let cols = solve_many(m, &identity)?;
    // cols[j] is column j of the inverse
    Ok((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

pub fn mat_vec(m: &JetMatrix, v: &[Jet]) -> Vec<Jet> {
    m.iter()
        .map(|row| {
            let mut acc = row[0].lift(0.0);
            for (a, b) in row.iter().zip(v) {
                acc += &(a * b);
            }
            acc
        })
        .collect()
}

pub fn mat_mul(a: &JetMatrix, b: &JetMatrix) -> JetMatrix {
    let n = a.len();
    let p = b[0].len();
    (0..n)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let mut acc = a[i][0].lift(0.0);
                    for k in 0..b.len() {
                        acc += &(&a[i][k] * &b[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Jet {
        Jet::constant(v, 1, 3).unwrap()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let u = Jet::variable(0.2, 0, 1, 3).unwrap();
        let m = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]];
        let rhs = vec![u.clone(), (&u * &u).add_scalar(1.0)];
        let x = solve(&m, &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn diagonal_solve_gives_reciprocal() {
        let u = Jet::variable(0.0, 0, 1, 3).unwrap();
        let m = vec![vec![u.add_scalar(1.0), c(0.0)], vec![c(0.0), c(1.0)]];
        let x = solve(&m, &[c(1.0), c(1.0)]).unwrap();
        // 1/(1+u) = 1 - u + u^2 - u^3
        let expected = [1.0, -1.0, 1.0, -1.0];
        for (a, b) in x[0].coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_constant_part_rejected() {
        let u = Jet::variable(0.0, 0, 1, 3).unwrap();
        let m = vec![vec![c(1.0), c(2.0)], vec![c(2.0), u.add_scalar(4.0)]];
        assert!(matches!(solve(&m, &[c(1.0), c(1.0)]), Err(Error::Singular(_))));
    }

    #[test]
    fn det_and_elimination_agree() {
        let u = Jet::variable(0.3, 0, 1, 3).unwrap();
        let m = vec![
            vec![u.add_scalar(2.0), c(1.0), &u * &u],
            vec![c(0.5), u.analytic(crate::jet::Analytic::Exp).unwrap(), c(-1.0)],
            vec![u.clone(), c(3.0), u.add_scalar(1.0)],
        ];
        let (_, d1) = eliminate(&m, &[]).unwrap();
        let d2 = det(&m);
        for (a, b) in d1.coeffs().iter().zip(d2.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
        let inv = inverse(&m).unwrap();
        let prod = mat_mul(&m, &inv);
        for (i, row) in prod.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((e.value() - target).abs() < 1e-13);
                assert!(e.coeffs()[1..].iter().all(|x| x.abs() < 1e-12));
            }
        }
    }
}
