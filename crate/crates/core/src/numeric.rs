//! Scalar helpers shared by the geometry modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spread at or below `CONSTANT_REL * (1 + |magnitude|)` counts as constant.
pub const CONSTANT_REL: f64 = 1e-6;
/// Spread at or above this is decisively non-constant.
pub const GRAY_LIMIT: f64 = 1e-3;

pub type Mat = Vec<Vec<f64>>;

pub fn to_dmatrix(m: &Mat) -> DMatrix<f64> {
    let n = m.len();
    let p = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, p, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().flatten().fold(0.0, |a, b| a.max(b.abs()))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Angle in radians between two lines (direction-insensitive).
pub fn line_angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    let (na, nb) = (norm(a), norm(b));
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x / na - sign * y / nb).collect();
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x / na + sign * y / nb).collect();
    2.0 * norm(&diff).atan2(norm(&sum))
}

/// Eigenvalues of the symmetric pencil `B x = λ G x`, ascending, with
/// eigenvectors orthonormal in the `G` inner product (columns).
pub fn generalized_symmetric_eigen(g: &Mat, b: &Mat) -> Result<(Vec<f64>, Mat)> {
    let gm = to_dmatrix(g);
    let bm = to_dmatrix(b);
    let ge = SymmetricEigen::new(gm);
    if ge.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotConvex("metric is not positive definite".into()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&ge.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let g_inv_half = &ge.eigenvectors * inv_sqrt * ge.eigenvectors.transpose();
    let sym = &g_inv_half * bm * &g_inv_half;
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = &g_inv_half * &eig.eigenvectors;
    let sorted = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, order[c])]);
    Ok((values, from_dmatrix(&sorted)))
}

pub fn symmetric_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(to_dmatrix(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.len(), m.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, from_dmatrix(&vecs))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Elementary symmetric polynomials `e_0..e_n`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (count, &v) in values.iter().enumerate() {
        for r in (1..=count + 1).rev() {
            e[r] += v * e[r - 1];
        }
    }
    e
}

/// Normalized elementary symmetric functions `L_1..L_n`.
pub fn normalized_symmetric(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let e = elementary_symmetric(values);
    (1..=n).map(|r| e[r] / binomial(n, r)).collect()
}

/// Roots of `prod (t - λ_i)` from power sums `p_1..p_n` via Newton's identities.
pub fn roots_from_power_sums(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for k in 1..=n {
        let mut acc = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * p[i - 1];
        }
        e[k] = acc / k as f64;
    }
    // companion matrix of t^n - e1 t^{n-1} + e2 t^{n-2} - ...
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        comp[(0, k)] = sign * e[k + 1];
        if k + 1 < n {
            comp[(k + 1, k)] = 1.0;
        }
    }
    let mut roots: Vec<f64> = comp.complex_eigenvalues().iter().map(|z| z.re).collect();
    roots.sort_by(f64::total_cmp);
    roots
}

/// Least-squares polynomial fit; coefficients lowest degree first.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() || xs.len() <= degree {
        return Err(Error::Numerical(format!("polyfit needs more than {degree} samples, got {}", xs.len())));
    }
    // centre and scale for conditioning, then map coefficients back
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(xs.len(), degree + 1, |r, c| ((xs[r] - mid) / half).powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let t = svd.solve(&b, 1e-14).map_err(|e| Error::Numerical(format!("polyfit solve failed: {e}")))?;
    // p(x) = sum t_c ((x - mid)/half)^c ; expand into powers of x
    let mut coeffs = vec![0.0; degree + 1];
    for (c, &tc) in t.iter().enumerate() {
        for k in 0..=c {
            coeffs[k] += tc * binomial(c, k) * (-mid).powi((c - k) as i32) / half.powi(c as i32);
        }
    }
    Ok(coeffs)
}

pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub fn polyder(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

/// Chebyshev nodes of the first kind on `[lo, hi]`, ascending.
pub fn chebyshev_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..count)
        .map(|k| {
            let t = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        })
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes
}

/// Three-way constancy verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constancy {
    Constant,
    NonConstant,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub verdict: Constancy,
}

impl Spread {
    /// Left-to-right reduction, so results do not depend on thread scheduling.
    pub fn of(values: &[f64]) -> Spread {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = if values.is_empty() { 0.0 } else { max - min };
        let magnitude = min.abs().max(max.abs());
        let verdict = classify(spread, if magnitude.is_finite() { magnitude } else { 0.0 });
        Spread { min, max, spread, verdict }
    }
}

pub fn classify(spread: f64, magnitude: f64) -> Constancy {
    if spread <= CONSTANT_REL * (1.0 + magnitude) {
        Constancy::Constant
    } else if spread >= GRAY_LIMIT {
        Constancy::NonConstant
    } else {
        Constancy::Inconclusive
    }
}

/// Combine several verdicts: all constant, any non-constant, otherwise gray.
pub fn combine(verdicts: impl IntoIterator<Item = Constancy>) -> Constancy {
    let mut all_constant = true;
    for v in verdicts {
        match v {
            Constancy::NonConstant => return Constancy::NonConstant,
            Constancy::Inconclusive => all_constant = false,
            Constancy::Constant => {}
        }
    }
    if all_constant {
        Constancy::Constant
    } else {
        Constancy::Inconclusive
    }
}
