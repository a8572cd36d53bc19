//! Equiaffine invariants of a locally strongly convex hypersurface.
//!
//! Everything is computed on jets around one parameter point, so that each
//! quantity is available together with enough derivatives for the next
//! stage. Orders consumed, starting from a position jet of order `K`:
//!
//! | quantity                         | order  |
//! |----------------------------------|--------|
//! | `x_i`, transversal               | `K-1`  |
//! | `x_ij`, `h`, `H`, `G`            | `K-2`  |
//! | Levi-Civita, `Y`, `Γ`, `A`       | `K-3`  |
//! | `Y_i`, `B`                       | `K-4`  |
//!
//! The first `n` jet variables are the surface parameters. Any further jet
//! variables are carried along untouched (used for one-parameter families).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::immersion::{seed, Immersion};
use crate::jet::{Jet, JetVector};
use crate::jet_linalg::{self, JetMatrix};
use crate::numeric::{self, Mat};

/// Smallest accepted `|det h|`.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Relative volume-identity mismatch treated as an internal failure.
const VOLUME_CONSISTENCY_TOL: f64 = 1e-6;

pub type Tensor3 = Vec<Vec<Vec<f64>>>;
type JetTensor3 = Vec<Vec<Vec<Jet>>>;

/// Unimodular Darboux frame along the chart, with the transversal part of
/// the second derivatives already extracted.
#[derive(Clone, Debug)]
pub struct DarbouxFrame {
    pub n: usize,
    pub order: usize,
    pub u: Vec<f64>,
    /// `+1`, or `-1` when the transversal was flipped to make `h` positive.
    pub orientation: f64,
    pub x: JetVector,
    pub xi: Vec<JetVector>,
    pub xij: Vec<Vec<JetVector>>,
    pub transversal: JetVector,
    pub h: JetMatrix,
}

/// `h`, `H = det h`, the Blaschke metric and its inverse (order `K-2`).
#[derive(Clone, Debug)]
pub struct Fundamentals {
    pub h: JetMatrix,
    pub det_h: Jet,
    pub g: JetMatrix,
    pub g_inv: JetMatrix,
}

#[derive(Clone, Debug)]
pub struct AffineNormal {
    /// `gamma_lc[k][i][j]` = Levi-Civita symbol of `G`.
    pub gamma_lc: JetTensor3,
    pub y: JetVector,
    /// `|σ Vol(x_1..x_n, Y) - H^{1/(n+2)}| / H^{1/(n+2)}` at the point.
    pub volume_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Connection {
    /// `gamma[k][i][j]` from `x_ij = Γ^k_ij x_k + G_ij Y`.
    pub gamma: JetTensor3,
    /// `a_mixed[k][i][j] = A^k_ij`.
    pub a_mixed: JetTensor3,
    /// `a_cov[i][j][k] = A_ijk`.
    pub a_cov: JetTensor3,
    pub apolarity: f64,
    /// Mismatch between the `Y` coefficient of `x_ij` and `G_ij`.
    pub gauss_y_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Shape {
    /// `b_mixed[i][j] = B^j_i` from `Y_i = -B^j_i x_j`.
    pub b_mixed: JetMatrix,
    pub b_cov: JetMatrix,
    pub lambda: Vec<f64>,
    pub l: Vec<f64>,
    pub symmetry_residual: f64,
    /// `Y` component of `Y_i`, which must vanish.
    pub weingarten_normal_residual: f64,
}

/// Full jet-level state at one point.
#[derive(Clone, Debug)]
pub struct FrameJets {
    pub frame: DarbouxFrame,
    pub fund: Fundamentals,
    pub normal: AffineNormal,
    pub conn: Connection,
    pub shape: Shape,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct FrameResiduals {
    pub volume: f64,
    pub apolarity: f64,
    pub gauss_y: f64,
    pub weingarten_normal: f64,
    pub b_symmetry: f64,
}

/// Every invariant of the immersion at one parameter point.
#[derive(Clone, Debug, Serialize)]
pub struct FramePoint {
    pub u: Vec<f64>,
    pub orientation: f64,
    pub x: Vec<f64>,
    pub x_i: Mat,
    pub e_np1: Vec<f64>,
    pub h: Mat,
    #[serde(rename = "H")]
    pub det_h: f64,
    pub g: Mat,
    pub g_inv: Mat,
    pub gamma: Tensor3,
    pub gamma_lc: Tensor3,
    pub a_mixed: Tensor3,
    pub a_cov: Tensor3,
    pub y: Vec<f64>,
    pub b_mixed: Mat,
    pub b_cov: Mat,
    pub lambda: Vec<f64>,
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    pub residuals: FrameResiduals,
}

impl FramePoint {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    /// Affine mean curvature `L_1`.
    pub fn mean_curvature(&self) -> f64 {
        self.l[0]
    }

    /// `L_n`, the normalized product of the principal curvatures.
    pub fn gauss_kronecker(&self) -> f64 {
        self.l[self.l.len() - 1]
    }

    /// `‖A‖²_G = A_ijk A^{ijk}`.
    pub fn pick_norm_sq(&self) -> f64 {
        let n = self.n();
        let gi = &self.g_inv;
        let a = &self.a_cov;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut raised = 0.0;
                    for p in 0..n {
                        for q in 0..n {
                            for r in 0..n {
                                raised += gi[i][p] * gi[j][q] * gi[k][r] * a[p][q][r];
                            }
                        }
                    }
                    total += a[i][j][k] * raised;
                }
            }
        }
        total
    }

    /// Determinant of the Blaschke metric.
    pub fn det_g(&self) -> f64 {
        numeric::to_dmatrix(&self.g).determinant()
    }
}

fn zero_like(j: &Jet) -> Jet {
    j.lift(0.0)
}

fn vol(columns: &[&JetVector]) -> Jet {
    // rows of the matrix are the vectors; det(M^T) = det(M)
    let m: JetMatrix = columns.iter().map(|v| v.components.clone()).collect();
    jet_linalg::det(&m)
}

/// Matrix whose columns are the given vectors.
fn column_matrix(columns: &[&JetVector]) -> JetMatrix {
    let dim = columns[0].len();
    (0..dim).map(|a| columns.iter().map(|c| c.components[a].clone()).collect()).collect()
}

fn euclidean_normal(tangents: &[Vec<f64>]) -> Vec<f64> {
    let m = tangents[0].len();
    (0..m)
        .map(|a| {
            let mut rows: Vec<Vec<f64>> = tangents.to_vec();
            let mut e = vec![0.0; m];
            e[a] = 1.0;
            rows.push(e);
            numeric::to_dmatrix(&rows).determinant()
        })
        .collect()
}

/// Position, tangents and second derivatives plus a unimodular transversal.
pub fn darboux_frame(imm: &dyn Immersion, u: &[f64], order: usize, num_vars: usize) -> Result<DarbouxFrame> {
    let n = imm.dim();
    if u.len() != n {
        return Err(Error::Config(format!("point has {} coordinates, surface has dimension {n}", u.len())));
    }
    if order < 4 {
        return Err(Error::Order(format!("invariants need jet order >= 4, got {order}")));
    }
    let x = imm.eval(&seed(u, num_vars, order)?)?;
    if x.len() != n + 1 {
        return Err(Error::Config(format!("immersion returned {} components, expected {}", x.len(), n + 1)));
    }
    let xi: Vec<JetVector> = (0..n).map(|i| x.derivative(i)).collect::<Result<_>>()?;
    let mut xij = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            row.push(xi[i].derivative(j)?);
        }
        xij.push(row);
    }

    let tangent_values: Vec<Vec<f64>> = xi.iter().map(JetVector::value).collect();
    let nu = imm.transversal_hint(u).unwrap_or_else(|| euclidean_normal(&tangent_values));
    let proto = &xi[0].components[0];
    let nu_jet = JetVector::new(nu.iter().map(|&c| proto.lift(c)).collect())?;
    let mut cols: Vec<&JetVector> = xi.iter().collect();
    cols.push(&nu_jet);
    let volume = vol(&cols);
    let scale_ref = tangent_values.iter().map(|t| numeric::norm(t)).product::<f64>() * numeric::norm(&nu);
    if volume.value().abs() <= 1e-12 * scale_ref.max(1e-300) {
        return Err(Error::Degenerate("tangent vectors and transversal are dependent".into()));
    }
    let inv_vol = volume.recip()?;
    let mut transversal = nu_jet.scale(&inv_vol);

    // x_ij = Γ'^k_ij x_k + h_ij e  in the basis {x_k, e}
    let k2 = order - 2;
    let xi_t: Vec<JetVector> = xi.iter().map(|v| v.truncate(k2)).collect();
    let e_t = transversal.truncate(k2);
    let mut basis: Vec<&JetVector> = xi_t.iter().collect();
    basis.push(&e_t);
    let m = column_matrix(&basis);
    let rhs: Vec<Vec<Jet>> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| xij[i][j].components.clone()).collect();
    let sols = jet_linalg::solve_many(&m, &rhs)?;
    let mut h: JetMatrix = vec![vec![zero_like(proto).truncate(k2); n]; n];
    for i in 0..n {
        for j in 0..n {
            h[i][j] = sols[i * n + j][n].clone();
        }
    }

    let h0 = jet_linalg::constant_part(&h);
    let h0_sym: Mat = (0..n).map(|i| (0..n).map(|j| 0.5 * (h0[i][j] + h0[j][i])).collect()).collect();
    let det0 = numeric::to_dmatrix(&h0_sym).determinant();
    if det0.abs() < DEGENERACY_TOL {
        return Err(Error::Degenerate(format!("|det h| = {:.3e} at {u:?}", det0.abs())));
    }
    let (eig, _) = numeric::symmetric_eigen(&h0_sym);
    let orientation = if eig.iter().all(|&l| l > 0.0) {
        1.0
    } else if eig.iter().all(|&l| l < 0.0) {
        -1.0
    } else {
        return Err(Error::NotConvex(format!("h has eigenvalues {eig:?} at {u:?}")));
    };
    if orientation < 0.0 {
        transversal = transversal.scale_f64(-1.0);
        for row in h.iter_mut() {
            for e in row.iter_mut() {
                *e = -&*e;
            }
        }
    }

    Ok(DarbouxFrame { n, order, u: u.to_vec(), orientation, x, xi, xij, transversal, h })
}

pub fn fundamental_quantities(frame: &DarbouxFrame) -> Result<Fundamentals> {
    let n = frame.n;
    let det_h = jet_linalg::det(&frame.h);
    if det_h.value() < DEGENERACY_TOL {
        return Err(Error::Degenerate(format!("H = {:.3e}", det_h.value())));
    }
    let factor = det_h.powf(-1.0 / (n as f64 + 2.0))?;
    let g: JetMatrix = frame.h.iter().map(|row| row.iter().map(|e| e * &factor).collect()).collect();
    let g_inv = jet_linalg::inverse(&g)?;
    Ok(Fundamentals { h: frame.h.clone(), det_h, g, g_inv })
}

/// Levi-Civita symbols `Γ̃^k_ij` of a metric given on jets, one order lower.
pub fn levi_civita(g: &JetMatrix, g_inv: &JetMatrix, num_params: usize) -> Result<JetTensor3> {
    let n = g.len();
    let k = g[0][0].order() - 1;
    // dg[l][i][j] = ∂_l g_ij (only parameter directions)
    let mut dg: JetTensor3 = Vec::with_capacity(n);
    for l in 0..n {
        let mut slab = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(if l < num_params { g[i][j].derivative(l)? } else { g[i][j].lift(0.0).truncate(k) });
            }
            slab.push(row);
        }
        dg.push(slab);
    }
    let gi = jet_linalg::truncate_matrix(g_inv, k);
    let zero = g[0][0].lift(0.0).truncate(k);
    let mut out = vec![vec![vec![zero.clone(); n]; n]; n];
    for kk in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = zero.clone();
                for l in 0..n {
                    let s = &(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j];
                    acc += &(&gi[kk][l] * &s);
                }
                out[kk][i][j] = acc.scale(0.5);
            }
        }
    }
    Ok(out)
}

pub fn affine_normal(frame: &DarbouxFrame, fund: &Fundamentals) -> Result<AffineNormal> {
    let n = frame.n;
    let k3 = frame.order - 3;
    let gamma_lc = levi_civita(&fund.g, &fund.g_inv, n)?;
    let gi = jet_linalg::truncate_matrix(&fund.g_inv, k3);
    let xi: Vec<JetVector> = frame.xi.iter().map(|v| v.truncate(k3)).collect();
    let dim = n + 1;
    let zero = gi[0][0].lift(0.0);
    let mut y = JetVector::new(vec![zero.clone(); dim])?;
    for i in 0..n {
        for j in 0..n {
            let mut v = frame.xij[i][j].truncate(k3);
            for (k, xk) in xi.iter().enumerate() {
                v = v.sub(&xk.scale(&gamma_lc[k][i][j]));
            }
            y = y.add(&v.scale(&gi[i][j]));
        }
    }
    let y = y.scale_f64(1.0 / n as f64);

    let mut cols: Vec<&JetVector> = xi.iter().collect();
    cols.push(&y);
    let v = vol(&cols).value() * frame.orientation;
    let expected = fund.det_h.value().powf(1.0 / (n as f64 + 2.0));
    let volume_residual = (v - expected).abs() / expected;
    if volume_residual > VOLUME_CONSISTENCY_TOL {
        return Err(Error::Consistency(format!("Vol(x_1..x_n, Y) = {v:.12e} but H^(1/(n+2)) = {expected:.12e}")));
    }
    Ok(AffineNormal { gamma_lc, y, volume_residual })
}

fn affine_basis(frame: &DarbouxFrame, y: &JetVector, order: usize) -> JetMatrix {
    let xi: Vec<JetVector> = frame.xi.iter().map(|v| v.truncate(order)).collect();
    let yt = y.truncate(order);
    let mut cols: Vec<&JetVector> = xi.iter().collect();
    cols.push(&yt);
    column_matrix(&cols)
}

pub fn connections_and_pick(frame: &DarbouxFrame, fund: &Fundamentals, normal: &AffineNormal) -> Result<Connection> {
    let n = frame.n;
    let k3 = frame.order - 3;
    let m = affine_basis(frame, &normal.y, k3);
    let rhs: Vec<Vec<Jet>> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| frame.xij[i][j].truncate(k3).components)
        .collect();
    let sols = jet_linalg::solve_many(&m, &rhs)?;
    let g = jet_linalg::truncate_matrix(&fund.g, k3);
    let gi = jet_linalg::truncate_matrix(&fund.g_inv, k3);
    let zero = g[0][0].lift(0.0);
    let mut gamma = vec![vec![vec![zero.clone(); n]; n]; n];
    let mut gauss_y_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = &sols[i * n + j];
            for k in 0..n {
                gamma[k][i][j] = s[k].clone();
            }
            gauss_y_residual = gauss_y_residual.max((s[n].value() - g[i][j].value()).abs());
        }
    }
    let mut a_mixed = gamma.clone();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                a_mixed[k][i][j] = &gamma[k][i][j] - &normal.gamma_lc[k][i][j];
            }
        }
    }
    let mut a_cov = vec![vec![vec![zero.clone(); n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = zero.clone();
                for l in 0..n {
                    acc += &(&g[k][l] * &a_mixed[l][i][j]);
                }
                a_cov[i][j][k] = acc;
            }
        }
    }
    let mut apolarity: f64 = 0.0;
    for k in 0..n {
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += gi[i][j].value() * a_mixed[k][i][j].value();
            }
        }
        apolarity = apolarity.max(t.abs());
    }
    Ok(Connection { gamma, a_mixed, a_cov, apolarity, gauss_y_residual })
}

pub fn shape_and_curvatures(frame: &DarbouxFrame, fund: &Fundamentals, normal: &AffineNormal) -> Result<Shape> {
    let n = frame.n;
    let k4 = frame.order - 4;
    let m = affine_basis(frame, &normal.y, k4);
    let rhs: Vec<Vec<Jet>> = (0..n).map(|i| Ok(normal.y.derivative(i)?.components)).collect::<Result<_>>()?;
    let sols = jet_linalg::solve_many(&m, &rhs)?;
    let mut weingarten_normal_residual: f64 = 0.0;
    let b_mixed: JetMatrix = sols
        .iter()
        .map(|s| {
            weingarten_normal_residual = weingarten_normal_residual.max(s[n].value().abs());
            s[..n].iter().map(|c| -c).collect()
        })
        .collect();
    let g = jet_linalg::truncate_matrix(&fund.g, k4);
    let zero = g[0][0].lift(0.0);
    let mut b_cov = vec![vec![zero.clone(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = zero.clone();
            for k in 0..n {
                acc += &(&g[i][k] * &b_mixed[j][k]);
            }
            b_cov[i][j] = acc;
        }
    }
    let bc = jet_linalg::constant_part(&b_cov);
    let mut symmetry_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            symmetry_residual = symmetry_residual.max((bc[i][j] - bc[j][i]).abs());
        }
    }
    let bsym: Mat = (0..n).map(|i| (0..n).map(|j| 0.5 * (bc[i][j] + bc[j][i])).collect()).collect();
    let (lambda, _) = numeric::generalized_symmetric_eigen(&jet_linalg::constant_part(&g), &bsym)?;
    let l = numeric::normalized_symmetric(&lambda);
    Ok(Shape { b_mixed, b_cov, lambda, l, symmetry_residual, weingarten_normal_residual })
}

impl FrameJets {
    /// Full pipeline at `u` with jets in `num_vars >= n` variables.
    pub fn compute_with_vars(imm: &dyn Immersion, u: &[f64], order: usize, num_vars: usize) -> Result<FrameJets> {
        let frame = darboux_frame(imm, u, order, num_vars)?;
        let fund = fundamental_quantities(&frame)?;
        let normal = affine_normal(&frame, &fund)?;
        let conn = connections_and_pick(&frame, &fund, &normal)?;
        let shape = shape_and_curvatures(&frame, &fund, &normal)?;
        Ok(FrameJets { frame, fund, normal, conn, shape })
    }

    pub fn compute(imm: &dyn Immersion, u: &[f64], order: usize) -> Result<FrameJets> {
        Self::compute_with_vars(imm, u, order, imm.dim())
    }

    pub fn n(&self) -> usize {
        self.frame.n
    }

    pub fn point(&self) -> FramePoint {
        let n = self.n();
        let c3 = |t: &JetTensor3| -> Tensor3 {
            t.iter().map(|m| m.iter().map(|r| r.iter().map(Jet::value).collect()).collect()).collect()
        };
        FramePoint {
            u: self.frame.u.clone(),
            orientation: self.frame.orientation,
            x: self.frame.x.value(),
            x_i: self.frame.xi.iter().map(JetVector::value).collect(),
            e_np1: self.frame.transversal.value(),
            h: jet_linalg::constant_part(&self.fund.h),
            det_h: self.fund.det_h.value(),
            g: jet_linalg::constant_part(&self.fund.g),
            g_inv: jet_linalg::constant_part(&self.fund.g_inv),
            gamma: c3(&self.conn.gamma),
            gamma_lc: c3(&self.normal.gamma_lc),
            a_mixed: c3(&self.conn.a_mixed),
            a_cov: c3(&self.conn.a_cov),
            y: self.normal.y.value(),
            b_mixed: jet_linalg::constant_part(&self.shape.b_mixed),
            b_cov: jet_linalg::constant_part(&self.shape.b_cov),
            lambda: self.shape.lambda.clone(),
            l: self.shape.l.clone(),
            residuals: FrameResiduals {
                volume: self.normal.volume_residual,
                apolarity: self.conn.apolarity,
                gauss_y: self.conn.gauss_y_residual,
                weingarten_normal: self.shape.weingarten_normal_residual,
                b_symmetry: self.shape.symmetry_residual,
            },
        }
        .with_dim(n)
    }

    /// Gauss and Codazzi equation residuals; needs jet order at least 5.
    pub fn gauss_codazzi(&self) -> Result<GaussCodazzi> {
        if self.frame.order < 5 {
            return Err(Error::Order(format!("Gauss/Codazzi residuals need jet order >= 5, got {}", self.frame.order)));
        }
        let n = self.n();
        let val3 = |t: &JetTensor3| -> Tensor3 {
            t.iter().map(|m| m.iter().map(|r| r.iter().map(Jet::value).collect()).collect()).collect()
        };
        // d3[a][p][q][r] = ∂_a t[p][q][r]
        let deriv3 = |t: &JetTensor3| -> Result<Vec<Tensor3>> {
            (0..n)
                .map(|a| {
                    t.iter()
                        .map(|m| m.iter().map(|r| r.iter().map(|j| Ok(j.derivative(a)?.value())).collect()).collect())
                        .collect()
                })
                .collect()
        };
        let g = jet_linalg::constant_part(&self.fund.g);
        let gl = val3(&self.normal.gamma_lc);
        let dgl = deriv3(&self.normal.gamma_lc)?;
        let am = val3(&self.conn.a_mixed);
        let ac = val3(&self.conn.a_cov);
        let dac = deriv3(&self.conn.a_cov)?;
        let b = jet_linalg::constant_part(&self.shape.b_cov);
        let db: Vec<Mat> = (0..n)
            .map(|a| {
                self.shape.b_cov.iter().map(|r| r.iter().map(|j| Ok(j.derivative(a)?.value())).collect()).collect()
            })
            .collect::<Result<_>>()?;

        let mut gauss: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        // R(∂_l, ∂_k) ∂_j = R^m_{jlk} ∂_m, lowered on the first slot
                        let mut r = 0.0;
                        for m in 0..n {
                            let mut rm = dgl[l][m][k][j] - dgl[k][m][l][j];
                            for p in 0..n {
                                rm += gl[m][l][p] * gl[p][k][j] - gl[m][k][p] * gl[p][l][j];
                            }
                            r += g[i][m] * rm;
                        }
                        let mut rhs =
                            0.5 * (g[i][l] * b[j][k] + g[j][k] * b[i][l] - g[i][k] * b[j][l] - g[j][l] * b[i][k]);
                        for m in 0..n {
                            rhs += am[m][i][k] * ac[m][j][l] - am[m][i][l] * ac[m][j][k];
                        }
                        gauss = gauss.max((r - rhs).abs());
                    }
                }
            }
        }

        let cov_a = |i: usize, j: usize, k: usize, l: usize| -> f64 {
            let mut v = dac[l][i][j][k];
            for m in 0..n {
                v -= gl[m][l][i] * ac[m][j][k] + gl[m][l][j] * ac[i][m][k] + gl[m][l][k] * ac[i][j][m];
            }
            v
        };
        let mut codazzi_a: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let lhs = cov_a(i, j, k, l) - cov_a(i, j, l, k);
                        let rhs = 0.5 * (g[i][k] * b[j][l] + g[j][k] * b[i][l] - g[i][l] * b[j][k] - g[j][l] * b[i][k]);
                        codazzi_a = codazzi_a.max((lhs - rhs).abs());
                    }
                }
            }
        }

        let cov_b = |i: usize, j: usize, k: usize| -> f64 {
            let mut v = db[k][i][j];
            for m in 0..n {
                v -= gl[m][k][i] * b[m][j] + gl[m][k][j] * b[i][m];
            }
            v
        };
        let mut codazzi_b: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = cov_b(i, j, k) - cov_b(i, k, j);
                    let mut rhs = 0.0;
                    for l in 0..n {
                        rhs += am[l][i][j] * b[k][l] - am[l][i][k] * b[j][l];
                    }
                    codazzi_b = codazzi_b.max((lhs - rhs).abs());
                }
            }
        }
        Ok(GaussCodazzi { gauss, codazzi_a, codazzi_b })
    }
}

impl FramePoint {
    fn with_dim(self, n: usize) -> FramePoint {
        debug_assert_eq!(self.u.len(), n);
        self
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct GaussCodazzi {
    pub gauss: f64,
    pub codazzi_a: f64,
    pub codazzi_b: f64,
}

/// Invariants of `imm` at `u` (jets in the surface parameters only).
pub fn frame_point(imm: &dyn Immersion, u: &[f64], order: usize) -> Result<FramePoint> {
    Ok(FrameJets::compute(imm, u, order)?.point())
}

/// Gauss/Codazzi residuals at `u`.
pub fn gauss_codazzi_residuals(imm: &dyn Immersion, u: &[f64], order: usize) -> Result<GaussCodazzi> {
    FrameJets::compute(imm, u, order)?.gauss_codazzi()
}
