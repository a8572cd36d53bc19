//! Tube coordinates `(u, μ) ↦ x(u) + μ Y(u)` around a hypersurface, the metric
//! `g̃ = G^μ + c^{-2} dμ²`, the level function `F = μ` and the isoparametric
//! detector.
//!
//! The stated coefficient formulas for the connection of `g̃` drop the terms
//! coming from `c'(μ)`. Every quantity built on them is therefore computed
//! twice: once from those formulas (`formula`) and once from the Levi-Civita
//! connection of `g̃` differentiated in jets (`levi_civita`), with an exact
//! closed form of the latter (`corrected`) as a cross-check.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::immersion::SharedImmersion;
use crate::invariants::{frame_point, levi_civita, FrameJets, FramePoint, Tensor3};
use crate::jet::Jet;
use crate::jet_linalg::{self, JetMatrix};
use crate::numeric::{self, Constancy, Mat, Spread};
use crate::parallel::{
    admissibility_margin, admissible_range, transfer_and_c, AdmissibleRange, MuParam, ParallelImmersion,
    ADMISSIBILITY_MARGIN,
};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
pub const FD_STEP: f64 = 1e-4;
/// Largest polynomial degree used for the sampled `c(μ)`.
pub const C_FIT_MAX_DEGREE: usize = 6;
const C_FIT_SAMPLES: usize = 13;
/// Half-width cap of the `μ` window sampled by the power-sum route.
pub const POWER_SUM_HALF_WIDTH: f64 = 0.05;
/// Relative gap below which principal curvatures count as equal.
pub const MULTIPLICITY_GAP: f64 = 1e-6;

/// Which representation of `c(μ)` downstream formulas use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CMode {
    /// `c = Π (1 - μ λ_i)^{-1/(n+2)}` with `λ` at the chart center.
    #[default]
    Exact,
    /// Least-squares polynomial through sampled values.
    Fit,
}

/// `c(μ)` at the chart center: sampled values, the polynomial fit and the
/// closed form implied by `c^{n+2} det T = 1`.
#[derive(Clone, Debug, Serialize)]
pub struct CProfile {
    pub mode: CMode,
    pub lambda_center: Vec<f64>,
    pub samples_mu: Vec<f64>,
    pub samples_c: Vec<f64>,
    /// Fit coefficients, lowest degree first, normalized to `c(0) = 1`.
    pub fit: Vec<f64>,
    /// Largest `|fit - sample|`.
    pub fit_residual: f64,
    /// Largest `|closed form - sample|`.
    pub exact_residual: f64,
}

impl CProfile {
    fn exponent(&self) -> f64 {
        -1.0 / (self.lambda_center.len() as f64 + 2.0)
    }

    pub fn exact_c(&self, mu: f64) -> f64 {
        self.lambda_center.iter().map(|l| (1.0 - mu * l).powf(self.exponent())).product()
    }

    pub fn exact_dc(&self, mu: f64) -> f64 {
        let s: f64 = self.lambda_center.iter().map(|l| l / (1.0 - mu * l)).sum();
        -self.exponent() * self.exact_c(mu) * s
    }

    pub fn c(&self, mu: f64) -> f64 {
        match self.mode {
            CMode::Exact => self.exact_c(mu),
            CMode::Fit => numeric::polyval(&self.fit, mu),
        }
    }

    pub fn dc(&self, mu: f64) -> f64 {
        match self.mode {
            CMode::Exact => self.exact_dc(mu),
            CMode::Fit => numeric::polyval(&numeric::polyder(&self.fit), mu),
        }
    }

    /// `c` evaluated on a jet in `μ`.
    pub fn c_jet(&self, mu: &Jet) -> Result<Jet> {
        match self.mode {
            CMode::Exact => {
                let mut acc = mu.lift(1.0);
                for l in &self.lambda_center {
                    let f = mu.scale(-l).add_scalar(1.0).powf(self.exponent())?;
                    acc = &acc * &f;
                }
                Ok(acc)
            }
            CMode::Fit => {
                let mut acc = mu.lift(0.0);
                for c in self.fit.iter().rev() {
                    acc = (&acc * mu).add_scalar(*c);
                }
                Ok(acc)
            }
        }
    }
}

/// Tube coordinates around a base hypersurface.
pub struct TubeChart {
    pub base: SharedImmersion,
    pub center: Vec<f64>,
    /// Frame jet order used for all invariants.
    pub order: usize,
    pub range: AdmissibleRange,
    /// Half-width of the symmetric admissible `μ` interval.
    pub delta: f64,
    pub c_profile: CProfile,
    /// Parameter box used to reject Newton solutions outside the chart.
    pub domain: Option<Vec<(f64, f64)>>,
}

impl TubeChart {
    /// `lambdas` are principal curvatures sampled over the region the tube covers.
    pub fn new(
        base: SharedImmersion,
        center: &[f64],
        order: usize,
        lambdas: &[f64],
        mode: CMode,
        domain: Option<Vec<(f64, f64)>>,
    ) -> Result<TubeChart> {
        let center_frame = frame_point(base.as_ref(), center, order)?;
        let mut all: Vec<f64> = lambdas.to_vec();
        all.extend_from_slice(&center_frame.lambda);
        let range = admissible_range(all.iter());
        let half = range.delta.min(0.6);
        let samples_mu = numeric::chebyshev_nodes(-half, half, C_FIT_SAMPLES);
        let mut samples_c = Vec::with_capacity(samples_mu.len());
        for &mu in &samples_mu {
            let par = ParallelImmersion::new(base.clone(), MuParam::Const(mu));
            let fm = frame_point(&par, center, order)?;
            samples_c.push(transfer_and_c(&center_frame, &fm, mu)?.c);
        }
        let degree = C_FIT_MAX_DEGREE.min(samples_mu.len() - 1);
        let mut fit = numeric::polyfit(&samples_mu, &samples_c, degree)?;
        let c0 = fit[0];
        for c in fit.iter_mut() {
            *c /= c0;
        }
        let mut profile = CProfile {
            mode,
            lambda_center: center_frame.lambda.clone(),
            samples_mu,
            samples_c,
            fit,
            fit_residual: 0.0,
            exact_residual: 0.0,
        };
        for (m, c) in profile.samples_mu.iter().zip(&profile.samples_c) {
            profile.fit_residual = profile.fit_residual.max((numeric::polyval(&profile.fit, *m) - c).abs());
            profile.exact_residual = profile.exact_residual.max((profile.exact_c(*m) - c).abs());
        }
        Ok(TubeChart { base, center: center.to_vec(), order, delta: range.delta, range, c_profile: profile, domain })
    }

    pub fn n(&self) -> usize {
        self.base.dim()
    }

    /// Ambient point of tube coordinates `(u, μ)`.
    pub fn map(&self, u: &[f64], mu: f64) -> Result<Vec<f64>> {
        let f = FrameJets::compute(self.base.as_ref(), u, 4)?;
        Ok(f.frame.x.value().iter().zip(f.normal.y.value()).map(|(x, y)| x + mu * y).collect())
    }
}

/// Connection coefficients of the tube metric; index `n` is the `μ` direction.
pub type Christoffel = Tensor3;

#[derive(Clone, Debug, Serialize)]
pub struct ChristoffelTables {
    pub formula: Christoffel,
    pub levi_civita: Christoffel,
    pub corrected: Christoffel,
    /// `max |formula - levi_civita|`.
    pub discrepancy: f64,
    /// `max |corrected - levi_civita|`.
    pub corrected_discrepancy: f64,
}

fn max_diff3(a: &Tensor3, b: &Tensor3) -> f64 {
    a.iter().flatten().flatten().zip(b.iter().flatten().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Everything the tube analysis needs at one `(u, μ)`.
#[derive(Clone, Debug)]
pub struct TubeState {
    pub u: Vec<f64>,
    pub mu: f64,
    pub base: FramePoint,
    /// Invariants of `x^μ` in the same chart.
    pub frame_mu: FramePoint,
    /// `c` recovered from `Y^μ = a^i x_i + c Y` at this point.
    pub c_local: f64,
    pub c: f64,
    pub dc: f64,
    pub g_tilde: Mat,
    /// Levi-Civita connection of `g̃` from jets in `(u, μ)`.
    pub gamma_numeric: Christoffel,
}

fn block_metric_jets(fj: &FrameJets, c_jet: &Jet) -> Result<JetMatrix> {
    let n = fj.n();
    let g = &fj.fund.g;
    let k = g[0][0].order();
    let c_t = c_jet.truncate(k);
    let inv_c2 = (&c_t * &c_t).recip()?;
    let zero = inv_c2.lift(0.0);
    let mut out = vec![vec![zero.clone(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = g[i][j].clone();
        }
    }
    out[n][n] = inv_c2;
    Ok(out)
}

pub fn tube_state(chart: &TubeChart, u: &[f64], mu: f64) -> Result<TubeState> {
    let n = chart.n();
    let base = frame_point(chart.base.as_ref(), u, chart.order)?;
    let margin = admissibility_margin(&base.lambda, mu);
    if margin < ADMISSIBILITY_MARGIN {
        return Err(Error::Inadmissible { mu, margin });
    }
    let par = ParallelImmersion::new(chart.base.clone(), MuParam::Var { value: mu, index: n });
    let fj = FrameJets::compute_with_vars(&par, u, 4, n + 1)?;
    let frame_mu = fj.point();
    let c_local = transfer_and_c(&base, &frame_mu, mu)?.c;

    let mu_jet = Jet::variable(mu, n, n + 1, 2)?;
    let c_jet = chart.c_profile.c_jet(&mu_jet)?;
    let g_jets = block_metric_jets(&fj, &c_jet)?;
    let g_inv = jet_linalg::inverse(&g_jets)?;
    let gamma_jets = levi_civita(&g_jets, &g_inv, n + 1)?;
    let gamma_numeric: Christoffel =
        gamma_jets.iter().map(|m| m.iter().map(|r| r.iter().map(Jet::value).collect()).collect()).collect();
    let g_tilde = jet_linalg::constant_part(&g_jets);
    Ok(TubeState {
        u: u.to_vec(),
        mu,
        c: chart.c_profile.c(mu),
        dc: chart.c_profile.dc(mu),
        base,
        frame_mu,
        c_local,
        g_tilde,
        gamma_numeric,
    })
}

/// `g̃` in the chart basis `{x^μ_i, Y}` and the volume-surrogate residual
/// `|√det g̃ - σ Vol(x^μ_1, …, x^μ_n, Y)|`.
pub fn tube_metric(state: &TubeState) -> (Mat, f64) {
    let n = state.u.len();
    let det = numeric::to_dmatrix(&state.g_tilde).determinant();
    let mut rows: Vec<Vec<f64>> = state.frame_mu.x_i.clone();
    rows.push(state.base.y.clone());
    let vol = state.base.orientation * numeric::to_dmatrix(&rows).determinant();
    debug_assert_eq!(rows.len(), n + 1);
    (state.g_tilde.clone(), (det.sqrt() - vol).abs())
}

fn raise_b(frame_mu: &FramePoint) -> Mat {
    // bu[i][j] = B^μ{}^i_j with the index raised by G^μ
    let n = frame_mu.n();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| frame_mu.g_inv[i][k] * frame_mu.b_cov[k][j]).sum()).collect())
        .collect()
}

fn stated_christoffel(state: &TubeState, corrected: bool) -> Christoffel {
    let n = state.u.len();
    let (c, dc) = (state.c, state.dc);
    let bu = raise_b(&state.frame_mu);
    let mut g = vec![vec![vec![0.0; n + 1]; n + 1]; n + 1];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                g[k][i][j] = state.frame_mu.gamma_lc[k][i][j];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.5 * c * state.frame_mu.b_cov[i][j];
            if corrected {
                v += 0.5 * c * dc * state.frame_mu.g[i][j];
            }
            g[n][i][j] = v;
            let mut w = -bu[i][j] / (2.0 * c);
            if corrected && i == j {
                w -= dc / (2.0 * c);
            }
            g[i][n][j] = w;
            g[i][j][n] = w;
        }
    }
    g[n][n][n] = -dc / c;
    g
}

pub fn tube_christoffel(state: &TubeState) -> ChristoffelTables {
    let formula = stated_christoffel(state, false);
    let corrected = stated_christoffel(state, true);
    let discrepancy = max_diff3(&formula, &state.gamma_numeric);
    let corrected_discrepancy = max_diff3(&corrected, &state.gamma_numeric);
    ChristoffelTables {
        formula,
        levi_civita: state.gamma_numeric.clone(),
        corrected,
        discrepancy,
        corrected_discrepancy,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelFunctionData {
    /// `∇F = c Y^μ` as an ambient vector.
    pub grad_f: Vec<f64>,
    /// `|∇F|_g̃` with `∇F` expressed in the chart basis.
    pub norm_grad_f: f64,
    /// `-½ n c L^μ_1 + c c'`.
    pub lap_f_formula: f64,
    /// `-½ n c L^μ_1 + (1 - n/2) c c'`, the Laplacian of the true connection.
    pub lap_f_corrected: f64,
    /// `-g̃^{AB} Γ̃^μ_AB` from the jet connection.
    pub lap_f_numeric: f64,
}

pub fn level_function_data(state: &TubeState) -> Result<LevelFunctionData> {
    let n = state.u.len();
    let nf = n as f64;
    let c = state.c;
    let grad_f: Vec<f64> = state.frame_mu.y.iter().map(|y| c * y).collect();
    let j = chart_basis(state);
    let comps = j
        .clone()
        .lu()
        .solve(&DVector::from_column_slice(&grad_f))
        .ok_or_else(|| Error::Singular("tube chart basis is degenerate".into()))?;
    let g = numeric::to_dmatrix(&state.g_tilde);
    let norm_grad_f = (comps.transpose() * &g * &comps)[(0, 0)].sqrt();
    let l1 = state.frame_mu.mean_curvature();
    let lap_f_formula = -0.5 * nf * c * l1 + c * state.dc;
    let lap_f_corrected = -0.5 * nf * c * l1 + (1.0 - 0.5 * nf) * c * state.dc;
    let g_inv = g.try_inverse().ok_or_else(|| Error::Singular("tube metric".into()))?;
    let mut lap_f_numeric = 0.0;
    for a in 0..=n {
        for b in 0..=n {
            lap_f_numeric -= g_inv[(a, b)] * state.gamma_numeric[n][a][b];
        }
    }
    Ok(LevelFunctionData { grad_f, norm_grad_f, lap_f_formula, lap_f_corrected, lap_f_numeric })
}

/// Columns `x^μ_1, …, x^μ_n, Y`.
fn chart_basis(state: &TubeState) -> DMatrix<f64> {
    let n = state.u.len();
    DMatrix::from_fn(n + 1, n + 1, |a, k| if k < n { state.frame_mu.x_i[k][a] } else { state.base.y[a] })
}

fn chart_vector_norm(state: &TubeState, v: &[f64]) -> f64 {
    let j = chart_basis(state);
    (j * DVector::from_column_slice(v)).norm()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TubeCoords {
    pub u: Vec<f64>,
    pub mu: f64,
    pub iterations: usize,
}

/// Solve `x(u) + μ Y(u) = p` by Newton's method from `guess` (default: chart center, `μ = 0`).
pub fn newton_invert(chart: &TubeChart, p: &[f64], guess: Option<(&[f64], f64)>) -> Result<TubeCoords> {
    let n = chart.n();
    if p.len() != n + 1 {
        return Err(Error::Config(format!("ambient point must have {} coordinates", n + 1)));
    }
    let (mut u, mut mu) = match guess {
        Some((u0, m0)) => (u0.to_vec(), m0),
        None => (chart.center.clone(), 0.0),
    };
    let outside = |why: String| Error::OutsideTube(format!("p = {p:?}: {why}"));
    for it in 1..=NEWTON_MAX_ITER {
        let f = FrameJets::compute(chart.base.as_ref(), &u, 4).map_err(|e| outside(e.to_string()))?;
        let x = f.frame.x.value();
        let y = f.normal.y.value();
        let r = DVector::from_fn(n + 1, |a, _| x[a] + mu * y[a] - p[a]);
        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            let xi = f.frame.xi[i].value();
            let yi = f.normal.y.derivative(i)?.value();
            for a in 0..=n {
                jac[(a, i)] = xi[a] + mu * yi[a];
            }
        }
        for a in 0..=n {
            jac[(a, n)] = y[a];
        }
        let step = jac.lu().solve(&r).ok_or_else(|| outside("singular tube Jacobian".into()))?;
        if !step.iter().all(|s| s.is_finite()) {
            return Err(outside("non-finite Newton step".into()));
        }
        for i in 0..n {
            u[i] -= step[i];
        }
        mu -= step[n];
        if step.norm() <= NEWTON_TOL {
            if let Some(dom) = &chart.domain {
                if u.iter().zip(dom).any(|(v, (lo, hi))| v < lo || v > hi) {
                    return Err(outside(format!("solution u = {u:?} leaves the chart domain")));
                }
            }
            let lam = frame_point(chart.base.as_ref(), &u, 4).map_err(|e| outside(e.to_string()))?.lambda;
            let margin = admissibility_margin(&lam, mu);
            if margin < ADMISSIBILITY_MARGIN {
                return Err(outside(format!("mu = {mu} has margin {margin:.4}")));
            }
            return Ok(TubeCoords { u, mu, iterations: it });
        }
    }
    Err(outside(format!("no convergence in {NEWTON_MAX_ITER} iterations")))
}

/// `F(p) = μ(p)`.
pub fn level_function(chart: &TubeChart, p: &[f64], guess: Option<(&[f64], f64)>) -> Result<f64> {
    Ok(newton_invert(chart, p, guess)?.mu)
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatHessian {
    /// `Hess₀F` in the chart basis from the closed formula: `-c G^μ` block, zeros elsewhere.
    pub formula: Mat,
    /// Ambient Cartesian Hessian from Richardson-extrapolated central differences.
    pub ambient: Mat,
    /// `Jᵀ (ambient) J` with `J = [x^μ_i, Y]`.
    pub numeric: Mat,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
    /// Angle between the eigenvector of the eigenvalue closest to 0 and `ξ`.
    pub null_angle: f64,
    /// `max |formula - numeric|`.
    pub discrepancy: f64,
    /// `max |g̃ + (1/a) Hess₀F - c^{-2} dμ²|` with the numeric Hessian.
    pub metric_split: f64,
}

fn fd_hessian(chart: &TubeChart, p: &[f64], guess: (&[f64], f64), h: f64) -> Result<Mat> {
    let m = p.len();
    let f = |q: &[f64]| level_function(chart, q, Some(guess));
    let f0 = f(p)?;
    let shifted = |a: usize, sa: f64, b: usize, sb: f64| {
        let mut q = p.to_vec();
        q[a] += sa;
        q[b] += sb;
        q
    };
    let mut hess = vec![vec![0.0; m]; m];
    for a in 0..m {
        let fp = f(&shifted(a, h, a, 0.0))?;
        let fm = f(&shifted(a, -h, a, 0.0))?;
        hess[a][a] = (fp - 2.0 * f0 + fm) / (h * h);
        for b in a + 1..m {
            let fpp = f(&shifted(a, h, b, h))?;
            let fpm = f(&shifted(a, h, b, -h))?;
            let fmp = f(&shifted(a, -h, b, h))?;
            let fmm = f(&shifted(a, -h, b, -h))?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }
    Ok(hess)
}

pub fn flat_hessian(chart: &TubeChart, state: &TubeState) -> Result<FlatHessian> {
    let n = state.u.len();
    let c = state.c;
    let mut formula = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            formula[i][j] = -c * state.frame_mu.g[i][j];
        }
    }
    let p: Vec<f64> = state.base.x.iter().zip(&state.base.y).map(|(x, y)| x + state.mu * y).collect();
    let guess = (state.u.as_slice(), state.mu);
    let coarse = fd_hessian(chart, &p, guess, FD_STEP)?;
    let fine = fd_hessian(chart, &p, guess, 0.5 * FD_STEP)?;
    let ambient: Mat = coarse
        .iter()
        .zip(&fine)
        .map(|(rc, rf)| rc.iter().zip(rf).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
        .collect();
    let j = chart_basis(state);
    let hm = numeric::to_dmatrix(&ambient);
    let numeric_chart = numeric::from_dmatrix(&(j.transpose() * &hm * &j));
    let (eigenvalues, eigenvectors) = numeric::symmetric_eigen(&ambient);
    let null_idx =
        (0..=n).min_by(|&a, &b| eigenvalues[a].abs().total_cmp(&eigenvalues[b].abs())).expect("non-empty spectrum");
    let null_vec: Vec<f64> = (0..=n).map(|a| eigenvectors[a][null_idx]).collect();
    let null_angle = numeric::line_angle(&null_vec, &state.base.y);
    let discrepancy = numeric::max_abs_diff(&formula, &numeric_chart);
    // a = |∇F| = c, ds = dμ / c
    let mut metric_split: f64 = 0.0;
    for a in 0..=n {
        for b in 0..=n {
            let ds2 = if a == n && b == n { 1.0 / (c * c) } else { 0.0 };
            metric_split = metric_split.max((state.g_tilde[a][b] + numeric_chart[a][b] / c - ds2).abs());
        }
    }
    Ok(FlatHessian {
        formula,
        ambient,
        numeric: numeric_chart,
        eigenvalues,
        eigenvectors,
        null_angle,
        discrepancy,
        metric_split,
    })
}

/// `2∇̃_A ξ - (∂_A ξ - ∂_A(log a) ξ)` for `ξ = c ∂_μ`, as ambient vector norms.
#[derive(Clone, Debug, Serialize)]
pub struct NormalTransport {
    /// Largest residual over tangential directions `A = i`.
    pub tangential: f64,
    /// Residual in the `μ` direction.
    pub normal: f64,
}

impl NormalTransport {
    pub fn max(&self) -> f64 {
        self.tangential.max(self.normal)
    }
}

fn normal_transport_with(state: &TubeState, gamma: &Christoffel) -> NormalTransport {
    let n = state.u.len();
    let c = state.c;
    let bu = &state.frame_mu.b_mixed;
    let mut tangential: f64 = 0.0;
    for i in 0..n {
        // 2∇̃_i ξ in chart components; ξ^μ = c is constant along u
        let mut lhs: Vec<f64> = (0..=n).map(|k| 2.0 * c * gamma[k][i][n]).collect();
        // ∂_i ξ = c Y_i = Y^μ_i = -B^μ{}^k_i x^μ_k
        for k in 0..n {
            lhs[k] += bu[i][k];
        }
        tangential = tangential.max(chart_vector_norm(state, &lhs));
    }
    let mut lhs: Vec<f64> = (0..=n).map(|k| 2.0 * c * gamma[k][n][n]).collect();
    // ∂_μ ξ^μ = c'; ∂_μ ξ - (c'/c) ξ has no chart components
    lhs[n] += 2.0 * state.dc;
    let normal = chart_vector_norm(state, &lhs);
    NormalTransport { tangential, normal }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalTransportReport {
    pub formula: NormalTransport,
    pub levi_civita: NormalTransport,
}

pub fn normal_transport_check(state: &TubeState, tables: &ChristoffelTables) -> NormalTransportReport {
    NormalTransportReport {
        formula: normal_transport_with(state, &tables.formula),
        levi_civita: normal_transport_with(state, &tables.levi_civita),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HalfShape {
    /// `shape[i][k]`: component along `∂_k` of `S(∂_i) = -tan(∇̃_i ξ)`.
    pub shape: Mat,
    /// `max |S - ½ B^μ|`.
    pub residual: f64,
    /// `tr S / tr B^μ` (0 when `B^μ` is traceless).
    pub trace_ratio: f64,
}

fn half_shape_with(state: &TubeState, gamma: &Christoffel) -> HalfShape {
    let n = state.u.len();
    let c = state.c;
    let bu = &state.frame_mu.b_mixed;
    let shape: Mat = (0..n).map(|i| (0..n).map(|k| -c * gamma[k][i][n]).collect()).collect();
    let mut residual: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            residual = residual.max((shape[i][k] - 0.5 * bu[i][k]).abs());
        }
    }
    let tr_s: f64 = (0..n).map(|i| shape[i][i]).sum();
    let tr_b: f64 = (0..n).map(|i| bu[i][i]).sum();
    let trace_ratio = if tr_b.abs() > 1e-14 { tr_s / tr_b } else { 0.0 };
    HalfShape { shape, residual, trace_ratio }
}

#[derive(Clone, Debug, Serialize)]
pub struct HalfShapeReport {
    pub formula: HalfShape,
    pub levi_civita: HalfShape,
}

pub fn half_shape_identity(state: &TubeState, tables: &ChristoffelTables) -> HalfShapeReport {
    HalfShapeReport {
        formula: half_shape_with(state, &tables.formula),
        levi_civita: half_shape_with(state, &tables.levi_civita),
    }
}

/// Geodesic residual of the arc-length `μ` line through the sample.
pub fn geodesic_residual(state: &TubeState) -> f64 {
    let n = state.u.len();
    let c = state.c;
    let g = &state.gamma_numeric;
    // μ(s) with dμ/ds = c, d²μ/ds² = c c'
    let mut r = (c * state.dc + g[n][n][n] * c * c).abs();
    for k in 0..n {
        r = r.max((g[k][n][n] * c * c).abs());
    }
    r
}

/// One tube sample with every residual of the isoparametric conditions.
#[derive(Clone, Debug, Serialize)]
pub struct TubeSample {
    pub u: Vec<f64>,
    pub mu: f64,
    pub c: f64,
    pub dc: f64,
    pub c_local: f64,
    pub g_tilde: Mat,
    pub christoffel: ChristoffelTables,
    pub level: LevelFunctionData,
    pub hessian: Option<FlatHessian>,
    pub xi: Vec<f64>,
    pub normal_transport: NormalTransportReport,
    pub half_shape: HalfShapeReport,
    pub residuals: BTreeMap<String, f64>,
}

pub fn tube_sample(chart: &TubeChart, u: &[f64], mu: f64, with_hessian: bool) -> Result<TubeSample> {
    let state = tube_state(chart, u, mu)?;
    let (g_tilde, volume) = tube_metric(&state);
    let christoffel = tube_christoffel(&state);
    let level = level_function_data(&state)?;
    let hessian = if with_hessian { Some(flat_hessian(chart, &state)?) } else { None };
    let normal_transport = normal_transport_check(&state, &christoffel);
    let half_shape = half_shape_identity(&state, &christoffel);
    let xi: Vec<f64> = state.base.y.iter().map(|y| state.c * y).collect();
    let mut straight: f64 = 0.0;
    {
        // second μ-derivative of the tube map vanishes identically
        let n = chart.n();
        let mu_jet = Jet::variable(mu, n, n + 1, 2)?;
        let f = FrameJets::compute(chart.base.as_ref(), u, 4)?;
        let mut alpha = vec![0u8; n + 1];
        alpha[n] = 2;
        for (x, y) in f.frame.x.value().iter().zip(f.normal.y.value()) {
            let comp = (&mu_jet * &mu_jet.lift(y)).add_scalar(*x);
            straight = straight.max(comp.partial(&alpha)?.abs());
        }
    }
    let mut residuals = BTreeMap::from([
        ("volume_surrogate".to_string(), volume),
        ("grad_norm".to_string(), (level.norm_grad_f - state.c).abs()),
        ("g_tilde_normal".to_string(), (g_tilde[chart.n()][chart.n()] - 1.0 / (state.c * state.c)).abs()),
        ("c_local".to_string(), (state.c_local - state.c).abs()),
        ("christoffel_formula_vs_levi_civita".to_string(), christoffel.discrepancy),
        ("christoffel_corrected_vs_levi_civita".to_string(), christoffel.corrected_discrepancy),
        ("laplacian_corrected_vs_levi_civita".to_string(), (level.lap_f_corrected - level.lap_f_numeric).abs()),
        ("normal_transport_formula".to_string(), normal_transport.formula.max()),
        ("normal_transport_levi_civita".to_string(), normal_transport.levi_civita.max()),
        ("half_shape_formula".to_string(), half_shape.formula.residual),
        ("half_shape_levi_civita".to_string(), half_shape.levi_civita.residual),
        ("mu_line_straightness".to_string(), straight),
        ("mu_line_geodesic".to_string(), geodesic_residual(&state)),
    ]);
    if let Some(h) = &hessian {
        residuals.insert("hessian_formula_vs_numeric".to_string(), h.discrepancy);
        residuals.insert("hessian_null_angle".to_string(), h.null_angle);
        residuals.insert("metric_split".to_string(), h.metric_split);
    }
    Ok(TubeSample {
        u: u.to_vec(),
        mu,
        c: state.c,
        dc: state.dc,
        c_local: state.c_local,
        g_tilde,
        christoffel,
        level,
        hessian,
        xi,
        normal_transport,
        half_shape,
        residuals,
    })
}

/// Spreads of `ΔF` and `|∇F|` over samples sharing one `μ`.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSetSpread {
    pub mu: f64,
    pub lap_f: Spread,
    pub lap_f_levi_civita: Spread,
    pub norm_grad_f: Spread,
}

pub fn level_set_spreads(samples: &[TubeSample]) -> Vec<LevelSetSpread> {
    let mut mus: Vec<f64> = samples.iter().map(|s| s.mu).collect();
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    mus.into_iter()
        .map(|mu| {
            let at: Vec<&TubeSample> = samples.iter().filter(|s| s.mu == mu).collect();
            let col = |f: &dyn Fn(&TubeSample) -> f64| Spread::of(&at.iter().map(|s| f(s)).collect::<Vec<_>>());
            LevelSetSpread {
                mu,
                lap_f: col(&|s| s.level.lap_f_formula),
                lap_f_levi_civita: col(&|s| s.level.lap_f_numeric),
                norm_grad_f: col(&|s| s.level.norm_grad_f),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Isoparametric,
    NotIsoparametric,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HypersphereType {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    /// Grid means of the sorted principal curvatures.
    pub lambda: Vec<f64>,
    pub power_sums: Vec<f64>,
    /// Principal curvatures recovered from the power sums.
    pub lambda_from_power_sums: Vec<f64>,
    pub hypersphere_type: Option<HypersphereType>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DetectorReport {
    /// Spread of each sorted `λ_i` over the grid.
    pub direct: Vec<Spread>,
    pub direct_verdict: Constancy,
    /// Spread of each power sum `Σ λ_i^ι` over the grid.
    pub power_sum: Vec<Spread>,
    pub power_sum_verdict: Constancy,
    pub mu_samples: Vec<f64>,
    /// Largest least-squares misfit of `n L^μ_1 / c` over all grid points.
    pub fit_residual: f64,
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
}

/// Power sums `p_1..p_n` at `u` from `φ(μ) = n L^μ_1 / c = Σ_k μ^k p_{k+1}`.
pub fn power_sums_at(base: &SharedImmersion, u: &[f64], mu_samples: &[f64], order: usize) -> Result<(Vec<f64>, f64)> {
    let base_frame = frame_point(base.as_ref(), u, order)?;
    let n = base_frame.n();
    let mut phi = Vec::with_capacity(mu_samples.len());
    for &mu in mu_samples {
        let par = ParallelImmersion::new(base.clone(), MuParam::Const(mu));
        let fm = frame_point(&par, u, order)?;
        let c = transfer_and_c(&base_frame, &fm, mu)?.c;
        phi.push(n as f64 * fm.mean_curvature() / c);
    }
    let coeffs = numeric::polyfit(mu_samples, &phi, n + 1)?;
    let misfit =
        mu_samples.iter().zip(&phi).map(|(m, p)| (numeric::polyval(&coeffs, *m) - p).abs()).fold(0.0, f64::max);
    Ok((coeffs[..n].to_vec(), misfit))
}

fn hypersphere_type(lambda: &[f64]) -> Option<HypersphereType> {
    let scale = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let lo = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > MULTIPLICITY_GAP * scale.max(1.0) {
        return None;
    }
    let mean = lambda.iter().sum::<f64>() / lambda.len() as f64;
    Some(if mean.abs() <= 1e-8 {
        HypersphereType::Parabolic
    } else if mean > 0.0 {
        HypersphereType::Elliptic
    } else {
        HypersphereType::Hyperbolic
    })
}

/// `μ` window for the power-sum route: symmetric, inside the admissible range.
pub fn power_sum_mu_samples(range: &AdmissibleRange, n: usize) -> Vec<f64> {
    let h = POWER_SUM_HALF_WIDTH.min(0.5 * range.delta);
    numeric::chebyshev_nodes(-h, h, 2 * (n + 1) + 2)
}

pub fn constant_principal_detector(base: &SharedImmersion, grid: &[Vec<f64>], order: usize) -> Result<DetectorReport> {
    let frames: Vec<FramePoint> =
        grid.par_iter().map(|u| frame_point(base.as_ref(), u, order)).collect::<Result<_>>()?;
    let n = base.dim();
    let direct: Vec<Spread> =
        (0..n).map(|i| Spread::of(&frames.iter().map(|f| f.lambda[i]).collect::<Vec<_>>())).collect();
    let direct_verdict = numeric::combine(direct.iter().map(|s| s.verdict));

    let range = admissible_range(frames.iter().flat_map(|f| f.lambda.iter()));
    let mu_samples = power_sum_mu_samples(&range, n);
    let sums: Vec<(Vec<f64>, f64)> =
        grid.par_iter().map(|u| power_sums_at(base, u, &mu_samples, order)).collect::<Result<_>>()?;
    let power_sum: Vec<Spread> =
        (0..n).map(|k| Spread::of(&sums.iter().map(|(p, _)| p[k]).collect::<Vec<_>>())).collect();
    let power_sum_verdict = numeric::combine(power_sum.iter().map(|s| s.verdict));
    let fit_residual = sums.iter().map(|(_, m)| *m).fold(0.0, f64::max);

    let verdict = match (direct_verdict, power_sum_verdict) {
        (Constancy::Constant, Constancy::Constant) => Verdict::Isoparametric,
        (Constancy::NonConstant, Constancy::NonConstant) => Verdict::NotIsoparametric,
        _ => Verdict::Inconclusive,
    };
    let certificate = (verdict == Verdict::Isoparametric).then(|| {
        let count = frames.len() as f64;
        let lambda: Vec<f64> = (0..n).map(|i| frames.iter().map(|f| f.lambda[i]).sum::<f64>() / count).collect();
        let power_sums: Vec<f64> = (0..n).map(|k| sums.iter().map(|(p, _)| p[k]).sum::<f64>() / count).collect();
        Certificate {
            lambda_from_power_sums: numeric::roots_from_power_sums(&power_sums),
            hypersphere_type: hypersphere_type(&lambda),
            lambda,
            power_sums,
        }
    });
    Ok(DetectorReport {
        direct,
        direct_verdict,
        power_sum,
        power_sum_verdict,
        mu_samples,
        fit_residual,
        verdict,
        certificate,
    })
}

/// Tube chart centered in a grid, using the grid's curvatures for the admissible range.
pub fn chart_for_grid(
    base: &SharedImmersion,
    grid: &[Vec<f64>],
    order: usize,
    mode: CMode,
    domain: Option<Vec<(f64, f64)>>,
) -> Result<TubeChart> {
    let n = base.dim();
    let count = grid.len().max(1) as f64;
    let center: Vec<f64> = (0..n).map(|i| grid.iter().map(|u| u[i]).sum::<f64>() / count).collect();
    let frames: Vec<FramePoint> =
        grid.par_iter().map(|u| frame_point(base.as_ref(), u, order)).collect::<Result<_>>()?;
    let lambdas: Vec<f64> = frames.iter().flat_map(|f| f.lambda.iter().cloned()).collect();
    TubeChart::new(Arc::clone(base), &center, order, &lambdas, mode, domain)
}
