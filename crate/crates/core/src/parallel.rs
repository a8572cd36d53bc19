//! Equiaffine parallel hypersurfaces `x^μ = x + μ Y` and the identities tying
//! their invariants to those of the base.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::immersion::{Immersion, SharedImmersion};
use crate::invariants::{frame_point, FrameJets, FramePoint};
use crate::jet::{Jet, JetVector};
use crate::numeric::{self, Constancy, Mat, Spread};

/// Smallest accepted `min_i (1 - μ λ_i)`.
pub const ADMISSIBILITY_MARGIN: f64 = 0.05;
/// Derivative orders consumed by the affine normal.
pub const NORMAL_ORDER_COST: usize = 3;
pub const DEFAULT_MU_VALUES: [f64; 4] = [-0.25, 0.1, 0.25, 0.5];

/// How `μ` enters a parallel immersion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuParam {
    Const(f64),
    /// `μ` is jet variable `index` with the given value; used for the tube chart.
    Var {
        value: f64,
        index: usize,
    },
}

impl MuParam {
    pub fn value(&self) -> f64 {
        match *self {
            MuParam::Const(v) | MuParam::Var { value: v, .. } => v,
        }
    }
}

/// `u ↦ x(u) + μ Y(u)`, evaluated in jet arithmetic.
pub struct ParallelImmersion {
    base: SharedImmersion,
    mu: MuParam,
    check_admissible: bool,
}

impl ParallelImmersion {
    pub fn new(base: SharedImmersion, mu: MuParam) -> ParallelImmersion {
        ParallelImmersion { base, mu, check_admissible: true }
    }

    /// Skip the convexity margin check (reverse constructions start from `x^μ`).
    pub fn unchecked(base: SharedImmersion, mu: MuParam) -> ParallelImmersion {
        ParallelImmersion { base, mu, check_admissible: false }
    }

    pub fn base(&self) -> &SharedImmersion {
        &self.base
    }

    pub fn mu(&self) -> MuParam {
        self.mu
    }
}

pub fn parallel_immersion(base: SharedImmersion, mu: f64) -> SharedImmersion {
    Arc::new(ParallelImmersion::new(base, MuParam::Const(mu)))
}

/// `min_i (1 - μ λ_i)`.
pub fn admissibility_margin(lambda: &[f64], mu: f64) -> f64 {
    lambda.iter().map(|l| 1.0 - mu * l).fold(f64::INFINITY, f64::min)
}

fn check_margin(lambda: &[f64], mu: f64) -> Result<()> {
    let margin = admissibility_margin(lambda, mu);
    if margin < ADMISSIBILITY_MARGIN {
        return Err(Error::Inadmissible { mu, margin });
    }
    Ok(())
}

impl Immersion for ParallelImmersion {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, u: &[Jet]) -> Result<JetVector> {
        let n = self.dim();
        if u.len() != n {
            return Err(Error::Config(format!("parallel immersion of dimension {n} evaluated on {}", u.len())));
        }
        let order = u[0].order();
        let num_vars = u[0].num_vars();
        let u0: Vec<f64> = u.iter().map(Jet::value).collect();
        let frame_order = (order + NORMAL_ORDER_COST).max(4);
        let fj = FrameJets::compute(self.base.as_ref(), &u0, frame_order)?;
        let mu = self.mu.value();
        if self.check_admissible {
            check_margin(&fj.shape.lambda, mu)?;
        }
        let y = fj.normal.y.truncate(order).compose(u)?;
        let x = self.base.eval(u)?;
        let shifted = match self.mu {
            MuParam::Const(m) => y.scale_f64(m),
            MuParam::Var { value, index } => y.scale(&Jet::variable(value, index, num_vars, order)?),
        };
        Ok(x.add(&shifted))
    }

    fn transversal_hint(&self, u: &[f64]) -> Option<Vec<f64>> {
        // x^μ_i = T^j_i x_j span the same tangent space
        self.base.transversal_hint(u)
    }

    fn describe(&self) -> String {
        format!("parallel({}, mu={})", self.base.describe(), self.mu.value())
    }
}

/// Transfer matrix and normal scaling between `x` and `x^μ` at one point.
#[derive(Clone, Debug, Serialize)]
pub struct Transfer {
    /// `t[i][j] = T^j_i = δ_ij - μ B^j_i`.
    pub t: Mat,
    pub det_t: f64,
    pub c: f64,
    /// Tangential coefficients `a^i` of `Y^μ = a^i x_i + c Y`.
    pub a: Vec<f64>,
    pub a_residual: f64,
}

pub fn transfer_and_c(base: &FramePoint, frame_mu: &FramePoint, mu: f64) -> Result<Transfer> {
    let n = base.n();
    if frame_mu.n() != n || numeric::norm(&base.u.iter().zip(&frame_mu.u).map(|(a, b)| a - b).collect::<Vec<_>>()) > 0.0
    {
        return Err(Error::Config("frames must be taken at the same parameter point".into()));
    }
    let t: Mat =
        (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - mu * base.b_mixed[i][j]).collect()).collect();
    let det_t = numeric::to_dmatrix(&t).determinant();
    let m = DMatrix::from_fn(n + 1, n + 1, |a, k| if k < n { base.x_i[k][a] } else { base.y[a] });
    let rhs = DVector::from_column_slice(&frame_mu.y);
    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::Singular("frame {x_i, Y} is degenerate".into()))?;
    let a: Vec<f64> = sol.iter().take(n).cloned().collect();
    let c = sol[n];
    let a_residual = numeric::norm(&a);
    Ok(Transfer { t, det_t, c, a, a_residual })
}

/// `P(μ) = Σ_{r=1}^n (-1)^{r+1} μ^{r-1} C(n,r) L_r`, so that `det T = 1 - μ P(μ)`.
pub fn dett_polynomial(l: &[f64], mu: f64) -> f64 {
    let n = l.len();
    (1..=n)
        .map(|r| {
            let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
            sign * mu.powi(r as i32 - 1) * numeric::binomial(n, r) * l[r - 1]
        })
        .sum()
}

/// Residuals of the identities relating the base and the parallel frame, keyed by name.
pub fn verify_parallel_identities(
    base: &FramePoint,
    frame_mu: &FramePoint,
    transfer: &Transfer,
    mu: f64,
) -> BTreeMap<String, f64> {
    let n = base.n();
    let c = transfer.c;
    let mut transfer_metric: f64 = 0.0;
    let mut b_inv: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let lhs: f64 = (0..n).map(|k| transfer.t[i][k] * base.g[k][j]).sum();
            transfer_metric = transfer_metric.max((lhs - c * frame_mu.g[i][j]).abs());
            b_inv = b_inv.max((frame_mu.b_cov[i][j] - base.b_cov[i][j]).abs());
        }
    }
    let mut predicted: Vec<f64> = base.lambda.iter().map(|l| c * l / (1.0 - mu * l)).collect();
    predicted.sort_by(f64::total_cmp);
    let lambda_formula = predicted.iter().zip(&frame_mu.lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let np2 = n as f64 + 2.0;
    let h_transfer = (c.powi(n as i32 + 1) - (base.det_h / frame_mu.det_h).powf(1.0 / np2)).abs();
    let c_consistency = (c.powf(np2) * transfer.det_t - 1.0).abs();
    BTreeMap::from([
        ("transfer_metric".to_string(), transfer_metric),
        ("b_invariance".to_string(), b_inv),
        ("lambda_formula".to_string(), lambda_formula),
        ("h_transfer".to_string(), h_transfer),
        ("c_consistency".to_string(), c_consistency),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelRecord {
    pub mu: f64,
    pub u: Vec<f64>,
    #[serde(rename = "T")]
    pub t: Mat,
    #[serde(rename = "detT")]
    pub det_t: f64,
    pub c: f64,
    pub a_residual: f64,
    /// `H / H^μ`.
    pub h_ratio: f64,
    /// `det G / det G^μ`.
    pub g_ratio: f64,
    pub dett_polynomial: f64,
    pub lambda: Vec<f64>,
    pub lambda_mu: Vec<f64>,
    #[serde(skip)]
    pub base: FramePoint,
    #[serde(skip)]
    pub frame_mu: FramePoint,
    pub residuals: BTreeMap<String, f64>,
}

/// Base and parallel invariants at `u`; `order` is the frame order of both.
pub fn parallel_record(base: &SharedImmersion, u: &[f64], mu: f64, order: usize) -> Result<ParallelRecord> {
    let base_frame = frame_point(base.as_ref(), u, order)?;
    check_margin(&base_frame.lambda, mu)?;
    let par = ParallelImmersion::new(base.clone(), MuParam::Const(mu));
    let frame_mu = frame_point(&par, u, order)?;
    let transfer = transfer_and_c(&base_frame, &frame_mu, mu)?;
    let mut residuals = verify_parallel_identities(&base_frame, &frame_mu, &transfer, mu);
    residuals.insert("a_residual".to_string(), transfer.a_residual);
    Ok(ParallelRecord {
        mu,
        u: u.to_vec(),
        h_ratio: base_frame.det_h / frame_mu.det_h,
        g_ratio: base_frame.det_g() / frame_mu.det_g(),
        dett_polynomial: dett_polynomial(&base_frame.l, mu),
        lambda: base_frame.lambda.clone(),
        lambda_mu: frame_mu.lambda.clone(),
        t: transfer.t,
        det_t: transfer.det_t,
        c: transfer.c,
        a_residual: transfer.a_residual,
        base: base_frame,
        frame_mu,
        residuals,
    })
}

/// Four equivalent constancy tests for one `μ` over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct ConstancyReport {
    pub mu: f64,
    #[serde(rename = "detT")]
    pub det_t: Spread,
    pub h_ratio: Spread,
    pub g_ratio: Spread,
    pub dett_polynomial: Spread,
    /// Spread of `c`, which should depend on `μ` only for parallel families.
    pub c: Spread,
    pub verdicts_agree: bool,
    pub verdict: Constancy,
}

impl ConstancyReport {
    pub fn from_records(mu: f64, records: &[ParallelRecord]) -> ConstancyReport {
        let collect = |f: &dyn Fn(&ParallelRecord) -> f64| Spread::of(&records.iter().map(f).collect::<Vec<_>>());
        let det_t = collect(&|r| r.det_t);
        let h_ratio = collect(&|r| r.h_ratio);
        let g_ratio = collect(&|r| r.g_ratio);
        let poly = collect(&|r| r.dett_polynomial);
        let c = collect(&|r| r.c);
        let verdicts = [det_t.verdict, h_ratio.verdict, g_ratio.verdict, poly.verdict];
        let verdicts_agree = verdicts.iter().all(|v| *v == verdicts[0]);
        let verdict = if verdicts_agree { verdicts[0] } else { Constancy::Inconclusive };
        ConstancyReport { mu, det_t, h_ratio, g_ratio, dett_polynomial: poly, c, verdicts_agree, verdict }
    }

    /// `det T`, `H/H^μ`, `det G/det G^μ` and the polynomial all constant.
    pub fn is_parallel(&self) -> bool {
        self.verdict == Constancy::Constant
    }
}

pub fn parallel_records(
    base: &SharedImmersion,
    grid: &[Vec<f64>],
    mu: f64,
    order: usize,
) -> Result<Vec<ParallelRecord>> {
    grid.par_iter().map(|u| parallel_record(base, u, mu, order)).collect()
}

pub fn constancy_check(
    base: &SharedImmersion,
    grid: &[Vec<f64>],
    mu: f64,
    order: usize,
) -> Result<(ConstancyReport, Vec<ParallelRecord>)> {
    let records = parallel_records(base, grid, mu, order)?;
    Ok((ConstancyReport::from_records(mu, &records), records))
}

/// Interval of `μ` keeping `1 - μ λ_i ≥ margin` for the given principal curvatures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibleRange {
    pub lo: f64,
    pub hi: f64,
    /// Largest `δ` with `(-δ, δ)` inside `[lo, hi]`.
    pub delta: f64,
}

impl AdmissibleRange {
    pub fn contains(&self, mu: f64) -> bool {
        mu >= self.lo && mu <= self.hi
    }
}

pub fn admissible_range<'a>(lambdas: impl IntoIterator<Item = &'a f64>) -> AdmissibleRange {
    let bound = 1.0 - ADMISSIBILITY_MARGIN;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for &l in lambdas {
        if l > 0.0 {
            hi = hi.min(bound / l);
        } else if l < 0.0 {
            lo = lo.max(bound / l);
        }
    }
    AdmissibleRange { lo, hi, delta: (-lo).min(hi) }
}

/// Principal curvatures over a grid, in grid order.
pub fn grid_frames(base: &SharedImmersion, grid: &[Vec<f64>], order: usize) -> Result<Vec<FramePoint>> {
    grid.par_iter().map(|u| frame_point(base.as_ref(), u, order)).collect()
}

/// Default `μ` samples clipped to the admissible range.
pub fn default_mu_values(range: &AdmissibleRange) -> Vec<f64> {
    DEFAULT_MU_VALUES.iter().cloned().filter(|m| range.contains(*m)).collect()
}

/// Rebuilding `x` from `x^μ` with its own affine normal and `μ' = -μ/c`.
#[derive(Clone, Debug, Serialize)]
pub struct ReverseCheck {
    pub mu: f64,
    pub mu_reverse: f64,
    pub position: f64,
    pub normal: f64,
    pub lambda: f64,
}

impl ReverseCheck {
    pub fn max(&self) -> f64 {
        self.position.max(self.normal).max(self.lambda)
    }
}

pub fn reverse_check(base: &SharedImmersion, u: &[f64], mu: f64, order: usize) -> Result<ReverseCheck> {
    let rec = parallel_record(base, u, mu, order)?;
    let mu_reverse = -mu / rec.c;
    let forward: SharedImmersion = Arc::new(ParallelImmersion::new(base.clone(), MuParam::Const(mu)));
    let back = ParallelImmersion::unchecked(forward, MuParam::Const(mu_reverse));
    let frame_back = frame_point(&back, u, order)?;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(ReverseCheck {
        mu,
        mu_reverse,
        position: diff(&frame_back.x, &rec.base.x),
        normal: diff(&frame_back.y, &rec.base.y),
        lambda: diff(&frame_back.lambda, &rec.base.lambda),
    })
}
