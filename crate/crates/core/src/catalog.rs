//! Named test hypersurfaces with closed-form reference values.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::immersion::{make_graph_immersion, AffineImage, SharedImmersion};
use crate::invariants::frame_point;
use crate::jet::Jet;
use crate::numeric::{self, Mat};
use crate::parallel::{MuParam, ParallelImmersion};
use crate::tube::{newton_invert, HypersphereType, TubeChart};

pub type PointFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarOracle = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type AmbientFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Closed forms known for an entry; `None` where no closed form is claimed.
#[derive(Clone, Default)]
pub struct Oracles {
    /// Affine normal at a parameter point.
    pub y: Option<PointFn>,
    /// Sorted principal curvatures at a parameter point.
    pub lambda: Option<PointFn>,
    pub c: Option<ScalarOracle>,
    /// Level function `F(p) = μ` of the tube.
    pub f: Option<AmbientFn>,
    pub hypersphere_type: Option<HypersphereType>,
    /// The affine normal is parallel to the position vector (center at the origin).
    pub y_parallel_to_position: bool,
    /// All principal curvatures coincide.
    pub equal_lambda: bool,
}

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub immersion: SharedImmersion,
    /// Parameter box per coordinate.
    pub chart_domain: Vec<(f64, f64)>,
    pub oracles: Oracles,
    /// `None` for user expressions.
    pub expected_verdict: Option<bool>,
    pub description: String,
}

impl CatalogEntry {
    pub fn dim(&self) -> usize {
        self.immersion.dim()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.chart_domain.len()
            && u.iter().zip(&self.chart_domain).all(|(v, (lo, hi))| *v >= lo - 1e-12 && *v <= hi + 1e-12)
    }
}

impl std::fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry").field("name", &self.name).field("domain", &self.chart_domain).finish()
    }
}

/// Registry summary used by the `catalog` subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogListing {
    pub name: &'static str,
    pub syntax: &'static str,
    pub description: &'static str,
    pub expected_verdict: Option<bool>,
}

pub fn listing() -> Vec<CatalogListing> {
    vec![
        CatalogListing {
            name: "paraboloid",
            syntax: "paraboloid",
            description: "f = (u^2 + v^2)/2 on |u|,|v| <= 1; parabolic affine sphere",
            expected_verdict: Some(true),
        },
        CatalogListing {
            name: "sphere",
            syntax: "sphere(r)",
            description: "upper graph patch of the radius-r sphere on |u|,|v| <= 0.4 r; elliptic affine sphere",
            expected_verdict: Some(true),
        },
        CatalogListing {
            name: "ellipsoid",
            syntax: "ellipsoid(a,b,c)",
            description: "diag(a,b,c) image of the unit sphere patch, abc = 1; default (2, 0.5, 1)",
            expected_verdict: Some(true),
        },
        CatalogListing {
            name: "titeica",
            syntax: "titeica",
            description: "xyz = 1 as f = 1/(u v) on [0.5, 2]^2; hyperbolic affine sphere",
            expected_verdict: Some(true),
        },
        CatalogListing {
            name: "perturbed",
            syntax: "perturbed(eps)",
            description: "f = (u^2 + v^2)/2 + eps u^3 on |u|,|v| <= 0.2, default eps = 0.1",
            expected_verdict: Some(false),
        },
        CatalogListing {
            name: "custom",
            syntax: "custom:<expr>",
            description: "graph of a user expression in u, v (or u1..un) on |u_i| <= 1",
            expected_verdict: None,
        },
    ]
}

fn sum_squares(u: &[Jet]) -> Jet {
    let mut acc = u[0].lift(0.0);
    for x in u {
        acc += &(x * x);
    }
    acc
}

fn box_domain(n: usize, half: f64) -> Vec<(f64, f64)> {
    vec![(-half, half); n]
}

pub fn paraboloid(n: usize) -> CatalogEntry {
    let imm = make_graph_immersion(n, "paraboloid", Arc::new(|u: &[Jet]| Ok(sum_squares(u).scale(0.5))));
    CatalogEntry {
        name: "paraboloid".into(),
        immersion: imm,
        chart_domain: box_domain(n, 1.0),
        oracles: Oracles {
            y: Some(Arc::new(move |_u: &[f64]| {
                let mut e = vec![0.0; n + 1];
                e[n] = 1.0;
                e
            })),
            lambda: Some(Arc::new(move |_u: &[f64]| vec![0.0; n])),
            c: Some(Arc::new(|_mu| 1.0)),
            f: Some(Arc::new(move |p: &[f64]| p[n] - 0.5 * p[..n].iter().map(|x| x * x).sum::<f64>())),
            hypersphere_type: Some(HypersphereType::Parabolic),
            y_parallel_to_position: false,
            equal_lambda: true,
        },
        expected_verdict: Some(true),
        description: "paraboloid".into(),
    }
}

/// `λ = r^{-2(n+1)/(n+2)}` of the radius-`r` sphere in `R^{n+1}`.
pub fn sphere_curvature(r: f64, n: usize) -> f64 {
    r.powf(-2.0 * (n as f64 + 1.0) / (n as f64 + 2.0))
}

fn sphere_oracles(lam: f64, n: usize, radius_of: AmbientFn) -> Oracles {
    let nf = n as f64;
    Oracles {
        y: None,
        lambda: Some(Arc::new(move |_u: &[f64]| vec![lam; n])),
        c: Some(Arc::new(move |mu| (1.0 - mu * lam).powf(-nf / (nf + 2.0)))),
        // x^μ = (1 - μλ) x
        f: Some(Arc::new(move |p: &[f64]| (1.0 - radius_of(p)) / lam)),
        hypersphere_type: Some(HypersphereType::Elliptic),
        y_parallel_to_position: true,
        equal_lambda: true,
    }
}

pub fn sphere(r: f64, n: usize) -> Result<CatalogEntry> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("sphere radius must be positive, got {r}")));
    }
    let imm = make_graph_immersion(
        n,
        format!("sphere({r})"),
        Arc::new(move |u: &[Jet]| sum_squares(u).scale(-1.0).add_scalar(r * r).sqrt()),
    );
    let lam = sphere_curvature(r, n);
    let mut oracles = sphere_oracles(lam, n, Arc::new(move |p: &[f64]| numeric::norm(p) / r));
    // Y = -λ x
    let pos = imm.clone();
    oracles.y = Some(Arc::new(move |u: &[f64]| {
        let x = crate::immersion::position(pos.as_ref(), u).expect("sphere chart point");
        x.iter().map(|c| -lam * c).collect()
    }));
    Ok(CatalogEntry {
        name: format!("sphere({r})"),
        immersion: imm,
        chart_domain: box_domain(n, 0.4 * r),
        oracles,
        expected_verdict: Some(true),
        description: format!("radius-{r} sphere patch"),
    })
}

pub const DEFAULT_ELLIPSOID: [f64; 3] = [2.0, 0.5, 1.0];

pub fn ellipsoid(axes: [f64; 3]) -> Result<CatalogEntry> {
    let [a, b, c] = axes;
    if axes.iter().any(|x| x.is_nan() || *x <= 0.0) || ((a * b * c) - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("ellipsoid axes must be positive with abc = 1, got ({a}, {b}, {c})")));
    }
    let unit = sphere(1.0, 2)?;
    let s: Mat = vec![vec![a, 0.0, 0.0], vec![0.0, b, 0.0], vec![0.0, 0.0, c]];
    let imm: SharedImmersion = Arc::new(AffineImage::new(unit.immersion.clone(), s, vec![0.0; 3])?);
    let mut oracles = sphere_oracles(1.0, 2, Arc::new(move |p: &[f64]| numeric::norm(&[p[0] / a, p[1] / b, p[2] / c])));
    // Y = -x, the unit-sphere normal pushed forward by S
    let pos = imm.clone();
    oracles.y = Some(Arc::new(move |u: &[f64]| {
        crate::immersion::position(pos.as_ref(), u).expect("ellipsoid chart point").iter().map(|x| -x).collect()
    }));
    Ok(CatalogEntry {
        name: format!("ellipsoid({a},{b},{c})"),
        immersion: imm,
        chart_domain: box_domain(2, 0.4),
        oracles,
        expected_verdict: Some(true),
        description: "unimodular image of the unit sphere".into(),
    })
}

pub fn titeica() -> CatalogEntry {
    let imm = make_graph_immersion(2, "titeica", Arc::new(|u: &[Jet]| (&u[0] * &u[1]).recip()));
    CatalogEntry {
        name: "titeica".into(),
        immersion: imm,
        chart_domain: vec![(0.5, 2.0), (0.5, 2.0)],
        oracles: Oracles {
            hypersphere_type: Some(HypersphereType::Hyperbolic),
            y_parallel_to_position: true,
            equal_lambda: true,
            ..Oracles::default()
        },
        expected_verdict: Some(true),
        description: "xyz = 1".into(),
    }
}

pub const DEFAULT_PERTURBATION: f64 = 0.1;

pub fn perturbed(eps: f64) -> CatalogEntry {
    let imm = make_graph_immersion(
        2,
        format!("perturbed({eps})"),
        Arc::new(move |u: &[Jet]| Ok(sum_squares(u).scale(0.5) + (&u[0] * &u[0] * &u[0]).scale(eps))),
    );
    CatalogEntry {
        name: format!("perturbed({eps})"),
        immersion: imm,
        chart_domain: box_domain(2, 0.2),
        oracles: Oracles::default(),
        expected_verdict: Some(eps == 0.0),
        description: "cubic perturbation of the paraboloid".into(),
    }
}

pub fn custom(text: &str) -> Result<CatalogEntry> {
    let e: Expr = expr::parse(text)?;
    let n = e.arity().max(2);
    let label = e.to_string();
    let imm = make_graph_immersion(n, label.clone(), Arc::new(move |u: &[Jet]| e.eval(u)));
    Ok(CatalogEntry {
        name: format!("custom:{text}"),
        immersion: imm,
        chart_domain: box_domain(n, 1.0),
        oracles: Oracles::default(),
        expected_verdict: None,
        description: format!("graph of {label}"),
    })
}

fn parse_args(name: &str, inner: &str, count: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(Error::Config(format!("`{name}` takes {count} argument(s), got {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| Error::Config(format!("`{name}`: `{p}` is not a number"))))
        .collect()
}

/// Look up an entry by its CLI name, e.g. `sphere(2)` or `custom:1/(u*v)`.
pub fn get(spec: &str) -> Result<CatalogEntry> {
    let spec = spec.trim();
    if let Some(text) = spec.strip_prefix("custom:") {
        return custom(text);
    }
    let (name, args) = match spec.find('(') {
        Some(i) => {
            let inner = spec[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Config(format!("missing `)` in surface `{spec}`")))?;
            (spec[..i].trim(), Some(inner))
        }
        None => (spec, None),
    };
    match (name, args) {
        ("paraboloid", None) => Ok(paraboloid(2)),
        ("sphere", None) => sphere(1.0, 2),
        ("sphere", Some(a)) => sphere(parse_args(name, a, 1)?[0], 2),
        ("ellipsoid", None) => ellipsoid(DEFAULT_ELLIPSOID),
        ("ellipsoid", Some(a)) => {
            let v = parse_args(name, a, 3)?;
            ellipsoid([v[0], v[1], v[2]])
        }
        ("titeica", None) => Ok(titeica()),
        ("perturbed", None) => Ok(perturbed(DEFAULT_PERTURBATION)),
        ("perturbed", Some(a)) => Ok(perturbed(parse_args(name, a, 1)?[0])),
        ("paraboloid" | "titeica", Some(_)) => Err(Error::Config(format!("`{name}` takes no arguments"))),
        _ => Err(Error::UnknownSurface(spec.to_string())),
    }
}

/// Largest deviations between pipeline output and the oracles of an entry.
#[derive(Clone, Debug, Default, Serialize)]
pub struct OracleReport {
    pub y: Option<f64>,
    pub lambda: Option<f64>,
    pub c: Option<f64>,
    pub f: Option<f64>,
    /// Largest angle between `Y` and the position vector.
    pub y_position_angle: Option<f64>,
    /// Largest spread among the `λ_i` at one point.
    pub lambda_equality: Option<f64>,
    /// Spread of the common `λ` across the grid.
    pub lambda_grid_spread: Option<f64>,
}

impl OracleReport {
    pub fn max(&self) -> f64 {
        [self.y, self.lambda, self.c, self.f, self.y_position_angle, self.lambda_equality, self.lambda_grid_spread]
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(*v))
    }
}

fn max_opt(acc: &mut Option<f64>, v: f64) {
    *acc = Some(acc.map_or(v, |a| a.max(v)));
}

/// Compare the pipeline against every available oracle over `grid` and `mus`.
pub fn oracle_check(entry: &CatalogEntry, grid: &[Vec<f64>], mus: &[f64], order: usize) -> Result<OracleReport> {
    let imm = &entry.immersion;
    let frames = grid.par_iter().map(|u| frame_point(imm.as_ref(), u, order)).collect::<Result<Vec<_>>>()?;
    let mut rep = OracleReport::default();
    let o = &entry.oracles;
    for (u, f) in grid.iter().zip(&frames) {
        if let Some(yo) = &o.y {
            let d = yo(u).iter().zip(&f.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            max_opt(&mut rep.y, d);
        }
        if let Some(lo) = &o.lambda {
            let d = lo(u).iter().zip(&f.lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            max_opt(&mut rep.lambda, d);
        }
        if o.y_parallel_to_position {
            max_opt(&mut rep.y_position_angle, numeric::line_angle(&f.y, &f.x));
        }
        if o.equal_lambda {
            max_opt(&mut rep.lambda_equality, f.lambda[f.lambda.len() - 1] - f.lambda[0]);
        }
    }
    if o.equal_lambda && !frames.is_empty() {
        let means: Vec<f64> = frames.iter().map(|f| f.lambda.iter().sum::<f64>() / f.lambda.len() as f64).collect();
        rep.lambda_grid_spread = Some(numeric::Spread::of(&means).spread);
    }
    if o.c.is_some() || o.f.is_some() {
        let chart = TubeChart::new(
            imm.clone(),
            &grid[grid.len() / 2],
            order,
            &frames.iter().flat_map(|f| f.lambda.clone()).collect::<Vec<_>>(),
            crate::tube::CMode::Exact,
            Some(entry.chart_domain.clone()),
        )?;
        for (u, f) in grid.iter().zip(&frames) {
            for &mu in mus {
                if let Some(co) = &o.c {
                    let par = ParallelImmersion::new(imm.clone(), MuParam::Const(mu));
                    let fm = frame_point(&par, u, order)?;
                    let c = crate::parallel::transfer_and_c(f, &fm, mu)?.c;
                    max_opt(&mut rep.c, (c - co(mu)).abs());
                }
                if let Some(fo) = &o.f {
                    let p: Vec<f64> = f.x.iter().zip(&f.y).map(|(x, y)| x + mu * y).collect();
                    let tc = newton_invert(&chart, &p, Some((u, 0.0)))?;
                    max_opt(&mut rep.f, (tc.mu - fo(&p)).abs());
                }
            }
        }
    }
    Ok(rep)
}
