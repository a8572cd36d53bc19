//! Parametrized hypersurfaces `x : U ⊂ R^n → R^{n+1}` evaluated in jet arithmetic.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetVector};
use crate::numeric::Mat;

/// A hypersurface chart that can be evaluated on jets.
///
/// `eval` receives one jet per parameter; the jets may live in more
/// variables than `dim()` (extra variables act as passive parameters) and
/// need not be plain coordinate lifts, so implementations must be genuine
/// compositions.
pub trait Immersion: Send + Sync {
    /// Intrinsic dimension `n`.
    fn dim(&self) -> usize;

    fn eval(&self, u: &[Jet]) -> Result<JetVector>;

    /// Initial transversal at `u`; `None` selects the Euclidean normal.
    fn transversal_hint(&self, _u: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn describe(&self) -> String;
}

pub type SharedImmersion = Arc<dyn Immersion>;

impl fmt::Debug for dyn Immersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Immersion({})", self.describe())
    }
}

/// Coordinate lifts `u_i = u0_i + t_i` in `num_vars >= u0.len()` variables.
pub fn seed(u0: &[f64], num_vars: usize, order: usize) -> Result<Vec<Jet>> {
    u0.iter().enumerate().map(|(i, &v)| Jet::variable(v, i, num_vars, order)).collect()
}

/// Plain position of the immersion at `u`.
pub fn position(imm: &dyn Immersion, u: &[f64]) -> Result<Vec<f64>> {
    Ok(imm.eval(&seed(u, u.len(), 0)?)?.value())
}

pub type ScalarFn = Arc<dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync>;

/// Graph `u ↦ (u, f(u))`.
pub struct GraphImmersion {
    n: usize,
    f: ScalarFn,
    label: String,
}

impl GraphImmersion {
    pub fn new(n: usize, label: impl Into<String>, f: ScalarFn) -> GraphImmersion {
        GraphImmersion { n, f, label: label.into() }
    }
}

pub fn make_graph_immersion(n: usize, label: impl Into<String>, f: ScalarFn) -> SharedImmersion {
    Arc::new(GraphImmersion::new(n, label, f))
}

impl Immersion for GraphImmersion {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, u: &[Jet]) -> Result<JetVector> {
        if u.len() != self.n {
            return Err(Error::Config(format!("graph of {} variables evaluated on {}", self.n, u.len())));
        }
        let mut comps = u.to_vec();
        comps.push((self.f)(u)?);
        JetVector::new(comps)
    }

    fn transversal_hint(&self, _u: &[f64]) -> Option<Vec<f64>> {
        let mut e = vec![0.0; self.n + 1];
        e[self.n] = 1.0;
        Some(e)
    }

    fn describe(&self) -> String {
        format!("graph({})", self.label)
    }
}

/// `u ↦ S x(u) + t` for an ambient affine map.
pub struct AffineImage {
    inner: SharedImmersion,
    linear: Mat,
    translation: Vec<f64>,
}

impl AffineImage {
    pub fn new(inner: SharedImmersion, linear: Mat, translation: Vec<f64>) -> Result<AffineImage> {
        let m = inner.dim() + 1;
        if linear.len() != m || linear.iter().any(|r| r.len() != m) || translation.len() != m {
            return Err(Error::Config(format!("affine map must be {m}x{m} with a length-{m} translation")));
        }
        Ok(AffineImage { inner, linear, translation })
    }

    pub fn linear(&self) -> &Mat {
        &self.linear
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.linear.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

impl Immersion for AffineImage {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, u: &[Jet]) -> Result<JetVector> {
        let x = self.inner.eval(u)?;
        let comps = self
            .linear
            .iter()
            .zip(&self.translation)
            .map(|(row, t)| {
                let mut acc = x.components[0].lift(*t);
                for (a, c) in row.iter().zip(&x.components) {
                    acc += &c.scale(*a);
                }
                acc
            })
            .collect();
        JetVector::new(comps)
    }

    fn transversal_hint(&self, u: &[f64]) -> Option<Vec<f64>> {
        self.inner.transversal_hint(u).map(|h| self.apply(&h))
    }

    fn describe(&self) -> String {
        format!("affine_image({})", self.inner.describe())
    }
}

/// `w ↦ x(A w + b)`: the same hypersurface in a different chart.
pub struct Reparametrized {
    inner: SharedImmersion,
    matrix: Mat,
    offset: Vec<f64>,
}

impl Reparametrized {
    pub fn new(inner: SharedImmersion, matrix: Mat, offset: Vec<f64>) -> Result<Reparametrized> {
        let n = inner.dim();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) || offset.len() != n {
            return Err(Error::Config(format!("chart change must be {n}x{n} with a length-{n} offset")));
        }
        Ok(Reparametrized { inner, matrix, offset })
    }

    /// Original parameters for chart point `w`.
    pub fn map_point(&self, w: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(w).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }
}

impl Immersion for Reparametrized {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, w: &[Jet]) -> Result<JetVector> {
        let u: Vec<Jet> = self
            .matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| {
                let mut acc = w[0].lift(*b);
                for (a, x) in row.iter().zip(w) {
                    acc += &x.scale(*a);
                }
                acc
            })
            .collect();
        self.inner.eval(&u)
    }

    fn transversal_hint(&self, w: &[f64]) -> Option<Vec<f64>> {
        self.inner.transversal_hint(&self.map_point(w))
    }

    fn describe(&self) -> String {
        format!("reparametrized({})", self.inner.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paraboloid() -> SharedImmersion {
        make_graph_immersion(
            2,
            "paraboloid",
            Arc::new(|u: &[Jet]| Ok((&(&u[0] * &u[0]) + &(&u[1] * &u[1])).scale(0.5))),
        )
    }

    #[test]
    fn paraboloid_graph_at_origin() {
        let imm = paraboloid();
        let x = imm.eval(&seed(&[0.0, 0.0], 2, 2).unwrap()).unwrap();
        assert_eq!(x.value(), vec![0.0, 0.0, 0.0]);
        let x1 = x.derivative(0).unwrap().value();
        let x2 = x.derivative(1).unwrap().value();
        assert_eq!(x1, vec![1.0, 0.0, 0.0]);
        assert_eq!(x2, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn sphere_patch_north_pole() {
        let imm = make_graph_immersion(
            2,
            "sphere",
            Arc::new(|u: &[Jet]| (&u[0] * &u[0] + &u[1] * &u[1]).scale(-1.0).add_scalar(1.0).sqrt()),
        );
        assert_eq!(position(imm.as_ref(), &[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn titeica_product_is_one() {
        let imm = make_graph_immersion(2, "titeica", Arc::new(|u: &[Jet]| (&u[0] * &u[1]).recip()));
        let p = position(imm.as_ref(), &[1.3, 0.4]).unwrap();
        assert!((p[0] * p[1] * p[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_image_and_reparametrization() {
        let s = vec![vec![2.0, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.0, 1.0, 1.0]];
        let img = AffineImage::new(paraboloid(), s, vec![1.0, 0.0, -1.0]).unwrap();
        let p = position(&img, &[1.0, 1.0]).unwrap();
        assert_eq!(p, vec![3.0, 0.5, 1.0 + 1.0 - 1.0]);
        assert_eq!(img.transversal_hint(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);

        let r = Reparametrized::new(paraboloid(), vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.5, 0.0]).unwrap();
        assert_eq!(r.map_point(&[1.0, 2.0]), vec![2.5, 1.0]);
        let p = position(&r, &[1.0, 2.0]).unwrap();
        assert_eq!(p, vec![2.5, 1.0, 0.5 * (6.25 + 1.0)]);
    }
}
