//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] stores the Taylor coefficients `∂^α f / α!` of a scalar
//! quantity for every multi-index `|α| <= order`, in graded-lexicographic
//! layout. Because the layout is graded, the coefficient table of order `k`
//! is a prefix of the table of any order `K >= k` with the same number of
//! variables; truncation is a slice.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Upper bound on the jet order accepted anywhere in the crate.
pub const MAX_ORDER: usize = 16;
/// Upper bound on the number of jet variables.
pub const MAX_VARS: usize = 6;

/// Multi-index tables for one `(num_vars, order)` pair.
pub struct Layout {
    num_vars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `pairs[pair_start[a]..pair_start[a+1]]` lists every `(b, g)` with
    /// `exps[b] + exps[g] == exps[a]`.
    pair_start: Vec<usize>,
    pairs: Vec<(u32, u32)>,
    /// `raise[i][a]` is the index of `exps[a] + e_i` when that stays within `order`.
    raise: Vec<Vec<Option<usize>>>,
    factorials: Vec<f64>,
}

impl Layout {
    fn build(num_vars: usize, order: usize) -> Layout {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u8; num_vars];
            push_degree(&mut exps, &mut current, 0, degree);
        }
        let index: HashMap<Vec<u8>, usize> = exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let mut pair_start = Vec::with_capacity(exps.len() + 1);
        let mut pairs = Vec::new();
        for target in &exps {
            pair_start.push(pairs.len());
            for (b, be) in exps.iter().enumerate() {
                if be.iter().zip(target).all(|(x, y)| x <= y) {
                    let rest: Vec<u8> = target.iter().zip(be).map(|(t, x)| t - x).collect();
                    pairs.push((b as u32, index[&rest] as u32));
                }
            }
        }
        pair_start.push(pairs.len());

        let raise = (0..num_vars)
            .map(|i| {
                exps.iter()
                    .map(|e| {
                        let mut r = e.clone();
                        r[i] += 1;
                        index.get(&r).copied()
                    })
                    .collect()
            })
            .collect();

        let mut factorials = vec![1.0; order + 1];
        for k in 1..=order {
            factorials[k] = factorials[k - 1] * k as f64;
        }

        Layout { num_vars, order, exps, index, pair_start, pairs, raise, factorials }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn exponents(&self) -> &[Vec<u8>] {
        &self.exps
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    fn pairs_of(&self, a: usize) -> &[(u32, u32)] {
        &self.pairs[self.pair_start[a]..self.pair_start[a + 1]]
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut [u8], var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.to_vec());
        current[var] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[var] = k as u8;
        push_degree(out, current, var + 1, remaining - k);
    }
    current[var] = 0;
}

/// Shared, leaked layout for `(num_vars, order)`.
pub fn layout(num_vars: usize, order: usize) -> Result<&'static Layout> {
    if num_vars == 0 || num_vars > MAX_VARS {
        return Err(Error::Jet(format!("num_vars {num_vars} outside 1..={MAX_VARS}")));
    }
    if order > MAX_ORDER {
        return Err(Error::Jet(format!("order {order} exceeds {MAX_ORDER}")));
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
    Ok(*guard.entry((num_vars, order)).or_insert_with(|| Box::leak(Box::new(Layout::build(num_vars, order)))))
}

/// Univariate functions that can be composed with a jet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Analytic {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Pow(f64),
}

/// Truncated Taylor expansion of a scalar at a parameter point.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("num_vars", &self.num_vars())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars() == other.num_vars() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn zero(num_vars: usize, order: usize) -> Result<Jet> {
        let layout = layout(num_vars, order)?;
        Ok(Jet { layout, coeffs: vec![0.0; layout.len()] })
    }

    pub fn constant(value: f64, num_vars: usize, order: usize) -> Result<Jet> {
        let mut j = Jet::zero(num_vars, order)?;
        j.coeffs[0] = value;
        Ok(j)
    }

    /// Lift of the coordinate `u_{var_index}` evaluated at `value`.
    pub fn variable(value: f64, var_index: usize, num_vars: usize, order: usize) -> Result<Jet> {
        if var_index >= num_vars {
            return Err(Error::Jet(format!("variable index {var_index} out of range for {num_vars} variables")));
        }
        let mut j = Jet::constant(value, num_vars, order)?;
        if order >= 1 {
            // degree-1 monomials follow the constant, u_0 first
            j.coeffs[1 + var_index] = 1.0;
        }
        Ok(j)
    }

    pub fn from_coeffs(num_vars: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        let layout = layout(num_vars, order)?;
        if coeffs.len() != layout.len() {
            return Err(Error::Jet(format!("expected {} coefficients, got {}", layout.len(), coeffs.len())));
        }
        Ok(Jet { layout, coeffs })
    }

    /// A constant with the same shape as `self`.
    pub fn lift(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet { layout: self.layout, coeffs }
    }

    pub fn num_vars(&self) -> usize {
        self.layout.num_vars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient for the multi-index `alpha`.
    pub fn coeff(&self, alpha: &[u8]) -> Option<f64> {
        self.layout.index_of(alpha).map(|i| self.coeffs[i])
    }

    fn same_shape(&self, other: &Jet) -> bool {
        std::ptr::eq(self.layout, other.layout)
    }

    fn check(&self, other: &Jet) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Jet(format!(
                "jet shape mismatch: ({}, {}) vs ({}, {})",
                self.num_vars(),
                self.order(),
                other.num_vars(),
                other.order()
            )))
        }
    }

    pub fn checked_add(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| a + b))
    }

    pub fn checked_sub(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        Ok(self.zip(other, |a, b| a - b))
    }

    pub fn checked_mul(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    /// Quotient via the product recurrence `b * q = a`.
    pub fn checked_div(&self, other: &Jet) -> Result<Jet> {
        self.check(other)?;
        let b0 = other.coeffs[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::Jet("division by a jet with zero constant term".into()));
        }
        let mut q = vec![0.0; self.coeffs.len()];
        for a in 0..q.len() {
            let mut acc = self.coeffs[a];
            for &(b, g) in self.layout.pairs_of(a) {
                if b != 0 {
                    acc -= other.coeffs[b as usize] * q[g as usize];
                }
            }
            q[a] = acc / b0;
        }
        Ok(Jet { layout: self.layout, coeffs: q })
    }

    pub fn recip(&self) -> Result<Jet> {
        self.lift(1.0).checked_div(self)
    }

    fn zip(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect();
        Jet { layout: self.layout, coeffs }
    }

    fn mul_unchecked(&self, other: &Jet) -> Jet {
        let mut out = vec![0.0; self.coeffs.len()];
        for (a, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(b, g) in self.layout.pairs_of(a) {
                acc += self.coeffs[b as usize] * other.coeffs[g as usize];
            }
            *slot = acc;
        }
        Jet { layout: self.layout, coeffs: out }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { layout: self.layout, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Composition with a univariate function.
    pub fn analytic(&self, func: Analytic) -> Result<Jet> {
        let a0 = self.coeffs[0];
        let k = self.order();
        let series: Vec<f64> = match func {
            Analytic::Sqrt => {
                if a0 <= 0.0 {
                    return Err(Error::Domain(format!("sqrt of jet with constant term {a0}")));
                }
                power_series(a0, 0.5, k)
            }
            Analytic::Pow(p) => {
                let integral = p.fract() == 0.0;
                if a0 < 0.0 && !integral {
                    return Err(Error::Domain(format!("pow({p}) of jet with constant term {a0}")));
                }
                if a0 == 0.0 && !(integral && p >= 0.0) {
                    return Err(Error::Domain(format!("pow({p}) of jet with zero constant term")));
                }
                if integral && p.abs() <= 64.0 {
                    return self.powi(p as i32);
                }
                power_series(a0, p, k)
            }
            Analytic::Exp => {
                let e = a0.exp();
                let mut s = vec![e; k + 1];
                for i in 1..=k {
                    s[i] = s[i - 1] / i as f64;
                }
                s
            }
            Analytic::Log => {
                if a0 <= 0.0 {
                    return Err(Error::Domain(format!("log of jet with constant term {a0}")));
                }
                let mut s = vec![a0.ln(); k + 1];
                let mut p = 1.0;
                for i in 1..=k {
                    p *= a0;
                    let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                    s[i] = sign / (i as f64 * p);
                }
                s
            }
            Analytic::Sin | Analytic::Cos => {
                let (s0, c0) = a0.sin_cos();
                let cycle = if func == Analytic::Sin { [s0, c0, -s0, -c0] } else { [c0, -s0, -c0, s0] };
                (0..=k).map(|i| cycle[i % 4] / self.layout.factorials[i]).collect()
            }
        };
        Ok(self.compose_series(&series))
    }

    /// `sum_k series[k] * (self - self(0))^k` by Horner's rule.
    fn compose_series(&self, series: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = self.lift(series[series.len() - 1]);
        for &c in series[..series.len() - 1].iter().rev() {
            acc = acc.mul_unchecked(&delta);
            acc.coeffs[0] += c;
        }
        acc
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.analytic(Analytic::Sqrt)
    }

    pub fn powf(&self, p: f64) -> Result<Jet> {
        self.analytic(Analytic::Pow(p))
    }

    pub fn powi(&self, p: i32) -> Result<Jet> {
        let base = if p < 0 { self.recip()? } else { self.clone() };
        let mut e = p.unsigned_abs();
        let mut result = self.lift(1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_unchecked(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul_unchecked(&sq);
            }
        }
        Ok(result)
    }

    /// `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: &[u8]) -> Result<f64> {
        if alpha.len() != self.num_vars() {
            return Err(Error::Jet(format!(
                "multi-index has {} entries, jet has {} variables",
                alpha.len(),
                self.num_vars()
            )));
        }
        let degree: usize = alpha.iter().map(|&a| a as usize).sum();
        if degree > self.order() {
            return Err(Error::Jet(format!(
                "derivative of order {degree} requested from a jet of order {}",
                self.order()
            )));
        }
        let idx = self.layout.index_of(alpha).expect("multi-index within order");
        let fact: f64 = alpha.iter().map(|&a| self.layout.factorials[a as usize]).product();
        Ok(self.coeffs[idx] * fact)
    }

    /// Derivative with respect to variable `var`; the result has order one less.
    pub fn derivative(&self, var: usize) -> Result<Jet> {
        if var >= self.num_vars() {
            return Err(Error::Jet(format!("derivative variable {var} out of range")));
        }
        if self.order() == 0 {
            return Err(Error::Jet("cannot differentiate an order-0 jet".into()));
        }
        let lower = layout(self.num_vars(), self.order() - 1)?;
        let coeffs = (0..lower.len())
            .map(|a| {
                let up = self.layout.raise[var][a].expect("raised index within order");
                (self.layout.exps[a][var] as f64 + 1.0) * self.coeffs[up]
            })
            .collect();
        Ok(Jet { layout: lower, coeffs })
    }

    /// Drop every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let lower = layout(self.num_vars(), order).expect("smaller layout is valid");
        Jet { layout: lower, coeffs: self.coeffs[..lower.len()].to_vec() }
    }

    /// Substitute `u_i - u_i(0) = args_i - args_i(0)` into this jet.
    ///
    /// `self` is an expansion in `num_vars()` variables; each argument is a jet in
    /// the target shape. The constant terms of `args` are ignored, so the
    /// result is `f(u0 + (args - args(0)))` where `u0` is the expansion point
    /// of `self`.
    pub fn compose(&self, args: &[Jet]) -> Result<Jet> {
        if args.len() != self.num_vars() {
            return Err(Error::Jet(format!("compose: {} arguments for {} variables", args.len(), self.num_vars())));
        }
        for w in args.windows(2) {
            w[0].check(&w[1])?;
        }
        let target = &args[0];
        let k = target.order().min(self.order());
        let deltas: Vec<Jet> = args
            .iter()
            .map(|a| {
                let mut d = a.clone();
                d.coeffs[0] = 0.0;
                d
            })
            .collect();
        let mut powers: Vec<Vec<Jet>> = Vec::with_capacity(deltas.len());
        for d in &deltas {
            let mut p = vec![target.lift(1.0)];
            for e in 1..=k {
                let next = p[e - 1].mul_unchecked(d);
                p.push(next);
            }
            powers.push(p);
        }
        let mut out = target.lift(0.0);
        let exps = &self.layout.exps;
        for (idx, alpha) in exps.iter().enumerate() {
            let c = self.coeffs[idx];
            let degree: usize = alpha.iter().map(|&a| a as usize).sum();
            if degree > k || c == 0.0 {
                continue;
            }
            let mut term: Option<Jet> = None;
            for (var, &e) in alpha.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let p = &powers[var][e as usize];
                term = Some(match term {
                    None => p.clone(),
                    Some(t) => t.mul_unchecked(p),
                });
            }
            match term {
                None => out.coeffs[0] += c,
                Some(t) => {
                    for (o, v) in out.coeffs.iter_mut().zip(&t.coeffs) {
                        *o += c * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn power_series(a0: f64, p: f64, k: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(k + 1);
    let mut binom = 1.0;
    for i in 0..=k {
        if i > 0 {
            binom *= (p - (i as f64 - 1.0)) / i as f64;
        }
        s.push(binom * a0.powf(p - i as f64));
    }
    s
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                assert!(self.same_shape(rhs), "jet shape mismatch in arithmetic");
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.zip(b, |x, y| x + y));
forward_binop!(Sub, sub, |a, b| a.zip(b, |x, y| x - y));
forward_binop!(Mul, mul, |a, b| a.mul_unchecked(b));

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        assert!(self.same_shape(rhs), "jet shape mismatch in arithmetic");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

/// A point of `R^{n+1}` whose coordinates are jets of one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct JetVector {
    pub components: Vec<Jet>,
}

impl JetVector {
    pub fn new(components: Vec<Jet>) -> Result<JetVector> {
        if let Some(first) = components.first() {
            for c in &components[1..] {
                first.check(c)?;
            }
        }
        Ok(JetVector { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn value(&self) -> Vec<f64> {
        self.components.iter().map(Jet::value).collect()
    }

    pub fn derivative(&self, var: usize) -> Result<JetVector> {
        let components = self.components.iter().map(|c| c.derivative(var)).collect::<Result<_>>()?;
        Ok(JetVector { components })
    }

    pub fn truncate(&self, order: usize) -> JetVector {
        JetVector { components: self.components.iter().map(|c| c.truncate(order)).collect() }
    }

    pub fn scale(&self, s: &Jet) -> JetVector {
        JetVector { components: self.components.iter().map(|c| c * s).collect() }
    }

    pub fn scale_f64(&self, s: f64) -> JetVector {
        JetVector { components: self.components.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn add(&self, other: &JetVector) -> JetVector {
        JetVector { components: self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &JetVector) -> JetVector {
        JetVector { components: self.components.iter().zip(&other.components).map(|(a, b)| a - b).collect() }
    }

    pub fn compose(&self, args: &[Jet]) -> Result<JetVector> {
        let components = self.components.iter().map(|c| c.compose(args)).collect::<Result<_>>()?;
        Ok(JetVector { components })
    }
}
