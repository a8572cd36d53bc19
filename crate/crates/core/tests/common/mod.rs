#![allow(dead_code)]

use std::collections::BTreeMap;

use affinelab::catalog::CatalogEntry;

/// `k × k` tensor grid over `[lo, hi]²`, last axis fastest.
pub fn square_grid(lo: f64, hi: f64, k: usize) -> Vec<Vec<f64>> {
    let at = |i: usize| if k == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 };
    (0..k).flat_map(|i| (0..k).map(move |j| vec![at(i), at(j)])).collect()
}

/// `k` points per axis over the central `shrink` fraction of an entry's domain.
pub fn entry_grid(entry: &CatalogEntry, k: usize, shrink: f64) -> Vec<Vec<f64>> {
    let d = &entry.chart_domain;
    let at = |(lo, hi): (f64, f64), i: usize| {
        let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo) * shrink);
        if k == 1 {
            m
        } else {
            m - h + 2.0 * h * i as f64 / (k - 1) as f64
        }
    };
    (0..k).flat_map(|i| (0..k).map(move |j| vec![at(d[0], i), at(d[1], j)])).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dense polynomial in `u`, `v`: exponent pair to coefficient.
pub type Poly = BTreeMap<(u32, u32), f64>;

/// Expression text of a polynomial, parseable by `expr::parse`.
pub fn poly_text(p: &Poly) -> String {
    let terms: Vec<String> = p
        .iter()
        .map(|(&(a, b), &c)| {
            let mut t = format!("({c:?})");
            if a > 0 {
                t.push_str(&format!("*u^{a}"));
            }
            if b > 0 {
                t.push_str(&format!("*v^{b}"));
            }
            t
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// `∂^(i,j) p` at `(u, v)` by exact differentiation of the monomials.
pub fn poly_partial(p: &Poly, i: u32, j: u32, u: f64, v: f64) -> f64 {
    let falling = |n: u32, k: u32| (0..k).map(|t| (n - t) as f64).product::<f64>();
    p.iter()
        .filter(|(&(a, b), _)| a >= i && b >= j)
        .map(|(&(a, b), &c)| c * falling(a, i) * falling(b, j) * u.powi((a - i) as i32) * v.powi((b - j) as i32))
        .sum()
}
