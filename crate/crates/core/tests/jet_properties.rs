mod common;

use affinelab::expr;
use affinelab::jet::{Analytic, Jet};
use affinelab::jet_linalg::{det, inverse, mat_mul, mat_vec, solve};
use common::{poly_partial, poly_text, Poly};
use proptest::prelude::*;

const VARS: usize = 2;
const ORDER: usize = 4;
const LEN: usize = 15;

fn jet_strategy() -> impl Strategy<Value = Jet> {
    proptest::collection::vec(-2.0..2.0f64, LEN).prop_map(|c| Jet::from_coeffs(VARS, ORDER, c).unwrap())
}

fn positive_jet() -> impl Strategy<Value = Jet> {
    (0.5..3.0f64, jet_strategy()).prop_map(|(v, j)| {
        let mut c = j.coeffs().to_vec();
        c[0] = v;
        Jet::from_coeffs(VARS, ORDER, c).unwrap()
    })
}

fn poly_strategy() -> impl Strategy<Value = Poly> {
    proptest::collection::vec(-1.0..1.0f64, 21).prop_map(|c| {
        let mut p = Poly::new();
        let mut it = c.into_iter();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                p.insert((a, b), it.next().unwrap());
            }
        }
        p
    })
}

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    (a - b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jets_match_finite_differences(p in poly_strategy(), u0 in -1.0..1.0f64, v0 in -1.0..1.0f64) {
        let e = expr::parse(&poly_text(&p)).unwrap();
        let jet = e.eval(&[Jet::variable(u0, 0, 2, 5).unwrap(), Jet::variable(v0, 1, 2, 5).unwrap()]).unwrap();
        let f = |du: f64, dv: f64| e.eval_f64(&[u0 + du, v0 + dv]).unwrap();
        let h = 1e-5;
        let du = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
        let dv = (f(0.0, h) - f(0.0, -h)) / (2.0 * h);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
        prop_assert!(rel(jet.partial(&[1, 0]).unwrap(), du) <= 1e-6);
        prop_assert!(rel(jet.partial(&[0, 1]).unwrap(), dv) <= 1e-6);
        for a in 0..=5u8 {
            for b in 0..=(5 - a) {
                let exact = poly_partial(&p, a as u32, b as u32, u0, v0);
                prop_assert!(rel(jet.partial(&[a, b]).unwrap(), exact) <= 1e-12);
            }
        }
    }

    #[test]
    fn ring_axioms(a in jet_strategy(), b in jet_strategy(), c in jet_strategy()) {
        prop_assert!(close(&(&a + &b), &(&b + &a), 1e-15));
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-14));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-12));
        prop_assert!(close(&(&a - &a), &a.lift(0.0), 0.0));
    }

    #[test]
    fn division_and_roots(a in positive_jet(), b in jet_strategy()) {
        let q = b.checked_div(&a).unwrap();
        prop_assert!(close(&(&q * &a), &b, 1e-10));
        let r = a.sqrt().unwrap();
        prop_assert!(close(&(&r * &r), &a, 1e-12));
        let l = a.analytic(Analytic::Log).unwrap().analytic(Analytic::Exp).unwrap();
        prop_assert!(close(&l, &a, 1e-11));
        let s = a.analytic(Analytic::Sin).unwrap();
        let co = a.analytic(Analytic::Cos).unwrap();
        prop_assert!(close(&(&(&s * &s) + &(&co * &co)), &a.lift(1.0), 1e-12));
        prop_assert!(close(&a.powf(1.5).unwrap(), &(&a * &r), 1e-11));
    }

    #[test]
    fn composition_follows_the_chain_rule(f in jet_strategy(), g in jet_strategy(), h in jet_strategy()) {
        let fg = f.compose(&[g.clone(), h.clone()]).unwrap();
        prop_assert!((fg.value() - f.value()).abs() < 1e-15);
        for var in 0..2u8 {
            let mut alpha = [0u8; 2];
            alpha[var as usize] = 1;
            let chain = f.partial(&[1, 0]).unwrap() * g.partial(&alpha).unwrap()
                + f.partial(&[0, 1]).unwrap() * h.partial(&alpha).unwrap();
            prop_assert!((fg.partial(&alpha).unwrap() - chain).abs() <= 1e-12 * (1.0 + chain.abs()));
        }
    }

    #[test]
    fn linear_solve_residual(entries in proptest::collection::vec(jet_strategy(), 16), rhs in proptest::collection::vec(jet_strategy(), 4)) {
        let m: Vec<Vec<Jet>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { entries[4 * i + j].add_scalar(8.0) } else { entries[4 * i + j].clone() }).collect())
            .collect();
        let x = solve(&m, &rhs).unwrap();
        for (lhs, r) in mat_vec(&m, &x).iter().zip(&rhs) {
            prop_assert!((lhs - r).max_abs() <= 1e-11);
        }
        let inv = inverse(&m).unwrap();
        let id = mat_mul(&m, &inv);
        for (i, row) in id.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert!(v.add_scalar(-((i == j) as u8 as f64)).max_abs() <= 1e-11);
            }
        }
        let d = det(&m);
        let dinv = det(&inv);
        prop_assert!((&d * &dinv).add_scalar(-1.0).max_abs() <= 1e-10);
    }
}

#[test]
fn singular_matrix_is_reported() {
    let one = Jet::constant(1.0, 2, 3).unwrap();
    let m = vec![vec![one.clone(), one.clone()], vec![one.clone(), one.clone()]];
    assert!(solve(&m, &[one.clone(), one]).is_err());
}
