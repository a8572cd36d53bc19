mod common;

use affinelab::catalog;
use affinelab::invariants::{frame_point, FrameJets};
use affinelab::numeric::{Constancy, Spread};
use affinelab::parallel::{
    admissible_range, constancy_check, dett_polynomial, parallel_record, parallel_records, reverse_check, MuParam,
    ParallelImmersion,
};
use affinelab::Error;
use common::{entry_grid, max_abs_diff};
use proptest::prelude::*;

const SPHERES: [&str; 4] = ["sphere(1)", "paraboloid", "titeica", "ellipsoid"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Affine spheres have parallel families whose members keep constant principal curvatures.
    #[test]
    fn constant_curvature_survives_the_parallel_map(
        surface in prop::sample::select(SPHERES.to_vec()),
        t in -0.9..0.9f64,
    ) {
        let e = catalog::get(surface).unwrap();
        let grid = entry_grid(&e, 3, 0.75);
        let lam: Vec<f64> = grid.iter().flat_map(|u| frame_point(e.immersion.as_ref(), u, 5).unwrap().lambda).collect();
        let range = admissible_range(lam.iter());
        let mu = if t >= 0.0 { t * range.hi.min(2.0) } else { -t * range.lo.max(-2.0) };
        let recs = parallel_records(&e.immersion, &grid, mu, 5).unwrap();
        for i in 0..2 {
            let s = Spread::of(&recs.iter().map(|r| r.lambda_mu[i]).collect::<Vec<_>>());
            prop_assert!(s.spread <= 1e-6, "{surface} mu = {mu}: lambda^mu spread {}", s.spread);
        }
        let c = Spread::of(&recs.iter().map(|r| r.c).collect::<Vec<_>>());
        prop_assert!(c.spread <= 1e-8);
        for r in &recs {
            prop_assert!((r.c.powi(4) * r.det_t - 1.0).abs() <= 1e-9);
            prop_assert!(r.residuals.values().all(|v| *v <= 1e-7), "{:?}", r.residuals);
        }
    }

    /// `det T = 1 - μ P(μ)` holds pointwise for any surface.
    #[test]
    fn det_t_polynomial_identity(u in -0.2..0.2f64, v in -0.2..0.2f64, mu in -0.5..0.5f64) {
        let e = catalog::get("perturbed(0.1)").unwrap();
        let r = parallel_record(&e.immersion, &[u, v], mu, 5).unwrap();
        prop_assert!((r.det_t - (1.0 - mu * r.dett_polynomial)).abs() <= 1e-13);
        prop_assert!((dett_polynomial(&r.base.l, mu) - r.dett_polynomial).abs() == 0.0);
    }
}

#[test]
fn three_dimensional_sphere_family() {
    let e = catalog::sphere(1.0, 3).unwrap();
    let lam = catalog::sphere_curvature(1.0, 3);
    for u in [[0.0, 0.0, 0.0], [0.1, -0.1, 0.2]] {
        let r = parallel_record(&e.immersion, &u, 0.3, 5).unwrap();
        let expected_c = (1.0 - 0.3 * lam).powf(-3.0 / 5.0);
        assert!((r.c - expected_c).abs() < 1e-9, "{} vs {expected_c}", r.c);
        assert!((r.c.powi(5) * r.det_t - 1.0).abs() < 1e-9);
        let target = r.c * lam / (1.0 - 0.3 * lam);
        assert!(r.lambda_mu.iter().all(|l| (l - target).abs() < 1e-7), "{:?} vs {target}", r.lambda_mu);
    }
}

#[test]
fn reverse_family_recovers_the_base() {
    for surface in ["sphere(1)", "titeica", "paraboloid"] {
        let e = catalog::get(surface).unwrap();
        let u = &entry_grid(&e, 3, 0.5)[4];
        for mu in [-0.2, 0.3] {
            let r = reverse_check(&e.immersion, u, mu, 5).unwrap();
            assert!(r.max() < 1e-8, "{surface} mu = {mu}: {r:?}");
        }
    }
}

#[test]
fn mu_as_a_jet_variable_matches_constant_mu() {
    let e = catalog::get("perturbed(0.1)").unwrap();
    let u = [0.1, -0.05];
    let fixed = frame_point(&ParallelImmersion::new(e.immersion.clone(), MuParam::Const(0.25)), &u, 5).unwrap();
    let par = ParallelImmersion::new(e.immersion.clone(), MuParam::Var { value: 0.25, index: 2 });
    let jets = FrameJets::compute_with_vars(&par, &u, 5, 3).unwrap();
    let carried = jets.point();
    assert!(max_abs_diff(&fixed.lambda, &carried.lambda) < 1e-12);
    assert!(max_abs_diff(&fixed.y, &carried.y) < 1e-12);
    // ∂_μ x^μ = Y of the base
    let base = frame_point(e.immersion.as_ref(), &u, 5).unwrap();
    let dmu: Vec<f64> = jets.frame.x.derivative(2).unwrap().value();
    assert!(max_abs_diff(&dmu, &base.y) < 1e-12);
}

#[test]
fn inadmissible_mu_is_refused() {
    let e = catalog::get("sphere(1)").unwrap();
    assert!(matches!(parallel_record(&e.immersion, &[0.0, 0.0], 0.97, 5), Err(Error::Inadmissible { .. })));
    assert!(parallel_record(&e.immersion, &[0.0, 0.0], 0.94, 5).is_ok());
}

#[test]
fn perturbed_graph_is_not_a_parallel_family() {
    let e = catalog::get("perturbed(0.1)").unwrap();
    for mu in [-0.25, 0.1, 0.25] {
        let (rep, _) = constancy_check(&e.immersion, &entry_grid(&e, 5, 1.0), mu, 5).unwrap();
        assert!(rep.verdicts_agree, "{rep:?}");
        assert_eq!(rep.verdict, Constancy::NonConstant);
    }
}
