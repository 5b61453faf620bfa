//! Randomized invariants.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use slitmap::loewner::{control_coefficients, merge_trace};
use slitmap::quadrature::gauss_jacobi;
use slitmap::sc_core::side_slit_exponents;
use slitmap::scenario::{run, InitialPolygon, ScenarioConfig, SlitConfig, StageConfig};

fn two_slits(b1: f64, gap: f64, th1: f64, th2: f64, ratio: f64, target: f64) -> ScenarioConfig {
    let slit = |b: f64, th: f64, ratio: f64| SlitConfig {
        base_point: Complex64::new(b, 0.0),
        direction: Some(Complex64::from_polar(1.0, th)),
        exponents: None,
        ratio,
        prevertex: None,
    };
    let mut cfg = ScenarioConfig {
        name: "random".into(),
        initial: InitialPolygon::HalfPlane,
        stages: vec![StageConfig {
            target_l1: target,
            slits: vec![slit(b1, th1, 1.0), slit(b1 - gap, th2, ratio)],
            control: Default::default(),
        }],
        tolerances: Default::default(),
        outputs: Default::default(),
        grid: None,
    };
    cfg.outputs.verify = true;
    cfg
}

proptest! {
    #[test]
    fn gauss_jacobi_matches_a_finer_rule(
        n in 1usize..12,
        a in -0.95f64..2.0,
        b in -0.95f64..2.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 24),
    ) {
        let deg = 2 * n - 1;
        let p = |x: f64| coeffs[..=deg].iter().rev().fold(0.0, |acc, c| acc * x + c);
        let coarse = gauss_jacobi(n, a, b).unwrap();
        let fine = gauss_jacobi(n + 7, a, b).unwrap();
        let lhs: f64 = coarse.apply(p);
        let rhs: f64 = fine.apply(p);
        let scale: f64 = fine.apply(|x: f64| coeffs[..=deg].iter().map(|c| c.abs()).sum::<f64>() * x.abs().max(1.0));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn gauss_jacobi_nodes_sorted_weights_positive(n in 1usize..40, a in -0.99f64..3.0, b in -0.99f64..3.0) {
        let r = gauss_jacobi(n, a, b).unwrap();
        prop_assert!(r.weights().iter().all(|&w| w > 0.0));
        prop_assert!(r.nodes().windows(2).all(|p| p[0] < p[1]));
        prop_assert!(r.nodes().iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn bank_exponents_sum_to_minus_one(side in -PI..PI, phi in 0.01f64..(PI - 0.01)) {
        let side_dir = Complex64::from_polar(1.0, side);
        let (s1, s2) = side_slit_exponents(side_dir, side_dir * Complex64::from_polar(1.0, phi)).unwrap();
        prop_assert!((s1 + s2 + 1.0).abs() < 1e-14);
        prop_assert!(s1 < 0.0 && s2 < 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn random_two_slit_runs_verify(
        b1 in -4.0f64..-0.5,
        gap in 1.0f64..3.0,
        th1 in (0.4 * PI)..(0.6 * PI),
        th2 in (0.4 * PI)..(0.6 * PI),
        ratio in 0.5f64..2.0,
        target in 0.1f64..0.6,
        cluster_tol in 1e-6f64..1e-3,
    ) {
        let out = run(&two_slits(b1, gap, th1, th2, ratio, target)).unwrap();
        let st = &out.stages[0];
        let v = st.verify.as_ref().unwrap();
        prop_assert!(v.passed, "{v:?}");

        let last = st.trace.last();
        let ctl = control_coefficients(last, &st.plan).unwrap();
        prop_assert!((ctl.c.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let merged = merge_trace(&st.trace, cluster_tol);
        let before: f64 = last.moving().iter().map(|p| p.sigma).sum();
        let after: f64 = merged.prevertices.iter().map(|p| p.sigma).sum();
        prop_assert!((before - after).abs() < 1e-12);
    }
}
