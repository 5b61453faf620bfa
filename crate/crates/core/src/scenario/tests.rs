use approx::assert_abs_diff_eq;

use super::*;
use crate::sc_core::sc_map;

#[test]
fn square_rectangle_constants() {
    // w/h = 2 gives κ = 1/√2 and a_2 = -2(1 + √2).
    let rc = rectangle_constants(2.0, 1.0).unwrap();
    assert_abs_diff_eq!(rc.kappa, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
    assert_abs_diff_eq!(rc.a2, -2.0 * (1.0 + 2f64.sqrt()), epsilon = 1e-12);
    assert_abs_diff_eq!(rc.a1, rc.a2 - 1.0, epsilon = 0.0);
}

#[test]
fn rectangle_corners_by_quadrature() {
    for (w, h) in [(2.0, 1.0), (3.0, 1.0), (1.0, 1.5)] {
        let s = rectangle_state(w, h).unwrap();
        let rc = rectangle_constants(w, h).unwrap();
        let f = |x: f64| sc_map(&s, Complex64::new(x, 0.0)).unwrap();
        assert_abs_diff_eq!((f(rc.a2) - Complex64::new(-0.5 * w, 0.0)).norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!((f(rc.a1) - Complex64::new(-0.5 * w, h)).norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!((f(1.0) - Complex64::new(0.5 * w, h)).norm(), 0.0, epsilon = 1e-9);
    }
}

#[test]
fn aspect_out_of_range_is_config_error() {
    assert!(rectangle_constants(-1.0, 1.0).is_err());
}

#[test]
fn locate_on_half_plane() {
    let s = AccessoryState::identity();
    let (x, v) = locate_base(&s, Complex64::new(-3.0, 0.0), 1e-12).unwrap();
    assert_abs_diff_eq!(x, -3.0, epsilon = 1e-10);
    assert!(v.is_none());
}

#[test]
fn base_on_positive_axis_rejected() {
    let s = AccessoryState::identity();
    assert!(locate_base(&s, Complex64::new(0.5, 0.0), 1e-12).is_err());
}

#[test]
fn config_round_trip() {
    let cfg = example2();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
}

#[test]
fn minimal_config_parses() {
    let cfg = ScenarioConfig::from_json(
        r#"{"initial": "half_plane",
            "stages": [{"target_l1": 0.5, "slits": [{"base_point": [-1.0, 0.0]}]}]}"#,
    )
    .unwrap();
    assert_eq!(cfg.stages[0].slits[0].ratio, 1.0);
    assert_eq!(cfg.tolerances, Tolerances::default());
}

#[test]
fn empty_stages_echo_initial() {
    let mut cfg = example2();
    cfg.stages.clear();
    let out = run(&cfg).unwrap();
    assert_eq!(out.final_state(), &out.initial);
}

#[test]
fn single_slit_default_direction() {
    let cfg = ScenarioConfig::from_json(
        r#"{"initial": "half_plane",
            "stages": [{"target_l1": 0.5, "slits": [{"base_point": [-1.0, 0.0]}]}]}"#,
    )
    .unwrap();
    let out = run(&cfg).unwrap();
    let end = out.final_state();
    let tip = sc_map(end, Complex64::new(end.slits[0].lambda, 0.0)).unwrap();
    assert_abs_diff_eq!((tip - Complex64::new(-1.0, 0.5)).norm(), 0.0, epsilon = 1e-7);
}
