use super::*;
use crate::sc_core::SlitGroup;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn two_slit_state() -> AccessoryState {
    let mut s = AccessoryState::identity();
    s.slits.push(SlitGroup::collapsed(-2.0, -0.5, -0.5, c(-2.0, 0.0), c(0.0, 1.0)));
    s.slits.push(SlitGroup::collapsed(-1.0, -0.5, -0.5, c(-1.0, 0.0), c(0.0, 1.0)));
    s
}

#[test]
fn fixed_prevertex_velocity_by_hand() {
    // Rectangle-like polygon with one free vertex at a = -3 and a single slit tip at -1.
    let mut s = AccessoryState::identity();
    s.slits.push(SlitGroup {
        a1: -1.5,
        lambda: -1.0,
        a2: -0.5,
        ..SlitGroup::collapsed(-1.0, -0.5, -0.5, c(-1.0, 0.0), c(0.0, 1.0))
    });
    let d = ode_rhs(&s, &[1.0]).unwrap();
    // a = -1.5: -a(a-1) C (λ-1)/(a-λ) = -(-1.5)(-2.5)(-2)/(-0.5) = -15
    assert!((d.slits[0].0 + 15.0).abs() < 1e-12);
}

#[test]
fn zero_control_gives_zero_derivative() {
    let mut s = regularize_initial(&two_slit_state(), &plan_ex1()).unwrap();
    s.t = 0.0;
    let d = ode_rhs(&s, &[0.0, 0.0]).unwrap();
    assert_eq!(d.c, c(0.0, 0.0));
    assert!(d.slits.iter().all(|t| t.0 == 0.0 && t.1 == 0.0 && t.2 == 0.0));
}

fn plan_ex1() -> SlitPlan {
    let up = c(0.0, 1.0);
    SlitPlan::new(
        vec![
            SlitSpec {
                base_point: c(-2.0, 0.0),
                direction: up,
                lambda0: -2.0,
                sigma1: -0.5,
                sigma2: -0.5,
                ratio: 0.5,
                vertex: None,
            },
            SlitSpec {
                base_point: c(-1.0, 0.0),
                direction: up,
                lambda0: -1.0,
                sigma1: -0.5,
                sigma2: -0.5,
                ratio: 1.0,
                vertex: None,
            },
        ],
        1.0,
    )
}

#[test]
fn regularize_splits_triples() {
    let s = regularize_initial(&two_slit_state(), &plan_ex1()).unwrap();
    assert_eq!(s.slits[0].a1, -2.0 - 1e-12);
    assert_eq!(s.slits[0].a2, -2.0 + 1e-12);
    let mut p = plan_ex1();
    p.epsilon = 1.0;
    assert!(regularize_initial(&two_slit_state(), &p).is_err());
}

#[test]
fn single_slit_speed_factor() {
    // Only the tip at -1: |λ| |λ - 1|^2 = 4.
    let mut s = AccessoryState::identity();
    s.slits.push(SlitGroup {
        sigma1: 0.0,
        sigma2: 0.0,
        ..SlitGroup::collapsed(-1.0, 0.0, 0.0, c(-1.0, 0.0), c(0.0, 1.0))
    });
    // Place the banks far away with zero exponent so they do not contribute.
    s.slits[0].a1 = -1.0 - 1e-3;
    s.slits[0].a2 = -1.0 + 1e-3;
    assert!((speed_factor(&s, 0).unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn control_two_slit_closed_form() {
    let la = [2f64.ln(), 0.0];
    let c = rhs::normalized_control(&[0.5, 1.0], &la);
    assert!((c[0] - 0.2).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
    let one = rhs::normalized_control(&[1.0], &[3.0]);
    assert_eq!(one, vec![1.0]);
}

#[test]
fn series_symmetric_slit() {
    let mut s = AccessoryState::identity();
    s.slits.push(SlitGroup::collapsed(-1.0, -0.5, -0.5, c(-1.0, 0.0), c(0.0, 1.0)));
    let co = series_first_order(&s, &[0.5]).unwrap();
    assert!((co[0].q - 4.0).abs() < 1e-15);
    assert_eq!(co[0].lambda1, 0.0);
    assert!((co[0].a1_1 + 2.0).abs() < 1e-15 && (co[0].a2_1 - 2.0).abs() < 1e-15);
}

#[test]
fn non_stationary_rejected() {
    let mut p = plan_ex1();
    p.control = ControlLaw::NonStationary;
    assert!(matches!(p.validate(), Err(LoewnerError::Unsupported)));
}

#[test]
fn zero_target_gives_single_snapshot() {
    let mut p = plan_ex1();
    p.target_l1 = 0.0;
    let s = regularize_initial(&two_slit_state(), &p).unwrap();
    let tr = evolve(&s, &p).unwrap();
    assert_eq!(tr.snapshots.len(), 1);
}

#[test]
fn merge_without_clusters_is_identity() {
    let mut s = regularize_initial(&two_slit_state(), &plan_ex1()).unwrap();
    for g in s.slits.iter_mut() {
        g.a1 -= 0.5;
        g.a2 += 0.2;
    }
    s.slits[1].a1 = -1.3;
    let m = merge_degenerate(&s, 1e-4);
    assert_eq!(m.prevertices.len(), 6);
    assert!(m.warning.is_none());
    assert_eq!(m.prevertices[1].x, s.slits[0].lambda);
}
