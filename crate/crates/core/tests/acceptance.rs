//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use slitmap::loewner::{
    control_coefficients, evolve, regularize_initial, rescale_for_length_param, residue_identity, series_first_order,
    ControlLaw, SlitPlan, SlitSpec, Termination,
};
use slitmap::oracle::{solve_prevertices, verify_trace, NewtonOptions, VerifyThresholds};
use slitmap::quadrature::gauss_jacobi;
use slitmap::sc_core::{grid_image_with, locate_prevertex, side_slit_exponents, AccessoryState, GridSpec};
use slitmap::scenario::{example1, example2, final_map, rectangle_constants, rectangle_state, run, RunOutput};

const TABLE1: [(&str, f64); 7] = [
    ("a11", -9.8974995),
    ("lambda1", -8.5126732),
    ("a12", -7.3979258),
    ("a21", -6.8108252),
    ("lambda2", -3.7393888),
    ("a22", -0.3978735),
    ("c", 0.5867804),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn params(s: &AccessoryState) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = s.moving().iter().map(|p| (p.role.label(), p.x)).collect();
    v.push(("c".into(), s.c.norm()));
    v
}

fn example1_run(eps: f64) -> RunOutput {
    let mut cfg = example1();
    cfg.outputs = Default::default();
    cfg.tolerances.epsilon = eps;
    run(&cfg).expect("example 1 runs")
}

fn a1(out: &RunOutput) -> Outcome {
    let got = params(out.final_state());
    let mut worst = 0.0f64;
    for ((name, want), (label, x)) in TABLE1.iter().zip(&got) {
        assert_eq!(name, label);
        worst = worst.max((x - want).abs());
    }
    check(worst <= 1e-5, format!("max |error| {worst:.2e} (limit 1e-5)"))
}

fn a2() -> Outcome {
    let mut cfg = example2();
    cfg.outputs = Default::default();
    let out = run(&cfg).expect("example 2 runs");
    let st = &out.stages[0];
    let m = &st.merged.prevertices;
    let stopped = matches!(st.trace.termination, Termination::Degenerate { .. });
    if m.len() != 4 {
        return check(false, format!("expected 4 merged prevertices, got {}", m.len()));
    }
    let errs = [
        (m[0].x + 8.6039921).abs(),
        (m[1].x + 4.6992541).abs(),
        (m[2].x + 4.0805629).abs(),
        (m[3].x + 4.0225626).abs(),
    ];
    let cluster_ok = m[1].members.len() == 5 && (m[1].sigma - 0.5).abs() < 1e-12;
    let pass = stopped && cluster_ok && errs[0] <= 1e-4 && errs[2] <= 1e-4 && errs[3] <= 1e-4 && errs[1] <= 5e-4;
    check(
        pass,
        format!(
            "b1 {:.1e}, lambda {:.1e}, b2 {:.1e}, a {:.1e}; cluster of {} with sigma {}; |c| = {:.6}",
            errs[0],
            errs[1],
            errs[2],
            errs[3],
            m[1].members.len(),
            m[1].sigma,
            st.merged.c.norm()
        ),
    )
}

fn a3() -> Outcome {
    let rc = rectangle_constants(2.0, 1.0).unwrap();
    let s = rectangle_state(2.0, 1.0).unwrap();
    let l1 = locate_prevertex(&s, Complex64::new(-0.5, 1.0), (-40.0, rc.a1)).unwrap();
    let l2 = locate_prevertex(&s, Complex64::new(-1.0, 0.5), (rc.a1, rc.a2)).unwrap();
    let errs = [
        (rc.c.abs() - 1.84146496).abs(),
        (rc.a1 + 5.82842712).abs(),
        (rc.a2 + 4.82842712).abs(),
        (l1 + 6.87509856).abs(),
        (l2 + 5.28521351).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    check(worst <= 1e-7, format!("max |error| {worst:.2e} over c, a1, a2, lambda1, lambda2 (limit 1e-7)"))
}

fn quadratic_tail(history: &[f64]) -> bool {
    // Some step with r_k < 1e-2 must show r_{k+1} <= 10 r_k^2 (or reach the floor).
    history.windows(2).any(|w| w[0] < 1e-2 && (w[1] <= 10.0 * w[0] * w[0] || w[1] < 1e-12))
}

fn pm(sign: f64) -> &'static str {
    if sign > 0.0 {
        "+"
    } else {
        "-"
    }
}

fn a4(out: &RunOutput) -> Outcome {
    let exact = out.final_state().clone();
    let mut guess = exact.clone();
    for (i, g) in guess.slits.iter_mut().enumerate() {
        let s = if i % 2 == 0 { 1e-3 } else { -1e-3 };
        g.a1 += s;
        g.lambda -= s;
        g.a2 += s;
    }
    guess.c *= 1.0 + 1e-3;
    let targets = [1.0, 1.0, 2.0, 2.0, 2.0, 1.0, 1.0];
    let opts = NewtonOptions {
        tol: 1e-12,
        ..Default::default()
    };
    let res = match solve_prevertices(&guess, &targets, &opts) {
        Ok(r) => r,
        Err(e) => return check(false, format!("example 1 Newton failed: {e}")),
    };
    let mut worst = 0.0f64;
    for ((_, a), (_, b)) in params(&exact).iter().zip(params(&res.state).iter()) {
        worst = worst.max((a - b).abs());
    }

    let rect = rectangle_state(2.0, 1.0).unwrap();
    let mut rect_ok = true;
    let mut rect_detail = String::new();
    for sign in [1.0, -1.0] {
        let mut g = rect.clone();
        g.c *= 1.0 + 0.1 * sign;
        for f in g.fixed.iter_mut() {
            f.x *= 1.0 + 0.1 * sign;
        }
        match solve_prevertices(&g, &[1.0, 2.0, 1.0, 1.0, 1.0], &opts) {
            Ok(r) => {
                let h: Vec<f64> = r.history.iter().map(|it| it.residual).collect();
                let err = r
                    .state
                    .fixed
                    .iter()
                    .zip(&rect.fixed)
                    .map(|(a, b)| (a.x - b.x).abs())
                    .fold((r.state.c.norm() - rect.c.norm()).abs(), f64::max);
                let quad = quadratic_tail(&h);
                rect_ok &= quad && err < 1e-8;
                rect_detail += &format!(" rect {}10%: {} its, err {err:.1e}, quadratic {quad};", pm(sign), h.len());
            }
            Err(e) => {
                rect_ok = false;
                rect_detail += &format!(" rect {}10% failed: {e};", pm(sign));
            }
        }
    }
    check(
        worst <= 1e-6 && rect_ok,
        format!("example 1 from 1e-3 offsets: max change {worst:.1e} (limit 1e-6);{rect_detail}"),
    )
}

fn a5(base: &RunOutput) -> Outcome {
    let reference = params(base.final_state());
    let mut worst = 0.0f64;
    for eps in [1e-10, 1e-12, 1e-14] {
        let out = example1_run(eps);
        for ((_, a), (_, b)) in reference.iter().zip(params(out.final_state()).iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-6, format!("max spread over eps in {{1e-10, 1e-12, 1e-14}}: {worst:.1e} (limit 1e-6)"))
}

fn chebyshev_even(k: u32) -> f64 {
    // ∫ x^{2k} / sqrt(1 - x^2) = π (2k)! / (4^k (k!)^2)
    let mut v = PI;
    for j in 1..=k {
        v *= (2 * j - 1) as f64 / (2 * j) as f64;
    }
    v
}

fn gauss_jacobi_checks() -> (f64, f64) {
    // Beta moments from the reflection formula Γ(s)Γ(1-s) = π / sin(πs).
    let beta_cases = [
        (-0.5, -0.5, PI),
        (0.5, 0.5, PI / 2.0),
        (-0.5, 0.5, PI),
        (-0.3, -0.7, PI / (0.3 * PI).sin()),
        (0.25, -0.25, PI / 2f64.sqrt()),
    ];
    let mut beta_err = 0.0f64;
    for (a, b, want) in beta_cases {
        for n in [1, 5, 16, 24] {
            let r = gauss_jacobi(n, a, b).unwrap();
            let got: f64 = r.apply(|_| 1.0);
            beta_err = beta_err.max((got - want).abs() / want);
        }
    }
    let mut poly_err = 0.0f64;
    for n in [4usize, 12, 24] {
        let cheb = gauss_jacobi(n, -0.5, -0.5).unwrap();
        let mixed = gauss_jacobi(n, -0.5, 0.5).unwrap();
        let legendre = gauss_jacobi(n, 0.0, 0.0).unwrap();
        for k in 0..(2 * n) as i32 {
            let m = |j: i32| if j % 2 == 1 { 0.0 } else { chebyshev_even((j / 2) as u32) };
            let got = cheb.apply(|x| x.powi(k));
            poly_err = poly_err.max((got - m(k)).abs());
            if k + 1 < (2 * n) as i32 {
                // (1 - x)^(-1/2) (1 + x)^(1/2) = (1 + x) / sqrt(1 - x^2)
                let got = mixed.apply(|x| x.powi(k));
                poly_err = poly_err.max((got - m(k) - m(k + 1)).abs());
            }
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
            poly_err = poly_err.max((legendre.apply(|x| x.powi(k)) - want).abs());
        }
    }
    (beta_err, poly_err)
}

fn series_slope() -> f64 {
    // One oblique slit from -1 in the half-plane with a fixed control;
    // compare (x(t) - x0) / sqrt(t) against the first-order coefficients.
    // (A perpendicular slit has a vanishing coefficient for λ.)
    let direction = Complex64::from_polar(1.0, PI / 3.0);
    let (sigma1, sigma2) = side_slit_exponents(Complex64::new(1.0, 0.0), direction).unwrap();
    let spec = SlitSpec {
        base_point: Complex64::new(-1.0, 0.0),
        direction,
        lambda0: -1.0,
        sigma1,
        sigma2,
        ratio: 1.0,
        vertex: None,
    };
    let c0 = 0.3;
    let mut plan = SlitPlan::new(vec![spec], 1e-8);
    plan.control = ControlLaw::Fixed(vec![c0]);
    plan.epsilon = 1e-15;
    plan.ode_tol = 1e-12;
    let s0 = plan.attach(&AccessoryState::identity()).unwrap();
    let coeff = series_first_order(&s0, &[c0]).unwrap()[0];
    let s0 = regularize_initial(&s0, &plan).unwrap();
    let trace = evolve(&s0, &plan).unwrap();
    let mut worst = 0.0f64;
    for s in &trace.snapshots {
        if s.t < 1e-10 {
            continue;
        }
        let slope = (s.slits[0].lambda + 1.0) / s.t.sqrt();
        worst = worst.max((slope - coeff.lambda1).abs() / coeff.lambda1.abs());
        let slope = (s.slits[0].a1 + 1.0) / s.t.sqrt();
        worst = worst.max((slope - coeff.a1_1).abs() / coeff.a1_1.abs());
        let slope = (s.slits[0].a2 + 1.0) / s.t.sqrt();
        worst = worst.max((slope - coeff.a2_1).abs() / coeff.a2_1.abs());
    }
    worst
}

fn point_in_polygon(p: Complex64, poly: &[Complex64]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.im > p.im) != (b.im > p.im) {
            let x = a.re + (p.im - a.im) / (b.im - a.im) * (b.re - a.re);
            if p.re < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn distance_to_outline(p: Complex64, poly: &[Complex64]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let d = b - a;
            let s = (((p - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
            (p - (a + d * s)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn a6(ex1: &RunOutput) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut cfg2 = example2();
    cfg2.outputs = Default::default();
    let ex2 = run(&cfg2).unwrap();

    // Residue identity along the example 1 trace.
    let st = &ex1.stages[0];
    let mut residue = 0.0f64;
    for s in st.trace.snapshots.iter().step_by(10) {
        let ctl = control_coefficients(s, &st.plan).unwrap();
        let ctl = rescale_for_length_param(&ctl, s).unwrap();
        for z in [Complex64::new(-2.0, 1.0), Complex64::new(0.5, 2.0), Complex64::new(3.0, 0.5)] {
            let (l, r) = residue_identity(s, &ctl.rescaled(), z).unwrap();
            residue = residue.max((l - r).norm() / l.norm().max(1.0));
        }
    }
    pass &= residue <= 1e-8;
    notes.push(format!("residue {residue:.1e}"));

    // Normalized controls sum to 1.
    let mut sum_dev = 0.0f64;
    for out in [ex1, &ex2] {
        for d in &out.stages[0].trace.diagnostics {
            sum_dev = sum_dev.max((d.control.iter().sum::<f64>() - 1.0).abs());
        }
    }
    pass &= sum_dev <= 1e-14;
    notes.push(format!("sum C - 1 {sum_dev:.1e}"));

    // Ordering, length parametrization, ratios.
    let mut ordering = 0;
    let mut length = 0.0f64;
    let mut ratio = 0.0f64;
    for out in [ex1, &ex2] {
        let st = &out.stages[0];
        let v = verify_trace(&st.trace, &st.plan, &VerifyThresholds::default()).unwrap();
        ordering += v.ordering_violations;
        length = length.max(v.length_param);
        ratio = ratio.max(v.ratio);
    }
    pass &= ordering == 0 && length <= 1e-6 && ratio <= 1e-4;
    notes.push(format!("ordering violations {ordering}, |L1 - t| {length:.1e}, ratio {ratio:.1e}"));

    let slope = series_slope();
    pass &= slope <= 0.02;
    notes.push(format!("series slope {:.2}%", 100.0 * slope));

    let (beta, poly) = gauss_jacobi_checks();
    pass &= beta <= 1e-13 && poly <= 1e-13;
    notes.push(format!("Gauss-Jacobi beta {beta:.1e} poly {poly:.1e}"));

    // Example 2 limit map: the grid lies inside the L-shaped hexagon.
    let hexagon = [
        Complex64::new(-1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(-0.5, 1.0),
        Complex64::new(-0.5, 0.5),
        Complex64::new(-1.0, 0.5),
    ];
    let map = final_map(&ex2).unwrap();
    let img = grid_image_with(&map, &GridSpec::new(-20.0, 12.0, 0.05, 16.0, 0.5, 200)).unwrap();
    let mut violations = 0;
    let mut points = 0;
    for pl in &img.polylines {
        for &w in &pl.points {
            points += 1;
            if !point_in_polygon(w, &hexagon) && distance_to_outline(w, &hexagon) > 1e-9 {
                violations += 1;
            }
        }
    }
    // Example 1: the grid stays in the upper half-plane and off the slits.
    let map1 = final_map(ex1).unwrap();
    let img1 = grid_image_with(&map1, &GridSpec::new(-14.0, 2.0, 0.05, 6.0, 0.25, 120)).unwrap();
    for pl in &img1.polylines {
        for &w in &pl.points {
            points += 1;
            if w.im < -1e-9 {
                violations += 1;
            }
        }
    }
    pass &= violations == 0;
    notes.push(format!("grid violations {violations} of {points}"));

    check(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let ex1 = example1_run(1e-12);
    let results = [
        ("A1", a1(&ex1)),
        ("A2", a2()),
        ("A3", a3()),
        ("A4", a4(&ex1)),
        ("A5", a5(&ex1)),
        ("A6", a6(&ex1)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{name} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} passed in {:.1?}", results.len() - failed, results.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
