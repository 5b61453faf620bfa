//! Recovers the prevertices of a slit polygon from its side lengths alone,
//! starting from a perturbed guess.
//!
//! Run with `cargo run --release --example newton_side_lengths`.

use slitmap::oracle::{side_lengths, solve_prevertices, NewtonOptions};
use slitmap::scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = scenario::example1();
    cfg.outputs = Default::default();
    let out = scenario::run(&cfg)?;
    let exact = out.final_state().clone();

    let report = side_lengths(&exact)?;
    for ((a, b), l) in report.sides.iter().zip(&report.lengths) {
        println!("side {a:>6} -> {b:<6} {l:.10}");
    }

    let mut guess = exact.clone();
    guess.c *= 1.01;
    for g in &mut guess.slits {
        g.a1 *= 1.002;
        g.lambda *= 1.002;
        g.a2 *= 1.002;
    }
    let sol = solve_prevertices(&guess, &report.lengths, &NewtonOptions::default())?;
    for (k, it) in sol.history.iter().enumerate() {
        println!(
            "iter {k}: residual {:.2e} step {:.2e} damping {}",
            it.residual, it.step, it.damping
        );
    }
    let err = exact
        .moving()
        .iter()
        .zip(sol.state.moving())
        .map(|(p, q)| (p.x - q.x).abs())
        .fold((exact.c - sol.state.c).norm(), f64::max);
    println!("max difference from the ODE solution: {err:.2e}");
    Ok(())
}
