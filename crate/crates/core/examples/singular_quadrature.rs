//! Gauss-Jacobi rules and the compound rule for integrands with algebraic
//! endpoint singularities, compared with Beta-function values.
//!
//! Run with `cargo run --release --example singular_quadrature`.

use num_complex::Complex64;
use slitmap::quadrature::{gauss_jacobi, integrate_singular, IntegrationOptions};
use statrs::function::beta::beta;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // ∫_0^1 x^(p-1) (1-x)^(q-1) dx = B(p, q).
    for (p, q) in [(0.5, 0.5), (0.25, 0.75), (1.5, 0.1), (0.02, 0.9)] {
        let got = integrate_singular(
            |_| Complex64::new(1.0, 0.0),
            0.0,
            1.0,
            p - 1.0,
            q - 1.0,
            &[],
            &IntegrationOptions::default(),
        )?;
        let want = beta(p, q);
        println!(
            "B({p}, {q}) = {want:.15}  compound rule {:.15}  ({} panels, error {:.1e})",
            got.value.re,
            got.panels.len(),
            (got.value.re - want).abs()
        );
    }

    // A nearby complex singularity forces grading toward it.
    let z0 = Complex64::new(0.3, 1e-3);
    let got = integrate_singular(
        |x| 1.0 / (Complex64::new(x, 0.0) - z0),
        0.0,
        1.0,
        -0.5,
        0.0,
        &[z0],
        &IntegrationOptions::default(),
    )?;
    println!(
        "x^(-1/2) / (x - z0) near z0 = {z0}: {:.12} ({} panels)",
        got.value,
        got.panels.len()
    );

    let rule = gauss_jacobi(6, -0.5, 0.25)?;
    println!("6-point rule, exponents {:?}", rule.exponents());
    for (x, w) in rule.nodes().iter().zip(rule.weights()) {
        println!("  node {x:>+.15}  weight {w:.15}");
    }
    Ok(())
}
