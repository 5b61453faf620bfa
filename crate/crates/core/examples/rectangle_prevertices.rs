//! Closed-form prevertices of a rectangle, checked by integrating the map.
//!
//! Run with `cargo run --release --example rectangle_prevertices -- 3 1`
//! for a 3 x 1 rectangle (default 2 x 1).

use num_complex::Complex64;
use slitmap::sc_core::sc_map;
use slitmap::scenario::{rectangle_constants, rectangle_state};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let w = args.next().transpose()?.unwrap_or(2.0);
    let h = args.next().transpose()?.unwrap_or(1.0);

    let k = rectangle_constants(w, h)?;
    println!("{w} x {h} rectangle");
    println!("kappa = {:.12}", k.kappa);
    println!("a1    = {:.12}", k.a1);
    println!("a2    = {:.12}", k.a2);
    println!("c     = {:.12}", k.c);

    let s = rectangle_state(w, h)?;
    let corners = [
        (k.a1, Complex64::new(-w / 2.0, h)),
        (k.a2, Complex64::new(-w / 2.0, 0.0)),
        (0.0, Complex64::new(w / 2.0, 0.0)),
        (1.0, Complex64::new(w / 2.0, h)),
    ];
    for (x, want) in corners {
        let got = sc_map(&s, Complex64::new(x, 0.0))?;
        println!("f({x:>10.6}) = {:>9.6} {:+.6}i   error {:.1e}", got.re, got.im, (got - want).norm());
    }
    Ok(())
}
