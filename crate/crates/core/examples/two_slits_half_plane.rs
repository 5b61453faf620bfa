//! Two vertical slits grown from the real axis at speed ratio 1 : 2.
//!
//! Run with `cargo run --release --example two_slits_half_plane`.

use slitmap::sc_core::slit_length;
use slitmap::scenario::{self, format_table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = scenario::example1();
    cfg.outputs.grid = false;
    let out = scenario::run(&cfg)?;
    print!("{}", format_table(&out));

    let stage = &out.stages[0];
    let last = stage.trace.last();
    for i in 0..last.slits.len() {
        println!("slit {} length {:.10}", i + 1, slit_length(last, i)?);
    }
    println!(
        "{} accepted steps, {} rejected",
        stage.trace.diagnostics.len(),
        stage.trace.rejected_steps
    );
    if let Some(v) = &stage.verify {
        println!(
            "verify: passed={} straightness={:.1e} ratio={:.1e} pinned={:.1e}",
            v.passed, v.straightness, v.ratio, v.pinned
        );
    }
    Ok(())
}
