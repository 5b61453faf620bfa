//! Two slits inside a 2 x 1 rectangle grown until their tips meet. The
//! prevertices that coalesce are merged, leaving the SC map of an L-shaped
//! hexagon.
//!
//! Run with `cargo run --release --example hexagon_from_rectangle`.

use slitmap::sc_core::ScMap;
use slitmap::scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = scenario::example2();
    cfg.outputs.grid = false;
    let out = scenario::run(&cfg)?;
    let stage = &out.stages[0];
    println!("stopped: {:?}", stage.trace.termination);

    let merged = &stage.merged;
    println!("|c| = {:.8}", merged.c.norm());
    for p in &merged.prevertices {
        let labels: Vec<String> = p.members.iter().map(|r| r.label()).collect();
        println!(
            "x = {:>14.8}  sigma = {:>6.3}  spread = {:.1e}  [{}]",
            p.x,
            p.sigma,
            p.spread,
            labels.join(" ")
        );
    }
    if let Some(w) = &merged.warning {
        println!("warning: {w:?}");
    }

    let map = ScMap::from_state(&merged.to_state()?)?;
    println!("vertices of the merged polygon:");
    for (x, w) in map.prevertex_images()? {
        println!("  f({x:.6}) = {:.6} {:+.6}i", w.re, w.im);
    }
    Ok(())
}
