//! Writes every artifact of a run (parameters, table, trace, verification,
//! image of a rectangular grid as CSV and SVG) to a directory.
//!
//! Run with `cargo run --release --example grid_export -- out_dir`.

use std::path::PathBuf;

use slitmap::scenario::{self, write_artifacts};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "grid_out".into());
    let cfg = scenario::example1();
    let out = scenario::run(&cfg)?;
    for f in write_artifacts(&out, &cfg, &dir)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
