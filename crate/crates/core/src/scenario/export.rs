use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use super::{NewtonCheck, RunOutput, ScenarioConfig, ScenarioError, StageOutput};
use crate::loewner::{MergedPrevertex, Termination};
use crate::oracle::VerifyReport;
use crate::sc_core::{grid_image_with, AccessoryState, GridImage, GridSpec, LineKind, ScMap};

#[derive(Serialize)]
struct ParamEntry {
    label: String,
    x: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct StateDump {
    t: f64,
    c: Complex64,
    prevertices: Vec<ParamEntry>,
}

impl StateDump {
    fn of(s: &AccessoryState) -> Self {
        Self {
            t: s.t,
            c: s.c,
            prevertices: s
                .prevertices()
                .iter()
                .map(|p| ParamEntry {
                    label: p.role.label(),
                    x: p.x,
                    sigma: p.sigma,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct MergedEntry {
    x: f64,
    sigma: f64,
    members: Vec<String>,
    spread: f64,
}

impl MergedEntry {
    fn of(p: &MergedPrevertex) -> Self {
        Self {
            x: p.x,
            sigma: p.sigma,
            members: p.members.iter().map(|r| r.label()).collect(),
            spread: p.spread,
        }
    }
}

#[derive(Serialize)]
struct StageDump {
    termination: Termination,
    steps: usize,
    rejected_steps: usize,
    end: StateDump,
    merged: Vec<MergedEntry>,
    merge_warning: Option<Vec<f64>>,
    lengths: Vec<f64>,
}

#[derive(Serialize)]
struct ParamsDump {
    name: String,
    initial: StateDump,
    stages: Vec<StageDump>,
}

/// All stage end states and merged limits as JSON. Floats are written in
/// shortest round-trip form.
pub fn params_json(out: &RunOutput) -> Result<String, ScenarioError> {
    let dump = ParamsDump {
        name: out.name.clone(),
        initial: StateDump::of(&out.initial),
        stages: out
            .stages
            .iter()
            .map(|s| StageDump {
                termination: s.trace.termination.clone(),
                steps: s.trace.snapshots.len() - 1,
                rejected_steps: s.trace.rejected_steps,
                end: StateDump::of(s.trace.last()),
                merged: s.merged.prevertices.iter().map(MergedEntry::of).collect(),
                merge_warning: s.merged.warning.as_ref().map(|w| w.gaps.clone()),
                lengths: s.trace.diagnostics.last().map(|d| d.lengths.clone()).unwrap_or_default(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&dump)?)
}

fn merged_anything(s: &StageOutput) -> bool {
    s.merged.prevertices.iter().any(|p| p.members.len() > 1)
}

/// Human-readable parameter table of every stage end state.
pub fn format_table(out: &RunOutput) -> String {
    let mut s = String::new();
    if out.stages.is_empty() {
        let _ = writeln!(s, "initial state");
        table_rows(&mut s, &out.initial);
    }
    for (k, st) in out.stages.iter().enumerate() {
        let end = st.trace.last();
        let _ = writeln!(s, "stage {k}: t = {:.9}", end.t);
        match &st.trace.termination {
            Termination::Completed => {
                let _ = writeln!(s, "  completed");
            }
            Termination::Degenerate { left, right, gap } => {
                let _ = writeln!(s, "  stopped: {left} and {right} merged (gap {gap:.3e})");
            }
        }
        table_rows(&mut s, end);
        if let Some(d) = st.trace.diagnostics.last() {
            for (i, l) in d.lengths.iter().enumerate() {
                let _ = writeln!(s, "  {:<10} {:>16.9}", format!("L{}", i + 1), l);
            }
        }
        if merged_anything(st) {
            let _ = writeln!(s, "  merged:");
            for p in &st.merged.prevertices {
                let names: Vec<String> = p.members.iter().map(|r| r.label()).collect();
                let _ = writeln!(s, "  {:<10} {:>16.9}  sigma {:>6.3}  [{}]", "", p.x, p.sigma, names.join(" "));
            }
            if let Some(w) = &st.merged.warning {
                let _ = writeln!(s, "  warning: gaps {:?} close to the clustering tolerance", w.gaps);
            }
        }
    }
    s
}

fn table_rows(s: &mut String, st: &AccessoryState) {
    for p in st.moving() {
        let _ = writeln!(s, "  {:<10} {:>16.9}", p.role.label(), p.x);
    }
    if st.c.im.abs() <= 1e-14 * st.c.norm() {
        let _ = writeln!(s, "  {:<10} {:>16.9}", "c", st.c.re);
    } else {
        let _ = writeln!(s, "  {:<10} {:>16.9} {:+.9}i", "c", st.c.re, st.c.im);
    }
}

/// Per-step trace of one stage: parameter, step, every moving prevertex, `|c|`, `arg c`,
/// slit lengths and normalized control.
pub fn trace_csv(stage: &StageOutput) -> String {
    let s0 = &stage.trace.snapshots[0];
    let labels: Vec<String> = s0.moving().iter().map(|p| p.role.label()).collect();
    let nslits = s0.slits.len();
    let mut out = String::from("t,h,error");
    for l in &labels {
        let _ = write!(out, ",{l}");
    }
    out.push_str(",c_abs,c_arg");
    for i in 1..=nslits {
        let _ = write!(out, ",L{i}");
    }
    for i in 1..=nslits {
        let _ = write!(out, ",C{i}");
    }
    out.push('\n');
    for (snap, d) in stage.trace.snapshots.iter().zip(&stage.trace.diagnostics) {
        let _ = write!(out, "{:.16e},{:.16e},{:.16e}", snap.t, d.h, d.error);
        for p in snap.moving() {
            let _ = write!(out, ",{:.16e}", p.x);
        }
        let _ = write!(out, ",{:.16e},{:.16e}", snap.c.norm(), snap.c.arg());
        for i in 0..nslits {
            let _ = write!(out, ",{:.16e}", d.lengths.get(i).copied().unwrap_or(f64::NAN));
        }
        for i in 0..nslits {
            let _ = write!(out, ",{:.16e}", d.control.get(i).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

/// Map used for the grid: the merged limit if the last stage merged
/// anything, the end state otherwise.
pub fn final_map(out: &RunOutput) -> Result<ScMap, ScenarioError> {
    match out.stages.last() {
        Some(st) if merged_anything(st) => {
            let p = &st.trace.last().polygon;
            Ok(st.merged.map(p.origin_vertex(), p.alpha_origin() - 1.0, p.alpha_one() - 1.0)?)
        }
        _ => Ok(ScMap::from_state(out.final_state())?),
    }
}

pub fn grid_csv(img: &GridImage) -> String {
    let mut s = String::from("line,kind,level,z_re,z_im,w_re,w_im\n");
    for (k, pl) in img.polylines.iter().enumerate() {
        let kind = match pl.kind {
            LineKind::Horizontal => "h",
            LineKind::Vertical => "v",
        };
        for (z, w) in pl.preimages.iter().zip(&pl.points) {
            let _ = writeln!(
                s,
                "{k},{kind},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                pl.level, z.re, z.im, w.re, w.im
            );
        }
    }
    s
}

/// Grid image over the polygon outline (or the real axis) and the slits.
pub fn grid_svg(img: &GridImage, state: &AccessoryState) -> String {
    let outline = state.polygon.finite_outline();
    let slits: Vec<(Complex64, Complex64)> = state
        .slits
        .iter()
        .map(|g| {
            let tip = ScMap::from_state(state)
                .and_then(|m| m.map_real(g.lambda))
                .unwrap_or(g.base_point);
            (g.base_point, tip)
        })
        .collect();
    let mut frame: Vec<Complex64> = outline.clone().unwrap_or_default();
    for (a, b) in &slits {
        frame.push(*a);
        frame.push(*b);
    }
    if frame.is_empty() {
        frame = vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 2.0)];
    }
    let (mut x0, mut x1, mut y0, mut y1) = bbox(&frame);
    if outline.is_none() {
        let r = (x1 - x0).max(y1 - y0).max(1.0);
        x0 -= r;
        x1 += r;
        y0 = 0.0;
        y1 += r;
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0);
    let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
    let width = 800.0;
    let scale = width / (x1 - x0);
    let height = (y1 - y0) * scale;
    let px = |w: Complex64| ((w.re - x0) * scale, (y1 - w.im) * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for pl in &img.polylines {
        let colour = match pl.kind {
            LineKind::Horizontal => "#3b6fb6",
            LineKind::Vertical => "#c0504d",
        };
        let pts: Vec<String> = pl
            .points
            .iter()
            .filter(|w| w.re.is_finite() && w.im.is_finite())
            .map(|&w| {
                let (a, b) = px(w);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="0.6" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
    match outline {
        Some(o) => {
            let pts: Vec<String> = o
                .iter()
                .map(|&w| {
                    let (a, b) = px(w);
                    format!("{a:.2},{b:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        None => {
            let (a, b) = px(Complex64::new(x0, 0.0));
            let (c, d) = px(Complex64::new(x1, 0.0));
            let _ = writeln!(s, r#"<line x1="{a:.2}" y1="{b:.2}" x2="{c:.2}" y2="{d:.2}" stroke="black" stroke-width="1.5"/>"#);
        }
    }
    for (p, q) in slits {
        let (a, b) = px(p);
        let (c, d) = px(q);
        let _ = writeln!(s, r#"<line x1="{a:.2}" y1="{b:.2}" x2="{c:.2}" y2="{d:.2}" stroke="black" stroke-width="2"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

fn bbox(pts: &[Complex64]) -> (f64, f64, f64, f64) {
    pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), w| (a.min(w.re), b.max(w.re), c.min(w.im), d.max(w.im)),
    )
}

#[derive(Serialize)]
struct VerifyDump<'a> {
    stage: usize,
    report: &'a VerifyReport,
    newton: &'a Option<NewtonCheck>,
}

fn stage_file(stem: &str, k: usize, ext: &str) -> String {
    if k == 0 {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}_{k}.{ext}")
    }
}

/// Writes `params.json` plus whatever `cfg.outputs` asks for. Returns the paths written.
pub fn write_artifacts(out: &RunOutput, cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), ScenarioError> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    put("params.json".into(), params_json(out)?)?;
    if cfg.outputs.table {
        put("table.txt".into(), format_table(out))?;
    }
    if cfg.outputs.trace {
        for (k, st) in out.stages.iter().enumerate() {
            put(stage_file("trace", k, "csv"), trace_csv(st))?;
        }
    }
    if cfg.outputs.verify {
        let dumps: Vec<VerifyDump> = out
            .stages
            .iter()
            .enumerate()
            .filter_map(|(k, st)| {
                st.verify.as_ref().map(|report| VerifyDump {
                    stage: k,
                    report,
                    newton: &st.newton,
                })
            })
            .collect();
        put("verify.json".into(), serde_json::to_string_pretty(&dumps)?)?;
    }
    if cfg.outputs.grid {
        let spec = cfg.grid.unwrap_or_else(|| default_grid(out.final_state()));
        let img = grid_image_with(&final_map(out)?, &spec)?;
        put("grid.csv".into(), grid_csv(&img))?;
        put("grid.svg".into(), grid_svg(&img, out.final_state()))?;
    }
    Ok(written)
}

/// Covers all prevertices with a margin, 20 lines across.
pub fn default_grid(state: &AccessoryState) -> GridSpec {
    let pv = state.prevertices();
    let lo = pv.first().map_or(-1.0, |p| p.x);
    let hi = pv.last().map_or(1.0, |p| p.x);
    let span = (hi - lo).max(1.0);
    let spacing = span / 20.0;
    GridSpec::new(lo - 0.25 * span, hi + 0.25 * span, 0.05 * spacing, 0.5 * span, spacing, 200)
}

/// Dumps the last good state after a numerical failure.
pub fn write_failure(err: &ScenarioError, dir: &Path) -> Result<Option<PathBuf>, ScenarioError> {
    let Some(state) = err.last_good() else {
        return Ok(None);
    };
    fs::create_dir_all(dir)?;
    let p = dir.join("failure.json");
    #[derive(Serialize)]
    struct Failure {
        error: String,
        last_good: StateDump,
    }
    let body = serde_json::to_string_pretty(&Failure {
        error: err.to_string(),
        last_good: StateDump::of(state),
    })?;
    fs::write(&p, body)?;
    Ok(Some(p))
}
