//! Learning-curve plots as plain SVG.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};

use crate::experiment::{write_atomic, RunSummary};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders the summaries as one SVG: a mean line per agent with a ±1 std band.
///
/// Output is a pure function of the input, so identical summaries give identical bytes.
pub fn render_svg(summaries: &[RunSummary]) -> Result<String> {
    if summaries.is_empty() {
        bail!("nothing to plot");
    }
    if let Some(s) = summaries.iter().find(|s| s.checkpoints.is_empty()) {
        bail!("summary {:?} has no checkpoints", s.label);
    }
    let points = summaries.iter().flat_map(|s| &s.checkpoints);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in points {
        if !(c.mean.is_finite() && c.std.is_finite()) {
            bail!("non-finite checkpoint at episode {}", c.episode);
        }
        x0 = x0.min(c.episode as f64);
        x1 = x1.max(c.episode as f64);
        y0 = y0.min(c.mean - c.std);
        y1 = y1.max(c.mean + c.std);
    }
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 == y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            HEIGHT - BOTTOM + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">episode</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        summaries[0].metric.name()
    );

    for (i, s) in summaries.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let cps = &s.checkpoints;
        if cps.len() == 1 {
            let c = cps[0];
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(c.episode as f64),
                sy(c.mean)
            );
        } else {
            let mut band = String::new();
            for c in cps {
                let _ = write!(band, "{:.2},{:.2} ", sx(c.episode as f64), sy(c.mean + c.std));
            }
            for c in cps.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", sx(c.episode as f64), sy(c.mean - c.std));
            }
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end()
            );
            let line: Vec<String> = cps
                .iter()
                .map(|c| format!("{:.2},{:.2}", sx(c.episode as f64), sy(c.mean)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                line.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// The plotted numbers: `agent,episode,mean,std`.
pub fn plot_csv(summaries: &[RunSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["agent", "episode", "mean", "std"])?;
    for s in summaries {
        for c in &s.checkpoints {
            w.write_record([s.label.clone(), c.episode.to_string(), c.mean.to_string(), c.std.to_string()])?;
        }
    }
    Ok(w.into_inner()?)
}

/// Writes `path` (SVG) and the backing CSV next to it. Returns the CSV path.
pub fn emit_plot(summaries: &[RunSummary], path: &Path) -> Result<PathBuf> {
    let svg = render_svg(summaries)?;
    let data = plot_csv(summaries)?;
    let csv_path = path.with_extension("csv");
    write_atomic(path, svg.as_bytes())?;
    if let Err(e) = write_atomic(&csv_path, &data) {
        let _ = std::fs::remove_file(path);
        return Err(e);
    }
    Ok(csv_path)
}
