//! Plot output: columnar per-process series files and an offset/time SVG.
//!
//! The data files are the normative output; the SVG is a convenience
//! rendering (one polyline per process, offset over time).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use iotrace_core::analysis::Direction;

use crate::access::ProcessSeries;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 40.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

fn direction_label(d: Direction) -> &'static str {
    match d {
        Direction::Read => "read",
        Direction::Write => "write",
    }
}

/// Writes one `<stem>.p<pid>.dat` per process; returns the paths written.
pub fn write_series(
    dir: &Path,
    stem: &str,
    series: &[ProcessSeries],
) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(series.len());
    for s in series {
        let mut body = String::from("# t_ns\toffset\tlen\tdirection\tfile\n");
        for p in &s.points {
            let _ = writeln!(
                body,
                "{}\t{}\t{}\t{}\t{}",
                p.t_ns,
                p.offset,
                p.len,
                direction_label(p.direction),
                p.file
            );
        }
        let path = dir.join(format!("{stem}.p{}.dat", s.pid));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// Renders all processes' accesses as offset-vs-time polylines.
pub fn render_svg(series: &[ProcessSeries]) -> String {
    let points: Vec<(u64, u64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| (p.t_ns, p.offset)))
        .collect();
    let t_min = points.iter().map(|p| p.0).min().unwrap_or(0);
    let t_max = points.iter().map(|p| p.0).max().unwrap_or(1).max(t_min + 1);
    let y_max = points.iter().map(|p| p.1).max().unwrap_or(1).max(1);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |t: u64| MARGIN_LEFT + (t - t_min) as f64 / (t_max - t_min) as f64 * plot_w;
    let y = |o: u64| MARGIN_TOP + plot_h - o as f64 / y_max as f64 * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/><line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + plot_h,
        r = MARGIN_LEFT + plot_w,
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">time ns: {} .. {}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        t_min,
        t_max
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">offset 0 .. {}</text>"#,
        14.0,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        y_max
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.t_ns), y(p.offset)))
            .collect();
        if coords.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
                coords.join(" ")
            );
        }
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap();
            let _ = writeln!(svg, r#"<circle cx="{cx}" cy="{cy}" r="2" fill="{color}"/>"#);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">p{}</text>"#,
            MARGIN_LEFT + plot_w - 30.0,
            MARGIN_TOP + 14.0 * (i as f64 + 1.0),
            s.pid
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes the SVG next to the series files; returns its path.
pub fn write_svg(dir: &Path, stem: &str, series: &[ProcessSeries]) -> io::Result<PathBuf> {
    let path = dir.join(format!("{stem}.svg"));
    fs::write(&path, render_svg(series))?;
    Ok(path)
}
