//! Standalone SVG line chart of scaled score against dataset size.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use super::ScoreRecord;
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const Y_MIN: f64 = -0.1;
const Y_MAX: f64 = 1.1;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One polyline per algorithm, `x` = trajectory count, `y` = scaled score
/// clipped to `[-0.1, 1.1]`, dashed references at 0 (random) and 1 (expert).
pub fn render_svg(scores: &[ScoreRecord]) -> Result<String> {
    if scores.is_empty() {
        return Err(Error::Empty("score records"));
    }
    let mut by_algo: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for r in scores {
        by_algo.entry(r.algorithm.as_str()).or_default().push((r.trajectories, r.scaled));
    }
    let xs: Vec<usize> = scores.iter().map(|r| r.trajectories).collect();
    let (x_lo, x_hi) = (*xs.iter().min().unwrap() as f64, *xs.iter().max().unwrap() as f64);
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let px = |x: f64| {
        if x_hi > x_lo {
            LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let py = |y: f64| TOP + (Y_MAX - y.clamp(Y_MIN, Y_MAX)) / (Y_MAX - Y_MIN) * plot_h;

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    // Axes.
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP, TOP + plot_h);
    writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = py(tick);
        writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{tick}</text>"#, x0 - 6.0, y + 4.0).unwrap();
    }
    let mut ticks = xs.clone();
    ticks.sort_unstable();
    ticks.dedup();
    for t in ticks {
        let x = px(t as f64);
        writeln!(s, r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y1 + 4.0).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#, y1 + 18.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">Number of trajectories in dataset</text>"#, LEFT + plot_w / 2.0, H - 10.0).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Performance (scaled)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();
    // References: random = 0, expert = 1.
    for (v, label) in [(0.0, "random"), (1.0, "expert")] {
        let y = py(v);
        writeln!(s, r##"<line class="reference" x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#888" stroke-dasharray="5,4"/>"##).unwrap();
        writeln!(s, r##"<text x="{}" y="{:.2}" fill="#888">{label}</text>"##, x1 + 4.0, y + 4.0).unwrap();
    }
    // Series and legend.
    for (k, (algo, mut pts)) in by_algo.into_iter().enumerate() {
        pts.sort_by(|a, b| a.0.cmp(&b.0));
        let color = COLORS[k % COLORS.len()];
        let name = escape(algo);
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x as f64), py(y))).collect();
        if pts.len() > 1 {
            writeln!(s, r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, coords.join(" ")).unwrap();
        }
        for &(x, y) in &pts {
            writeln!(s, r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, px(x as f64), py(y)).unwrap();
        }
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = x1 + 50.0;
        writeln!(s, r#"<g class="legend-entry"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text></g>"#, lx + 20.0, lx + 26.0, ly + 4.0).unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Ok(s)
}

pub fn emit_plot(scores: &[ScoreRecord], path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(scores)?)?;
    Ok(())
}
