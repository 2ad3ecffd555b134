//! Two-panel SVG: state-space trajectories with safe-set boundaries, and h(t).

use std::fmt::Write;

use crate::io::TrajectoryTable;

const W: f64 = 960.0;
const H: f64 = 420.0;
const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 300.0;
const TOP: f64 = 50.0;
const LEFT: [f64; 2] = [70.0, 560.0];
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub label: &'a str,
    pub table: &'a TrajectoryTable,
}

#[derive(Clone, Copy)]
struct Frame {
    left: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        self.left + (v - self.x.0) / (self.x.1 - self.x.0) * PANEL_W
    }

    fn py(&self, v: f64) -> f64 {
        TOP + PANEL_H - (v - self.y.0) / (self.y.1 - self.y.0) * PANEL_H
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}

fn polyline(out: &mut String, f: &Frame, pts: impl Iterator<Item = (f64, f64)>, color: &str, dash: bool) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{:.2},{:.2} ", f.px(x), f.py(y));
    }
    let dash = if dash { " stroke-dasharray=\"6 4\"" } else { "" };
    let _ = writeln!(
        out,
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
        d.trim_end()
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, title: &str) {
    let (x0, x1) = (f.left, f.left + PANEL_W);
    let (y0, y1) = (TOP + PANEL_H, TOP);
    let _ = writeln!(
        out,
        "<rect x=\"{x0}\" y=\"{y1}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" fill=\"none\" stroke=\"#333\"/>"
    );
    for i in 0..=4 {
        let a = i as f64 / 4.0;
        let vx = f.x.0 + a * (f.x.1 - f.x.0);
        let vy = f.y.0 + a * (f.y.1 - f.y.0);
        let px = f.px(vx);
        let py = f.py(vy);
        let _ = writeln!(out, "<line x1=\"{px:.2}\" y1=\"{y0}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>", y0 + 5.0);
        let _ = writeln!(
            out,
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{vx:.3}</text>",
            y0 + 18.0
        );
        let _ = writeln!(out, "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"#333\"/>", x0 - 5.0);
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{vy:.3}</text>",
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{xlabel}</text>",
        (x0 + x1) / 2.0,
        y0 + 36.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">{ylabel}</text>",
        x0 - 52.0,
        (y0 + y1) / 2.0,
        x0 - 52.0,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        (x0 + x1) / 2.0,
        y1 - 10.0
    );
}

/// `boundaries` are `(axis, value)` planes of `{h = 0}`; only axes 0 and 1 can be drawn.
pub fn comparison_svg(series: &[Series<'_>], boundaries: &[(usize, f64)]) -> String {
    let two_d = series.iter().all(|s| s.table.state_dim() >= 2);
    let xs = |s: &Series<'_>| -> Vec<(f64, f64)> {
        if two_d {
            s.table.x.iter().map(|x| (x[0], x[1])).collect()
        } else {
            s.table.t.iter().zip(&s.table.x).map(|(t, x)| (*t, x[0])).collect()
        }
    };
    let pts: Vec<Vec<(f64, f64)>> = series.iter().map(xs).collect();

    let bx: Vec<f64> = boundaries
        .iter()
        .filter(|(a, _)| if two_d { *a == 0 } else { false })
        .map(|(_, v)| *v)
        .collect();
    let by: Vec<f64> = boundaries
        .iter()
        .filter(|(a, _)| if two_d { *a == 1 } else { *a == 0 })
        .map(|(_, v)| *v)
        .collect();
    let phase = Frame {
        left: LEFT[0],
        x: range(pts.iter().flatten().map(|p| p.0).chain(bx.iter().copied())),
        y: range(pts.iter().flatten().map(|p| p.1).chain(by.iter().copied())),
    };
    let margin = Frame {
        left: LEFT[1],
        x: range(series.iter().flat_map(|s| s.table.t.iter().copied())),
        y: range(series.iter().flat_map(|s| s.table.h.iter().copied()).chain([0.0])),
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let (xl, yl) = if two_d { ("x_0", "x_1") } else { ("t [s]", "x_0") };
    axes(&mut out, &phase, xl, yl, "trajectories");
    axes(&mut out, &margin, "t [s]", "h(x)", "barrier value");

    for v in &bx {
        polyline(&mut out, &phase, [(*v, phase.y.0), (*v, phase.y.1)].into_iter(), "#555", true);
    }
    for v in &by {
        polyline(&mut out, &phase, [(phase.x.0, *v), (phase.x.1, *v)].into_iter(), "#555", true);
    }
    polyline(&mut out, &margin, [(margin.x.0, 0.0), (margin.x.1, 0.0)].into_iter(), "#555", true);

    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        polyline(&mut out, &phase, pts[i].iter().copied(), c, false);
        polyline(&mut out, &margin, s.table.t.iter().copied().zip(s.table.h.iter().copied()), c, false);
        let y = TOP + PANEL_H + 60.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{c}\" stroke-width=\"2\"/>",
            LEFT[0],
            LEFT[0] + 24.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
            LEFT[0] + 30.0,
            y + 4.0,
            escape(s.label)
        );
    }
    if !boundaries.is_empty() {
        let y = TOP + PANEL_H + 60.0;
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>",
            LEFT[1],
            LEFT[1] + 24.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">safe-set boundary</text>",
            LEFT[1] + 30.0,
            y + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_boundaries_and_legend() {
        let t = TrajectoryTable {
            t: vec![0.0, 0.5, 1.0],
            x: vec![vec![0.5, 0.75], vec![0.4, 0.1], vec![0.45, -0.5]],
            h: vec![0.75, 0.84, 0.7975],
        };
        let svg = comparison_svg(
            &[Series { label: "synth", table: &t }, Series { label: "a<b", table: &t }],
            &[(0, -1.0), (0, 1.0)],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(">synth<"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 4);
        assert_eq!(svg.matches("<polyline").count(), 3 + 4);
    }
}
