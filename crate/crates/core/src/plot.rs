//! Static SVG of reaching trajectories: tool-point paths seen from above on
//! the left, Lyapunov value against time on the right.

use std::fmt::Write;

use thiserror::Error;

use crate::kinematics::{JointConfig, Manipulator};
use crate::simulator::StepRecord;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("no trajectories to plot")]
    NoLogs,
    #[error("trajectory {0} is empty")]
    EmptyLog(usize),
    #[error("trajectory {index} is outside the arm's joint limits: {message}")]
    Kinematics { index: usize, message: String },
}

const PANEL: f64 = 360.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Copy)]
struct Bounds {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Bounds {
    fn of(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let mut b = Bounds { lo: [f64::INFINITY; 2], hi: [f64::NEG_INFINITY; 2] };
        for p in points {
            for (i, x) in p.into_iter().enumerate() {
                b.lo[i] = b.lo[i].min(x);
                b.hi[i] = b.hi[i].max(x);
            }
        }
        for i in 0..2 {
            if b.hi[i] - b.lo[i] < 1e-9 {
                b.lo[i] -= 0.5;
                b.hi[i] += 0.5;
            }
        }
        b
    }

    /// Maps into a `PANEL`-sized square whose top-left corner is `origin`,
    /// with y growing upwards.
    fn map(&self, p: [f64; 2], origin: [f64; 2]) -> [f64; 2] {
        let sx = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]);
        let sy = (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]);
        [origin[0] + sx * PANEL, origin[1] + (1.0 - sy) * PANEL]
    }
}

fn points_attr(pts: &[[f64; 2]]) -> String {
    let mut s = String::new();
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{:.2},{:.2}", p[0], p[1]).unwrap();
    }
    s
}

fn path_attr(pts: &[[f64; 2]]) -> String {
    let mut s = String::new();
    for (i, p) in pts.iter().enumerate() {
        write!(s, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, p[0], p[1]).unwrap();
    }
    s
}

/// One `<polyline class="traj">` and one `<path class="value">` per log.
pub fn render_svg(logs: &[Vec<StepRecord>], arm: &impl Manipulator) -> Result<String, PlotError> {
    if logs.is_empty() {
        return Err(PlotError::NoLogs);
    }
    let mut tool_paths = Vec::with_capacity(logs.len());
    for (index, log) in logs.iter().enumerate() {
        if log.is_empty() {
            return Err(PlotError::EmptyLog(index));
        }
        let path = log
            .iter()
            .map(|r| {
                arm.forward(&JointConfig(r.theta))
                    .map(|h| [h.translation.x, h.translation.y])
                    .map_err(|e| PlotError::Kinematics { index, message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        tool_paths.push(path);
    }
    let value_paths: Vec<Vec<[f64; 2]>> =
        logs.iter().map(|log| log.iter().filter_map(|r| r.v_true.map(|v| [r.t, v])).collect()).collect();

    let xy = Bounds::of(tool_paths.iter().flatten().copied());
    let mut tv = Bounds::of(value_paths.iter().flatten().copied());
    tv.lo[1] = tv.lo[1].min(0.0);

    let left = [MARGIN, MARGIN];
    let right = [2.0 * MARGIN + PANEL + MARGIN, MARGIN];
    let width = right[0] + PANEL + MARGIN;
    let height = PANEL + 2.0 * MARGIN + 10.0;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (origin, title) in [(left, "tool point, top view (x, y) [m]"), (right, "V against time [s]")] {
        writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{PANEL:.0}" height="{PANEL:.0}" fill="none" stroke="black"/>"#,
            origin[0], origin[1]
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13">{title}</text>"#,
            origin[0],
            origin[1] - 10.0
        )
        .unwrap();
    }
    for (origin, b) in [(left, xy), (right, tv)] {
        let label = |x: f64, y: f64, anchor: &str, v: f64| {
            format!(
                r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#
            )
        };
        writeln!(svg, "{}", label(origin[0], origin[1] + PANEL + 14.0, "start", b.lo[0])).unwrap();
        writeln!(svg, "{}", label(origin[0] + PANEL, origin[1] + PANEL + 14.0, "end", b.hi[0])).unwrap();
        writeln!(svg, "{}", label(origin[0] - 4.0, origin[1] + PANEL, "end", b.lo[1])).unwrap();
        writeln!(svg, "{}", label(origin[0] - 4.0, origin[1] + 10.0, "end", b.hi[1])).unwrap();
    }
    for (i, path) in tool_paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<[f64; 2]> = path.iter().map(|p| xy.map(*p, left)).collect();
        writeln!(
            svg,
            r#"<polyline class="traj" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points_attr(&pts)
        )
        .unwrap();
        let start = pts[0];
        writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, start[0], start[1]).unwrap();
    }
    for (i, path) in value_paths.iter().enumerate().filter(|(_, p)| !p.is_empty()) {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<[f64; 2]> = path.iter().map(|p| tv.map(*p, right)).collect();
        writeln!(
            svg,
            r#"<path class="value" fill="none" stroke="{color}" stroke-width="1.5" d="{}"/>"#,
            path_attr(&pts)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
