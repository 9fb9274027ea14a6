//! Static SVG rendering of a map and planned paths.

use std::fmt::Write as _;
use std::path::Path;

use crate::grid::{Cell, GridMap};
use crate::postprocess::TimedPath;
use crate::window::Plan;

const CELL: usize = 40;
const MARGIN: usize = 10;

/// Stroke colors, cycled by robot order.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderPath {
    pub start: Cell,
    pub goal: Cell,
    pub path: TimedPath,
}

impl RenderPath {
    pub fn from_plan(plan: &Plan) -> Vec<RenderPath> {
        plan.robots
            .iter()
            .map(|r| RenderPath {
                start: r.start,
                goal: r.goal,
                path: r.path.clone(),
            })
            .collect()
    }
}

fn center(c: Cell) -> (usize, usize) {
    (
        MARGIN + c.j * CELL + CELL / 2,
        MARGIN + c.i * CELL + CELL / 2,
    )
}

/// Grid, obstacles, then one polyline per robot with a circle on the start, a square on the
/// goal and the global time printed next to every visited cell.
pub fn render_svg(map: &GridMap, paths: &[RenderPath]) -> String {
    let (w, h) = (
        map.cols() * CELL + 2 * MARGIN,
        map.rows() * CELL + 2 * MARGIN,
    );
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    let _ = writeln!(s, r##"<g fill="#444444">"##);
    for c in map.obstacles() {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}"/>"#,
            MARGIN + c.j * CELL,
            MARGIN + c.i * CELL
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g stroke="#999999" stroke-width="1">"##);
    for i in 0..=map.rows() {
        let y = MARGIN + i * CELL;
        let _ = writeln!(
            s,
            r#"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}"/>"#,
            w - MARGIN
        );
    }
    for j in 0..=map.cols() {
        let x = MARGIN + j * CELL;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{MARGIN}" x2="{x}" y2="{}"/>"#,
            h - MARGIN
        );
    }
    let _ = writeln!(s, "</g>");

    for (k, p) in paths.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        // small per-robot shift so overlapping routes stay distinguishable
        let shift = (k % 4) as isize * 3 - 4;
        let pos = |c: Cell| {
            let (x, y) = center(c);
            (x as isize + shift, y as isize + shift)
        };
        let _ = writeln!(s, r#"<g id="robot-{k}">"#);
        if p.path.cells.len() > 1 {
            let points: Vec<String> = p
                .path
                .cells
                .iter()
                .map(|&c| {
                    let (x, y) = pos(c);
                    format!("{x},{y}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="3" stroke-linejoin="round"/>"#,
                points.join(" ")
            );
        }
        let (sx, sy) = pos(p.start);
        let _ = writeln!(s, r#"<circle cx="{sx}" cy="{sy}" r="7" fill="{color}"/>"#);
        let (gx, gy) = pos(p.goal);
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="14" height="14" fill="none" stroke="{color}" stroke-width="3"/>"#,
            gx - 7,
            gy - 7
        );
        for (t, c) in p.path.steps() {
            let (x, y) = pos(c);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="9" font-family="monospace" fill="{color}">{t}</text>"#,
                x + 5,
                y - 5
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(out: &Path, map: &GridMap, paths: &[RenderPath]) -> std::io::Result<()> {
    std::fs::write(out, render_svg(map, paths))
}
