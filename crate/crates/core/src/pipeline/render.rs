//! SVG overlays of dense affordances and lane graphs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graphgen::{EdgeKind, LaneGraph, VertexKind};
use crate::oracle::AffordanceBundle;
use crate::tensor::{read_tensor, write_atomic};

/// Largest grid side drawn cell by cell.
pub const MAX_RENDER_CELLS: usize = 128;
/// Direction arrows are drawn on every `ARROW_STRIDE`-th row and column.
pub const ARROW_STRIDE: usize = 4;
const PX_PER_CELL: usize = 4;

fn edge_color(k: EdgeKind) -> &'static str {
    match k {
        EdgeKind::Entry => "#1f5fd6",
        EdgeKind::Intersection => "#d62728",
        EdgeKind::Exit => "#2ca02c",
        EdgeKind::Lane => "#8c3fbf",
    }
}

fn vertex_label(k: VertexKind) -> &'static str {
    match k {
        VertexKind::Entry => "N",
        VertexKind::Exit => "X",
        VertexKind::Fork => "F",
        VertexKind::Merge => "M",
    }
}

/// Renders the bundle and graph in cell units (x = column, y = row).
pub fn render_svg(bundle: &AffordanceBundle, graph: &LaneGraph) -> Result<String> {
    let (h, w) = (bundle.height(), bundle.width());
    if h > MAX_RENDER_CELLS || w > MAX_RENDER_CELLS {
        return Err(Error::Shape(format!("render is capped at {MAX_RENDER_CELLS} cells per side, got {h}x{w}")));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {w} {h}">"#,
        w * PX_PER_CELL,
        h * PX_PER_CELL
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="black"/>"#);
    let layers = [("lane", &bundle.lane, None), ("entry", &bundle.entry, Some("red")), ("exit", &bundle.exit, Some("blue"))];
    for (name, map, color) in layers {
        let _ = writeln!(s, r#"<g id="{name}">"#);
        for i in 0..h {
            for j in 0..w {
                let v = map.get(0, i, j).clamp(0.0, 1.0);
                if v <= 0.0 {
                    continue;
                }
                match color {
                    None => {
                        let g = (v * 255.0).round() as u8;
                        let _ = writeln!(s, r#"<rect x="{j}" y="{i}" width="1" height="1" fill="rgb({g},{g},{g})"/>"#);
                    }
                    Some(c) => {
                        let _ = writeln!(
                            s,
                            r#"<rect x="{j}" y="{i}" width="1" height="1" fill="{c}" fill-opacity="{:.3}"/>"#,
                            0.7 * v
                        );
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r##"<g id="direction" stroke="#e0a000" stroke-width="0.15">"##);
    for i in (0..h).step_by(ARROW_STRIDE) {
        for j in (0..w).step_by(ARROW_STRIDE) {
            for c in bundle.direction.active(crate::grid::Cell::new(i, j)) {
                let (x0, y0) = (j as f64 + 0.5, i as f64 + 0.5);
                let (x1, y1) = (x0 + 1.5 * c.mean.cos(), y0 + 1.5 * c.mean.sin());
                let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#);
                let _ = writeln!(s, r##"<circle cx="{x1:.2}" cy="{y1:.2}" r="0.25" fill="#e0a000" stroke="none"/>"##);
            }
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="edges" fill="none" stroke-width="0.6" stroke-linejoin="round">"#);
    for e in &graph.edges {
        let pts: Vec<String> =
            e.geometry.iter().map(|c| format!("{:.1},{:.1}", c.j as f64 + 0.5, c.i as f64 + 0.5)).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="{}" stroke="{}" points="{}"/>"#,
            e.kind.as_str(),
            edge_color(e.kind),
            pts.join(" ")
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="vertices" font-size="2.5" font-family="monospace">"#);
    for v in &graph.vertices {
        let (x, y) = (v.cell.j as f64 + 0.5, v.cell.i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<circle class="{}" cx="{x:.1}" cy="{y:.1}" r="1.2" fill="white" stroke="black" stroke-width="0.2"/>"#,
            v.kind.as_str()
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" fill="white">{}{}</text>"#, x + 1.4, y - 1.0, vertex_label(v.kind), v.id);
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders an evaluation sample directory (or any directory holding
/// `affordance.lgt` and `direction.lgt`) with the graph at `graph` into `out`.
pub fn cmd_render(sample: &Path, graph: &Path, out: &Path) -> Result<()> {
    let bundle = AffordanceBundle::from_tensors(
        &read_tensor(&sample.join("affordance.lgt"))?,
        &read_tensor(&sample.join("direction.lgt"))?,
    )?;
    let text = std::fs::read_to_string(graph).map_err(|e| Error::io(graph, e))?;
    let g = LaneGraph::from_json_str(&text)?;
    write_atomic(out, render_svg(&bundle, &g)?.as_bytes())
}
