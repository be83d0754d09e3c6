//! Lane-graph generation from dense affordances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{LaneGraph, VertexKind};
use super::search::{astar, extract_points, AdjacencyField};
use super::unify::{reverse_unify_with, unify_with, UnifyParams, LOOKAHEAD, THETA_DIV};
use crate::grid::{angle_diff, circular_mean, Cell};
use crate::oracle::{AffordanceBundle, DirectionalField};

/// Default direction gate, radians.
pub const DELTA_THETA: f64 = std::f64::consts::FRAC_PI_4;
/// Threshold for entry/exit clusters.
pub const POINT_THRESHOLD: f64 = 0.5;
/// Entry/exit pairs closer than this (cells) with opposing headings are
/// treated as the two sides of one arm.
pub const UTURN_DISTANCE: f64 = 32.0;
/// Heading difference above which an entry and exit count as opposing.
pub const UTURN_ANGLE: f64 = 160.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphParams {
    pub delta_theta: f64,
    pub theta_div: f64,
    pub lookahead: usize,
    pub suppress_uturns: bool,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams { delta_theta: DELTA_THETA, theta_div: THETA_DIV, lookahead: LOOKAHEAD, suppress_uturns: true }
    }
}

impl GraphParams {
    fn unify(&self) -> UnifyParams {
        UnifyParams { lookahead: self.lookahead, theta_div: self.theta_div }
    }
}

/// Radius of the neighbourhood that sets a terminal's heading, cells.
const HEADING_RADIUS: isize = 3;

/// Circular mean of the direction components around `c`, weighted by
/// component weight and a linear falloff with distance.
fn terminal_heading(d: &DirectionalField, c: Cell) -> Option<f64> {
    let r = HEADING_RADIUS;
    let mut samples = Vec::new();
    for di in -r..=r {
        for dj in -r..=r {
            let dist = ((di * di + dj * dj) as f64).sqrt();
            let Some(n) = c.offset(di, dj, d.height(), d.width()) else { continue };
            if dist > r as f64 {
                continue;
            }
            let falloff = 1.0 - dist / (r as f64 + 1.0);
            samples.extend(d.active(n).map(|comp| (comp.mean, comp.weight * falloff)));
        }
    }
    circular_mean(samples)
}

fn is_uturn(d: &DirectionalField, entry: Cell, exit: Cell) -> bool {
    if entry.dist(exit) > UTURN_DISTANCE {
        return false;
    }
    match (terminal_heading(d, entry), terminal_heading(d, exit)) {
        (Some(a), Some(b)) => angle_diff(a, b) >= UTURN_ANGLE,
        _ => false,
    }
}

/// A path awaiting merge assignment: its source vertex and cells.
struct Continuation {
    src: usize,
    exit: usize,
    cells: Vec<Cell>,
}

/// Builds a lane graph from a bundle.
///
/// Every entry cluster is searched towards every exit cluster; the paths
/// from one entry are unified into an entry edge ending in a fork, and the
/// continuations reaching one exit are reverse-unified into an exit edge
/// starting at a merge. An entry with a single continuation gets no fork and
/// an exit with a single arrival gets no merge, so the edge between them
/// collapses accordingly.
pub fn generate_graph(bundle: &AffordanceBundle, params: &GraphParams) -> LaneGraph {
    let mut g = LaneGraph::new();
    let entries = extract_points(&bundle.entry, POINT_THRESHOLD);
    let exits = extract_points(&bundle.exit, POINT_THRESHOLD);
    if entries.is_empty() || exits.is_empty() {
        g.warnings.push(format!("{} entry and {} exit points found; graph is empty", entries.len(), exits.len()));
        return g;
    }
    let field = AdjacencyField::new(&bundle.lane, &bundle.direction, params.delta_theta);
    let support = |c: Cell| field.support(c) > 0.0;

    // searches are independent; results keep entry/exit order
    let trees: Vec<Vec<(usize, Vec<Cell>)>> = entries
        .par_iter()
        .map(|&e| {
            exits
                .iter()
                .enumerate()
                .filter(|(_, &x)| !(params.suppress_uturns && is_uturn(&bundle.direction, e, x)))
                .filter_map(|(k, &x)| astar(e, x, &field).map(|p| (k, p.cells)))
                .filter(|(_, cells)| cells.len() >= 2)
                .collect()
        })
        .collect();

    let mut entry_ids = vec![None; entries.len()];
    for (k, (&e, tree)) in entries.iter().zip(&trees).enumerate() {
        if tree.is_empty() {
            g.warnings.push(format!("entry at ({}, {}) reaches no exit; omitted", e.i, e.j));
        } else {
            entry_ids[k] = Some(g.add_vertex(VertexKind::Entry, e));
        }
    }
    let mut exit_ids = vec![None; exits.len()];
    for (k, &x) in exits.iter().enumerate() {
        if trees.iter().any(|t| t.iter().any(|(m, _)| *m == k)) {
            exit_ids[k] = Some(g.add_vertex(VertexKind::Exit, x));
        }
    }

    let up = params.unify();
    let mut continuations: Vec<Continuation> = Vec::new();
    for (k, tree) in trees.iter().enumerate() {
        let Some(eid) = entry_ids[k] else { continue };
        if tree.len() == 1 {
            let (x, cells) = &tree[0];
            continuations.push(Continuation { src: eid, exit: *x, cells: cells.clone() });
            continue;
        }
        let paths: Vec<Vec<Cell>> = tree.iter().map(|(_, c)| c.clone()).collect();
        let u = unify_with(&paths, up, support);
        let fork = *u.common.last().expect("unified path is non-empty");
        let fid = g.add_vertex(VertexKind::Fork, fork);
        g.connect(eid, fid, u.common).expect("entry to fork is a valid edge");
        for ((x, _), cells) in tree.iter().zip(u.suffixes) {
            continuations.push(Continuation { src: fid, exit: *x, cells });
        }
    }

    for (k, exit_id) in exit_ids.iter().enumerate() {
        let Some(xid) = *exit_id else { continue };
        let arriving: Vec<&Continuation> = continuations.iter().filter(|c| c.exit == k).collect();
        if arriving.len() == 1 {
            let c = arriving[0];
            g.connect(c.src, xid, c.cells.clone()).expect("direct edge to exit is valid");
            continue;
        }
        let paths: Vec<Vec<Cell>> = arriving.iter().map(|c| c.cells.clone()).collect();
        let u = reverse_unify_with(&paths, up, support);
        let merge = u.common[0];
        let mid = g.add_vertex(VertexKind::Merge, merge);
        for (c, suffix) in arriving.iter().zip(u.suffixes) {
            g.connect(c.src, mid, suffix).expect("edge into merge is valid");
        }
        g.connect(mid, xid, u.common).expect("merge to exit is valid");
    }
    g
}
