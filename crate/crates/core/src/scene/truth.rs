//! Analytic ground-truth lane graphs.

use std::collections::BTreeMap;

use super::layout::RoadLayout;
use super::routes::{enumerate_routes, Route};
use crate::graphgen::graph::{LaneGraph, VertexKind};
use crate::grid::{Cell, GridSpec, Point};

fn to_cells(spec: &GridSpec, pts: &[Point]) -> Vec<Cell> {
    let mut out: Vec<Cell> = Vec::new();
    for &p in pts {
        let c = spec.clamp_cell(p);
        if out.last() != Some(&c) {
            out.push(c);
        }
    }
    out
}

/// Builds the reference lane graph of a layout on the grid `spec`.
///
/// Routes leaving the same entry branch at a fork placed on their last
/// common point; routes reaching the same exit join at a merge placed on
/// their first common point. Entries or exits carrying a single route get
/// no fork or merge.
pub fn ground_truth_graph(layout: &RoadLayout, spec: &GridSpec) -> LaneGraph {
    let routes = match enumerate_routes(layout) {
        Ok(r) => r,
        Err(e) => {
            let mut g = LaneGraph::new();
            g.warnings.push(e.to_string());
            return g;
        }
    };
    let mut g = LaneGraph::new();
    let mut vid: BTreeMap<(u8, String), usize> = BTreeMap::new();
    for p in layout.entries() {
        if routes.iter().any(|r| r.entry == p.id) {
            vid.insert((0, p.id.clone()), g.add_vertex(VertexKind::Entry, spec.clamp_cell(p.point)));
        }
    }
    for p in layout.exits() {
        if routes.iter().any(|r| r.exit == p.id) {
            vid.insert((3, p.id.clone()), g.add_vertex(VertexKind::Exit, spec.clamp_cell(p.point)));
        }
    }

    // index along each route where the fork / merge sits
    let mut fork_at: BTreeMap<String, usize> = BTreeMap::new();
    let mut merge_back: BTreeMap<String, usize> = BTreeMap::new();
    for p in layout.entries() {
        let from: Vec<&Route> = routes.iter().filter(|r| r.entry == p.id).collect();
        if from.len() >= 2 {
            let k = shared_len(from.iter().map(|r| r.points.iter()));
            let point = from[0].points[k - 1];
            vid.insert((1, p.id.clone()), g.add_vertex(VertexKind::Fork, spec.clamp_cell(point)));
            fork_at.insert(p.id.clone(), k - 1);
        }
    }
    for p in layout.exits() {
        let into: Vec<&Route> = routes.iter().filter(|r| r.exit == p.id).collect();
        if into.len() >= 2 {
            let k = shared_len(into.iter().map(|r| r.points.iter().rev()));
            let point = into[0].points[into[0].points.len() - k];
            vid.insert((2, p.id.clone()), g.add_vertex(VertexKind::Merge, spec.clamp_cell(point)));
            merge_back.insert(p.id.clone(), k - 1);
        }
    }

    let mut edges: BTreeMap<(usize, usize), Vec<Cell>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in &routes {
        let last = r.points.len() - 1;
        let mut stops = vec![(vid[&(0, r.entry.clone())], 0)];
        if let Some(&k) = fork_at.get(&r.entry) {
            stops.push((vid[&(1, r.entry.clone())], k));
        }
        if let Some(&k) = merge_back.get(&r.exit) {
            stops.push((vid[&(2, r.exit.clone())], last - k));
        }
        stops.push((vid[&(3, r.exit.clone())], last));
        for w in stops.windows(2) {
            let key = (w[0].0, w[1].0);
            if !edges.contains_key(&key) {
                let (a, b) = (w[0].1, w[1].1.max(w[0].1));
                edges.insert(key, to_cells(spec, &r.points[a..=b]));
                order.push(key);
            }
        }
    }
    for key in order {
        let geom = edges.remove(&key).unwrap();
        g.connect(key.0, key.1, geom).expect("ground-truth edge kinds follow from construction");
    }
    g
}

/// Length of the common prefix of several point sequences.
fn shared_len<'a, I>(seqs: impl Iterator<Item = I>) -> usize
where
    I: Iterator<Item = &'a Point>,
{
    let mut iters: Vec<I> = seqs.collect();
    let mut n = 0;
    loop {
        let mut first: Option<Point> = None;
        for it in iters.iter_mut() {
            match (it.next(), first) {
                (None, _) => return n,
                (Some(p), None) => first = Some(*p),
                (Some(p), Some(f)) => {
                    if p.dist(f) > 1e-9 {
                        return n;
                    }
                }
            }
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::graph::{validate_graph, EdgeKind};
    use crate::scene::layout::{build_layout, Family, LayoutConfig};
    use serde_json::json;

    fn layout(generator: &str, params: serde_json::Value) -> RoadLayout {
        build_layout(&LayoutConfig { id: "t".into(), generator: generator.into(), params, family: Family::Train })
            .unwrap()
    }

    #[test]
    fn straight_road_is_two_lane_edges() {
        let g = ground_truth_graph(&layout("straight", json!({})), &GridSpec::label());
        assert_eq!(g.vertices.len(), 4);
        assert_eq!(g.count_edges(EdgeKind::Lane), 2);
        assert_eq!(g.count_vertices(VertexKind::Fork) + g.count_vertices(VertexKind::Merge), 0);
        assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn four_way_structure() {
        let g = ground_truth_graph(&layout("n_way", json!({"arms": 4})), &GridSpec::label());
        assert_eq!(g.count_vertices(VertexKind::Fork), 4);
        assert_eq!(g.count_vertices(VertexKind::Merge), 4);
        assert_eq!(g.count_edges(EdgeKind::Intersection), 12);
        assert_eq!(g.count_edges(EdgeKind::Entry), 4);
        assert_eq!(g.count_edges(EdgeKind::Exit), 4);
        assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn y_fork_is_point_intersection() {
        let g = ground_truth_graph(&layout("fork", json!({})), &GridSpec::label());
        assert_eq!(g.count_vertices(VertexKind::Fork), 1);
        assert_eq!(g.count_vertices(VertexKind::Merge), 0);
        assert_eq!(g.count_edges(EdgeKind::Entry), 1);
        assert_eq!(g.count_edges(EdgeKind::Exit), 2);
        assert_eq!(g.edges.len(), 3);
        assert!(validate_graph(&g).is_empty());
        for seqs in g.routes().values() {
            assert!(seqs.iter().all(|s| s.len() == 2));
        }
    }

    #[test]
    fn merge_is_point_intersection() {
        let g = ground_truth_graph(&layout("merge", json!({})), &GridSpec::label());
        assert_eq!(g.count_vertices(VertexKind::Merge), 1);
        assert_eq!(g.count_vertices(VertexKind::Fork), 0);
        assert!(validate_graph(&g).is_empty());
    }
}
