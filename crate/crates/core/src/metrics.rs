//! Dense-output metrics and topological graph comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgen::graph::{LaneGraph, VertexKind};
use crate::grid::GridMap;
use crate::learning::vonmises::kl_divergence;
use crate::oracle::DirectionalField;

/// Terminal matching radius, cells.
pub const MATCH_RADIUS: f64 = 5.0;
/// Quadrature nodes for directional KL.
pub const KL_BINS: usize = 256;

fn check_shapes(pred: &GridMap, label: &GridMap) -> Result<()> {
    if pred.height() != label.height() || pred.width() != label.width() {
        return Err(Error::Shape(format!("prediction {:?} vs label {:?}", pred.shape(), label.shape())));
    }
    Ok(())
}

/// A ratio together with an optional note on how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    /// Set when the label had no positive cells.
    pub vacuous: bool,
}

/// Fraction of label-positive cells (first channel) predicted above 0.5.
/// A label without positives yields 1.0, flagged as vacuous.
pub fn acc_pos(pred: &GridMap, label: &GridMap) -> Result<Ratio> {
    check_shapes(pred, label)?;
    let (mut pos, mut hit) = (0usize, 0usize);
    for (&p, &l) in pred.channel(0).iter().zip(label.channel(0)) {
        if l > 0.5 {
            pos += 1;
            if p > 0.5 {
                hit += 1;
            }
        }
    }
    if pos == 0 {
        log::warn!("label has no positive cells");
        return Ok(Ratio { value: 1.0, vacuous: true });
    }
    Ok(Ratio { value: hit as f64 / pos as f64, vacuous: false })
}

/// Mean predicted value over label-negative cells (first channel).
pub fn l1_neg(pred: &GridMap, label: &GridMap) -> Result<f64> {
    check_shapes(pred, label)?;
    let (mut n, mut s) = (0usize, 0.0);
    for (&p, &l) in pred.channel(0).iter().zip(label.channel(0)) {
        if l <= 0.5 {
            n += 1;
            s += p.abs();
        }
    }
    Ok(if n == 0 { 0.0 } else { s / n as f64 })
}

/// Mean over mask cells of `D_KL(pred ‖ label)`.
pub fn eval_kl(pred: &DirectionalField, label: &DirectionalField, lane_mask: &GridMap) -> Result<f64> {
    if (pred.height(), pred.width()) != (label.height(), label.width())
        || (lane_mask.height(), lane_mask.width()) != (pred.height(), pred.width())
    {
        return Err(Error::Shape("direction fields and mask disagree in size".into()));
    }
    let (mut total, mut n) = (0.0, 0usize);
    for c in pred.cells() {
        if lane_mask.at(0, c) <= 0.5 {
            continue;
        }
        let p = pred.mixture(c);
        let q = label.mixture(c);
        if !p.is_active() || !q.is_active() {
            return Err(Error::UndefinedDirection(c.i, c.j));
        }
        total += kl_divergence(&p, &q, KL_BINS);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Missing and erroneous route counts of a candidate graph against a
/// reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphDiff {
    pub missing: usize,
    pub erroneous: usize,
}

impl GraphDiff {
    pub fn is_error_free(&self) -> bool {
        self.missing == 0 && self.erroneous == 0
    }
}

/// Greedy nearest-first one-to-one matching of terminals of one kind;
/// returns candidate id → reference id.
fn match_terminals(g: &LaneGraph, r: &LaneGraph, kind: VertexKind) -> BTreeMap<usize, usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for a in g.vertices.iter().filter(|v| v.kind == kind) {
        for b in r.vertices.iter().filter(|v| v.kind == kind) {
            let d = a.cell.dist(b.cell);
            if d <= MATCH_RADIUS {
                pairs.push((d, a.id, b.id));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = BTreeSet::new();
    let mut used_b = BTreeSet::new();
    let mut out = BTreeMap::new();
    for (_, a, b) in pairs {
        if used_a.contains(&a) || used_b.contains(&b) {
            continue;
        }
        used_a.insert(a);
        used_b.insert(b);
        out.insert(a, b);
    }
    out
}

/// Compares terminal-to-terminal route relations after matching entries
/// and exits within [`MATCH_RADIUS`]. Routes present only in the reference
/// are missing; routes present only in `g`, or present in both with
/// different edge-kind sequences, are erroneous.
pub fn graph_diff(g: &LaneGraph, reference: &LaneGraph) -> GraphDiff {
    let mut m = match_terminals(g, reference, VertexKind::Entry);
    m.extend(match_terminals(g, reference, VertexKind::Exit));
    let ref_routes = reference.routes();
    let mut mapped: BTreeMap<(usize, usize), _> = BTreeMap::new();
    let mut erroneous = 0;
    for ((e, x), kinds) in g.routes() {
        match (m.get(&e), m.get(&x)) {
            (Some(&re), Some(&rx)) => {
                mapped.insert((re, rx), kinds);
            }
            _ => erroneous += 1,
        }
    }
    let mut missing = 0;
    for (key, kinds) in &ref_routes {
        match mapped.get(key) {
            None => missing += 1,
            Some(k) if k != kinds => erroneous += 1,
            Some(_) => {}
        }
    }
    erroneous += mapped.keys().filter(|k| !ref_routes.contains_key(k)).count();
    GraphDiff { missing, erroneous }
}

/// Per-head scores.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadScores {
    pub lane: f64,
    pub entry: f64,
    pub exit: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc_pos: HeadScores,
    pub l1_neg: HeadScores,
    pub d_kl: f64,
    pub graph_missing: usize,
    pub graph_erroneous: usize,
    pub error_free: bool,
    pub violations: usize,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::graph::EdgeKind;
    use crate::grid::{Cell, GridSpec};
    use crate::learning::vonmises::{VmComponent, VonMisesMixture};
    use crate::scene::{build_layout, ground_truth_graph, Family, LayoutConfig};
    use proptest::prelude::*;
    use serde_json::json;

    fn map(v: &[f64]) -> GridMap {
        GridMap::from_vec(1, 1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn acc_pos_examples() {
        let label = map(&[1.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(acc_pos(&label, &label).unwrap().value, 1.0);
        let inv = map(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(acc_pos(&inv, &label).unwrap().value, 0.0);
        let three = map(&[0.9, 0.6, 0.51, 0.5, 0.0]);
        assert_eq!(acc_pos(&three, &label).unwrap().value, 0.75);
        let none = acc_pos(&map(&[0.2]), &map(&[0.0])).unwrap();
        assert!(none.vacuous && none.value == 1.0);
        assert!(acc_pos(&map(&[0.2]), &map(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn l1_neg_examples() {
        let label = map(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(l1_neg(&map(&[0.0, 0.0, 0.0, 0.0, 1.0]), &label).unwrap(), 0.0);
        assert_eq!(l1_neg(&map(&[1.0, 1.0, 1.0, 1.0, 0.0]), &label).unwrap(), 1.0);
        assert_eq!(l1_neg(&map(&[0.5, 0.5, 0.0, 0.0, 1.0]), &label).unwrap(), 0.25);
    }

    proptest! {
        #[test]
        fn metrics_ignore_cell_order(vals in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 1..40), seed in any::<u64>()) {
            let pred: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let label: Vec<f64> = vals.iter().map(|v| if v.1 { 1.0 } else { 0.0 }).collect();
            let mut idx: Vec<usize> = (0..vals.len()).collect();
            let mut s = seed;
            for k in (1..idx.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(k, (s >> 33) as usize % (k + 1));
            }
            let pp: Vec<f64> = idx.iter().map(|&k| pred[k]).collect();
            let pl: Vec<f64> = idx.iter().map(|&k| label[k]).collect();
            prop_assert_eq!(acc_pos(&map(&pred), &map(&label)).unwrap().value, acc_pos(&map(&pp), &map(&pl)).unwrap().value);
            prop_assert!((l1_neg(&map(&pred), &map(&label)).unwrap() - l1_neg(&map(&pp), &map(&pl)).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_kl_examples() {
        let mut a = DirectionalField::new(2, 2);
        let mut mask = GridMap::zeros(1, 2, 2);
        for c in a.cells().collect::<Vec<_>>() {
            a.set(c, &[VmComponent::new(1.0, c.j as f64, 8.0)]);
            mask.set(0, c.i, c.j, 1.0);
        }
        assert!(eval_kl(&a, &a, &mask).unwrap().abs() < 1e-8);
        let mut uniform = a.clone();
        uniform.set(Cell::new(0, 1), &[VmComponent::new(1.0, 0.0, 1e-9)]);
        let mut one = GridMap::zeros(1, 2, 2);
        one.set(0, 0, 1, 1.0);
        let got = eval_kl(&uniform, &a, &one).unwrap();
        let oracle = kl_divergence(
            &VonMisesMixture::unimodal(0.0, 1e-9),
            &VonMisesMixture::unimodal(1.0, 8.0),
            65536,
        );
        assert!(got > 0.0);
        assert!((got - oracle).abs() < 1e-6);
        let empty = DirectionalField::new(2, 2);
        assert!(eval_kl(&empty, &a, &mask).is_err());
    }

    fn layout_graph(generator: &str, params: serde_json::Value) -> LaneGraph {
        let l = build_layout(&LayoutConfig { id: "t".into(), generator: generator.into(), params, family: Family::Test })
            .unwrap();
        ground_truth_graph(&l, &GridSpec::label())
    }

    #[test]
    fn identical_graphs_have_no_difference() {
        for (gen, p) in [("straight", json!({})), ("n_way", json!({"arms": 4})), ("fork", json!({})), ("merge", json!({}))] {
            let g = layout_graph(gen, p);
            assert_eq!(graph_diff(&g, &g), GraphDiff::default());
        }
    }

    #[test]
    fn dropped_intersection_edge_is_missing() {
        let g = layout_graph("n_way", json!({"arms": 4}));
        let mut cut = g.clone();
        let k = cut.edges.iter().position(|e| e.kind == EdgeKind::Intersection).unwrap();
        cut.edges.remove(k);
        assert_eq!(graph_diff(&cut, &g), GraphDiff { missing: 1, erroneous: 0 });
        assert_eq!(graph_diff(&g, &cut), GraphDiff { missing: 0, erroneous: 1 });
    }

    #[test]
    fn extra_lane_route_is_erroneous() {
        let g = layout_graph("straight", json!({}));
        let mut extra = g.clone();
        let entry = extra.vertices.iter().find(|v| v.kind == VertexKind::Entry).unwrap().id;
        let exit = extra
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::Exit)
            .find(|x| !g.routes().contains_key(&(entry, x.id)))
            .unwrap()
            .id;
        extra.connect(entry, exit, Vec::new()).unwrap();
        assert_eq!(graph_diff(&extra, &g), GraphDiff { missing: 0, erroneous: 1 });
    }

    #[test]
    fn kind_sequence_mismatch_is_erroneous() {
        let g = layout_graph("fork", json!({}));
        // same terminals, but one route collapsed into a direct lane edge
        let mut alt = LaneGraph::new();
        let e = g.vertices.iter().find(|v| v.kind == VertexKind::Entry).unwrap();
        let xs: Vec<_> = g.vertices.iter().filter(|v| v.kind == VertexKind::Exit).collect();
        let ae = alt.add_vertex(VertexKind::Entry, e.cell);
        let a1 = alt.add_vertex(VertexKind::Exit, xs[0].cell);
        let a2 = alt.add_vertex(VertexKind::Exit, xs[1].cell);
        alt.connect(ae, a1, Vec::new()).unwrap();
        alt.connect(ae, a2, Vec::new()).unwrap();
        assert_eq!(graph_diff(&alt, &g), GraphDiff { missing: 0, erroneous: 2 });
    }

    #[test]
    fn far_terminals_do_not_match() {
        let g = layout_graph("straight", json!({}));
        let mut moved = g.clone();
        for v in moved.vertices.iter_mut() {
            v.cell = Cell::new(v.cell.i, v.cell.j + 6);
        }
        let d = graph_diff(&moved, &g);
        assert_eq!(d, GraphDiff { missing: 2, erroneous: 2 });
    }
}
