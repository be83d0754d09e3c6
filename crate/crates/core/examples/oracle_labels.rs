//! Self-supervised labels for one layout: a single-trajectory training
//! sample and the dense evaluation label with every route superimposed.

use lanegraph::augment::sample_params;
use lanegraph::oracle::{make_eval_label, make_sample, LABEL_MASK, LABEL_POINTS};
use lanegraph::scene::{build_layout, enumerate_routes, Family, LayoutConfig};
use lanegraph::{Cell, GridSpec};
use serde_json::json;

fn main() -> lanegraph::Result<()> {
    let layout = build_layout(&LayoutConfig {
        id: "demo_t".into(),
        generator: "junction".into(),
        params: json!({ "arms": [
            { "angle_deg": 0.0, "lanes_in": 1, "lanes_out": 1 },
            { "angle_deg": 180.0, "lanes_in": 1, "lanes_out": 1 },
            { "angle_deg": 270.0, "lanes_in": 1, "lanes_out": 1 }
        ] }),
        family: Family::Train,
    })?;
    let routes = enumerate_routes(&layout)?;
    let params = sample_params(3);

    let s = make_sample(&layout, &routes[0], &GridSpec::input(), &params)?;
    let lane = s.label.channel(LABEL_MASK).iter().filter(|&&v| v > 0.5).count();
    let blobs = s.label.channel(LABEL_POINTS).iter().filter(|&&v| v > 0.5).count();
    println!("training sample {} -> {}: {lane} labeled lane cells, {blobs} blob cells", s.entry, s.exit);
    println!("  entry at {:?}, exit at {:?}", s.entry_cell, s.exit_cell);

    let (bundle, graph) = make_eval_label(&layout, &GridSpec::label(), &params)?;
    let lane = bundle.lane.data().iter().filter(|&&v| v > 0.5).count();
    let mut modes = [0usize; 4];
    for c in bundle.direction.cells() {
        modes[bundle.direction.active_count(c)] += 1;
    }
    println!("evaluation label: {lane} lane cells, direction modes per cell {modes:?}");
    let centre = Cell::new(64, 64);
    for comp in bundle.direction.active(centre) {
        println!("  centre component: weight {:.2}, heading {:.0} deg", comp.weight, comp.mean.to_degrees());
    }
    println!("reference graph: {} vertices, {} edges", graph.vertices.len(), graph.edges.len());
    for w in &bundle.warnings {
        println!("  warning: {w}");
    }
    Ok(())
}
