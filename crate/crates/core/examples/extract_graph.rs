//! Extracts a lane graph from dense affordances, checks it against the
//! lane network model and compares it with the reference graph.
//!
//! cargo run --example extract_graph -- [layout-id] [seed]

use std::path::Path;

use lanegraph::augment::sample_params;
use lanegraph::graphgen::{generate_graph, validate_graph, EdgeKind, GraphParams, VertexKind};
use lanegraph::metrics::graph_diff;
use lanegraph::oracle::make_eval_label;
use lanegraph::scene::load_library;
use lanegraph::GridSpec;

fn main() -> lanegraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "cross_skewed".into());
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let library = load_library(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/layouts")))?;
    let layout = library.iter().find(|l| l.id == id).expect("no such layout");

    let (bundle, reference) = make_eval_label(layout, &GridSpec::label(), &sample_params(seed))?;
    let graph = generate_graph(&bundle, &GraphParams::default());

    for kind in [VertexKind::Entry, VertexKind::Fork, VertexKind::Merge, VertexKind::Exit] {
        print!("{} {}  ", kind.as_str(), graph.count_vertices(kind));
    }
    println!();
    for kind in [EdgeKind::Entry, EdgeKind::Intersection, EdgeKind::Exit, EdgeKind::Lane] {
        print!("{} edges {}  ", kind.as_str(), graph.count_edges(kind));
    }
    println!();
    for (entry, exit) in graph.routes().keys() {
        println!("  route vertex {entry} -> vertex {exit}");
    }

    let violations = validate_graph(&graph);
    println!("violations: {}", violations.len());
    for v in &violations {
        println!("  {v}");
    }
    let diff = graph_diff(&graph, &reference);
    println!("vs reference: {} missing, {} erroneous, error free {}", diff.missing, diff.erroneous, diff.is_error_free());
    for w in &graph.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
