//! Draws dense affordances with the extracted graph on top as an SVG.
//!
//! cargo run --example render_svg -- [layout-id] [out.svg]

use std::path::{Path, PathBuf};

use lanegraph::augment::sample_params;
use lanegraph::graphgen::{generate_graph, GraphParams};
use lanegraph::oracle::make_eval_label;
use lanegraph::pipeline::render_svg;
use lanegraph::scene::load_library;
use lanegraph::GridSpec;

fn main() -> lanegraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "five_way".into());
    let out = args.next().map_or_else(|| std::env::temp_dir().join(format!("{id}.svg")), PathBuf::from);
    let library = load_library(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/layouts")))?;
    let layout = library.iter().find(|l| l.id == id).expect("no such layout");

    let (bundle, _) = make_eval_label(layout, &GridSpec::label(), &sample_params(1))?;
    let graph = generate_graph(&bundle, &GraphParams::default());
    let svg = render_svg(&bundle, &graph)?;
    lanegraph::tensor::write_atomic(&out, svg.as_bytes())?;
    println!("{} vertices, {} edges, {} bytes -> {}", graph.vertices.len(), graph.edges.len(), svg.len(), out.display());
    Ok(())
}
