//! Builds a junction from the layout library, augments it, rasterizes the
//! observation and lists its routes.
//!
//! cargo run --example scene_raster -- [layout-id]

use std::path::Path;

use lanegraph::augment::sample_params;
use lanegraph::scene::{enumerate_routes, load_library, rasterize_scene};
use lanegraph::tensor::write_ppm;
use lanegraph::GridSpec;

fn main() -> lanegraph::Result<()> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "t_junction".into());
    let library = load_library(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/layouts")))?;
    let layout = library.iter().find(|l| l.id == id).expect("no such layout");
    println!("{} ({}): {} lanes, {} ports", layout.id, layout.family.as_str(), layout.lanes.len(), layout.ports.len());

    let params = sample_params(7);
    println!(
        "augmentation: rotation {:.1} deg, shift {:?}, warp up to {:.2} cells",
        params.rotation.to_degrees(),
        params.translation,
        params.warp.max_amplitude()
    );
    let aug = params.transform_layout(layout);
    for r in enumerate_routes(&aug)? {
        println!("  route {} -> {}: {} points", r.entry, r.exit, r.points.len());
    }

    let spec = GridSpec::input();
    let obs = rasterize_scene(&aug, &spec, &[]);
    let drivable = obs.channel(0).iter().filter(|&&v| v > 0.0).count();
    println!("observation {:?}, {drivable} drivable cells", obs.shape());
    let out = std::env::temp_dir().join(format!("{id}_drivable.ppm"));
    write_ppm(&obs, 0, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
