//! Scores graphs extracted from clean and corrupted oracle affordances for
//! every layout in the library.
//!
//! cargo run --release --example evaluate_noise -- [samples] [flip] [jitter-deg]

use std::path::Path;

use lanegraph::graphgen::GraphParams;
use lanegraph::oracle::NoiseConfig;
use lanegraph::pipeline::{eval_in_memory, family_rates};
use lanegraph::scene::load_library;

fn main() -> lanegraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples: usize = args.next().map_or(3, |s| s.parse().expect("samples"));
    let flip: f64 = args.next().map_or(0.05, |s| s.parse().expect("flip"));
    let jitter: f64 = args.next().map_or(10.0, |s| s.parse().expect("jitter"));
    let library = load_library(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/layouts")))?;
    let params = GraphParams::default();

    for (name, noise) in [("clean", NoiseConfig::new(0.0, 0.0)), ("noisy", NoiseConfig::new(flip, jitter.to_radians()))] {
        let mut reports = Vec::new();
        for layout in &library {
            for k in 0..samples {
                let (_, r) = eval_in_memory(layout, 0, k, noise, &params)?;
                if !r.error_free {
                    println!(
                        "  {name} {} #{k}: {} missing, {} erroneous, lane acc_pos {:.3}, d_kl {:.3}",
                        layout.id, r.graph_missing, r.graph_erroneous, r.acc_pos.lane, r.d_kl
                    );
                }
                reports.push((layout.family, r));
            }
        }
        for (family, rate) in family_rates(reports.iter().map(|(f, r)| (*f, r))) {
            println!(
                "{name} {}: {}/{} error free, {} violations",
                family.as_str(),
                rate.error_free,
                rate.samples,
                rate.violations
            );
        }
    }
    Ok(())
}
