//! Trains the per-pixel learner on single-trajectory samples and tracks
//! lane accuracy on fully labeled held-out scenes.
//!
//! cargo run --release --example toy_training -- [iters]

use std::path::Path;

use lanegraph::augment::sample_params;
use lanegraph::learning::{curves_csv, toy_train, two_pixel_toy, BarrierLossConfig, EvalSample, ToyConfig};
use lanegraph::oracle::{make_eval_label, make_sample};
use lanegraph::scene::{enumerate_routes, load_library, rasterize_scene, Family};
use lanegraph::GridSpec;

fn main() -> lanegraph::Result<()> {
    let iters: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("iters"));
    let library = load_library(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/layouts")))?;
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (n, layout) in library.iter().filter(|l| l.family == Family::Train).enumerate() {
        let routes = enumerate_routes(layout)?;
        for k in 0..6 {
            let seed = 100 * n as u64 + k as u64;
            train.push(make_sample(layout, &routes[k % routes.len()], &GridSpec::input(), &sample_params(seed))?);
        }
        let p = sample_params(10_000 + n as u64);
        let (label, _) = make_eval_label(layout, &GridSpec::label(), &p)?;
        eval.push(EvalSample { input: rasterize_scene(&p.transform_layout(layout), &GridSpec::input(), &[]), lane: label.lane });
    }
    println!("{} training samples, {} held-out scenes", train.len(), eval.len());

    let cfg = ToyConfig { iters, checkpoints: 5, ..Default::default() };
    let (model, curve) = toy_train(&train, &eval, &cfg)?;
    print!("{}", curves_csv(&curve));
    println!("lane head bias {:.3}", model.lane.bias);

    // the barrier keeps a confident positive from sliding back
    let trace = two_pixel_toy(2000, 0.5, &BarrierLossConfig::default())?;
    for (t, (a, b)) in trace.iter().enumerate().step_by(400) {
        println!("two-pixel step {t}: positive {a:.4}, unlabeled {b:.4}");
    }
    Ok(())
}
