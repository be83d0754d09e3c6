//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any gate fails.
//!
//! Runs with `cargo test --test acceptance`; set `LANEGRAPH_THREADS` to cap
//! the worker pool.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lanegraph::augment::sample_params;
use lanegraph::graphgen::{astar, divergence_angle, preprocess_lane_map, AdjacencyField, GraphParams};
use lanegraph::grid::GridSpec;
use lanegraph::learning::{
    barrier_loss, directional_loss_grad, grad_check, kl_divergence, toy_train, two_pixel_toy, vm_pdf,
    BarrierLossConfig, EvalSample, MixtureParams, VmComponent, VonMisesMixture,
};
use lanegraph::metrics::EvalReport;
use lanegraph::oracle::{make_eval_label, make_sample, DirectionalField, NoiseConfig};
use lanegraph::pipeline::{
    cmd_eval, cmd_generate, derive_seed, eval_in_memory, family_rates, with_pool, FamilyRate, RunConfig, Salt,
    SAMPLES_PER_LAYOUT,
};
use lanegraph::scene::{enumerate_routes, load_library, rasterize_scene, Family, RoadLayout};
use lanegraph::{Cell, GridMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn library() -> Vec<RoadLayout> {
    load_library(&RunConfig::default().library).expect("layout library")
}

// 1

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = BarrierLossConfig::default();
    let mut worst_b: f64 = 0.0;
    for _ in 0..100 {
        let mask: Vec<f64> = (0..16).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
        let mask = GridMap::from_vec(1, 4, 4, mask).unwrap();
        // interior: away from the clamp and from the L1 kink at 0 and 1
        let y: Vec<f64> = (0..16).map(|_| rng.random_range(0.05..0.95)).collect();
        let f = |x: &[f64]| {
            let o = barrier_loss(&GridMap::from_vec(1, 4, 4, x.to_vec()).unwrap(), &mask, &cfg).unwrap();
            (o.loss, o.raw_grad.into_data())
        };
        worst_b = worst_b.max(grad_check(f, &y, 1e-5));
    }
    let mut worst_d: f64 = 0.0;
    for _ in 0..100 {
        let labels: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..TAU)).collect();
        let x: Vec<f64> = (0..18)
            .map(|k| match (k % 9) / 3 {
                0 => rng.random_range(-1.0..1.0),
                1 => rng.random_range(0.0..TAU),
                _ => rng.random_range(-0.5..3.0),
            })
            .collect();
        let f = |v: &[f64]| {
            let cells: Vec<MixtureParams> = v.chunks(9).map(MixtureParams::from_slice).collect();
            let (l, g) = directional_loss_grad(&cells, &labels, 8.0, 256);
            (l, g.iter().flat_map(MixtureParams::to_vec).collect())
        };
        worst_d = worst_d.max(grad_check(f, &x, 1e-5));
    }
    outcome(worst_b < 1e-4 && worst_d < 1e-3, format!("max rel err barrier {worst_b:.2e}, directional {worst_d:.2e}"))
}

// 2

fn normalization() -> Outcome {
    let bins = 4096;
    let step = TAU / bins as f64;
    let mut worst_norm: f64 = 0.0;
    for kappa in [0.0, 0.5, 2.0, 8.0, 32.0] {
        // periodic trapezoid: endpoints coincide, so it is a plain sum
        let s: f64 = (0..bins).map(|k| vm_pdf(k as f64 * step, 1.0, kappa)).sum::<f64>() * step;
        worst_norm = worst_norm.max((s - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_kl: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(1..=3);
        let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        let m = VonMisesMixture::new(
            w.iter().map(|&wk| VmComponent::new(wk, rng.random_range(0.0..TAU), rng.random_range(0.0..32.0))).collect(),
        );
        worst_kl = worst_kl.max(kl_divergence(&m, &m, 256).abs());
    }
    outcome(
        worst_norm <= 1e-6 && worst_kl <= 1e-9,
        format!("max |integral - 1| {worst_norm:.2e}, max KL(p||p) {worst_kl:.2e}"),
    )
}

// 3

fn dijkstra(start: Cell, goal: Cell, f: &AdjacencyField) -> Option<f64> {
    let (h, w) = (f.height(), f.width());
    let mut dist = vec![f64::INFINITY; h * w];
    let mut done = vec![false; h * w];
    dist[start.i * w + start.j] = 0.0;
    loop {
        let mut best: Option<usize> = None;
        for k in 0..h * w {
            if !done[k] && dist[k].is_finite() && best.map_or(true, |b| dist[k] < dist[b]) {
                best = Some(k);
            }
        }
        let k = best?;
        done[k] = true;
        let c = Cell::new(k / w, k % w);
        if c == goal {
            return Some(dist[k]);
        }
        for (n, wt) in f.successors(c) {
            let nk = n.i * w + n.j;
            dist[nk] = dist[nk].min(dist[k] + wt);
        }
    }
}

fn search_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n = 32;
    let (mut found, mut worst, mut mismatched) = (0, 0.0f64, 0);
    for _ in 0..200 {
        let mut lane = GridMap::zeros(1, n, n);
        let mut d = DirectionalField::new(n, n);
        for c in d.cells().collect::<Vec<_>>() {
            if rng.random::<f64>() < 0.8 {
                lane.set(0, c.i, c.j, 1.0);
            }
            let k = rng.random_range(1..=3);
            let comps: Vec<_> = (0..k).map(|_| VmComponent::new(1.0 / k as f64, rng.random_range(0.0..TAU), 8.0)).collect();
            d.set(c, &comps);
        }
        let f = AdjacencyField::new(&lane, &d, PI / 4.0);
        let s = Cell::new(rng.random_range(0..n), rng.random_range(0..n));
        let g = Cell::new(rng.random_range(0..n), rng.random_range(0..n));
        match (astar(s, g, &f), dijkstra(s, g, &f)) {
            (Some(p), Some(c)) => {
                found += 1;
                worst = worst.max((p.cost - c).abs());
            }
            (None, None) => {}
            _ => mismatched += 1,
        }
    }
    outcome(
        mismatched == 0 && worst <= 1e-9,
        format!("200 fields, {found} reachable, max cost gap {worst:.1e}, reachability mismatches {mismatched}"),
    )
}

// 5 and 6

fn run_grid(layouts: &[RoadLayout], noise: NoiseConfig) -> Vec<(Family, EvalReport)> {
    let params = GraphParams::default();
    let jobs: Vec<(usize, usize)> =
        (0..layouts.len()).flat_map(|l| (0..SAMPLES_PER_LAYOUT).map(move |k| (l, k))).collect();
    with_pool(|| {
        jobs.par_iter()
            .map(|&(l, k)| {
                let (_, r) = eval_in_memory(&layouts[l], 0, k, noise, &params).expect("evaluation");
                (layouts[l].family, r)
            })
            .collect()
    })
    .expect("worker pool")
}

fn rates(reports: &[(Family, EvalReport)]) -> BTreeMap<Family, FamilyRate> {
    family_rates(reports.iter().map(|(f, r)| (*f, r)))
}

fn fmt_rate(r: &FamilyRate) -> String {
    format!("{}/{} ({:.1}%)", r.error_free, r.samples, 100.0 * r.rate())
}

fn clean_end_to_end(layouts: &[RoadLayout], violations: &mut usize) -> Outcome {
    let reports = run_grid(layouts, NoiseConfig::new(0.0, 0.0));
    let r = rates(&reports);
    *violations += reports.iter().map(|(_, x)| x.violations).sum::<usize>();
    let train = r.get(&Family::Train).copied().unwrap_or_default();
    let test = r.get(&Family::Test).copied().unwrap_or_default();
    outcome(
        train.rate() >= 0.991 && test.rate() >= 0.905,
        format!("train {}, test {}", fmt_rate(&train), fmt_rate(&test)),
    )
}

fn noise_robustness(layouts: &[RoadLayout], violations: &mut usize) -> Outcome {
    let flips = [0.01, 0.03, 0.05];
    let mut monotone = true;
    let mut lines = Vec::new();
    for jitter_deg in [5.0f64, 10.0] {
        let mut per_family: BTreeMap<Family, Vec<f64>> = BTreeMap::new();
        for &flip in &flips {
            let reports = run_grid(layouts, NoiseConfig::new(flip, jitter_deg.to_radians()));
            *violations += reports.iter().map(|(_, x)| x.violations).sum::<usize>();
            for (f, r) in rates(&reports) {
                per_family.entry(f).or_default().push(r.rate());
                lines.push(format!("    jitter {jitter_deg:>4}deg flip {flip:.2} {:<5} {}", f.as_str(), fmt_rate(&r)));
            }
        }
        for curve in per_family.values() {
            monotone &= curve.windows(2).all(|w| w[1] <= w[0]);
        }
    }
    outcome(monotone, format!("monotone in flip: {monotone}\n{}", lines.join("\n")))
}

// 7

fn learning() -> Outcome {
    const PER_LAYOUT: usize = 40;
    const HELD_OUT: usize = 2;
    let layouts: Vec<RoadLayout> = library().into_iter().filter(|l| l.family == Family::Train).collect();
    let jobs: Vec<(usize, usize)> = (0..layouts.len()).flat_map(|l| (0..PER_LAYOUT).map(move |k| (l, k))).collect();
    let (train, eval) = with_pool(|| {
        let train: Vec<_> = jobs
            .par_iter()
            .map(|&(l, k)| {
                let layout = &layouts[l];
                let seed = derive_seed(0, &layout.id, k, Salt::Train);
                let routes = enumerate_routes(layout).unwrap();
                let route = &routes[(derive_seed(seed, "route", 0, Salt::Train) % routes.len() as u64) as usize];
                make_sample(layout, route, &GridSpec::input(), &sample_params(seed)).unwrap()
            })
            .collect();
        // eval seeds never coincide with training seeds
        let eval: Vec<_> = layouts
            .par_iter()
            .flat_map(|layout| {
                (0..HELD_OUT).into_par_iter().map(move |k| {
                    let p = sample_params(derive_seed(0, &layout.id, k, Salt::Eval));
                    let (b, _) = make_eval_label(layout, &GridSpec::label(), &p).unwrap();
                    EvalSample { input: rasterize_scene(&p.transform_layout(layout), &GridSpec::input(), &[]), lane: b.lane }
                })
            })
            .collect();
        (train, eval)
    })
    .expect("worker pool");
    let cfg = RunConfig::default().toy;
    let (_, curve) = with_pool(|| toy_train(&train, &eval, &cfg)).expect("worker pool").expect("toy training");
    let (first, last) = (curve[0], curve[curve.len() - 1]);

    let trace = two_pixel_toy(5000, 0.5, &BarrierLossConfig::default()).expect("two-pixel toy");
    let mut above = false;
    let mut dominance = true;
    for w in trace.windows(2) {
        above |= w[0].0 > 0.5;
        dominance &= !above || w[1].0 >= w[0].0;
    }
    let pass = train.len() >= 500 && last.acc_pos >= 0.99 && first.l1_neg > last.l1_neg && above && dominance;
    let pts: Vec<String> =
        curve.iter().map(|p| format!("{}:{:.4}/{:.4}", p.iter, p.acc_pos, p.l1_neg)).collect();
    outcome(
        pass,
        format!(
            "{} samples, {} iters, acc_pos {:.4}, l1_neg {:.4} -> {:.4}, two-pixel dominance {}\n    curve iter:acc_pos/l1_neg {}",
            train.len(),
            cfg.iters,
            last.acc_pos,
            first.l1_neg,
            last.l1_neg,
            above && dominance,
            pts.join(" ")
        ),
    )
}

// 8

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        let gen = RunConfig { samples: 2, out: d.path().join("data"), ..Default::default() };
        cmd_generate(&gen).expect("generate");
        let eval = RunConfig { samples: 2, out: d.path().join("results"), ..Default::default() };
        cmd_eval(&d.path().join("data"), &eval).expect("eval");
    }
    let (a, b) = (dirs[0].path(), dirs[1].path());
    let fa = files_under(a);
    let fb = files_under(b);
    if fa != fb {
        return outcome(false, format!("file lists differ: {} vs {} files", fa.len(), fb.len()));
    }
    let differing: Vec<&PathBuf> =
        fa.iter().filter(|p| fs::read(a.join(p)).unwrap() != fs::read(b.join(p)).unwrap()).collect();
    outcome(
        differing.is_empty(),
        format!("{} files compared, {} differ{}", fa.len(), differing.len(), match differing.first() {
            Some(p) => format!(" (first: {})", p.display()),
            None => String::new(),
        }),
    )
}

// 9

fn unit_examples() -> Outcome {
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };

    let theta = divergence_angle(&[0.0, 30f64.to_radians(), 90f64.to_radians()]);
    check("divergence of 0/30/90 deg is 90 deg", (theta - PI / 2.0).abs() < 1e-12);

    let n = 32;
    let lane = GridMap::filled(1, n, n, 1.0);
    let mut d = DirectionalField::new(n, n);
    for c in d.cells().collect::<Vec<_>>() {
        d.set(c, &[VmComponent::new(1.0, 0.0, 8.0)]);
    }
    let mut f = AdjacencyField::new(&lane, &d, PI / 4.0);
    let a = Cell::new(16, 16);
    check("aligned step on full support costs 1", f.edge_weight(a, Cell::new(16, 17)) == Some(1.0));
    f.lane_tilde.set(0, 16, 17, (-1.0f64).exp());
    check("support e^-1 costs 2", f.edge_weight(a, Cell::new(16, 17)).is_some_and(|w| (w - 2.0).abs() < 1e-12));
    check("backwards step is unreachable", f.edge_weight(a, Cell::new(16, 15)).is_none());

    let mut half = GridMap::zeros(1, 32, 32);
    for i in 16..32 {
        for j in 0..32 {
            half.set(0, i, j, 1.0);
        }
    }
    check("half window sharpens to 0.5^8", preprocess_lane_map(&half).get(0, 16, 16) == 0.5f64.powi(8));

    let y = GridMap::from_vec(1, 1, 1, vec![0.5]).unwrap();
    let m = GridMap::from_vec(1, 1, 1, vec![1.0]).unwrap();
    let l = barrier_loss(&y, &m, &BarrierLossConfig::default()).unwrap().loss;
    check("barrier loss of one positive at 0.5", (l - (0.5 + 1e5 * 2f64.ln())).abs() < 1e-9);

    let ok = failed.is_empty();
    outcome(ok, if ok { "6 headline examples hold; the full example suite runs as unit tests".into() } else { format!("failed: {}", failed.join(", ")) })
}

fn main() {
    let layouts = library();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {id} {}: {name} ({secs:.1}s) {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };
    let mut violations = 0usize;
    run(1, "gradient correctness", &mut gradients);
    run(2, "von Mises normalization", &mut normalization);
    run(3, "search optimality", &mut search_optimality);
    run(5, "clean-oracle end to end", &mut || clean_end_to_end(&layouts, &mut violations));
    run(6, "noise robustness", &mut || noise_robustness(&layouts, &mut violations));
    let v = violations;
    run(4, "formal-model validity", &mut || outcome(v == 0, format!("{v} violations across criteria 5 and 6")));
    run(7, "self-supervised learning", &mut learning);
    run(8, "determinism", &mut determinism);
    run(9, "unit examples", &mut unit_examples);

    results.sort_by_key(|r| r.0);
    println!();
    for (id, name, o, _) in &results {
        println!("{} criterion {id}: {name}", if o.pass { "PASS" } else { "FAIL" });
    }
    if results.iter().any(|r| !r.2.pass) {
        std::process::exit(1);
    }
}
