//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lanegraph::pipeline::{
    cmd_eval, cmd_extract, cmd_generate, cmd_render, cmd_train_toy, cmd_validate, exit_code, FamilyFilter, RunConfig,
};
use lanegraph::Result;

#[derive(Parser)]
#[command(name = "lanegraph", version, about = "Lane graph extraction on grid maps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    family: Option<FamilyFilter>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Layout library directory.
    #[arg(long, global = true)]
    library: Option<PathBuf>,
    #[arg(long, global = true)]
    noise_flip: Option<f64>,
    /// Radians.
    #[arg(long, global = true)]
    noise_dir_sigma: Option<f64>,
    /// Radians.
    #[arg(long, global = true)]
    delta_theta: Option<f64>,
    /// Radians.
    #[arg(long, global = true)]
    theta_div: Option<f64>,
    #[arg(long, global = true)]
    lookahead: Option<usize>,
    /// Exit with status 1 when the validator reports violations.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write training and evaluation samples for the layout library.
    Generate,
    /// Build a lane graph from affordance and direction tensors.
    Extract {
        #[arg(long)]
        affordance: PathBuf,
        #[arg(long)]
        direction: PathBuf,
        /// Also write an SVG overlay here.
        #[arg(long)]
        render: Option<PathBuf>,
    },
    /// Extract and score every evaluation sample of a dataset.
    Eval { dataset: PathBuf },
    /// Draw a sample's affordances with a graph on top.
    Render {
        sample: PathBuf,
        /// Defaults to the sample's reference graph.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Train the per-pixel learner on a dataset.
    TrainToy {
        dataset: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Check a graph file against the lane network model.
    Validate { graph: PathBuf },
}

fn config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($flag:expr => $($field:tt)+) => {
            if let Some(v) = $flag.clone() {
                cfg.$($field)+ = v;
            }
        };
    }
    set!(c.seed => seed);
    set!(c.out => out);
    set!(c.family => family);
    set!(c.samples => samples);
    set!(c.library => library);
    set!(c.noise_flip => noise_flip);
    set!(c.noise_dir_sigma => noise_dir_sigma);
    set!(c.delta_theta => graph.delta_theta);
    set!(c.theta_div => graph.theta_div);
    set!(c.lookahead => graph.lookahead);
    Ok(cfg)
}

fn write_graph(path: &Path, g: &lanegraph::graphgen::LaneGraph) -> Result<()> {
    lanegraph::tensor::write_atomic(path, format!("{}\n", g.to_json_string()).as_bytes())
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = config(&cli.common)?;
    let strict = cli.common.strict;
    match cli.cmd {
        Command::Generate => {
            let s = cmd_generate(&cfg)?;
            println!("{} layouts: {} training and {} evaluation samples in {}", s.layouts, s.train, s.eval, cfg.out.display());
            Ok(0)
        }
        Command::Extract { affordance, direction, render } => {
            let o = cmd_extract(&affordance, &direction, &cfg.graph)?;
            let out = if cfg.out.extension().is_some_and(|e| e == "json") { cfg.out.clone() } else { cfg.out.join("graph.json") };
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| lanegraph::Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
            }
            write_graph(&out, &o.graph)?;
            for w in &o.graph.warnings {
                eprintln!("warning: {w}");
            }
            for v in &o.violations {
                eprintln!("violation: {v}");
            }
            if let Some(svg) = render {
                let bundle = lanegraph::oracle::AffordanceBundle::from_tensors(
                    &lanegraph::tensor::read_tensor(&affordance)?,
                    &lanegraph::tensor::read_tensor(&direction)?,
                )?;
                lanegraph::tensor::write_atomic(&svg, lanegraph::pipeline::render_svg(&bundle, &o.graph)?.as_bytes())?;
            }
            println!(
                "{} vertices, {} edges, {} violations -> {}",
                o.graph.vertices.len(),
                o.graph.edges.len(),
                o.violations.len(),
                out.display()
            );
            Ok(exit_code(o.violations.len(), strict))
        }
        Command::Eval { dataset } => {
            if cli.common.out.is_none() && cli.common.config.is_none() {
                cfg.out = dataset.join("results");
            }
            let s = cmd_eval(&dataset, &cfg)?;
            for (f, r) in &s.families {
                println!("{}: {}/{} error free ({:.1}%), {} violations", f.as_str(), r.error_free, r.samples, 100.0 * r.rate(), r.violations);
            }
            if s.skipped > 0 {
                println!("{} samples skipped", s.skipped);
            }
            let violations: usize = s.families.values().map(|r| r.violations).sum();
            Ok(exit_code(violations, strict))
        }
        Command::Render { sample, graph } => {
            let graph = graph.unwrap_or_else(|| sample.join("graph.json"));
            let out = if cfg.out.extension().is_some_and(|e| e == "svg") { cfg.out.clone() } else { cfg.out.join("render.svg") };
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| lanegraph::Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
            }
            cmd_render(&sample, &graph, &out)?;
            println!("{}", out.display());
            Ok(0)
        }
        Command::TrainToy { dataset, iters } => {
            if let Some(n) = iters {
                cfg.toy.iters = n;
            }
            let (saved, curve) = cmd_train_toy(&dataset, &cfg)?;
            if let Some(p) = curve.last() {
                println!("iter {}: acc_pos {:.4} l1_neg {:.4}{}", p.iter, p.acc_pos, p.l1_neg, if saved.untrained { " (untrained)" } else { "" });
            }
            Ok(0)
        }
        Command::Validate { graph } => {
            let v = cmd_validate(&graph)?;
            for x in &v {
                println!("{x}");
            }
            if v.is_empty() {
                println!("valid");
            }
            Ok(exit_code(v.len(), strict))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
