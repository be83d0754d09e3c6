//! On-disk datasets: generation, batch evaluation, toy training, extraction.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::sample_params;
use crate::error::{Error, Result};
use crate::graphgen::{generate_graph, validate_graph, GraphParams, LaneGraph, Violation};
use crate::grid::{Cell, GridMap, GridSpec};
use crate::learning::{curves_csv, toy_train, CurvePoint, EvalSample, PixelModel};
use crate::metrics::EvalReport;
use crate::oracle::{
    inject_noise, make_eval_label, make_sample, AffordanceBundle, TrainingSample, LABEL_MASK, LABEL_NX, LABEL_NY,
    LABEL_POINTS,
};
use crate::scene::{enumerate_routes, load_library, rasterize_scene, Family, RoadLayout};
use crate::tensor::{read_tensor, write_atomic, write_tensor};

use super::config::RunConfig;
use super::evaluate::{family_rates, score, FamilyRate};
use super::seeds::{derive_seed, Salt};

pub const TRAIN_DIR: &str = "train";
pub const EVAL_DIR: &str = "eval";
const EVAL_FILES: [&str; 5] = ["meta.json", "input.lgt", "affordance.lgt", "direction.lgt", "graph.json"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Train,
    Eval,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub layout_id: String,
    pub family: Family,
    pub kind: SampleKind,
    pub index: usize,
    pub seed: u64,
    /// Route of a training sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<RouteMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteMeta {
    pub entry: String,
    pub exit: String,
    pub entry_cell: Cell,
    pub exit_cell: Cell,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::json(path.display().to_string(), e))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs `f` on a pool capped by `LANEGRAPH_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("LANEGRAPH_THREADS") {
        let n: usize =
            v.parse().map_err(|_| Error::InvalidArgument(format!("LANEGRAPH_THREADS must be a count, got '{v}'")))?;
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn sample_dir(root: &Path, kind: SampleKind, layout: &str, index: usize) -> PathBuf {
    let k = match kind {
        SampleKind::Train => TRAIN_DIR,
        SampleKind::Eval => EVAL_DIR,
    };
    root.join(k).join(layout).join(format!("{index:03}"))
}

/// `4 x H x W` evaluation label: lane union, heading of the strongest
/// component, and the entry and exit blobs combined.
pub fn eval_label_tensor(b: &AffordanceBundle) -> GridMap {
    let (h, w) = (b.height(), b.width());
    let mut out = GridMap::zeros(4, h, w);
    for c in b.direction.cells().collect::<Vec<_>>() {
        out.set(LABEL_MASK, c.i, c.j, b.lane.at(0, c));
        if let Some(m) = b.direction.active(c).max_by(|x, y| x.weight.total_cmp(&y.weight)) {
            out.set(LABEL_NX, c.i, c.j, m.mean.cos());
            out.set(LABEL_NY, c.i, c.j, m.mean.sin());
        }
        out.set(LABEL_POINTS, c.i, c.j, b.entry.at(0, c).max(b.exit.at(0, c)));
    }
    out
}

fn write_train_sample(root: &Path, layout: &RoadLayout, index: usize, base: u64) -> Result<()> {
    let seed = derive_seed(base, &layout.id, index, Salt::Train);
    let routes = enumerate_routes(layout)?;
    if routes.is_empty() {
        return Err(Error::InvalidLayout(format!("{} has no routes", layout.id)));
    }
    let route = &routes[(derive_seed(seed, "route", 0, Salt::Train) % routes.len() as u64) as usize];
    let s = make_sample(layout, route, &GridSpec::input(), &sample_params(seed))?;
    let dir = sample_dir(root, SampleKind::Train, &layout.id, index);
    create_dir(&dir)?;
    write_tensor(&s.input, &dir.join("input.lgt"))?;
    write_tensor(&s.label, &dir.join("label.lgt"))?;
    let meta = SampleMeta {
        layout_id: layout.id.clone(),
        family: layout.family,
        kind: SampleKind::Train,
        index,
        seed,
        route: Some(RouteMeta {
            entry: s.entry.clone(),
            exit: s.exit.clone(),
            entry_cell: s.entry_cell,
            exit_cell: s.exit_cell,
        }),
    };
    write_json(&dir.join("meta.json"), &meta)
}

fn write_eval_sample(root: &Path, layout: &RoadLayout, index: usize, base: u64) -> Result<()> {
    let seed = derive_seed(base, &layout.id, index, Salt::Eval);
    let params = sample_params(seed);
    let (bundle, graph) = make_eval_label(layout, &GridSpec::label(), &params)?;
    let input = rasterize_scene(&params.transform_layout(layout), &GridSpec::input(), &[]);
    let dir = sample_dir(root, SampleKind::Eval, &layout.id, index);
    create_dir(&dir)?;
    write_tensor(&input, &dir.join("input.lgt"))?;
    write_tensor(&eval_label_tensor(&bundle), &dir.join("label.lgt"))?;
    write_tensor(&bundle.affordance_tensor(), &dir.join("affordance.lgt"))?;
    write_tensor(&bundle.direction.to_tensor(), &dir.join("direction.lgt"))?;
    write_atomic(&dir.join("graph.json"), format!("{}\n", graph.to_json_string()).as_bytes())?;
    let meta =
        SampleMeta { layout_id: layout.id.clone(), family: layout.family, kind: SampleKind::Eval, index, seed, route: None };
    write_json(&dir.join("meta.json"), &meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateSummary {
    pub layouts: usize,
    pub train: usize,
    pub eval: usize,
}

/// Writes `samples` training and `samples` evaluation samples per layout of
/// the admitted families under `cfg.out`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    let layouts: Vec<RoadLayout> =
        load_library(&cfg.library)?.into_iter().filter(|l| cfg.family.admits(l.family)).collect();
    if layouts.is_empty() {
        log::warn!("no layouts admitted from {}", cfg.library.display());
    }
    let jobs: Vec<(usize, usize, SampleKind)> = (0..layouts.len())
        .flat_map(|l| (0..cfg.samples).flat_map(move |k| [(l, k, SampleKind::Train), (l, k, SampleKind::Eval)]))
        .collect();
    with_pool(|| {
        jobs.par_iter().try_for_each(|&(l, k, kind)| match kind {
            SampleKind::Train => write_train_sample(&cfg.out, &layouts[l], k, cfg.seed),
            SampleKind::Eval => write_eval_sample(&cfg.out, &layouts[l], k, cfg.seed),
        })
    })??;
    let n = layouts.len() * cfg.samples;
    Ok(GenerateSummary { layouts: layouts.len(), train: n, eval: n })
}

/// Sample directories `<root>/<kind>/<layout>/<index>` in name order.
pub fn list_samples(root: &Path, kind: SampleKind) -> Result<Vec<PathBuf>> {
    let base = root.join(match kind {
        SampleKind::Train => TRAIN_DIR,
        SampleKind::Eval => EVAL_DIR,
    });
    if !base.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let read = |p: &Path| -> Result<Vec<PathBuf>> {
        let mut v: Vec<PathBuf> = fs::read_dir(p)
            .map_err(|e| Error::io(p, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        v.sort();
        Ok(v)
    };
    for layout in read(&base)? {
        out.extend(read(&layout)?);
    }
    Ok(out)
}

/// One evaluated sample; `status` is `ok` or names the missing files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub dir: String,
    pub meta: Option<SampleMeta>,
    pub status: String,
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub samples: Vec<SampleResult>,
    pub families: std::collections::BTreeMap<Family, FamilyRate>,
    pub skipped: usize,
}

fn eval_one(dir: &Path, cfg: &RunConfig) -> Result<(SampleMeta, LaneGraph, EvalReport)> {
    let meta: SampleMeta = read_json(&dir.join("meta.json"))?;
    let label = AffordanceBundle::from_tensors(
        &read_tensor(&dir.join("affordance.lgt"))?,
        &read_tensor(&dir.join("direction.lgt"))?,
    )?;
    let reference = LaneGraph::from_json_str(
        &fs::read_to_string(dir.join("graph.json")).map_err(|e| Error::io(dir.join("graph.json"), e))?,
    )?;
    let pred = inject_noise(&label, cfg.noise(), derive_seed(meta.seed, "noise", 0, Salt::Noise))?;
    let (graph, report) = score(&pred, &label, &reference, &cfg.graph)?;
    Ok((meta, graph, report))
}

const SUMMARY_HEADER: &str = "layout,family,index,seed,status,acc_pos_lane,acc_pos_entry,acc_pos_exit,\
l1_neg_lane,l1_neg_entry,l1_neg_exit,d_kl,missing,erroneous,violations,error_free\n";

fn summary_row(r: &SampleResult) -> String {
    let (layout, family, index, seed) = match &r.meta {
        Some(m) => (m.layout_id.clone(), m.family.as_str().to_string(), m.index.to_string(), m.seed.to_string()),
        None => (r.dir.clone(), String::new(), String::new(), String::new()),
    };
    let metrics = match &r.report {
        Some(p) => format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            p.acc_pos.lane,
            p.acc_pos.entry,
            p.acc_pos.exit,
            p.l1_neg.lane,
            p.l1_neg.entry,
            p.l1_neg.exit,
            p.d_kl,
            p.graph_missing,
            p.graph_erroneous,
            p.violations,
            p.error_free
        ),
        None => ",,,,,,,,,,".to_string(),
    };
    format!("{layout},{family},{index},{seed},{},{metrics}\n", r.status)
}

/// Extracts and scores every evaluation sample of `dataset`, writing
/// `reports/`, `graphs/`, `summary.csv` and `families.csv` under `cfg.out`.
pub fn cmd_eval(dataset: &Path, cfg: &RunConfig) -> Result<EvalSummary> {
    let dirs = list_samples(dataset, SampleKind::Eval)?;
    if dirs.is_empty() {
        log::warn!("no evaluation samples under {}", dataset.display());
    }
    let results: Vec<Option<(SampleResult, Option<LaneGraph>)>> = with_pool(|| {
        dirs.par_iter()
            .map(|d| {
                let name = d.strip_prefix(dataset).unwrap_or(d).display().to_string();
                let missing: Vec<&str> = EVAL_FILES.iter().copied().filter(|f| !d.join(f).is_file()).collect();
                if !missing.is_empty() {
                    log::warn!("skipping {name}: missing {}", missing.join(" "));
                    let r = SampleResult { dir: name, meta: None, status: format!("missing {}", missing.join(" ")), report: None };
                    return Ok(Some((r, None)));
                }
                let (meta, graph, report) = eval_one(d, cfg)?;
                if !cfg.family.admits(meta.family) {
                    return Ok(None);
                }
                Ok(Some((SampleResult { dir: name, meta: Some(meta), status: "ok".into(), report: Some(report) }, Some(graph))))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    create_dir(&cfg.out.join("reports"))?;
    create_dir(&cfg.out.join("graphs"))?;
    let mut samples = Vec::new();
    let mut csv = String::from(SUMMARY_HEADER);
    for (r, graph) in results.into_iter().flatten() {
        if let (Some(m), Some(g)) = (&r.meta, &graph) {
            let stem = format!("{}_{:03}", m.layout_id, m.index);
            write_json(&cfg.out.join("reports").join(format!("{stem}.json")), &r)?;
            write_atomic(&cfg.out.join("graphs").join(format!("{stem}.json")), format!("{}\n", g.to_json_string()).as_bytes())?;
        }
        csv.push_str(&summary_row(&r));
        samples.push(r);
    }
    write_atomic(&cfg.out.join("summary.csv"), csv.as_bytes())?;
    let families = family_rates(
        samples.iter().filter_map(|r| Some((r.meta.as_ref()?.family, r.report.as_ref()?))),
    );
    let mut fam = String::from("family,samples,error_free,rate,violations\n");
    for (f, r) in &families {
        fam.push_str(&format!("{},{},{},{:.6},{}\n", f.as_str(), r.samples, r.error_free, r.rate(), r.violations));
    }
    write_atomic(&cfg.out.join("families.csv"), fam.as_bytes())?;
    let skipped = samples.iter().filter(|r| r.report.is_none()).count();
    Ok(EvalSummary { samples, families, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    /// Set when every parameter is still zero: all outputs are 0.5.
    pub untrained: bool,
    pub model: PixelModel,
}

/// Trains the per-pixel learner on the dataset's training samples and
/// tracks it on the evaluation samples of the admitted families. Writes
/// `model.json` and `curves.csv` under `cfg.out`.
pub fn cmd_train_toy(dataset: &Path, cfg: &RunConfig) -> Result<(SavedModel, Vec<CurvePoint>)> {
    let train: Vec<TrainingSample> = list_samples(dataset, SampleKind::Train)?
        .par_iter()
        .map(|d| -> Result<Option<TrainingSample>> {
            let meta: SampleMeta = read_json(&d.join("meta.json"))?;
            if !cfg.family.admits(meta.family) {
                return Ok(None);
            }
            let route = meta
                .route
                .ok_or_else(|| Error::InvalidArgument(format!("{}: training sample without route", d.display())))?;
            Ok(Some(TrainingSample {
                input: read_tensor(&d.join("input.lgt"))?,
                label: read_tensor(&d.join("label.lgt"))?,
                layout_id: meta.layout_id,
                entry: route.entry,
                exit: route.exit,
                entry_cell: route.entry_cell,
                exit_cell: route.exit_cell,
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let eval: Vec<EvalSample> = list_samples(dataset, SampleKind::Eval)?
        .par_iter()
        .map(|d| -> Result<Option<EvalSample>> {
            let meta: SampleMeta = read_json(&d.join("meta.json"))?;
            if !cfg.family.admits(meta.family) {
                return Ok(None);
            }
            let aff = read_tensor(&d.join("affordance.lgt"))?;
            Ok(Some(EvalSample { input: read_tensor(&d.join("input.lgt"))?, lane: aff.extract_channel(0) }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let (model, curve) = with_pool(|| toy_train(&train, &eval, &cfg.toy))??;
    let saved = SavedModel { untrained: model.is_untrained(), model };
    if saved.untrained {
        log::warn!("model is untrained: every output is 0.5, so acc_pos is 0");
    }
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("model.json"), &saved)?;
    write_atomic(&cfg.out.join("curves.csv"), curves_csv(&curve).as_bytes())?;
    Ok((saved, curve))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOutcome {
    pub graph: LaneGraph,
    pub violations: Vec<Violation>,
}

/// Builds and validates a graph from an affordance/direction tensor pair.
pub fn cmd_extract(affordance: &Path, direction: &Path, params: &GraphParams) -> Result<ExtractOutcome> {
    let bundle = AffordanceBundle::from_tensors(&read_tensor(affordance)?, &read_tensor(direction)?)?;
    let graph = generate_graph(&bundle, params);
    let violations = validate_graph(&graph);
    Ok(ExtractOutcome { graph, violations })
}

/// Violations of a stored graph.
pub fn cmd_validate(graph: &Path) -> Result<Vec<Violation>> {
    let text = fs::read_to_string(graph).map_err(|e| Error::io(graph, e))?;
    Ok(validate_graph(&LaneGraph::from_json_str(&text)?))
}

/// Process exit code for a finished command.
pub fn exit_code(violations: usize, strict: bool) -> i32 {
    if strict && violations > 0 {
        1
    } else {
        0
    }
}
