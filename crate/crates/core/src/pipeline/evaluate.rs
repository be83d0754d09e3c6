//! Scoring one extracted graph and its dense inputs against an evaluation label.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::augment::sample_params;
use crate::error::Result;
use crate::graphgen::{generate_graph, validate_graph, GraphParams, LaneGraph};
use crate::grid::{GridMap, GridSpec};
use crate::metrics::{acc_pos, eval_kl, graph_diff, l1_neg, EvalReport, HeadScores};
use crate::oracle::{inject_noise, make_eval_label, AffordanceBundle, NoiseConfig};
use crate::scene::{Family, RoadLayout};

use super::seeds::{derive_seed, Salt};

fn binarize(m: &GridMap) -> GridMap {
    let data = m.data().iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
    GridMap::from_vec(m.channels(), m.height(), m.width(), data).expect("same shape")
}

/// Extracts a graph from `pred` and scores it and the dense maps against
/// the clean label `label` and reference graph.
pub fn score(
    pred: &AffordanceBundle,
    label: &AffordanceBundle,
    reference: &LaneGraph,
    params: &GraphParams,
) -> Result<(LaneGraph, EvalReport)> {
    let graph = generate_graph(pred, params);
    let violations = validate_graph(&graph);
    let diff = graph_diff(&graph, reference);
    let mut warnings: Vec<String> = pred.warnings.iter().chain(&graph.warnings).cloned().collect();
    for v in &violations {
        warnings.push(format!("violation: {v}"));
    }
    let head = |p: &GridMap, l: &GridMap| -> Result<(f64, f64)> {
        let l = binarize(l);
        Ok((acc_pos(p, &l)?.value, l1_neg(p, &l)?))
    };
    let (al, ll) = head(&pred.lane, &label.lane)?;
    let (ae, le) = head(&pred.entry, &label.entry)?;
    let (ax, lx) = head(&pred.exit, &label.exit)?;
    let d_kl = eval_kl(&pred.direction, &label.direction, &label.lane)?;
    let report = EvalReport {
        acc_pos: HeadScores { lane: al, entry: ae, exit: ax },
        l1_neg: HeadScores { lane: ll, entry: le, exit: lx },
        d_kl,
        graph_missing: diff.missing,
        graph_erroneous: diff.erroneous,
        error_free: diff.is_error_free(),
        violations: violations.len(),
        warnings,
    };
    Ok((graph, report))
}

/// Evaluation sample `index` of `layout` computed in memory, the same way
/// the dataset pipeline builds it.
pub fn eval_in_memory(
    layout: &RoadLayout,
    base_seed: u64,
    index: usize,
    noise: NoiseConfig,
    params: &GraphParams,
) -> Result<(LaneGraph, EvalReport)> {
    let seed = derive_seed(base_seed, &layout.id, index, Salt::Eval);
    let (label, reference) = make_eval_label(layout, &GridSpec::label(), &sample_params(seed))?;
    let pred = inject_noise(&label, noise, derive_seed(seed, "noise", 0, Salt::Noise))?;
    score(&pred, &label, &reference, params)
}

/// Error-free counts for one family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FamilyRate {
    pub samples: usize,
    pub error_free: usize,
    pub violations: usize,
}

impl FamilyRate {
    pub fn rate(&self) -> f64 {
        if self.samples == 0 {
            f64::NAN
        } else {
            self.error_free as f64 / self.samples as f64
        }
    }
}

/// Accumulates reports per family, in family order.
pub fn family_rates<'a>(reports: impl IntoIterator<Item = (Family, &'a EvalReport)>) -> BTreeMap<Family, FamilyRate> {
    let mut out: BTreeMap<Family, FamilyRate> = BTreeMap::new();
    for (f, r) in reports {
        let e = out.entry(f).or_default();
        e.samples += 1;
        e.error_free += r.error_free as usize;
        e.violations += r.violations;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_layout, LayoutConfig};
    use serde_json::json;

    #[test]
    fn clean_cross_is_error_free() {
        let l = build_layout(&LayoutConfig {
            id: "x".into(),
            generator: "n_way".into(),
            params: json!({"arms": 4}),
            family: Family::Train,
        })
        .unwrap();
        let (_, r) = eval_in_memory(&l, 3, 0, NoiseConfig::new(0.0, 0.0), &GraphParams::default()).unwrap();
        assert!(r.error_free, "{r:?}");
        assert_eq!(r.violations, 0);
        assert_eq!(r.acc_pos.lane, 1.0);
        assert_eq!(r.l1_neg.lane, 0.0);
        assert!(r.d_kl.abs() < 1e-9);
    }

    #[test]
    fn rates_count_per_family() {
        let ok = EvalReport { error_free: true, ..Default::default() };
        let bad = EvalReport::default();
        let r = family_rates([(Family::Train, &ok), (Family::Train, &bad), (Family::Test, &ok)]);
        assert_eq!(r[&Family::Train].rate(), 0.5);
        assert_eq!(r[&Family::Test].rate(), 1.0);
    }
}
