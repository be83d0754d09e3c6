//! Analytic stand-ins for network outputs, training labels, and noise.

pub mod field;

pub use field::{AffordanceBundle, DirectionalField, MAX_COMPONENTS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::augment::AugmentParams;
use crate::error::{Error, Result};
use crate::graphgen::extract_points;
use crate::graphgen::graph::LaneGraph;
use crate::grid::{angle_diff, circular_mean, Cell, GridMap, GridSpec};
use crate::learning::vonmises::VmComponent;
use crate::scene::geometry::for_each_corridor_cell;
use crate::scene::{enumerate_routes, ground_truth_graph, rasterize_scene, RoadLayout, Route};

/// Concentration of label and oracle directional distributions.
pub const LABEL_KAPPA: f64 = 8.0;
/// Entry/exit blob radius, label cells.
pub const BLOB_RADIUS: f64 = 3.0;
/// Route directions closer than this share one component.
pub const DEDUP_ANGLE: f64 = 15.0 * std::f64::consts::PI / 180.0;
/// Largest entry/exit blob displacement under noise, label cells.
pub const BLOB_JITTER: i64 = 2;

/// Label channels of a [`TrainingSample`].
pub const LABEL_MASK: usize = 0;
pub const LABEL_NX: usize = 1;
pub const LABEL_NY: usize = 2;
pub const LABEL_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// `2 x 256 x 256` observation.
    pub input: GridMap,
    /// `4 x 128 x 128`: mask, unit direction x, unit direction y, entry/exit blobs.
    pub label: GridMap,
    pub layout_id: String,
    pub entry: String,
    pub exit: String,
    pub entry_cell: Cell,
    pub exit_cell: Cell,
}

fn route_width(layout: &RoadLayout, k: usize) -> f64 {
    layout.lanes[layout.connectivity[k].lanes[0]].width
}

/// Cells of one route corridor with the tangent of the nearest segment.
fn corridor(spec: &GridSpec, route: &Route, width: f64) -> Vec<(Cell, f64)> {
    let n = spec.cells_per_side;
    let mut best: std::collections::HashMap<usize, (f64, f64)> = std::collections::HashMap::new();
    for_each_corridor_cell(spec, &route.points, width / 2.0, |c, d, h| {
        let e = best.entry(c.i * n + c.j).or_insert((f64::INFINITY, 0.0));
        if d < e.0 {
            *e = (d, h);
        }
    });
    let mut out: Vec<(Cell, f64)> = best.into_iter().map(|(k, (_, h))| (Cell::new(k / n, k % n), h)).collect();
    out.sort_by_key(|(c, _)| *c);
    out
}

/// Sets `map[c] = max(map[c], 1 - d / radius)` around `center`.
pub fn stamp_blob(map: &mut GridMap, channel: usize, center: Cell, radius: f64) {
    let r = radius.ceil() as isize;
    for di in -r..=r {
        for dj in -r..=r {
            let (i, j) = (center.i as isize + di, center.j as isize + dj);
            if !map.in_bounds(i, j) {
                continue;
            }
            let v = 1.0 - ((di * di + dj * dj) as f64).sqrt() / radius;
            if v > 0.0 {
                let (i, j) = (i as usize, j as usize);
                if v > map.get(channel, i, j) {
                    map.set(channel, i, j, v);
                }
            }
        }
    }
}

/// Clusters route directions so that cluster means end up more than
/// [`DEDUP_ANGLE`] apart; returns `(mean, support)` by decreasing support.
fn cluster_directions(dirs: &[f64]) -> Vec<(f64, usize)> {
    let mean = |v: &[f64]| circular_mean(v.iter().map(|&x| (x, 1.0))).unwrap_or(v[0]);
    let mut clusters: Vec<(f64, Vec<f64>)> = Vec::new();
    for &a in dirs {
        match clusters.iter_mut().find(|(m, _)| angle_diff(*m, a) <= DEDUP_ANGLE) {
            Some((m, members)) => {
                members.push(a);
                *m = mean(members);
            }
            None => clusters.push((a, vec![a])),
        }
    }
    // updated means may drift together; fold such pairs
    'outer: loop {
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                if angle_diff(clusters[x].0, clusters[y].0) <= DEDUP_ANGLE {
                    let (_, moved) = clusters.remove(y);
                    clusters[x].1.extend(moved);
                    clusters[x].0 = mean(&clusters[x].1);
                    continue 'outer;
                }
            }
        }
        break;
    }
    let mut out: Vec<(f64, usize)> = clusters.into_iter().map(|(m, v)| (m, v.len())).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1));
    out
}

/// Dense affordances of every route of `layout` on the label grid `spec`.
pub fn synth_affordances(layout: &RoadLayout, spec: &GridSpec) -> Result<AffordanceBundle> {
    let routes = enumerate_routes(layout)?;
    let n = spec.cells_per_side;
    let mut b = AffordanceBundle::empty(n, n);
    let mut dirs: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    for (k, route) in routes.iter().enumerate() {
        for (c, h) in corridor(spec, route, route_width(layout, k)) {
            b.lane.set(0, c.i, c.j, 1.0);
            dirs[c.i * n + c.j].push(h);
        }
    }
    let mut crowded = 0;
    for (idx, d) in dirs.iter().enumerate() {
        if d.is_empty() {
            continue;
        }
        let clusters = cluster_directions(d);
        if clusters.len() > MAX_COMPONENTS {
            crowded += 1;
        }
        let kept = clusters.len().min(MAX_COMPONENTS);
        let comps: Vec<VmComponent> =
            clusters[..kept].iter().map(|&(m, _)| VmComponent::new(1.0 / kept as f64, m, LABEL_KAPPA)).collect();
        b.direction.set(Cell::new(idx / n, idx % n), &comps);
    }
    if crowded > 0 {
        let msg = format!(
            "{}: {crowded} cells carry more than {MAX_COMPONENTS} directions; kept the best supported",
            layout.id
        );
        log::debug!("{msg}");
        b.warnings.push(msg);
    }
    for route in &routes {
        for (id, map) in [(&route.entry, &mut b.entry), (&route.exit, &mut b.exit)] {
            if let Some(p) = layout.port(id) {
                stamp_blob(map, 0, spec.clamp_cell(p.point), BLOB_RADIUS);
            }
        }
    }
    Ok(b)
}

/// One route of `layout` after augmentation, paired with the augmented
/// observation.
pub fn make_sample(
    layout: &RoadLayout,
    route: &Route,
    spec: &GridSpec,
    params: &AugmentParams,
) -> Result<TrainingSample> {
    let aug = params.transform_layout(layout);
    let k = aug
        .connectivity
        .iter()
        .position(|c| c.entry == route.entry && c.exit == route.exit)
        .ok_or_else(|| Error::InvalidArgument(format!("route {} -> {} not in {}", route.entry, route.exit, layout.id)))?;
    let routes = enumerate_routes(&aug)?;
    let label_spec = spec.label_for();
    let input = rasterize_scene(&aug, spec, &[]);
    let n = label_spec.cells_per_side;
    let mut label = GridMap::zeros(4, n, n);
    for (c, h) in corridor(&label_spec, &routes[k], route_width(&aug, k)) {
        label.set(LABEL_MASK, c.i, c.j, 1.0);
        label.set(LABEL_NX, c.i, c.j, h.cos());
        label.set(LABEL_NY, c.i, c.j, h.sin());
    }
    let port_cell = |id: &str| -> Result<Cell> {
        aug.port(id)
            .map(|p| label_spec.clamp_cell(p.point))
            .ok_or_else(|| Error::InvalidLayout(format!("{}: missing port {id}", aug.id)))
    };
    let entry_cell = port_cell(&route.entry)?;
    let exit_cell = port_cell(&route.exit)?;
    stamp_blob(&mut label, LABEL_POINTS, entry_cell, BLOB_RADIUS);
    stamp_blob(&mut label, LABEL_POINTS, exit_cell, BLOB_RADIUS);
    Ok(TrainingSample {
        input,
        label,
        layout_id: layout.id.clone(),
        entry: route.entry.clone(),
        exit: route.exit.clone(),
        entry_cell,
        exit_cell,
    })
}

/// Full evaluation label: affordances and reference graph of the
/// augmented layout, on the label grid `spec`.
pub fn make_eval_label(
    layout: &RoadLayout,
    spec: &GridSpec,
    params: &AugmentParams,
) -> Result<(AffordanceBundle, LaneGraph)> {
    let aug = params.transform_layout(layout);
    let bundle = synth_affordances(&aug, spec)?;
    let graph = ground_truth_graph(&aug, spec);
    Ok((bundle, graph))
}

/// Noise settings for [`inject_noise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub flip_prob: f64,
    pub dir_jitter_sigma: f64,
    /// Largest blob displacement per axis, applied whenever any noise is on.
    pub blob_jitter: i64,
}

impl NoiseConfig {
    pub fn new(flip_prob: f64, dir_jitter_sigma: f64) -> Self {
        NoiseConfig { flip_prob, dir_jitter_sigma, blob_jitter: BLOB_JITTER }
    }

    pub fn is_zero(&self) -> bool {
        self.flip_prob == 0.0 && self.dir_jitter_sigma == 0.0
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Perturbs a bundle: lane cells flip with probability `flip_prob`,
/// direction means receive wrapped Gaussian jitter, and blobs move by up to
/// `blob_jitter` cells per axis.
///
/// Each perturbation draws from its own stream, and every cell consumes one
/// uniform regardless of `flip_prob`, so the flipped sets for one seed are
/// nested as `flip_prob` grows.
pub fn inject_noise(bundle: &AffordanceBundle, noise: NoiseConfig, seed: u64) -> Result<AffordanceBundle> {
    if !(0.0..=0.5).contains(&noise.flip_prob) {
        return Err(Error::InvalidArgument(format!("flip probability {} outside [0, 0.5]", noise.flip_prob)));
    }
    if !(noise.dir_jitter_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("direction jitter {} is negative", noise.dir_jitter_sigma)));
    }
    let mut out = bundle.clone();
    if noise.is_zero() {
        return Ok(out);
    }
    let mut flips = stream(seed, 1);
    for v in out.lane.data_mut() {
        let u: f64 = flips.random();
        if u < noise.flip_prob {
            *v = if *v > 0.5 { 0.0 } else { 1.0 };
        }
    }
    if noise.dir_jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.dir_jitter_sigma)
            .map_err(|e| Error::InvalidArgument(format!("direction jitter: {e}")))?;
        let mut jitter = stream(seed, 2);
        for c in out.direction.cells().collect::<Vec<_>>() {
            for comp in out.direction.get_mut(c).iter_mut().filter(|v| v.is_active()) {
                *comp = VmComponent::new(comp.weight, comp.mean + normal.sample(&mut jitter), comp.kappa);
            }
        }
    }
    let mut moves = stream(seed, 3);
    for map in [&mut out.entry, &mut out.exit] {
        let centers = extract_points(map, 0.5);
        let mut fresh = GridMap::zeros(1, map.height(), map.width());
        for c in centers {
            let di = moves.random_range(-noise.blob_jitter..=noise.blob_jitter);
            let dj = moves.random_range(-noise.blob_jitter..=noise.blob_jitter);
            let i = (c.i as i64 + di).clamp(0, map.height() as i64 - 1) as usize;
            let j = (c.j as i64 + dj).clamp(0, map.width() as i64 - 1) as usize;
            stamp_blob(&mut fresh, 0, Cell::new(i, j), BLOB_RADIUS);
        }
        *map = fresh;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::sample_params;
    use crate::scene::{build_layout, Family, LayoutConfig};
    use serde_json::json;
    use std::f64::consts::FRAC_PI_2;

    fn layout(generator: &str, params: serde_json::Value) -> RoadLayout {
        build_layout(&LayoutConfig { id: "t".into(), generator: generator.into(), params, family: Family::Train })
            .unwrap()
    }

    #[test]
    fn one_way_lane_has_single_component_along_heading() {
        let l = layout("straight", json!({"one_way": true, "heading_deg": 90}));
        let b = synth_affordances(&l, &GridSpec::label()).unwrap();
        let lane: Vec<Cell> = b.direction.cells().filter(|&c| b.lane.at(0, c) > 0.5).collect();
        assert!(lane.len() > 100);
        for c in lane {
            let comps: Vec<_> = b.direction.active(c).collect();
            assert_eq!(comps.len(), 1);
            assert!(angle_diff(comps[0].mean, FRAC_PI_2) < 1e-9);
            assert_eq!(comps[0].kappa, LABEL_KAPPA);
        }
    }

    #[test]
    fn two_way_road_keeps_lanes_separate() {
        let l = layout("straight", json!({}));
        let b = synth_affordances(&l, &GridSpec::label()).unwrap();
        for c in b.direction.cells() {
            if b.lane.at(0, c) > 0.5 {
                assert_eq!(b.direction.active_count(c), 1, "{c:?}");
            }
        }
    }

    /// Directions of every route whose corridor covers `cell`, found by
    /// walking each route's segments directly.
    fn directions_by_enumeration(l: &RoadLayout, spec: &GridSpec, cell: Cell) -> Vec<f64> {
        let mut found: Vec<f64> = Vec::new();
        for (k, r) in enumerate_routes(l).unwrap().iter().enumerate() {
            let w = l.lanes[l.connectivity[k].lanes[0]].width;
            let mut best = (f64::INFINITY, 0.0);
            for w2 in r.points.windows(2) {
                let (d, _) = crate::scene::geometry::point_segment(spec.cell_center(cell), w2[0], w2[1]);
                if d < best.0 {
                    best = (d, w2[1].sub(w2[0]).angle());
                }
            }
            if best.0 < w / 2.0 {
                found.push(best.1);
            }
        }
        found
    }

    #[test]
    fn crossing_cells_are_multimodal_with_uniform_weights() {
        let l = layout("n_way", json!({"arms": 4}));
        let spec = GridSpec::label();
        let b = synth_affordances(&l, &spec).unwrap();
        let mut two = 0;
        for c in b.direction.cells() {
            let comps: Vec<_> = b.direction.active(c).collect();
            let oracle = directions_by_enumeration(&l, &spec, c);
            assert_eq!(comps.is_empty(), oracle.is_empty(), "{c:?}");
            if comps.is_empty() {
                continue;
            }
            let s: f64 = comps.iter().map(|v| v.weight).sum();
            assert!((s - 1.0).abs() < 1e-12);
            for v in &comps {
                assert!((v.weight - 1.0 / comps.len() as f64).abs() < 1e-12);
            }
            for (x, a) in comps.iter().enumerate() {
                for b2 in &comps[x + 1..] {
                    assert!(angle_diff(a.mean, b2.mean) > DEDUP_ANGLE, "{c:?}");
                }
            }
            if comps.len() < MAX_COMPONENTS {
                // nothing was dropped: every route direction is represented,
                // allowing for cluster means drifting by chaining
                for d in &oracle {
                    assert!(
                        comps.iter().any(|v| angle_diff(v.mean, *d) <= 2.0 * DEDUP_ANGLE),
                        "{c:?} {:?} {comps:?}",
                        oracle.iter().map(|a| a.to_degrees()).collect::<Vec<_>>()
                    );
                }
            }
            if comps.len() >= 2 && comps.iter().any(|v| angle_diff(v.mean, comps[0].mean) > 1.2) {
                two += 1;
            }
        }
        assert!(two > 0, "no bimodal crossing cells found");
    }

    #[test]
    fn blobs_peak_at_ports() {
        let l = layout("straight", json!({}));
        let spec = GridSpec::label();
        let b = synth_affordances(&l, &spec).unwrap();
        for p in l.entries() {
            assert_eq!(b.entry.at(0, spec.clamp_cell(p.point)), 1.0);
        }
        assert!(b.entry.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(extract_points(&b.exit, 0.5).len(), 2);
    }

    #[test]
    fn straight_sample_is_a_seven_cell_band() {
        let l = layout("straight", json!({}));
        let routes = enumerate_routes(&l).unwrap();
        let s = make_sample(&l, &routes[0], &GridSpec::input(), &AugmentParams::identity()).unwrap();
        assert_eq!(s.input.shape(), (2, 256, 256));
        assert_eq!(s.label.shape(), (4, 128, 128));
        for j in 20..108 {
            let rows = (0..128).filter(|&i| s.label.get(LABEL_MASK, i, j) > 0.5).count();
            assert_eq!(rows, 7, "column {j}");
        }
    }

    #[test]
    fn sample_directions_are_unit_vectors_and_deterministic() {
        let l = layout("n_way", json!({"arms": 3}));
        let routes = enumerate_routes(&l).unwrap();
        let p = sample_params(17);
        let a = make_sample(&l, &routes[2], &GridSpec::input(), &p).unwrap();
        let b = make_sample(&l, &routes[2], &GridSpec::input(), &p).unwrap();
        assert_eq!(a, b);
        let n = 128;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (a.label.get(LABEL_NX, i, j), a.label.get(LABEL_NY, i, j));
                if a.label.get(LABEL_MASK, i, j) > 0.5 {
                    assert!((x * x + y * y - 1.0).abs() < 1e-6);
                } else {
                    assert_eq!((x, y), (0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn training_masks_lie_inside_eval_label() {
        let l = layout("n_way", json!({"arms": 4}));
        let p = sample_params(3);
        let (bundle, graph) = make_eval_label(&l, &GridSpec::label(), &p).unwrap();
        assert_eq!(graph.count_vertices(crate::graphgen::graph::VertexKind::Entry), 4);
        for r in enumerate_routes(&l).unwrap() {
            let s = make_sample(&l, &r, &GridSpec::input(), &p).unwrap();
            for (m, e) in s.label.channel(LABEL_MASK).iter().zip(bundle.lane.data()) {
                assert!(*m < 0.5 || *e > 0.5);
            }
        }
    }

    #[test]
    fn single_route_eval_label_equals_route_affordances() {
        let l = layout("straight", json!({"one_way": true}));
        let r = &enumerate_routes(&l).unwrap()[0];
        let id = AugmentParams::identity();
        let (bundle, _) = make_eval_label(&l, &GridSpec::label(), &id).unwrap();
        let s = make_sample(&l, r, &GridSpec::input(), &id).unwrap();
        assert_eq!(s.label.channel(LABEL_MASK), bundle.lane.data());
    }

    #[test]
    fn zero_noise_is_identity_and_seed_is_deterministic() {
        let l = layout("n_way", json!({"arms": 3}));
        let b = synth_affordances(&l, &GridSpec::label()).unwrap();
        assert_eq!(inject_noise(&b, NoiseConfig::new(0.0, 0.0), 1).unwrap(), b);
        let n1 = inject_noise(&b, NoiseConfig::new(0.05, 0.2), 9).unwrap();
        let n2 = inject_noise(&b, NoiseConfig::new(0.05, 0.2), 9).unwrap();
        assert_eq!(n1, n2);
        assert_ne!(n1, b);
        assert!(inject_noise(&b, NoiseConfig::new(0.6, 0.0), 1).is_err());
    }

    #[test]
    fn flip_count_is_binomial() {
        let mut b = AffordanceBundle::empty(128, 128);
        for j in 0..1000 {
            b.lane.set(0, j / 100, j % 100, 1.0);
        }
        let noisy = inject_noise(&b, NoiseConfig::new(0.05, 0.0), 4).unwrap();
        let flips = (0..10)
            .flat_map(|i| (0..100).map(move |j| (i, j)))
            .filter(|&(i, j)| noisy.lane.get(0, i, j) < 0.5)
            .count() as f64;
        let (mean, sd) = (50.0, (1000.0f64 * 0.05 * 0.95).sqrt());
        assert!((flips - mean).abs() <= 3.0 * sd, "{flips} flips");
    }

    #[test]
    fn flips_are_nested_across_levels() {
        let l = layout("straight", json!({}));
        let b = synth_affordances(&l, &GridSpec::label()).unwrap();
        let lo = inject_noise(&b, NoiseConfig::new(0.02, 0.0), 11).unwrap();
        let hi = inject_noise(&b, NoiseConfig::new(0.08, 0.0), 11).unwrap();
        for ((o, l), h) in b.lane.data().iter().zip(lo.lane.data()).zip(hi.lane.data()) {
            if o != l {
                assert_ne!(o, h);
            }
        }
    }

    #[test]
    fn blob_centres_move_at_most_two_cells() {
        let l = layout("n_way", json!({"arms": 4}));
        let b = synth_affordances(&l, &GridSpec::label()).unwrap();
        let before = extract_points(&b.entry, 0.5);
        let after = extract_points(&inject_noise(&b, NoiseConfig::new(0.0, 0.1), 5).unwrap().entry, 0.5);
        assert_eq!(before.len(), after.len());
        for c in &before {
            assert!(after.iter().any(|d| d.chebyshev(*c) <= 2));
        }
    }
}
