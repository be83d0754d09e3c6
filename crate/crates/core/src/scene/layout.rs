//! Parametric road layouts.
//!
//! Every generator reduces to a single junction: a set of radial arms, each
//! carrying inbound and outbound lanes, joined by one connector lane per
//! legal entry/exit pair. Traffic keeps to the right.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{connector, sample_segment};
use crate::error::{Error, Result};
use crate::grid::{angle_diff, normalize_angle, Point};

pub const DEFAULT_LANE_WIDTH: f64 = 3.5;
pub const DEFAULT_PORT_RADIUS: f64 = 23.0;
/// Smallest angle allowed between two arms.
pub const MIN_ARM_GAP: f64 = PI / 4.0;
/// Farthest a lane end may lie from the scene centre, leaving room for
/// augmentation shifts inside the 32 m half-extent.
pub const MAX_PORT_DISTANCE: f64 = 25.5;
/// Smallest distance between two ports, metres (six label cells).
pub const MIN_PORT_SEPARATION: f64 = 3.0;
const DASH_STROKE: f64 = 2.0;
const DASH_GAP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Train,
    Test,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Train => "train",
            Family::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortKind {
    Entry,
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: String,
    pub kind: PortKind,
    pub point: Point,
    /// Direction of travel at the port, radians.
    pub heading: f64,
    pub arm: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    /// Ordered in the direction of travel.
    pub centerline: Vec<Point>,
    pub width: f64,
    pub entry_port: Option<String>,
    pub exit_port: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub entry: String,
    pub exit: String,
    /// Indices into `RoadLayout::lanes`, in travel order.
    pub lanes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marking {
    pub points: Vec<Point>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadLayout {
    pub id: String,
    pub family: Family,
    pub lanes: Vec<LaneSpec>,
    pub ports: Vec<Port>,
    pub connectivity: Vec<Connection>,
    /// Each dashed marking is already split into its strokes.
    pub markings: Vec<Marking>,
}

impl RoadLayout {
    pub fn port(&self, id: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.id == id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.kind == PortKind::Entry)
    }

    pub fn exits(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.kind == PortKind::Exit)
    }

    /// Checks referential integrity and lane continuity along every route.
    pub fn validate(&self) -> Result<()> {
        for lane in &self.lanes {
            if lane.centerline.len() < 2 {
                return Err(Error::InvalidLayout(format!("{}: lane with < 2 points", self.id)));
            }
            if lane.centerline.windows(2).any(|w| w[0].dist(w[1]) <= 0.0) {
                return Err(Error::InvalidLayout(format!(
                    "{}: repeated consecutive centerline point",
                    self.id
                )));
            }
        }
        for (k, a) in self.ports.iter().enumerate() {
            if let Some(b) = self.ports[k + 1..].iter().find(|b| a.point.dist(b.point) < MIN_PORT_SEPARATION) {
                return Err(Error::InvalidLayout(format!("{}: ports {} and {} are too close", self.id, a.id, b.id)));
            }
        }
        for c in &self.connectivity {
            match (self.port(&c.entry), self.port(&c.exit)) {
                (Some(e), Some(x)) if e.kind == PortKind::Entry && x.kind == PortKind::Exit => {}
                _ => {
                    return Err(Error::InvalidLayout(format!(
                        "{}: connection {} -> {} references missing or mismatched ports",
                        self.id, c.entry, c.exit
                    )))
                }
            }
            if c.lanes.is_empty() || c.lanes.iter().any(|&l| l >= self.lanes.len()) {
                return Err(Error::InvalidLayout(format!(
                    "{}: connection {} -> {} has a bad lane list",
                    self.id, c.entry, c.exit
                )));
            }
            for w in c.lanes.windows(2) {
                let a = *self.lanes[w[0]].centerline.last().unwrap();
                let b = self.lanes[w[1]].centerline[0];
                let gap = a.dist(b);
                if gap >= 0.5 {
                    return Err(Error::DiscontinuousRoute {
                        entry: c.entry.clone(),
                        exit: c.exit.clone(),
                        gap,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One arm of a junction. `angle_deg` points from the centre outwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub angle_deg: f64,
    #[serde(default)]
    pub lanes_in: usize,
    #[serde(default)]
    pub lanes_out: usize,
}

/// A layout description as stored in the library's JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub id: String,
    pub generator: String,
    #[serde(default)]
    pub params: serde_json::Value,
    pub family: Family,
}

impl LayoutConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

fn default_lanes() -> usize {
    1
}
fn default_width() -> f64 {
    DEFAULT_LANE_WIDTH
}
fn default_radius() -> f64 {
    DEFAULT_PORT_RADIUS
}
fn default_split() -> f64 {
    60.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StraightParams {
    #[serde(default = "default_lanes")]
    lanes: usize,
    #[serde(default)]
    one_way: bool,
    #[serde(default)]
    heading_deg: f64,
    #[serde(default = "default_width")]
    lane_width: f64,
    #[serde(default = "default_radius")]
    port_radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NWayParams {
    arms: usize,
    #[serde(default = "default_lanes")]
    lanes: usize,
    #[serde(default)]
    rotation_deg: f64,
    #[serde(default = "default_width")]
    lane_width: f64,
    #[serde(default = "default_radius")]
    port_radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JunctionParams {
    arms: Vec<ArmConfig>,
    #[serde(default = "default_width")]
    lane_width: f64,
    #[serde(default = "default_radius")]
    port_radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitParams {
    #[serde(default = "default_split")]
    split_deg: f64,
    #[serde(default = "default_lanes")]
    trunk_lanes: usize,
    #[serde(default = "default_branch_lanes")]
    branch_lanes: [usize; 2],
    #[serde(default = "default_width")]
    lane_width: f64,
    #[serde(default = "default_radius")]
    port_radius: f64,
}

fn default_branch_lanes() -> [usize; 2] {
    [1, 1]
}

fn parse<T: for<'de> Deserialize<'de>>(cfg: &LayoutConfig) -> Result<T> {
    let v = if cfg.params.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        cfg.params.clone()
    };
    serde_json::from_value(v).map_err(|e| Error::InvalidLayout(format!("{}: {e}", cfg.id)))
}

/// Builds a layout from its description.
pub fn build_layout(cfg: &LayoutConfig) -> Result<RoadLayout> {
    let (arms, width, radius) = match cfg.generator.as_str() {
        "straight" => {
            let p: StraightParams = parse(cfg)?;
            let (a, b) = if p.one_way { (p.lanes, 0) } else { (p.lanes, p.lanes) };
            let arms = vec![
                ArmConfig { angle_deg: p.heading_deg + 180.0, lanes_in: a, lanes_out: b },
                ArmConfig { angle_deg: p.heading_deg, lanes_in: b, lanes_out: a },
            ];
            (arms, p.lane_width, p.port_radius)
        }
        "n_way" => {
            let p: NWayParams = parse(cfg)?;
            if p.arms < 2 {
                return Err(Error::InvalidLayout(format!("{}: n_way needs >= 2 arms", cfg.id)));
            }
            let arms = (0..p.arms)
                .map(|k| ArmConfig {
                    angle_deg: p.rotation_deg + 360.0 * k as f64 / p.arms as f64,
                    lanes_in: p.lanes,
                    lanes_out: p.lanes,
                })
                .collect();
            (arms, p.lane_width, p.port_radius)
        }
        "junction" => {
            let p: JunctionParams = parse(cfg)?;
            (p.arms, p.lane_width, p.port_radius)
        }
        "fork" | "merge" => {
            let p: SplitParams = parse(cfg)?;
            let half = p.split_deg / 2.0;
            let arms = if cfg.generator == "fork" {
                vec![
                    ArmConfig { angle_deg: 180.0, lanes_in: p.trunk_lanes, lanes_out: 0 },
                    ArmConfig { angle_deg: half, lanes_in: 0, lanes_out: p.branch_lanes[0] },
                    ArmConfig { angle_deg: -half, lanes_in: 0, lanes_out: p.branch_lanes[1] },
                ]
            } else {
                vec![
                    ArmConfig { angle_deg: 0.0, lanes_in: 0, lanes_out: p.trunk_lanes },
                    ArmConfig { angle_deg: 180.0 - half, lanes_in: p.branch_lanes[0], lanes_out: 0 },
                    ArmConfig { angle_deg: 180.0 + half, lanes_in: p.branch_lanes[1], lanes_out: 0 },
                ]
            };
            (arms, p.lane_width, p.port_radius)
        }
        other => {
            return Err(Error::InvalidLayout(format!("{}: unknown generator '{other}'", cfg.id)))
        }
    };
    build_junction(&cfg.id, cfg.family, &arms, width, radius)
}

struct ArmGeom {
    dir: Point,
    normal: Point,
    /// (lateral offset, inbound?) per lane, with its lane index.
    lanes: Vec<(f64, bool, usize)>,
    half_width: f64,
}

/// Builds a junction layout from explicit arms.
pub fn build_junction(
    id: &str,
    family: Family,
    arms: &[ArmConfig],
    lane_width: f64,
    port_radius: f64,
) -> Result<RoadLayout> {
    let bad = |msg: String| Err(Error::InvalidLayout(format!("{id}: {msg}")));
    if !(lane_width > 0.0) {
        return bad(format!("lane width must be positive, got {lane_width}"));
    }
    if arms.len() < 2 {
        return bad("a layout needs at least two arms".into());
    }
    if arms.iter().any(|a| a.lanes_in + a.lanes_out == 0) {
        return bad("every arm needs at least one lane".into());
    }
    if !arms.iter().any(|a| a.lanes_in > 0) || !arms.iter().any(|a| a.lanes_out > 0) {
        return bad("layout needs at least one inbound and one outbound lane".into());
    }
    let angles: Vec<f64> = arms.iter().map(|a| normalize_angle(a.angle_deg.to_radians())).collect();
    for x in 0..arms.len() {
        for y in x + 1..arms.len() {
            if angle_diff(angles[x], angles[y]) < MIN_ARM_GAP - 1e-9 {
                return bad(format!(
                    "arms at {}° and {}° collide (closer than 45°)",
                    arms[x].angle_deg, arms[y].angle_deg
                ));
            }
        }
    }

    let mut geoms: Vec<ArmGeom> = Vec::new();
    let mut next_lane = 0usize;
    for (k, arm) in arms.iter().enumerate() {
        let dir = Point::from_angle(angles[k]);
        let normal = dir.perp();
        let mut lanes = Vec::new();
        if arm.lanes_in > 0 && arm.lanes_out > 0 {
            for q in 0..arm.lanes_in {
                lanes.push(((q as f64 + 0.5) * lane_width, true, 0));
            }
            for q in 0..arm.lanes_out {
                lanes.push((-(q as f64 + 0.5) * lane_width, false, 0));
            }
        } else {
            let n = arm.lanes_in + arm.lanes_out;
            let inbound = arm.lanes_in > 0;
            for q in 0..n {
                lanes.push(((q as f64 - (n as f64 - 1.0) / 2.0) * lane_width, inbound, 0));
            }
        }
        for l in lanes.iter_mut() {
            l.2 = next_lane;
            next_lane += 1;
        }
        let half_width = lanes.iter().map(|l| l.0.abs()).fold(0.0, f64::max) + lane_width / 2.0;
        geoms.push(ArmGeom { dir, normal, lanes, half_width });
    }

    // stop-line radius: wide enough that neighbouring arms do not overlap
    let mut order: Vec<usize> = (0..arms.len()).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    let mut box_radius: f64 = 5.0;
    for k in 0..order.len() {
        let a = order[k];
        let b = order[(k + 1) % order.len()];
        let gap = normalize_angle(angles[b] - angles[a]);
        let gap = if order.len() == 1 { 2.0 * PI } else { gap };
        if gap < PI - 1e-9 {
            let hw = geoms[a].half_width.max(geoms[b].half_width);
            box_radius = box_radius.max(hw / (gap / 2.0).tan() + 1.5);
        }
    }
    if port_radius < box_radius + 6.0 {
        return bad(format!(
            "port radius {port_radius:.1} m leaves no room for arm lanes beyond the {box_radius:.1} m junction"
        ));
    }

    let mut lanes: Vec<LaneSpec> = Vec::new();
    let mut ports: Vec<Port> = Vec::new();
    let mut markings = Vec::new();
    // (lane index, arm, stop point, heading at stop point, port id)
    let mut inbound: Vec<(usize, usize, Point, f64, String)> = Vec::new();
    let mut outbound: Vec<(usize, usize, Point, f64, String)> = Vec::new();
    let (mut n_in, mut n_out) = (0, 0);
    for (k, g) in geoms.iter().enumerate() {
        for &(off, is_in, _) in &g.lanes {
            let outer = g.dir.scale(port_radius).add(g.normal.scale(off));
            let inner = g.dir.scale(box_radius).add(g.normal.scale(off));
            if outer.norm() > MAX_PORT_DISTANCE {
                return bad(format!(
                    "lane end {:.1} m from the centre does not fit the grid extent",
                    outer.norm()
                ));
            }
            let lane_idx = lanes.len();
            if is_in {
                let id = format!("in{n_in}");
                n_in += 1;
                let heading = g.dir.scale(-1.0).angle();
                lanes.push(LaneSpec {
                    centerline: vec![outer, inner],
                    width: lane_width,
                    entry_port: Some(id.clone()),
                    exit_port: None,
                });
                ports.push(Port { id: id.clone(), kind: PortKind::Entry, point: outer, heading, arm: k });
                inbound.push((lane_idx, k, inner, heading, id));
            } else {
                let id = format!("out{n_out}");
                n_out += 1;
                let heading = g.dir.angle();
                lanes.push(LaneSpec {
                    centerline: vec![inner, outer],
                    width: lane_width,
                    entry_port: None,
                    exit_port: Some(id.clone()),
                });
                ports.push(Port { id: id.clone(), kind: PortKind::Exit, point: outer, heading, arm: k });
                outbound.push((lane_idx, k, inner, heading, id));
            }
        }
        markings.extend(arm_markings(g, box_radius, port_radius, lane_width));
    }

    let mut connectivity = Vec::new();
    for (li, ai, p0, h0, entry) in &inbound {
        for (lo, ao, p1, h1, exit) in &outbound {
            if ai == ao {
                continue; // no U-turns
            }
            let conn = lanes.len();
            lanes.push(LaneSpec {
                centerline: connector(*p0, *h0, *p1, *h1),
                width: lane_width,
                entry_port: None,
                exit_port: None,
            });
            connectivity.push(Connection {
                entry: entry.clone(),
                exit: exit.clone(),
                lanes: vec![*li, conn, *lo],
            });
        }
    }
    if connectivity.is_empty() {
        return bad("no entry can reach an exit on another arm".into());
    }

    let layout = RoadLayout {
        id: id.to_string(),
        family,
        lanes,
        ports,
        connectivity,
        markings,
    };
    layout.validate()?;
    Ok(layout)
}

fn arm_markings(g: &ArmGeom, r0: f64, r1: f64, w: f64) -> Vec<Marking> {
    let mut lanes = g.lanes.clone();
    lanes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lines: Vec<(f64, bool)> = Vec::new();
    lines.push((lanes[0].0 - w / 2.0, false));
    for pair in lanes.windows(2) {
        let dashed = pair[0].1 == pair[1].1;
        lines.push(((pair[0].0 + pair[1].0) / 2.0, dashed));
    }
    lines.push((lanes.last().unwrap().0 + w / 2.0, false));

    let mut out = Vec::new();
    for (off, dashed) in lines {
        let a = g.dir.scale(r0).add(g.normal.scale(off));
        let b = g.dir.scale(r1).add(g.normal.scale(off));
        if dashed {
            let mut s = 0.0;
            let len = r1 - r0;
            while s < len {
                let e = (s + DASH_STROKE).min(len);
                out.push(Marking {
                    points: vec![a.add(g.dir.scale(s)), a.add(g.dir.scale(e))],
                    dashed: true,
                });
                s += DASH_STROKE + DASH_GAP;
            }
        } else {
            out.push(Marking { points: sample_segment(a, b, 1.0), dashed: false });
        }
    }
    out
}

/// Loads and builds every `*.json` layout in a directory, sorted by file name.
pub fn load_library(dir: &Path) -> Result<Vec<RoadLayout>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<_> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for f in files {
        let cfg = LayoutConfig::load(&f)?;
        if !seen.insert(cfg.id.clone()) {
            return Err(Error::InvalidLayout(format!("duplicate layout id '{}'", cfg.id)));
        }
        out.push(build_layout(&cfg)?);
    }
    Ok(out)
}
