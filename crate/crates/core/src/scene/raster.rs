//! Rasterization of layouts into the two-channel observation grid.

use serde::{Deserialize, Serialize};

use super::geometry::for_each_corridor_cell;
use super::layout::RoadLayout;
use crate::grid::{GridMap, GridSpec, Point, OBS_POSITIVE, OBS_UNKNOWN};

/// Half-width of a painted marking stroke, meters.
pub const MARKING_HALF_WIDTH: f64 = 0.15;

pub const CH_DRIVABLE: usize = 0;
pub const CH_MARKINGS: usize = 1;

/// An unobserved region of the scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Region {
    Disc { center: Point, radius: f64 },
    Rect { min: Point, max: Point },
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Disc { center, radius } => p.dist(center) <= radius,
            Region::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
        }
    }
}

/// Two-channel observation grid: drivable surface and road markings.
/// Cells inside any occlusion region read as unknown in both channels.
pub fn rasterize_scene(layout: &RoadLayout, spec: &GridSpec, occlusion: &[Region]) -> GridMap {
    let n = spec.cells_per_side;
    let mut map = GridMap::zeros(2, n, n);
    for lane in &layout.lanes {
        for_each_corridor_cell(spec, &lane.centerline, lane.width / 2.0, |c, _, _| {
            map.set(CH_DRIVABLE, c.i, c.j, OBS_POSITIVE);
        });
    }
    for m in &layout.markings {
        for_each_corridor_cell(spec, &m.points, MARKING_HALF_WIDTH, |c, _, _| {
            map.set(CH_MARKINGS, c.i, c.j, OBS_POSITIVE);
        });
    }
    if !occlusion.is_empty() {
        for i in 0..n {
            for j in 0..n {
                let p = spec.cell_center(crate::grid::Cell::new(i, j));
                if occlusion.iter().any(|r| r.contains(p)) {
                    map.set(CH_DRIVABLE, i, j, OBS_UNKNOWN);
                    map.set(CH_MARKINGS, i, j, OBS_UNKNOWN);
                }
            }
        }
    }
    map
}
