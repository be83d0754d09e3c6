//! Route enumeration over a layout's connectivity.

use super::geometry::forward_headings;
use super::layout::RoadLayout;
use crate::error::{Error, Result};
use crate::grid::Point;

/// A full entry-to-exit centreline with per-point headings.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub entry: String,
    pub exit: String,
    pub points: Vec<Point>,
    pub headings: Vec<f64>,
}

/// One route per connectivity pair, in connectivity order.
pub fn enumerate_routes(layout: &RoadLayout) -> Result<Vec<Route>> {
    layout
        .connectivity
        .iter()
        .map(|c| {
            let mut points: Vec<Point> = Vec::new();
            for &l in &c.lanes {
                let lane = &layout.lanes[l].centerline;
                let mut start = 0;
                if let Some(&last) = points.last() {
                    let gap = last.dist(lane[0]);
                    if gap >= 0.5 {
                        return Err(Error::DiscontinuousRoute {
                            entry: c.entry.clone(),
                            exit: c.exit.clone(),
                            gap,
                        });
                    }
                    if gap < 1e-9 {
                        start = 1;
                    }
                }
                points.extend_from_slice(&lane[start..]);
            }
            let headings = forward_headings(&points);
            Ok(Route { entry: c.entry.clone(), exit: c.exit.clone(), points, headings })
        })
        .collect()
}
