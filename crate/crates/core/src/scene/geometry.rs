//! Polyline construction and corridor rasterization helpers.

use crate::grid::{Cell, GridSpec, Point};

/// Sample spacing for curved connectors, meters (below one input cell).
pub const CURVE_STEP: f64 = 0.2;

/// Distance from `p` to segment `ab` and the clamped segment parameter.
pub fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.dist(a.add(ab.scale(t))), t)
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Straight segment sampled at most `step` apart, both ends included.
pub fn sample_segment(a: Point, b: Point, step: f64) -> Vec<Point> {
    let n = (a.dist(b) / step).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| a.add(b.sub(a).scale(k as f64 / n as f64)))
        .collect()
}

fn push_unique(out: &mut Vec<Point>, p: Point) {
    if out.last().map_or(true, |q| q.dist(p) > 1e-9) {
        out.push(p);
    }
}

/// Smooth connector from `p0` (heading `h0`) to `p1` (heading `h1`).
///
/// When the two heading lines meet ahead of `p0` and behind `p1`, the corner
/// is rounded by the largest circular fillet that fits; otherwise a cubic
/// Bézier with matching end tangents is used.
pub fn connector(p0: Point, h0: f64, p1: Point, h1: f64) -> Vec<Point> {
    let d0 = Point::from_angle(h0);
    let d1 = Point::from_angle(h1);
    let denom = d0.cross(d1);
    let mut out = Vec::new();
    if denom.abs() > 1e-6 {
        // p0 + a*d0 = p1 - b*d1
        let r = p1.sub(p0);
        let a = r.cross(d1) / denom;
        let b = -d0.cross(r) / denom;
        if a > 1e-6 && b > 1e-6 {
            let apex = p0.add(d0.scale(a));
            let dist = a.min(b);
            let t0 = apex.sub(d0.scale(dist));
            let t1 = apex.add(d1.scale(dist));
            let turn = d0.cross(d1).atan2(d0.dot(d1));
            let radius = dist / (turn.abs() / 2.0).tan();
            let left = if turn > 0.0 { d0.perp() } else { d0.perp().scale(-1.0) };
            let centre = t0.add(left.scale(radius));
            for p in sample_segment(p0, t0, CURVE_STEP) {
                push_unique(&mut out, p);
            }
            let start = t0.sub(centre).angle();
            let arc_len = radius * turn.abs();
            let n = (arc_len / CURVE_STEP).ceil().max(1.0) as usize;
            for k in 1..=n {
                let ang = start + turn * k as f64 / n as f64;
                push_unique(&mut out, centre.add(Point::from_angle(ang).scale(radius)));
            }
            for p in sample_segment(t1, p1, CURVE_STEP) {
                push_unique(&mut out, p);
            }
            // the arc endpoint and t1 agree up to rounding; pin the exact end
            if let Some(last) = out.last_mut() {
                *last = p1;
            }
            return out;
        }
    } else if d0.dot(d1) > 0.0 && p1.sub(p0).cross(d0).abs() < 1e-6 {
        // collinear, same heading
        return sample_segment(p0, p1, CURVE_STEP);
    }
    let l = p0.dist(p1) / 3.0;
    let c0 = p0.add(d0.scale(l));
    let c1 = p1.sub(d1.scale(l));
    let approx = polyline_length(&[p0, c0, c1, p1]);
    let n = (approx / CURVE_STEP).ceil().max(2.0) as usize;
    for k in 0..=n {
        let t = k as f64 / n as f64;
        let u = 1.0 - t;
        let p = p0
            .scale(u * u * u)
            .add(c0.scale(3.0 * u * u * t))
            .add(c1.scale(3.0 * u * t * t))
            .add(p1.scale(t * t * t));
        push_unique(&mut out, p);
    }
    out
}

/// Visits every cell whose centre lies strictly within `half_width` of the
/// polyline. The callback receives the cell, the distance, and the heading
/// of the closest segment. Cells near several segments are visited once per
/// segment.
pub fn for_each_corridor_cell(
    spec: &GridSpec,
    points: &[Point],
    half_width: f64,
    mut f: impl FnMut(Cell, f64, f64),
) {
    let n = spec.cells_per_side as isize;
    let m = spec.meters_per_cell;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let heading = b.sub(a).angle();
        let (ra, ca) = spec.to_grid(a);
        let (rb, cb) = spec.to_grid(b);
        let pad = half_width / m + 1.0;
        let i0 = (ra.min(rb) - pad).floor().max(0.0) as isize;
        let i1 = ((ra.max(rb) + pad).ceil() as isize).min(n - 1);
        let j0 = (ca.min(cb) - pad).floor().max(0.0) as isize;
        let j1 = ((ca.max(cb) + pad).ceil() as isize).min(n - 1);
        for i in i0..=i1 {
            for j in j0..=j1 {
                let cell = Cell::new(i as usize, j as usize);
                let (d, _) = point_segment(spec.cell_center(cell), a, b);
                if d < half_width {
                    f(cell, d, heading);
                }
            }
        }
    }
    if points.len() == 1 {
        let p = points[0];
        if let Some(c) = spec.cell_of(p) {
            let d = spec.cell_center(c).dist(p);
            if d < half_width {
                f(c, d, 0.0);
            }
        }
    }
}

/// Per-point headings as normalized forward differences (last point reuses
/// the final segment).
pub fn forward_headings(points: &[Point]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|k| {
            let (a, b) = if k + 1 < n {
                (points[k], points[k + 1])
            } else if n >= 2 {
                (points[n - 2], points[n - 1])
            } else {
                return 0.0;
            };
            b.sub(a).angle()
        })
        .collect()
}
