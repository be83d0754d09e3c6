//! Dense grid tensors, grid geometry and angle helpers.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cells per side of the input observation grid.
pub const INPUT_CELLS: usize = 256;
/// Cells per side of label and affordance grids.
pub const LABEL_CELLS: usize = 128;
/// Input grid resolution in meters per cell.
pub const INPUT_METERS_PER_CELL: f64 = 0.25;

/// Observation value for a positive cell.
pub const OBS_POSITIVE: f64 = 1.0;
/// Observation value for an unobserved cell.
pub const OBS_UNKNOWN: f64 = 0.5;
/// Observation value for a negative cell.
pub const OBS_NEGATIVE: f64 = 0.0;

/// A world-frame point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Point::new(theta.cos(), theta.sin())
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            self
        }
    }

    /// Counterclockwise perpendicular.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn rotate(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        normalize_angle(self.y.atan2(self.x))
    }
}

/// A grid cell addressed by row `i` and column `j`.
///
/// Rows grow with world `y`, columns with world `x`, so the heading of a move
/// from `(i, j)` to `(i + di, j + dj)` is `atan2(di, dj)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Cell { i, j }
    }

    /// Continuous (row, col) coordinates of the cell center.
    pub fn center(self) -> (f64, f64) {
        (self.i as f64 + 0.5, self.j as f64 + 0.5)
    }

    pub fn dist(self, o: Cell) -> f64 {
        let di = self.i as f64 - o.i as f64;
        let dj = self.j as f64 - o.j as f64;
        di.hypot(dj)
    }

    pub fn chebyshev(self, o: Cell) -> usize {
        self.i.abs_diff(o.i).max(self.j.abs_diff(o.j))
    }

    /// Heading of the vector from `self` to `o`.
    pub fn heading_to(self, o: Cell) -> f64 {
        let di = o.i as f64 - self.i as f64;
        let dj = o.j as f64 - self.j as f64;
        normalize_angle(di.atan2(dj))
    }

    pub fn offset(self, di: isize, dj: isize, height: usize, width: usize) -> Option<Cell> {
        let i = self.i as isize + di;
        let j = self.j as isize + dj;
        if i < 0 || j < 0 || i >= height as isize || j >= width as isize {
            None
        } else {
            Some(Cell::new(i as usize, j as usize))
        }
    }
}

/// Placement of a square grid in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cells_per_side: usize,
    pub meters_per_cell: f64,
    /// World coordinate of the corner of cell (0, 0).
    pub origin: Point,
}

impl GridSpec {
    pub fn new(cells_per_side: usize, meters_per_cell: f64, origin: Point) -> Result<Self> {
        if !(meters_per_cell > 0.0) || cells_per_side == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid needs positive size and resolution, got {cells_per_side} cells at {meters_per_cell} m"
            )));
        }
        Ok(GridSpec {
            cells_per_side,
            meters_per_cell,
            origin,
        })
    }

    /// The 256-cell input grid centred on the world origin.
    pub fn input() -> Self {
        let half = INPUT_CELLS as f64 * INPUT_METERS_PER_CELL / 2.0;
        GridSpec {
            cells_per_side: INPUT_CELLS,
            meters_per_cell: INPUT_METERS_PER_CELL,
            origin: Point::new(-half, -half),
        }
    }

    /// The label grid covering the same extent at half the resolution.
    pub fn label_for(&self) -> Self {
        GridSpec {
            cells_per_side: self.cells_per_side / 2,
            meters_per_cell: self.meters_per_cell * 2.0,
            origin: self.origin,
        }
    }

    pub fn label() -> Self {
        Self::input().label_for()
    }

    pub fn extent(&self) -> f64 {
        self.cells_per_side as f64 * self.meters_per_cell
    }

    pub fn center(&self) -> Point {
        let h = self.extent() / 2.0;
        Point::new(self.origin.x + h, self.origin.y + h)
    }

    /// Continuous (row, col) grid coordinates of a world point.
    pub fn to_grid(&self, p: Point) -> (f64, f64) {
        (
            (p.y - self.origin.y) / self.meters_per_cell,
            (p.x - self.origin.x) / self.meters_per_cell,
        )
    }

    pub fn to_world(&self, row: f64, col: f64) -> Point {
        Point::new(
            self.origin.x + col * self.meters_per_cell,
            self.origin.y + row * self.meters_per_cell,
        )
    }

    pub fn cell_center(&self, c: Cell) -> Point {
        let (r, q) = c.center();
        self.to_world(r, q)
    }

    pub fn cell_of(&self, p: Point) -> Option<Cell> {
        let (r, c) = self.to_grid(p);
        let n = self.cells_per_side as f64;
        if r < 0.0 || c < 0.0 || r >= n || c >= n {
            None
        } else {
            Some(Cell::new(r.floor() as usize, c.floor() as usize))
        }
    }

    /// Nearest in-bounds cell to a world point.
    pub fn clamp_cell(&self, p: Point) -> Cell {
        let (r, c) = self.to_grid(p);
        let hi = (self.cells_per_side - 1) as f64;
        Cell::new(r.floor().clamp(0.0, hi) as usize, c.floor().clamp(0.0, hi) as usize)
    }
}

/// Dense `channels x height x width` grid of 64-bit values, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GridMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        GridMap {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {channels}x{height}x{width} map",
                data.len()
            )));
        }
        Ok(GridMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, i: usize, j: usize) -> usize {
        (c * self.height + i) * self.width + j
    }

    #[inline]
    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.index(c, i, j)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, v: f64) {
        let k = self.index(c, i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn at(&self, c: usize, cell: Cell) -> f64 {
        self.get(c, cell.i, cell.j)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Copies one channel out as a single-channel map.
    pub fn extract_channel(&self, c: usize) -> GridMap {
        GridMap {
            channels: 1,
            height: self.height,
            width: self.width,
            data: self.channel(c).to_vec(),
        }
    }

    /// Stacks maps of equal spatial size along the channel axis.
    pub fn stack(maps: &[&GridMap]) -> Result<GridMap> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Shape("cannot stack zero maps".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::new();
        let mut channels = 0;
        for m in maps {
            if m.height != h || m.width != w {
                return Err(Error::Shape(format!(
                    "cannot stack {}x{} with {h}x{w}",
                    m.height, m.width
                )));
            }
            channels += m.channels;
            data.extend_from_slice(&m.data);
        }
        GridMap::from_vec(channels, h, w, data)
    }

    pub fn in_bounds(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.height && (j as usize) < self.width
    }

    pub fn same_shape(&self, o: &GridMap) -> bool {
        self.shape() == o.shape()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Absolute circular difference between two angles, in `[0, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

/// Circular mean of weighted angles; `None` when the resultant vanishes.
pub fn circular_mean(angles: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut s, mut c) = (0.0, 0.0);
    for (a, w) in angles {
        s += w * a.sin();
        c += w * a.cos();
    }
    if s.hypot(c) < 1e-12 {
        None
    } else {
        Some(normalize_angle(s.atan2(c)))
    }
}
