//! Random rotation, translation and smooth warping of scenes.
//!
//! Training and evaluation data transform layout geometry directly
//! ([`AugmentParams::transform_layout`]), so labels are rasterized without
//! resampling. [`apply`] resamples rasters for pipelines where only a grid
//! is available.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridMap, GridSpec, Point, INPUT_CELLS};
use crate::scene::RoadLayout;

pub const MAX_TRANSLATION: i32 = 16;
pub const WARP_AMPLITUDE: f64 = 4.0;
pub const WARP_RADIUS: usize = 16;

/// Smooth displacement field on the input grid, in input cells.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    size: usize,
    /// Column (x) displacement per cell.
    dx: Vec<f64>,
    /// Row (y) displacement per cell.
    dy: Vec<f64>,
}

impl WarpField {
    pub fn zero(size: usize) -> Self {
        WarpField { size, dx: vec![0.0; size * size], dy: vec![0.0; size * size] }
    }

    /// White noise box-smoothed with the given radius and rescaled so that
    /// the largest displacement has length `amplitude`.
    pub fn random(rng: &mut impl Rng, size: usize, radius: usize, amplitude: f64) -> Self {
        let mut noise = |_| -> Vec<f64> { (0..size * size).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let dx = box_smooth(&noise(0), size, radius);
        let dy = box_smooth(&noise(1), size, radius);
        let peak = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
        let s = if peak > 0.0 { amplitude / peak } else { 0.0 };
        WarpField { size, dx: dx.iter().map(|v| v * s).collect(), dy: dy.iter().map(|v| v * s).collect() }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.dx.iter().zip(&self.dy).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    /// Bilinear displacement `(d_row, d_col)` at continuous grid coordinates
    /// (cell centres sit at half-integers); clamps outside the field.
    pub fn sample(&self, row: f64, col: f64) -> (f64, f64) {
        let n = self.size;
        let r = (row - 0.5).clamp(0.0, (n - 1) as f64);
        let c = (col - 0.5).clamp(0.0, (n - 1) as f64);
        let (r0, c0) = (r.floor() as usize, c.floor() as usize);
        let (r1, c1) = ((r0 + 1).min(n - 1), (c0 + 1).min(n - 1));
        let (fr, fc) = (r - r0 as f64, c - c0 as f64);
        let lerp = |f: &[f64]| {
            let a = f[r0 * n + c0] * (1.0 - fc) + f[r0 * n + c1] * fc;
            let b = f[r1 * n + c0] * (1.0 - fc) + f[r1 * n + c1] * fc;
            a * (1.0 - fr) + b * fr
        };
        (lerp(&self.dy), lerp(&self.dx))
    }
}

/// Mean over the in-bounds part of a `(2r+1)^2` window, via prefix sums.
fn box_smooth(src: &[f64], n: usize, r: usize) -> Vec<f64> {
    let mut sat = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..n {
        for j in 0..n {
            sat[(i + 1) * (n + 1) + j + 1] =
                src[i * n + j] + sat[i * (n + 1) + j + 1] + sat[(i + 1) * (n + 1) + j] - sat[i * (n + 1) + j];
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let (i0, i1) = (i.saturating_sub(r), (i + r + 1).min(n));
        for j in 0..n {
            let (j0, j1) = (j.saturating_sub(r), (j + r + 1).min(n));
            let s = sat[i1 * (n + 1) + j1] - sat[i0 * (n + 1) + j1] - sat[i1 * (n + 1) + j0] + sat[i0 * (n + 1) + j0];
            out[i * n + j] = s / ((i1 - i0) * (j1 - j0)) as f64;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentParams {
    /// Radians in `[0, 2π)`, counterclockwise about the grid centre.
    pub rotation: f64,
    /// `(dx, dy)` in input cells: columns, then rows.
    pub translation: (i32, i32),
    pub warp: WarpField,
    pub seed: u64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams { rotation: 0.0, translation: (0, 0), warp: WarpField::zero(INPUT_CELLS), seed: 0 }
    }

    /// Maps a world point through rotation, translation and warp, using the
    /// input grid for cell units.
    pub fn transform_point(&self, p: Point) -> Point {
        let spec = GridSpec::input();
        let m = spec.meters_per_cell;
        let c = spec.center();
        let mut q = c.add(p.sub(c).rotate(self.rotation));
        q = q.add(Point::new(self.translation.0 as f64 * m, self.translation.1 as f64 * m));
        let (r, col) = spec.to_grid(q);
        let (wr, wc) = self.warp.sample(r, col);
        q.add(Point::new(wc * m, wr * m))
    }

    fn transform_heading(&self, p: Point, heading: f64) -> f64 {
        let a = self.transform_point(p);
        let b = self.transform_point(p.add(Point::from_angle(heading).scale(0.05)));
        b.sub(a).angle()
    }

    /// Transforms all layout geometry; connectivity is untouched.
    pub fn transform_layout(&self, layout: &RoadLayout) -> RoadLayout {
        let mut out = layout.clone();
        for lane in out.lanes.iter_mut() {
            for p in lane.centerline.iter_mut() {
                *p = self.transform_point(*p);
            }
        }
        for m in out.markings.iter_mut() {
            for p in m.points.iter_mut() {
                *p = self.transform_point(*p);
            }
        }
        for port in out.ports.iter_mut() {
            port.heading = self.transform_heading(port.point, port.heading);
            port.point = self.transform_point(port.point);
        }
        out
    }
}

/// Draws augmentation parameters; fully determined by `seed`.
pub fn sample_params(seed: u64) -> AugmentParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = rng.random_range(0.0..TAU);
    let translation = (
        rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
        rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
    );
    let warp = WarpField::random(&mut rng, INPUT_CELLS, WARP_RADIUS, WARP_AMPLITUDE);
    AugmentParams { rotation, translation, warp, seed }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Nearest,
    /// Bilinear resampling, then snapping to the nearest of {0, 0.5, 1}.
    BilinearThreshold,
    /// Nearest resampling; channels `(x, x + 1)` hold a unit vector that is
    /// rotated with the scene.
    Vector { x_channel: usize },
}

/// Value used where the source lies outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    /// Observation channels: unknown (0.5).
    Unknown,
    /// Label and affordance channels: 0.
    Zero,
}

impl Fill {
    fn value(self) -> f64 {
        match self {
            Fill::Unknown => 0.5,
            Fill::Zero => 0.0,
        }
    }
}

fn quantize(v: f64) -> f64 {
    if v < 0.25 {
        0.0
    } else if v > 0.75 {
        1.0
    } else {
        0.5
    }
}

/// Resamples a square raster through the augmentation. `resolution_scale`
/// is the map's resolution relative to the input grid (1 or 1/2);
/// translations and warps are scaled with it.
pub fn apply(
    map: &GridMap,
    params: &AugmentParams,
    resolution_scale: f64,
    interpolation: Interpolation,
    fill: Fill,
) -> Result<GridMap> {
    let (ch, h, w) = map.shape();
    if h != w {
        return Err(Error::Shape(format!("augmentation needs a square map, got {h}x{w}")));
    }
    if !(resolution_scale > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution scale {resolution_scale}")));
    }
    if let Interpolation::Vector { x_channel } = interpolation {
        if x_channel + 1 >= ch {
            return Err(Error::Shape(format!("vector channels {x_channel}+1 out of range")));
        }
    }
    let n = h as f64;
    let input_half = INPUT_CELLS as f64 / 2.0;
    let (sin, cos) = (-params.rotation).sin_cos();
    let fillv = fill.value();
    let mut out = GridMap::filled(ch, h, w, fillv);
    for i in 0..h {
        for j in 0..w {
            // offset from the grid centre, in input cells
            let ui = (i as f64 + 0.5 - n / 2.0) / resolution_scale;
            let uj = (j as f64 + 0.5 - n / 2.0) / resolution_scale;
            let (wr, wc) = params.warp.sample(ui + input_half, uj + input_half);
            let vi = ui - wr - params.translation.1 as f64;
            let vj = uj - wc - params.translation.0 as f64;
            // inverse rotation, (x, y) = (col, row)
            let pj = cos * vj - sin * vi;
            let pi = sin * vj + cos * vi;
            let si = pi * resolution_scale + n / 2.0 - 0.5;
            let sj = pj * resolution_scale + n / 2.0 - 0.5;
            match interpolation {
                Interpolation::Nearest | Interpolation::Vector { .. } => {
                    let (ri, rj) = (si.round(), sj.round());
                    if ri < 0.0 || rj < 0.0 || ri >= n || rj >= n {
                        continue;
                    }
                    for c in 0..ch {
                        out.set(c, i, j, map.get(c, ri as usize, rj as usize));
                    }
                    if let Interpolation::Vector { x_channel } = interpolation {
                        let vx = map.get(x_channel, ri as usize, rj as usize);
                        let vy = map.get(x_channel + 1, ri as usize, rj as usize);
                        let r = Point::new(vx, vy).rotate(params.rotation);
                        out.set(x_channel, i, j, r.x);
                        out.set(x_channel + 1, i, j, r.y);
                    }
                }
                Interpolation::BilinearThreshold => {
                    if si < -0.5 || sj < -0.5 || si > n - 0.5 || sj > n - 0.5 {
                        continue;
                    }
                    let (i0, j0) = (si.floor(), sj.floor());
                    let (fi, fj) = (si - i0, sj - j0);
                    for c in 0..ch {
                        let tap = |a: f64, b: f64| {
                            if a < 0.0 || b < 0.0 || a >= n || b >= n {
                                fillv
                            } else {
                                map.get(c, a as usize, b as usize)
                            }
                        };
                        let v = tap(i0, j0) * (1.0 - fi) * (1.0 - fj)
                            + tap(i0, j0 + 1.0) * (1.0 - fi) * fj
                            + tap(i0 + 1.0, j0) * fi * (1.0 - fj)
                            + tap(i0 + 1.0, j0 + 1.0) * fi * fj;
                        out.set(c, i, j, quantize(v));
                    }
                }
            }
        }
    }
    Ok(out)
}
