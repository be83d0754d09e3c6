//! Partial-label barrier loss, directional KL loss, and gradient checking.

use serde::{Deserialize, Serialize};

use super::vonmises::{kl_with_grad, MixtureParams, VonMisesMixture};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridMap};
use crate::oracle::DirectionalField;

/// Default barrier weight.
pub const ALPHA: f64 = 1e5;
/// Default probability clamp.
pub const EPS: f64 = 1e-7;

/// How the cross-entropy term is signed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeSign {
    /// `CE = Σ ŷ ln y`, so subtracting `α·CE` penalizes mispredicted
    /// positives.
    #[default]
    Penalty,
    /// `CE = -Σ ŷ ln y` with the minus kept literally, rewarding them.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierLossConfig {
    pub alpha: f64,
    pub eps: f64,
    pub clip_norm: f64,
    pub ce_sign: CeSign,
}

impl Default for BarrierLossConfig {
    fn default() -> Self {
        BarrierLossConfig { alpha: ALPHA, eps: EPS, clip_norm: 1.0, ce_sign: CeSign::Penalty }
    }
}

impl BarrierLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.eps > 0.0 && self.eps < 0.5) || !(self.clip_norm > 0.0) {
            return Err(Error::InvalidArgument(format!("bad barrier loss config {self:?}")));
        }
        Ok(())
    }

    fn barrier_sign(&self) -> f64 {
        match self.ce_sign {
            CeSign::Penalty => 1.0,
            CeSign::Literal => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierOutput {
    pub loss: f64,
    /// Gradient after norm clipping.
    pub grad: GridMap,
    /// Gradient before clipping.
    pub raw_grad: GridMap,
}

/// `(1/N)(Σ |ŷ − y| + α Σ_{ŷ=1} −ln y)` over all `N` elements, with `y`
/// clamped to `[eps, 1 − eps]`; the gradient is taken at the clamped values
/// and rescaled to norm at most `clip_norm`.
pub fn barrier_loss(y: &GridMap, mask: &GridMap, cfg: &BarrierLossConfig) -> Result<BarrierOutput> {
    cfg.validate()?;
    if !y.same_shape(mask) {
        return Err(Error::Shape(format!("prediction {:?} vs mask {:?}", y.shape(), mask.shape())));
    }
    if let Some(v) = mask.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(format!("mask value {v} is not 0 or 1")));
    }
    let n = y.data().len() as f64;
    let (h, w, c) = (y.height(), y.width(), y.channels());
    let s = cfg.barrier_sign();
    let mut l1 = 0.0;
    let mut ce = 0.0;
    let mut grad = vec![0.0; y.data().len()];
    for (k, (&yv, &t)) in y.data().iter().zip(mask.data()).enumerate() {
        let yc = yv.clamp(cfg.eps, 1.0 - cfg.eps);
        l1 += (t - yc).abs();
        let mut g = if yc > t {
            1.0
        } else if yc < t {
            -1.0
        } else {
            0.0
        };
        if t == 1.0 {
            ce -= yc.ln();
            g -= s * cfg.alpha / yc;
        }
        grad[k] = g / n;
    }
    let loss = (l1 + s * cfg.alpha * ce) / n;
    let raw_grad = GridMap::from_vec(c, h, w, grad)?;
    let norm = raw_grad.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut clipped = raw_grad.clone();
    if norm > cfg.clip_norm {
        let f = cfg.clip_norm / norm;
        clipped.data_mut().iter_mut().for_each(|v| *v *= f);
    }
    Ok(BarrierOutput { loss, grad: clipped, raw_grad })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalLoss {
    pub loss: f64,
    pub labeled_cells: usize,
    pub warning: Option<String>,
}

/// Mean over mask cells of `D_KL(p ‖ p̂)`, where `p` is the predicted
/// mixture and `p̂` a von Mises density at the label angle with
/// concentration `kappa_label`. `label_dirs` is row-major, one angle per
/// cell; only mask cells are read.
pub fn directional_loss(
    pred: &DirectionalField,
    label_dirs: &[f64],
    mask: &GridMap,
    kappa_label: f64,
    bins: usize,
) -> Result<DirectionalLoss> {
    let (h, w) = (pred.height(), pred.width());
    if mask.height() != h || mask.width() != w || label_dirs.len() != h * w {
        return Err(Error::Shape("direction field, labels and mask disagree in size".into()));
    }
    let mut total = 0.0;
    let mut count = 0;
    for c in pred.cells() {
        if mask.at(0, c) < 0.5 {
            continue;
        }
        let p = pred.mixture(c);
        if !p.is_active() {
            return Err(Error::UndefinedDirection(c.i, c.j));
        }
        let q = VonMisesMixture::unimodal(label_dirs[c.i * w + c.j], kappa_label);
        total += super::vonmises::kl_divergence(&p, &q, bins);
        count += 1;
    }
    if count == 0 {
        return Ok(DirectionalLoss { loss: 0.0, labeled_cells: 0, warning: Some("no labeled cells".into()) });
    }
    Ok(DirectionalLoss { loss: total / count as f64, labeled_cells: count, warning: None })
}

/// Mean directional loss over cells given as differentiable mixture
/// parameters, with its exact gradient for each cell.
pub fn directional_loss_grad(
    cells: &[MixtureParams],
    label_dirs: &[f64],
    kappa_label: f64,
    bins: usize,
) -> (f64, Vec<MixtureParams>) {
    let m = cells.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(cells.len());
    for (p, &mu) in cells.iter().zip(label_dirs) {
        let (l, mut g) = kl_with_grad(p, &VonMisesMixture::unimodal(mu, kappa_label), bins);
        loss += l / m;
        for v in g.logits.iter_mut().chain(g.means.iter_mut()).chain(g.log_kappa.iter_mut()) {
            *v /= m;
        }
        grads.push(g);
    }
    (loss, grads)
}

/// Largest per-coordinate relative error between `f`'s analytic gradient at
/// `point` and central finite differences with step `h`.
pub fn grad_check(f: impl Fn(&[f64]) -> (f64, Vec<f64>), point: &[f64], h: f64) -> f64 {
    let (_, g) = f(point);
    let mut worst: f64 = 0.0;
    let mut x = point.to_vec();
    for k in 0..point.len() {
        x[k] = point[k] + h;
        let up = f(&x).0;
        x[k] = point[k] - h;
        let down = f(&x).0;
        x[k] = point[k];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - g[k]).abs() / (fd.abs() + g[k].abs() + 1e-8));
    }
    worst
}

/// Row-major label angles from the unit-vector channels of a label tensor.
pub fn label_angles(label: &GridMap, nx: usize, ny: usize) -> Vec<f64> {
    let (h, w) = (label.height(), label.width());
    (0..h * w).map(|k| label.get(ny, k / w, k % w).atan2(label.get(nx, k / w, k % w))).collect()
}

/// Cells of a one-channel map above 0.5, row-major.
pub fn mask_cells(mask: &GridMap) -> Vec<Cell> {
    let w = mask.width();
    mask.channel(0).iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(k, _)| Cell::new(k / w, k % w)).collect()
}
