//! A per-pixel logistic learner trained from partial trajectory labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{barrier_loss, BarrierLossConfig};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridMap};
use crate::metrics::{acc_pos, l1_neg};
use crate::oracle::{TrainingSample, LABEL_MASK, LABEL_POINTS};
use crate::scene::raster::CH_DRIVABLE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    /// Patch side at label resolution; odd.
    pub patch: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub power: f64,
    pub batch: usize,
    pub iters: usize,
    pub seed: u64,
    /// Number of evenly spaced checkpoints, including iteration 0 and the end.
    pub checkpoints: usize,
    pub loss: BarrierLossConfig,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            patch: 5,
            lr_start: 1e-3,
            lr_end: 1e-5,
            power: 0.9,
            batch: 28,
            iters: 1000,
            seed: 0,
            checkpoints: 6,
            loss: BarrierLossConfig::default(),
        }
    }
}

impl ToyConfig {
    /// Polynomial decay from `lr_start` to `lr_end` over `iters`.
    pub fn lr_at(&self, t: usize) -> f64 {
        if self.iters == 0 {
            return self.lr_start;
        }
        let frac = 1.0 - (t.min(self.iters) as f64 / self.iters as f64);
        self.lr_end + (self.lr_start - self.lr_end) * frac.powf(self.power)
    }

    fn checkpoint_iters(&self) -> Vec<usize> {
        let n = self.checkpoints.max(1);
        if n == 1 || self.iters == 0 {
            return vec![self.iters];
        }
        let mut v: Vec<usize> = (0..n).map(|k| k * self.iters / (n - 1)).collect();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticHead {
    pub fn zeros(n: usize) -> Self {
        LogisticHead { weights: vec![0.0; n], bias: 0.0 }
    }
}

/// Three logistic heads over `patch x patch x 2` input patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelModel {
    pub patch: usize,
    pub lane: LogisticHead,
    pub entry: LogisticHead,
    pub exit: LogisticHead,
}

/// One head's output maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub lane: GridMap,
    pub entry: GridMap,
    pub exit: GridMap,
}

impl PixelModel {
    pub fn zeros(patch: usize) -> Self {
        let n = patch * patch * 2;
        PixelModel { patch, lane: LogisticHead::zeros(n), entry: LogisticHead::zeros(n), exit: LogisticHead::zeros(n) }
    }

    pub fn is_untrained(&self) -> bool {
        [&self.lane, &self.entry, &self.exit].iter().all(|h| h.bias == 0.0 && h.weights.iter().all(|&w| w == 0.0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::json("pixel model", e))
    }

    pub fn predict(&self, input: &GridMap) -> Result<Prediction> {
        let f = Features::new(input, self.patch)?;
        Ok(Prediction {
            lane: f.forward(&self.lane),
            entry: f.forward(&self.entry),
            exit: f.forward(&self.exit),
        })
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// A downsampled observation, zero-padded by the patch radius.
///
/// The drivable channel is signed as `2v - 1` (positive `+1`, unknown `0`,
/// negative `-1`) so that off-road cells carry evidence rather than a zero
/// patch; markings stay in `[0, 1]`. Cells beyond the grid read as zero.
#[derive(Debug, Clone)]
pub struct Features {
    patch: usize,
    h: usize,
    w: usize,
    /// Padded row length and height.
    pw: usize,
    ph: usize,
    /// `2 x ph x pw`.
    data: Vec<f64>,
}

impl Features {
    /// Averages 2x2 input blocks down to label resolution.
    pub fn new(input: &GridMap, patch: usize) -> Result<Self> {
        if input.channels() != 2 || input.height() % 2 != 0 || input.width() % 2 != 0 {
            return Err(Error::Shape(format!("toy learner needs a 2-channel even-sized input, got {:?}", input.shape())));
        }
        let (h, w) = (input.height() / 2, input.width() / 2);
        let r = patch / 2;
        let (ph, pw) = (h + 2 * r, w + 2 * r);
        let mut data = vec![0.0; 2 * ph * pw];
        for c in 0..2 {
            for i in 0..h {
                for j in 0..w {
                    let avg = (input.get(c, 2 * i, 2 * j)
                        + input.get(c, 2 * i + 1, 2 * j)
                        + input.get(c, 2 * i, 2 * j + 1)
                        + input.get(c, 2 * i + 1, 2 * j + 1))
                        / 4.0;
                    data[(c * ph + i + r) * pw + j + r] = if c == CH_DRIVABLE { 2.0 * avg - 1.0 } else { avg };
                }
            }
        }
        Ok(Features { patch, h, w, pw, ph, data })
    }

    /// Row `i` of the grid shifted by patch offset `(di, dj)` in channel `c`.
    fn row(&self, c: usize, di: usize, dj: usize, i: usize) -> &[f64] {
        let start = (c * self.ph + i + di) * self.pw + dj;
        &self.data[start..start + self.w]
    }

    fn logits(&self, head: &LogisticHead) -> Vec<f64> {
        let p = self.patch;
        let mut z = vec![head.bias; self.h * self.w];
        for c in 0..2 {
            for di in 0..p {
                for dj in 0..p {
                    let wk = head.weights[(c * p + di) * p + dj];
                    if wk == 0.0 {
                        continue;
                    }
                    for i in 0..self.h {
                        let src = self.row(c, di, dj, i);
                        for (d, s) in z[i * self.w..(i + 1) * self.w].iter_mut().zip(src) {
                            *d += wk * s;
                        }
                    }
                }
            }
        }
        z
    }

    fn forward(&self, head: &LogisticHead) -> GridMap {
        let y = self.logits(head).into_iter().map(sigmoid).collect();
        GridMap::from_vec(1, self.h, self.w, y).expect("logits cover the grid")
    }

    /// Barrier loss of `head` against `mask` and its gradient with respect
    /// to the head parameters, accumulated into `grad`.
    fn loss_and_grad(&self, head: &LogisticHead, mask: &GridMap, cfg: &BarrierLossConfig, grad: &mut LogisticHead) -> Result<f64> {
        let y = self.forward(head);
        let out = barrier_loss(&y, mask, cfg)?;
        let dz: Vec<f64> = out.grad.data().iter().zip(y.data()).map(|(g, y)| g * y * (1.0 - y)).collect();
        grad.bias += dz.iter().sum::<f64>();
        let p = self.patch;
        for c in 0..2 {
            for di in 0..p {
                for dj in 0..p {
                    let mut acc = 0.0;
                    for i in 0..self.h {
                        let src = self.row(c, di, dj, i);
                        acc += dz[i * self.w..(i + 1) * self.w].iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                    }
                    grad.weights[(c * p + di) * p + dj] += acc;
                }
            }
        }
        Ok(out.loss)
    }
}

/// Binary mask of the label blob around `at` (entry or exit head target).
fn point_mask(label: &GridMap, at: Cell, other: Cell) -> GridMap {
    let (h, w) = (label.height(), label.width());
    let mut m = GridMap::zeros(1, h, w);
    for i in 0..h {
        for j in 0..w {
            let c = Cell::new(i, j);
            if label.get(LABEL_POINTS, i, j) >= 0.5 && c.dist(at) <= c.dist(other) {
                m.set(0, i, j, 1.0);
            }
        }
    }
    m
}

struct Prepared {
    features: Features,
    lane: GridMap,
    entry: GridMap,
    exit: GridMap,
}

/// Held-out evaluation pair: an observation and its full lane label.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub input: GridMap,
    pub lane: GridMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub loss: f64,
    pub acc_pos: f64,
    pub l1_neg: f64,
}

/// Curves as CSV with a header row.
pub fn curves_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("iter,loss,acc_pos,l1_neg\n");
    for p in curve {
        s.push_str(&format!("{},{:.9},{:.9},{:.9}\n", p.iter, p.loss, p.acc_pos, p.l1_neg));
    }
    s
}

fn evaluate(model: &PixelModel, eval: &[(Features, GridMap)]) -> Result<(f64, f64)> {
    if eval.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let (mut a, mut l) = (0.0, 0.0);
    for (f, label) in eval {
        let y = f.forward(&model.lane);
        a += acc_pos(&y, label)?.value;
        l += l1_neg(&y, label)?;
    }
    Ok((a / eval.len() as f64, l / eval.len() as f64))
}

/// Trains the three heads with mini-batch gradient descent on the barrier
/// loss. Returns the model and one curve point per checkpoint, measured on
/// `eval` (lane head).
pub fn toy_train(samples: &[TrainingSample], eval: &[EvalSample], cfg: &ToyConfig) -> Result<(PixelModel, Vec<CurvePoint>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("toy training needs at least one sample".into()));
    }
    if cfg.patch % 2 == 0 || cfg.batch == 0 {
        return Err(Error::InvalidArgument(format!("bad toy schedule {cfg:?}")));
    }
    cfg.loss.validate()?;
    let data: Vec<Prepared> = samples
        .iter()
        .map(|s| {
            Ok(Prepared {
                features: Features::new(&s.input, cfg.patch)?,
                lane: s.label.extract_channel(LABEL_MASK),
                entry: point_mask(&s.label, s.entry_cell, s.exit_cell),
                exit: point_mask(&s.label, s.exit_cell, s.entry_cell),
            })
        })
        .collect::<Result<_>>()?;
    let eval: Vec<(Features, GridMap)> =
        eval.iter().map(|e| Ok((Features::new(&e.input, cfg.patch)?, e.lane.extract_channel(0)))).collect::<Result<_>>()?;

    let mut model = PixelModel::zeros(cfg.patch);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let checkpoints = cfg.checkpoint_iters();
    let mut curve = Vec::new();
    let n = cfg.patch * cfg.patch * 2;
    for t in 0..=cfg.iters {
        let batch: Vec<usize> = (0..cfg.batch).map(|_| rng.random_range(0..data.len())).collect();
        let mut grads = [LogisticHead::zeros(n), LogisticHead::zeros(n), LogisticHead::zeros(n)];
        let mut lane_loss = 0.0;
        for &b in &batch {
            let d = &data[b];
            lane_loss += d.features.loss_and_grad(&model.lane, &d.lane, &cfg.loss, &mut grads[0])?;
            if t < cfg.iters {
                d.features.loss_and_grad(&model.entry, &d.entry, &cfg.loss, &mut grads[1])?;
                d.features.loss_and_grad(&model.exit, &d.exit, &cfg.loss, &mut grads[2])?;
            }
        }
        lane_loss /= cfg.batch as f64;
        if checkpoints.contains(&t) {
            let (a, l) = evaluate(&model, &eval)?;
            log::info!("iter {t}: loss {lane_loss:.4} acc_pos {a:.4} l1_neg {l:.4}");
            curve.push(CurvePoint { iter: t, loss: lane_loss, acc_pos: a, l1_neg: l });
        }
        if t == cfg.iters {
            break;
        }
        let lr = cfg.lr_at(t);
        let scale = lr / cfg.batch as f64;
        for (head, g) in [&mut model.lane, &mut model.entry, &mut model.exit].into_iter().zip(&grads) {
            head.bias -= scale * g.bias;
            for (w, gw) in head.weights.iter_mut().zip(&g.weights) {
                *w -= scale * gw;
            }
        }
    }
    Ok((model, curve))
}

/// Two pixels sharing one logistic unit `σ(w·x + b)`: pixel A (`x = 1`)
/// is a known positive, pixel B (`x = 0.8`) is unknown. Returns the
/// predictions `(y_A, y_B)` before every step and after the last.
pub fn two_pixel_toy(iters: usize, lr: f64, cfg: &BarrierLossConfig) -> Result<Vec<(f64, f64)>> {
    let xs = [1.0, 0.8];
    let mask = GridMap::from_vec(1, 1, 2, vec![1.0, 0.0])?;
    let (mut w, mut b) = (-1.0, -1.0);
    let mut trace = Vec::with_capacity(iters + 1);
    for _ in 0..=iters {
        let y: Vec<f64> = xs.iter().map(|x| sigmoid(w * x + b)).collect();
        trace.push((y[0], y[1]));
        if trace.len() > iters {
            break;
        }
        let out = barrier_loss(&GridMap::from_vec(1, 1, 2, y.clone())?, &mask, cfg)?;
        let (mut gw, mut gb) = (0.0, 0.0);
        for k in 0..2 {
            let dz = out.grad.data()[k] * y[k] * (1.0 - y[k]);
            gw += dz * xs[k];
            gb += dz;
        }
        w -= lr * gw;
        b -= lr * gb;
    }
    Ok(trace)
}
