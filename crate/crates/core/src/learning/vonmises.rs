//! Von Mises densities, their mixtures, and quadrature KL divergence.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::normalize_angle;

/// Largest concentration the series evaluation supports.
pub const MAX_KAPPA: f64 = 700.0;
/// Floor applied to `p` inside the logarithm of the KL integrand.
pub const KL_FLOOR: f64 = 1e-12;

/// Modified Bessel function of the first kind, order 0, by power series.
pub fn bessel_i0(x: f64) -> Result<f64> {
    if x > MAX_KAPPA {
        return Err(Error::ConcentrationRange(x));
    }
    let q = x * x / 4.0;
    let (mut sum, mut term, mut k) = (1.0, 1.0, 0.0);
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term < 1e-16 * sum {
            return Ok(sum);
        }
    }
}

/// Modified Bessel function of the first kind, order 1, by power series.
pub fn bessel_i1(x: f64) -> Result<f64> {
    if x > MAX_KAPPA {
        return Err(Error::ConcentrationRange(x));
    }
    let q = x * x / 4.0;
    let (mut term, mut k) = (x / 2.0, 0.0);
    let mut sum = term;
    if sum == 0.0 {
        return Ok(0.0);
    }
    loop {
        k += 1.0;
        term *= q / (k * (k + 1.0));
        sum += term;
        if term < 1e-16 * sum {
            return Ok(sum);
        }
    }
}

/// `ln I0(x)`, switching to the large-argument expansion past the series range.
pub fn log_i0(x: f64) -> f64 {
    match bessel_i0(x) {
        Ok(v) => v.ln(),
        Err(_) => x - 0.5 * (TAU * x).ln() + (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x)).ln(),
    }
}

/// `I1(x) / I0(x)`, the mean resultant length of a von Mises density.
pub fn bessel_ratio(x: f64) -> f64 {
    match (bessel_i1(x), bessel_i0(x)) {
        (Ok(a), Ok(b)) => a / b,
        _ => 1.0 - 1.0 / (2.0 * x) - 1.0 / (8.0 * x * x),
    }
}

/// Von Mises density `exp(κ cos(θ − μ)) / (2π I0(κ))`.
pub fn vm_pdf(theta: f64, mu: f64, kappa: f64) -> f64 {
    (kappa * (theta - mu).cos() - log_i0(kappa)).exp() / TAU
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VmComponent {
    pub weight: f64,
    pub mean: f64,
    pub kappa: f64,
}

impl VmComponent {
    pub fn new(weight: f64, mean: f64, kappa: f64) -> Self {
        VmComponent { weight, mean: normalize_angle(mean), kappa }
    }

    pub fn is_active(&self) -> bool {
        self.weight > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VonMisesMixture {
    pub components: Vec<VmComponent>,
}

impl VonMisesMixture {
    pub fn new(components: Vec<VmComponent>) -> Self {
        VonMisesMixture { components }
    }

    pub fn unimodal(mean: f64, kappa: f64) -> Self {
        Self::new(vec![VmComponent::new(1.0, mean, kappa)])
    }

    pub fn is_active(&self) -> bool {
        self.components.iter().any(VmComponent::is_active)
    }

    /// Weights nonnegative and summing to one whenever any is active.
    pub fn validate(&self) -> Result<()> {
        if self.components.iter().any(|c| c.weight < 0.0 || c.kappa < 0.0) {
            return Err(Error::InvalidArgument("negative mixture weight or concentration".into()));
        }
        let s: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.is_active() && (s - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {s}")));
        }
        Ok(())
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        mixture_pdf(theta, self)
    }
}

/// `Σ π_k · vm_pdf(θ, μ_k, κ_k)`.
pub fn mixture_pdf(theta: f64, m: &VonMisesMixture) -> f64 {
    m.components
        .iter()
        .filter(|c| c.is_active())
        .map(|c| c.weight * vm_pdf(theta, c.mean, c.kappa))
        .sum()
}

/// Angles of the periodic trapezoid rule on `[0, 2π)`.
pub fn quadrature_grid(bins: usize) -> impl Iterator<Item = f64> {
    let h = TAU / bins as f64;
    (0..bins).map(move |k| k as f64 * h)
}

/// `∫ p log(p / q) dθ` by the periodic trapezoid rule with `bins` nodes;
/// `p` is floored at [`KL_FLOOR`] inside the logarithm only.
///
/// # Panics
/// If `bins < 64`.
pub fn kl_divergence(p: &VonMisesMixture, q: &VonMisesMixture, bins: usize) -> f64 {
    assert!(bins >= 64, "kl_divergence needs at least 64 bins, got {bins}");
    let h = TAU / bins as f64;
    let (pd, qd) = (density_on_grid(p, bins), density_on_grid(q, bins));
    pd.iter().zip(&qd).map(|(&pv, &qv)| pv * (pv.max(KL_FLOOR).ln() - qv.ln())).sum::<f64>() * h
}

/// Mixture density at the quadrature nodes, with each normalizer
/// evaluated once.
fn density_on_grid(m: &VonMisesMixture, bins: usize) -> Vec<f64> {
    let comps: Vec<(f64, f64, f64, f64)> = m
        .components
        .iter()
        .filter(|c| c.is_active())
        .map(|c| (c.weight, c.mean, c.kappa, log_i0(c.kappa)))
        .collect();
    quadrature_grid(bins)
        .map(|t| comps.iter().map(|&(w, mu, k, ln)| w * (k * (t - mu).cos() - ln).exp()).sum::<f64>() / TAU)
        .collect()
}

/// Differentiable mixture parameters: softmax logits, means, log-concentrations.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub logits: Vec<f64>,
    pub means: Vec<f64>,
    pub log_kappa: Vec<f64>,
}

impl MixtureParams {
    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        let m = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    pub fn to_mixture(&self) -> VonMisesMixture {
        let w = self.weights();
        VonMisesMixture::new(
            (0..self.len())
                .map(|k| VmComponent::new(w[k], self.means[k], self.log_kappa[k].exp()))
                .collect(),
        )
    }

    /// Flattened as `[logits.., means.., log_kappa..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.logits.clone();
        v.extend_from_slice(&self.means);
        v.extend_from_slice(&self.log_kappa);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let k = v.len() / 3;
        MixtureParams {
            logits: v[..k].to_vec(),
            means: v[k..2 * k].to_vec(),
            log_kappa: v[2 * k..3 * k].to_vec(),
        }
    }

    pub fn zeros(k: usize) -> Self {
        MixtureParams { logits: vec![0.0; k], means: vec![0.0; k], log_kappa: vec![0.0; k] }
    }
}

/// Chain rule from `∂L/∂p(θ_b)` at each quadrature node to the mixture
/// parameters.
pub(crate) fn backprop_density(params: &MixtureParams, thetas: &[f64], dl_dp: &[f64]) -> MixtureParams {
    let k = params.len();
    let w = params.weights();
    let kappas: Vec<f64> = params.log_kappa.iter().map(|s| s.exp()).collect();
    let ratios: Vec<f64> = kappas.iter().map(|&x| bessel_ratio(x)).collect();
    let mut g = MixtureParams::zeros(k);
    for (b, &t) in thetas.iter().enumerate() {
        let f: Vec<f64> = (0..k).map(|c| vm_pdf(t, params.means[c], kappas[c])).collect();
        let p: f64 = (0..k).map(|c| w[c] * f[c]).sum();
        let d = dl_dp[b];
        for c in 0..k {
            let diff = t - params.means[c];
            g.logits[c] += d * w[c] * (f[c] - p);
            g.means[c] += d * w[c] * f[c] * kappas[c] * diff.sin();
            g.log_kappa[c] += d * w[c] * kappas[c] * f[c] * (diff.cos() - ratios[c]);
        }
    }
    g
}

/// KL divergence of the mixture from a fixed target and its gradient with
/// respect to the mixture parameters, both exact for the quadrature sum.
pub fn kl_with_grad(params: &MixtureParams, target: &VonMisesMixture, bins: usize) -> (f64, MixtureParams) {
    let h = TAU / bins as f64;
    let thetas: Vec<f64> = quadrature_grid(bins).collect();
    let m = params.to_mixture();
    let mut loss = 0.0;
    let mut dl_dp = vec![0.0; bins];
    for (b, &t) in thetas.iter().enumerate() {
        let p = m.pdf(t);
        let lq = target.pdf(t).ln();
        if p >= KL_FLOOR {
            loss += h * p * (p.ln() - lq);
            dl_dp[b] = h * (p.ln() - lq + 1.0);
        } else {
            loss += h * p * (KL_FLOOR.ln() - lq);
            dl_dp[b] = h * (KL_FLOOR.ln() - lq);
        }
    }
    (loss, backprop_density(params, &thetas, &dl_dp))
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = normalize_angle(a);
    if r > PI {
        r - TAU
    } else {
        r
    }
}
