//! Fitting a von Mises mixture to sampled directions.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vonmises::{backprop_density, quadrature_grid, vm_pdf, MixtureParams, VonMisesMixture};
use crate::error::{Error, Result};
use crate::grid::angle_diff;
use crate::oracle::{LABEL_KAPPA, MAX_COMPONENTS};

const BINS: usize = 256;
const STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub mixture: VonMisesMixture,
    /// Concentrations after every iteration, component-major per entry.
    pub kappa_trace: Vec<Vec<f64>>,
    pub loss_trace: Vec<f64>,
}

/// Fits `k` components by gradient descent on softmax weights, means and
/// log-concentrations, minimizing the KL divergence from the empirical label
/// distribution (the average of label densities of concentration
/// [`LABEL_KAPPA`] centred on each sample) to the mixture. Means start at
/// farthest-point picks among the samples, weights uniform, `κ = 1`.
pub fn fit_vm_mixture(samples: &[f64], k: usize, iters: usize, seed: u64) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("mixture fit needs at least one sample".into()));
    }
    if k == 0 || k > MAX_COMPONENTS {
        return Err(Error::InvalidArgument(format!("component count {k} outside 1..={MAX_COMPONENTS}")));
    }
    let thetas: Vec<f64> = quadrature_grid(BINS).collect();
    let h = TAU / BINS as f64;
    let target: Vec<f64> = thetas
        .iter()
        .map(|&t| samples.iter().map(|&s| vm_pdf(t, s, LABEL_KAPPA)).sum::<f64>() / samples.len() as f64)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = vec![samples[rng.random_range(0..samples.len())]];
    while means.len() < k {
        let far = samples
            .iter()
            .copied()
            .max_by(|a, b| {
                let da = means.iter().map(|m| angle_diff(*a, *m)).fold(f64::INFINITY, f64::min);
                let db = means.iter().map(|m| angle_diff(*b, *m)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .expect("non-empty samples");
        means.push(far);
    }
    let mut p = MixtureParams { logits: vec![0.0; k], means, log_kappa: vec![0.0; k] };
    let mut kappa_trace = Vec::with_capacity(iters);
    let mut loss_trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let m = p.to_mixture();
        let mut loss = 0.0;
        let mut dl_dp = vec![0.0; BINS];
        for (b, &t) in thetas.iter().enumerate() {
            let q = m.pdf(t).max(1e-300);
            let pt = target[b];
            loss += h * pt * (pt.max(1e-12).ln() - q.ln());
            dl_dp[b] = -h * pt / q;
        }
        let g = backprop_density(&p, &thetas, &dl_dp);
        for c in 0..k {
            p.logits[c] -= STEP * g.logits[c];
            p.means[c] -= STEP * g.means[c];
            p.log_kappa[c] -= STEP * g.log_kappa[c];
        }
        loss_trace.push(loss);
        kappa_trace.push(p.log_kappa.iter().map(|s| s.exp()).collect());
    }
    Ok(FitResult { mixture: p.to_mixture(), kappa_trace, loss_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn dominant(m: &VonMisesMixture) -> f64 {
        m.components.iter().max_by(|a, b| a.weight.total_cmp(&b.weight)).unwrap().mean
    }

    #[test]
    fn equal_samples_recover_the_mean() {
        let mu = 2.2;
        let r = fit_vm_mixture(&[mu; 10], 3, 1500, 1).unwrap();
        assert!(angle_diff(dominant(&r.mixture), mu) < 2f64.to_radians());
    }

    #[test]
    fn two_modes_are_separated() {
        let mu = 0.7;
        let mut s = vec![mu; 6];
        s.extend(vec![mu + FRAC_PI_2; 6]);
        let r = fit_vm_mixture(&s, 2, 2000, 4).unwrap();
        let comps = &r.mixture.components;
        for target in [mu, mu + FRAC_PI_2] {
            let c = comps.iter().min_by(|a, b| angle_diff(a.mean, target).total_cmp(&angle_diff(b.mean, target))).unwrap();
            assert!(angle_diff(c.mean, target) < 5f64.to_radians(), "{comps:?}");
            assert!((c.weight - 0.5).abs() <= 0.1);
        }
    }

    #[test]
    fn single_component_sharpens_monotonically() {
        let r = fit_vm_mixture(&[1.0; 5], 1, 2000, 0).unwrap();
        let k: Vec<f64> = r.kappa_trace.iter().map(|v| v[0]).collect();
        for w in k.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
        assert!(k[0] < k[k.len() - 1]);
        // the empirical density is itself a κ = 8 von Mises
        assert!((k[k.len() - 1] - LABEL_KAPPA).abs() < 0.5, "{}", k[k.len() - 1]);
    }

    #[test]
    fn fit_is_deterministic() {
        let s = [0.1, 0.2, 3.0, 3.1];
        assert_eq!(fit_vm_mixture(&s, 2, 100, 9).unwrap(), fit_vm_mixture(&s, 2, 100, 9).unwrap());
        assert!(fit_vm_mixture(&[], 1, 10, 0).is_err());
    }
}
