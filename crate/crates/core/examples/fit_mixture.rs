//! Fits a von Mises mixture to observed headings, e.g. the trajectory
//! directions crossing one cell of a junction.

use lanegraph::learning::{fit_vm_mixture, VonMisesMixture};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> lanegraph::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.05).expect("sigma");
    // straight through at 0 deg, twice as often as the left turn at 90 deg
    let samples: Vec<f64> = (0..90)
        .map(|k| {
            let mode: f64 = if k % 3 == 2 { 90.0 } else { 0.0 };
            mode.to_radians() + noise.sample(&mut rng)
        })
        .collect();

    for k in 1..=3 {
        let fit = fit_vm_mixture(&samples, k, 400, 0)?;
        print!("K={k}: final KL {:.4}  ", fit.loss_trace.last().unwrap());
        describe(&fit.mixture);
    }

    let fit = fit_vm_mixture(&samples, 1, 400, 0)?;
    let kappa: Vec<String> = fit.kappa_trace.iter().step_by(80).map(|k| format!("{:.2}", k[0])).collect();
    println!("single-component concentration every 80 iterations: {}", kappa.join(" "));
    Ok(())
}

fn describe(m: &VonMisesMixture) {
    let parts: Vec<String> = m
        .components
        .iter()
        .map(|c| format!("{:.2} @ {:.1} deg (kappa {:.1})", c.weight, c.mean.to_degrees(), c.kappa))
        .collect();
    println!("{}", parts.join(", "));
}
