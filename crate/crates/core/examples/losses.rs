//! The partial-label barrier loss and the directional KL loss, with their
//! gradients checked against finite differences.

use std::f64::consts::TAU;

use lanegraph::learning::{
    barrier_loss, directional_loss_grad, grad_check, BarrierLossConfig, CeSign, MixtureParams,
};
use lanegraph::GridMap;

fn main() -> lanegraph::Result<()> {
    let cfg = BarrierLossConfig::default();
    // one known positive, three unlabeled cells
    let mask = GridMap::from_vec(1, 1, 4, vec![1.0, 0.0, 0.0, 0.0])?;
    for y in [[0.5, 0.1, 0.1, 0.1], [0.9, 0.1, 0.1, 0.1], [0.9, 0.9, 0.9, 0.9]] {
        let out = barrier_loss(&GridMap::from_vec(1, 1, 4, y.to_vec())?, &mask, &cfg)?;
        println!("y = {y:?}: loss {:.4}, clipped grad {:?}", out.loss, out.grad.data());
    }
    let literal = BarrierLossConfig { ce_sign: CeSign::Literal, ..cfg };
    let single = GridMap::from_vec(1, 1, 1, vec![0.5])?;
    let one = GridMap::from_vec(1, 1, 1, vec![1.0])?;
    println!(
        "single positive at 0.5: penalty sign {:.1}, literal sign {:.1}",
        barrier_loss(&single, &one, &cfg)?.loss,
        barrier_loss(&single, &one, &literal)?.loss
    );

    let y0 = [0.3, 0.6, 0.2, 0.7];
    let f = |x: &[f64]| {
        let o = barrier_loss(&GridMap::from_vec(1, 1, 4, x.to_vec()).unwrap(), &mask, &cfg).unwrap();
        (o.loss, o.raw_grad.into_data())
    };
    println!("barrier gradient check: max rel err {:.2e}", grad_check(f, &y0, 1e-5));

    // two cells, each a two-component mixture, against label headings
    let labels = [0.4, 2.0];
    let mut params = MixtureParams::zeros(2);
    params.means = vec![0.0, TAU / 3.0];
    let x: Vec<f64> = [params.to_vec(), params.to_vec()].concat();
    let g = |v: &[f64]| {
        let cells: Vec<MixtureParams> = v.chunks(v.len() / 2).map(MixtureParams::from_slice).collect();
        let (l, g) = directional_loss_grad(&cells, &labels, 8.0, 256);
        (l, g.iter().flat_map(MixtureParams::to_vec).collect())
    };
    println!("directional loss {:.4}, gradient check: max rel err {:.2e}", g(&x).0, grad_check(g, &x, 1e-5));
    Ok(())
}
