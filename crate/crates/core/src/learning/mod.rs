//! Loss kernels, von Mises mathematics, and a small per-pixel learner.

pub mod fit;
pub mod losses;
pub mod toy;
pub mod vonmises;

pub use fit::{fit_vm_mixture, FitResult};
pub use losses::{
    barrier_loss, directional_loss, directional_loss_grad, grad_check, BarrierLossConfig, BarrierOutput, CeSign,
    DirectionalLoss,
};
pub use toy::{curves_csv, toy_train, two_pixel_toy, CurvePoint, EvalSample, PixelModel, Prediction, ToyConfig};
pub use vonmises::{bessel_i0, bessel_i1, kl_divergence, mixture_pdf, vm_pdf, MixtureParams, VmComponent, VonMisesMixture};
