//! Per-subject inverse rendering: reconstruction losses, a hand-written
//! backward pass through the ray march, and the Adam loop that fits payloads
//! and per-primitive scale corrections to calibrated multi-view captures.

pub(crate) mod backward;
mod fit;
mod loss;

pub use backward::{render_backward, Gradients};
pub use fit::{
    fit_subject, FitConfig, FitResult, LossRow, MultiViewSample, SIGMA_INIT, SIGMA_MAX,
};
pub use loss::{loss_rec, psnr, volume_total, LossBreakdown, LossWeights};
