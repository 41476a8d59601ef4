//! Packed primitive tensors, the noise schedule, and ancestral sampling.

mod denoisers;
mod forward;
mod pack;
mod sampler;
mod schedule;
mod tensor;

pub use denoisers::{Denoiser, GaussianOracleDenoiser, NearestNeighborDenoiser};
pub use forward::{posterior_mean, predict_mean, q_sample, simple_loss};
pub use pack::{pack, unpack, unpack_payloads};
pub use sampler::{inpaint, inpaint_observed, sample, sample_observed};
pub use schedule::{
    make_schedule, NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS,
};
pub use tensor::{
    load_packed_tensor, save_packed_tensor, Normalization, PackedTensor, CHANNELS,
};
