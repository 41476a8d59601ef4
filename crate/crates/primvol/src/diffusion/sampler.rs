//! Ancestral reverse-process sampling and mask-guided inpainting.
//!
//! The rng draw order is part of the contract: per step, first the
//! sampler's own noise (skipped entirely at the final step), then, only
//! when the mask has known entries, one full-tensor noise draw for the
//! guidance. Inpainting with an all-ones mask therefore consumes exactly
//! the same stream as unconditional sampling and produces identical bits.

use rand::Rng;
use rand_distr::StandardNormal;

use super::denoisers::Denoiser;
use super::forward::{predict_mean, q_sample};
use super::schedule::NoiseSchedule;
use super::tensor::PackedTensor;
use crate::error::{Error, Result};

fn fill_standard_normal<R: Rng + ?Sized>(tensor: &mut PackedTensor, rng: &mut R) {
    for v in tensor.data_mut() {
        *v = rng.sample(StandardNormal);
    }
}

fn check_finite(v: &PackedTensor, t: usize) -> Result<()> {
    if v.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::runtime(format!("sampler state became non-finite at step {t}")));
    }
    Ok(())
}

/// Draws one tensor from the generative model: start at pure noise, then
/// walk the reverse chain down to the clean estimate. The final step adds
/// no noise.
pub fn sample<R: Rng + ?Sized>(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    grid_width: usize,
    payload_res: usize,
    rng: &mut R,
) -> Result<PackedTensor> {
    sample_observed(denoiser, schedule, grid_width, payload_res, rng, |_, _| {})
}

/// `sample` with a callback invoked after every reverse step with the
/// step index just completed and the new state (at noise level t - 1).
pub fn sample_observed<R: Rng + ?Sized>(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    grid_width: usize,
    payload_res: usize,
    rng: &mut R,
    mut observer: impl FnMut(usize, &PackedTensor),
) -> Result<PackedTensor> {
    let mut v = PackedTensor::zeros(grid_width, payload_res)?;
    fill_standard_normal(&mut v, rng);
    for t in (1..=schedule.steps()).rev() {
        v = reverse_step(denoiser, schedule, v, t, rng)?;
        observer(t, &v);
    }
    Ok(v)
}

fn reverse_step<R: Rng + ?Sized>(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    v: PackedTensor,
    t: usize,
    rng: &mut R,
) -> Result<PackedTensor> {
    let mut next = predict_mean(&v, t, denoiser, schedule)?;
    if t > 1 {
        let sigma = schedule.posterior_beta(t).sqrt();
        for x in next.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sigma * z;
        }
    }
    check_finite(&next, t)?;
    Ok(next)
}

/// Reverse sampling with hard guidance: entries where `mask` is 0 are
/// forced after every step to the forward-diffused `known` tensor at the
/// step's noise level (and to `known` exactly at level 0). Entries where
/// `mask` is 1 evolve freely.
pub fn inpaint<R: Rng + ?Sized>(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    known: &PackedTensor,
    mask: &PackedTensor,
    rng: &mut R,
) -> Result<PackedTensor> {
    inpaint_observed(denoiser, schedule, known, mask, rng, |_, _| {})
}

pub fn inpaint_observed<R: Rng + ?Sized>(
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    known: &PackedTensor,
    mask: &PackedTensor,
    rng: &mut R,
    mut observer: impl FnMut(usize, &PackedTensor),
) -> Result<PackedTensor> {
    known.validate()?;
    if !known.same_shape(mask) {
        return Err(Error::validation("mask shape differs from the known tensor"));
    }
    if mask.data().iter().any(|&m| m != 0.0 && m != 1.0) {
        return Err(Error::validation("mask entries must be exactly 0 or 1"));
    }
    let has_known = mask.data().iter().any(|&m| m == 0.0);
    let mut v = PackedTensor::zeros(known.grid_width(), known.payload_res())?;
    fill_standard_normal(&mut v, rng);
    for t in (1..=schedule.steps()).rev() {
        v = reverse_step(denoiser, schedule, v, t, rng)?;
        if has_known {
            let guidance = if t == 1 {
                known.clone()
            } else {
                let mut eps = PackedTensor::zeros(known.grid_width(), known.payload_res())?;
                fill_standard_normal(&mut eps, rng);
                q_sample(known, t - 1, &eps, schedule)?
            };
            for ((x, &m), &g) in v.data_mut().iter_mut().zip(mask.data()).zip(guidance.data()) {
                if m == 0.0 {
                    *x = g;
                }
            }
            // the guidance is a hard constraint, not a nudge
            for ((&x, &m), &g) in v.data().iter().zip(mask.data()).zip(guidance.data()) {
                assert!(m != 0.0 || x == g, "guided entry diverged at step {t}");
            }
        }
        observer(t, &v);
    }
    Ok(v)
}
