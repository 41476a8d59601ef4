//! Clean-data predictors for the reverse process.
//!
//! The sampler only needs something that maps a noisy tensor at step t to
//! an estimate of the clean tensor. The two reference implementations here
//! are exactly solvable, so every sampler property can be checked in closed
//! form; a trained network slots in through the same trait.

use super::schedule::NoiseSchedule;
use super::tensor::PackedTensor;
use crate::error::{Error, Result};

/// Predicts the clean tensor from a noisy one. The schedule rides along
/// because analytic denoisers need the signal level at t.
pub trait Denoiser {
    fn denoise(&self, v_t: &PackedTensor, t: usize, schedule: &NoiseSchedule) -> PackedTensor;
}

/// Exact conditional expectation E[V0 | V_t] when the data itself is
/// Gaussian with the given per-element mean and shared variance. With
/// mean 0 and variance 1 the data distribution equals the prior and the
/// whole reverse chain has known marginals, which is what the sampler
/// tests lean on.
pub struct GaussianOracleDenoiser {
    mean: PackedTensor,
    variance: f64,
}

impl GaussianOracleDenoiser {
    pub fn new(mean: PackedTensor, variance: f64) -> Result<GaussianOracleDenoiser> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::validation(format!("variance {variance} must be positive")));
        }
        mean.validate()?;
        Ok(GaussianOracleDenoiser { mean, variance })
    }

    pub fn standard(grid_width: usize, payload_res: usize) -> GaussianOracleDenoiser {
        let mean = PackedTensor::zeros(grid_width, payload_res)
            .expect("dimensions are caller-checked positive");
        GaussianOracleDenoiser { mean, variance: 1.0 }
    }
}

impl Denoiser for GaussianOracleDenoiser {
    fn denoise(&self, v_t: &PackedTensor, t: usize, schedule: &NoiseSchedule) -> PackedTensor {
        assert!(v_t.same_shape(&self.mean), "noisy tensor shape differs from the oracle mean");
        let abar = schedule.alpha_bar(t);
        let gain = abar.sqrt() * self.variance / (abar * self.variance + 1.0 - abar);
        let root = abar.sqrt();
        let mut out = v_t.clone();
        for (o, &m) in out.data_mut().iter_mut().zip(self.mean.data()) {
            *o = m + gain * (*o - root * m);
        }
        out
    }
}

/// Returns the dataset item whose forward-diffused version is closest to
/// the observation, squared L2, ties to the lowest index. A memorizing
/// denoiser: the reverse chain converges onto dataset items.
pub struct NearestNeighborDenoiser {
    dataset: Vec<PackedTensor>,
}

impl NearestNeighborDenoiser {
    pub fn new(dataset: Vec<PackedTensor>) -> Result<NearestNeighborDenoiser> {
        let first = dataset
            .first()
            .ok_or_else(|| Error::validation("nearest-neighbor denoiser needs a nonempty dataset"))?;
        for (i, item) in dataset.iter().enumerate() {
            item.validate()?;
            if !item.same_shape(first) {
                return Err(Error::validation(format!(
                    "dataset item {i} has a different shape from item 0"
                )));
            }
        }
        Ok(NearestNeighborDenoiser { dataset })
    }

    pub fn dataset(&self) -> &[PackedTensor] {
        &self.dataset
    }
}

impl Denoiser for NearestNeighborDenoiser {
    fn denoise(&self, v_t: &PackedTensor, t: usize, schedule: &NoiseSchedule) -> PackedTensor {
        assert!(
            v_t.same_shape(&self.dataset[0]),
            "noisy tensor shape differs from the dataset items"
        );
        let root = schedule.alpha_bar(t).sqrt();
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, item) in self.dataset.iter().enumerate() {
            let dist: f64 = v_t
                .data()
                .iter()
                .zip(item.data())
                .map(|(&v, &x)| {
                    let d = v - root * x;
                    d * d
                })
                .sum();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        self.dataset[best].clone()
    }
}
