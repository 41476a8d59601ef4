//! Reconstruction objective and image metric.

use crate::error::{Error, Result};
use crate::renderer::{PrimitiveSet, RenderOutput};

/// Weights of the three reconstruction terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub rgb: f64,
    pub sil: f64,
    pub vol: f64,
}

impl Default for LossWeights {
    fn default() -> LossWeights {
        LossWeights { rgb: 1.0, sil: 0.1, vol: 0.01 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("rgb", self.rgb), ("sil", self.sil), ("vol", self.vol)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::validation(format!("loss weight {name} = {w} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Weighted total and the raw per-term values it was built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub rgb: f64,
    pub sil: f64,
    pub vol: f64,
}

/// Total primitive volume: the sum over primitives of the product of their
/// full scales. Penalizing it keeps boxes from swelling into empty space.
pub fn volume_total(set: &PrimitiveSet) -> f64 {
    set.kin.iter().map(|k| k.scale().component_product()).sum()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sum / a.len() as f64
}

/// Mean-square reconstruction loss of one rendered view against its target
/// image and silhouette mask, plus the volume regularizer. The rgb term
/// averages over pixels and channels; the silhouette term over pixels.
pub fn loss_rec(
    render: &RenderOutput,
    target_rgb: &[f64],
    target_mask: &[f64],
    set: &PrimitiveSet,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    weights.validate()?;
    if render.rgb.len() != target_rgb.len() || render.alpha.len() != target_mask.len() {
        return Err(Error::validation(format!(
            "target size mismatch: {} rgb / {} mask values against a {}x{} render",
            target_rgb.len(),
            target_mask.len(),
            render.width,
            render.height
        )));
    }
    if target_rgb.is_empty() {
        return Err(Error::validation("cannot take a loss over an empty image"));
    }
    let rgb = mse(&render.rgb, target_rgb);
    let sil = mse(&render.alpha, target_mask);
    let vol = volume_total(set);
    Ok(LossBreakdown {
        total: weights.rgb * rgb + weights.sil * sil + weights.vol * vol,
        rgb,
        sil,
        vol,
    })
}

/// Peak signal-to-noise ratio in dB for images with values in [0,1],
/// computed over all channels. Identical inputs return +infinity.
pub fn psnr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "image size mismatch: {} vs {} values",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::validation("cannot take psnr of empty images"));
    }
    let mse = mse(a, b);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::PrimitiveKinematics;
    use crate::math::{Quat, Vec3};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn set_with_scales(scales: &[Vec3]) -> PrimitiveSet {
        let kin = scales
            .iter()
            .map(|&s| PrimitiveKinematics {
                translation: Vec3::ZERO,
                rotation: Quat::IDENTITY,
                base_scale: s,
                delta_scale: Vec3::ONE,
            })
            .collect();
        PrimitiveSet::with_constant_payload(1, 2, kin, [0.5; 3], 1.0)
    }

    fn render_of(rgb: Vec<f64>, alpha: Vec<f64>, w: usize, h: usize) -> RenderOutput {
        let depth = vec![0.0; alpha.len()];
        RenderOutput { width: w, height: h, rgb, alpha, depth }
    }

    #[test]
    fn perfect_reconstruction_costs_nothing() {
        let rgb = vec![0.3; 12];
        let alpha = vec![1.0; 4];
        let render = render_of(rgb.clone(), alpha.clone(), 2, 2);
        let set = set_with_scales(&[Vec3::ONE]);
        let weights = LossWeights { vol: 0.0, ..LossWeights::default() };
        let out = loss_rec(&render, &rgb, &alpha, &set, &weights).unwrap();
        assert_eq!(out.total, 0.0);
        assert_eq!(out.rgb, 0.0);
        assert_eq!(out.sil, 0.0);
    }

    #[test]
    fn volume_term_sums_scale_products() {
        let set = set_with_scales(&[Vec3::ONE, Vec3::new(2.0, 3.0, 4.0)]);
        assert_eq!(volume_total(&set), 25.0);

        let render = render_of(vec![0.0; 3], vec![0.0], 1, 1);
        let weights = LossWeights { rgb: 0.0, sil: 0.0, vol: 1.0 };
        let out = loss_rec(&render, &[0.0; 3], &[0.0], &set, &weights).unwrap();
        assert_eq!(out.total, 25.0);
    }

    #[test]
    fn random_images_match_a_directly_coded_mean_square() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let n = 16;
        let rgb: Vec<f64> = (0..n * 3).map(|_| rng.random()).collect();
        let alpha: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let t_rgb: Vec<f64> = (0..n * 3).map(|_| rng.random()).collect();
        let t_a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let set = set_with_scales(&[Vec3::new(0.5, 0.5, 0.5)]);
        let weights = LossWeights { rgb: 1.0, sil: 0.1, vol: 0.01 };
        let render = render_of(rgb.clone(), alpha.clone(), 4, 4);
        let out = loss_rec(&render, &t_rgb, &t_a, &set, &weights).unwrap();

        let mut acc_rgb = 0.0;
        for i in 0..n * 3 {
            acc_rgb += (rgb[i] - t_rgb[i]).powi(2);
        }
        let mut acc_a = 0.0;
        for i in 0..n {
            acc_a += (alpha[i] - t_a[i]).powi(2);
        }
        let expect = acc_rgb / (n * 3) as f64 + 0.1 * (acc_a / n as f64) + 0.01 * 0.125;
        assert!((out.total - expect).abs() < 1e-7);
    }

    #[test]
    fn loss_rejects_mismatched_targets() {
        let render = render_of(vec![0.0; 12], vec![0.0; 4], 2, 2);
        let set = set_with_scales(&[Vec3::ONE]);
        let w = LossWeights::default();
        assert!(loss_rec(&render, &[0.0; 11], &[0.0; 4], &set, &w).is_err());
        assert!(loss_rec(&render, &[0.0; 12], &[0.0; 3], &set, &w).is_err());
    }

    #[test]
    fn psnr_sentinel_and_constant_offset() {
        let a = vec![0.4; 30];
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);

        let b: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        assert_relative_eq!(psnr(&a, &b).unwrap(), 20.0, epsilon = 1e-12);

        assert!(psnr(&a, &[0.0; 3]).is_err());
    }

    #[test]
    fn psnr_matches_independent_mse() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let a: Vec<f64> = (0..48).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..48).map(|_| rng.random()).collect();
        let mse: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 48.0;
        let expect = 10.0 * (1.0 / mse).log10();
        assert!((psnr(&a, &b).unwrap() - expect).abs() < 1e-6);
    }
}
