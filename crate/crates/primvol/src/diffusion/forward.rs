//! Closed-form pieces of the diffusion process: the forward jump to any
//! step, the exact posterior of one reverse step, the denoiser-driven
//! reverse mean, and the training objective those three justify.

use super::denoisers::Denoiser;
use super::schedule::NoiseSchedule;
use super::tensor::PackedTensor;
use crate::error::{Error, Result};

fn check_step(schedule: &NoiseSchedule, t: usize) -> Result<()> {
    if !schedule.contains(t) {
        return Err(Error::validation(format!(
            "step {t} outside this schedule's 1..={}",
            schedule.steps()
        )));
    }
    Ok(())
}

fn check_same_shape(a: &PackedTensor, b: &PackedTensor, what: &str) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::validation(format!(
            "{what}: ({}, {}) vs ({}, {})",
            a.grid_width(),
            a.payload_res(),
            b.grid_width(),
            b.payload_res()
        )));
    }
    Ok(())
}

/// One jump of the forward process: sqrt(abar_t) * v0 + sqrt(1 - abar_t) * noise.
pub fn q_sample(
    v0: &PackedTensor,
    t: usize,
    noise: &PackedTensor,
    schedule: &NoiseSchedule,
) -> Result<PackedTensor> {
    check_step(schedule, t)?;
    check_same_shape(v0, noise, "noise shape differs from the data")?;
    let abar = schedule.alpha_bar(t);
    let (signal, spread) = (abar.sqrt(), (1.0 - abar).sqrt());
    let mut out = v0.clone();
    for (o, &n) in out.data_mut().iter_mut().zip(noise.data()) {
        *o = signal * *o + spread * n;
    }
    Ok(out)
}

/// Mean and variance of the exact reverse-step posterior q(V_{t-1} | V_t, V0).
///
/// The t = 1 case returns (v0, 0) directly: with abar_0 defined as 1 the
/// coefficients are exactly (0, 1), but recomputing them in floats rounds
/// (1 - abar_1 is not bitwise beta_1), and downstream code relies on the
/// final step being deterministic.
pub fn posterior_mean(
    v_t: &PackedTensor,
    v0: &PackedTensor,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<(PackedTensor, f64)> {
    check_step(schedule, t)?;
    check_same_shape(v_t, v0, "clean tensor shape differs from the noisy one")?;
    if t == 1 {
        return Ok((v0.clone(), 0.0));
    }
    let abar = schedule.alpha_bar(t);
    let abar_prev = schedule.alpha_bar_prev(t);
    let c_t = schedule.alpha(t).sqrt() * (1.0 - abar_prev) / (1.0 - abar);
    let c_0 = abar_prev.sqrt() * schedule.beta(t) / (1.0 - abar);
    let mut out = v_t.clone();
    for (o, &clean) in out.data_mut().iter_mut().zip(v0.data()) {
        *o = c_t * *o + c_0 * clean;
    }
    Ok((out, schedule.posterior_beta(t)))
}

/// Reverse-step mean with the denoiser's clean estimate standing in for V0:
/// (1/sqrt(alpha_t)) * (V_t - [(1-alpha_t)/(1-abar_t)] * (V_t - sqrt(abar_t) * g)).
pub fn predict_mean(
    v_t: &PackedTensor,
    t: usize,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
) -> Result<PackedTensor> {
    check_step(schedule, t)?;
    let g = denoiser.denoise(v_t, t, schedule);
    check_same_shape(v_t, &g, "denoiser output shape differs from its input")?;
    let alpha = schedule.alpha(t);
    let abar = schedule.alpha_bar(t);
    let shrink = (1.0 - alpha) / (1.0 - abar);
    let root_abar = abar.sqrt();
    let inv_root_alpha = 1.0 / alpha.sqrt();
    let mut out = v_t.clone();
    for (o, &clean) in out.data_mut().iter_mut().zip(g.data()) {
        *o = inv_root_alpha * (*o - shrink * (*o - root_abar * clean));
    }
    Ok(out)
}

/// Mean squared error between the clean tensor and the denoiser's estimate
/// of it from one forward jump with the given noise.
pub fn simple_loss(
    v0: &PackedTensor,
    t: usize,
    noise: &PackedTensor,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
) -> Result<f64> {
    let v_t = q_sample(v0, t, noise, schedule)?;
    let g = denoiser.denoise(&v_t, t, schedule);
    check_same_shape(v0, &g, "denoiser output shape differs from its input")?;
    let sum: f64 = v0
        .data()
        .iter()
        .zip(g.data())
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .sum();
    Ok(sum / v0.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_schedule;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    struct ConstDenoiser(PackedTensor);
    impl Denoiser for ConstDenoiser {
        fn denoise(&self, _v: &PackedTensor, _t: usize, _s: &NoiseSchedule) -> PackedTensor {
            self.0.clone()
        }
    }

    struct WrongShapeDenoiser;
    impl Denoiser for WrongShapeDenoiser {
        fn denoise(&self, _v: &PackedTensor, _t: usize, _s: &NoiseSchedule) -> PackedTensor {
            PackedTensor::zeros(3, 2).unwrap()
        }
    }

    fn filled(seed: u64, scale: f64) -> PackedTensor {
        let mut t = PackedTensor::zeros(2, 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for v in t.data_mut() {
            *v = scale * rng.sample::<f64, _>(StandardNormal);
        }
        t
    }

    #[test]
    fn forward_jump_matches_the_worked_scalar() {
        // one step with beta 0.75 makes the signal level exactly 0.25
        let sched = make_schedule(1, 0.75, 0.75).unwrap();
        let mut v0 = PackedTensor::zeros(1, 1).unwrap();
        let mut noise = PackedTensor::zeros(1, 1).unwrap();
        v0.data_mut()[0] = 1.0;
        noise.data_mut()[0] = 0.5;
        let v_t = q_sample(&v0, 1, &noise, &sched).unwrap();
        assert!((v_t.data()[0] - 0.9330127018922193).abs() < 1e-15);
        assert_eq!(v_t.data()[1], 0.0);
    }

    #[test]
    fn forward_jump_moments_match_the_closed_form() {
        let sched = make_schedule(200, 1e-4, 0.04).unwrap();
        let t = 120;
        let abar = sched.alpha_bar(t);
        let mut v0 = PackedTensor::zeros(1, 1).unwrap();
        for v in v0.data_mut() {
            *v = 0.7;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let trials = 100_000 / v0.len() + 1;
        let mut samples = Vec::with_capacity(trials * v0.len());
        let mut noise = PackedTensor::zeros(1, 1).unwrap();
        for _ in 0..trials {
            for n in noise.data_mut() {
                *n = rng.sample(StandardNormal);
            }
            samples.extend_from_slice(q_sample(&v0, t, &noise, &sched).unwrap().data());
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        let true_var = 1.0 - abar;
        let se_mean = true_var.sqrt() / n.sqrt();
        let se_var = true_var * (2.0 / n).sqrt();
        assert!((mean - abar.sqrt() * 0.7).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var - true_var).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn two_step_chain_matches_the_closed_form_moments() {
        // chain x1 = sqrt(a1) x0 + sqrt(b1) e1, x2 = sqrt(a2) x1 + sqrt(b2) e2
        // against the direct jump's mean and variance at t = 2
        let sched = make_schedule(2, 0.1, 0.3).unwrap();
        let x0 = 1.3;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            let x1 = sched.alpha(1).sqrt() * x0 + sched.beta(1).sqrt() * e1;
            let x2 = sched.alpha(2).sqrt() * x1 + sched.beta(2).sqrt() * e2;
            sum += x2;
            sumsq += x2 * x2;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sumsq - sum * sum / nf) / (nf - 1.0);
        let abar2 = sched.alpha_bar(2);
        let true_var = 1.0 - abar2;
        assert!((mean - abar2.sqrt() * x0).abs() < 3.0 * true_var.sqrt() / nf.sqrt());
        assert!((var - true_var).abs() < 3.0 * true_var * (2.0 / nf).sqrt());
    }

    #[test]
    fn final_posterior_step_is_deterministic_and_exact() {
        let sched = make_schedule(100, 1e-4, 0.05).unwrap();
        let v0 = filled(4, 0.8);
        let v_t = filled(5, 1.0);
        let (mu, var) = posterior_mean(&v_t, &v0, 1, &sched).unwrap();
        assert_eq!(mu, v0);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn posterior_matches_an_independent_evaluation() {
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let v0 = filled(6, 1.2);
        let v_t = filled(7, 1.0);
        for t in [2usize, 17, 500, 1000] {
            let (mu, var) = posterior_mean(&v_t, &v0, t, &sched).unwrap();
            let (a, ap, b) = (sched.alpha_bar(t), sched.alpha_bar_prev(t), sched.beta(t));
            for ((m, &x_t), &x_0) in mu.data().iter().zip(v_t.data()).zip(v0.data()) {
                // same formula, different association
                let want = (sched.alpha(t).sqrt() * (1.0 - ap) * x_t + ap.sqrt() * b * x_0)
                    / (1.0 - a);
                assert!((m - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
            let want_var = (1.0 - ap) / (1.0 - a) * b;
            assert!((var - want_var).abs() <= 1e-15);
        }
    }

    #[test]
    fn perfect_denoiser_reduces_the_reverse_mean_to_the_posterior() {
        let sched = make_schedule(1000, 1e-4, 0.02).unwrap();
        let v0 = filled(8, 0.9);
        let v_t = filled(9, 1.1);
        let oracle = ConstDenoiser(v0.clone());
        for t in [1usize, 2, 63, 512, 1000] {
            let mu_phi = predict_mean(&v_t, t, &oracle, &sched).unwrap();
            let (mu, _) = posterior_mean(&v_t, &v0, t, &sched).unwrap();
            for (a, b) in mu_phi.data().iter().zip(mu.data()) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn noise_free_prediction_rescales_the_observation() {
        // a denoiser claiming V_t is pure signal: g = V_t / sqrt(abar_t);
        // the reverse mean must then be V_t / sqrt(alpha_t)
        struct Rescale;
        impl Denoiser for Rescale {
            fn denoise(&self, v: &PackedTensor, t: usize, s: &NoiseSchedule) -> PackedTensor {
                let r = s.alpha_bar(t).sqrt();
                let mut out = v.clone();
                for x in out.data_mut() {
                    *x /= r;
                }
                out
            }
        }
        let sched = make_schedule(300, 1e-3, 0.1).unwrap();
        let v_t = filled(10, 1.0);
        for t in [1usize, 150, 300] {
            let mu = predict_mean(&v_t, t, &Rescale, &sched).unwrap();
            let inv = 1.0 / sched.alpha(t).sqrt();
            for (a, &x) in mu.data().iter().zip(v_t.data()) {
                assert!((a - inv * x).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
        // zero observation stays exactly zero
        let zero = PackedTensor::zeros(2, 2).unwrap();
        let mu = predict_mean(&zero, 10, &ConstDenoiser(zero.clone()), &sched).unwrap();
        assert_eq!(mu, zero);
    }

    #[test]
    fn training_loss_is_the_mean_squared_estimate_error() {
        let sched = make_schedule(50, 1e-3, 0.2).unwrap();
        let v0 = filled(11, 1.0);
        let noise = filled(12, 1.0);
        // exact estimate: zero loss
        let loss = simple_loss(&v0, 20, &noise, &ConstDenoiser(v0.clone()), &sched).unwrap();
        assert_eq!(loss, 0.0);
        // off by one everywhere: unit loss
        let mut plus = v0.clone();
        for v in plus.data_mut() {
            *v += 1.0;
        }
        let loss = simple_loss(&v0, 20, &noise, &ConstDenoiser(plus), &sched).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        // arbitrary estimate matches an independent accumulation
        let guess = filled(13, 0.6);
        let loss = simple_loss(&v0, 20, &noise, &ConstDenoiser(guess.clone()), &sched).unwrap();
        let want = v0
            .data()
            .iter()
            .zip(guess.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / v0.len() as f64;
        assert!((loss - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn bad_steps_and_shapes_are_rejected() {
        let sched = make_schedule(10, 1e-3, 0.1).unwrap();
        let v0 = filled(14, 1.0);
        let noise = filled(15, 1.0);
        assert!(q_sample(&v0, 0, &noise, &sched).is_err());
        assert!(q_sample(&v0, 11, &noise, &sched).is_err());
        let small = PackedTensor::zeros(3, 2).unwrap();
        assert!(q_sample(&v0, 5, &small, &sched).is_err());
        assert!(posterior_mean(&v0, &small, 5, &sched).is_err());
        assert!(predict_mean(&v0, 5, &WrongShapeDenoiser, &sched).is_err());
        assert!(simple_loss(&v0, 5, &noise, &WrongShapeDenoiser, &sched).is_err());
    }
}
