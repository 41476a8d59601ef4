//! Linear variance schedule for the forward noising process.
//!
//! Steps are 1-based: t runs over 1..=steps, matching the convention that
//! step 0 is the clean data. alpha_bar_prev(1) is defined as exactly 1.

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Precomputed per-step noise quantities. beta is strictly inside (0,1)
/// and nondecreasing; alpha_t = 1 - beta_t; alpha_bar_t is the running
/// product of alpha, strictly decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

/// Linear interpolation of beta from `beta_start` to `beta_end` inclusive
/// over `steps` steps (a single step uses `beta_start`).
pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::validation("schedule needs at least one step"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::validation(format!(
            "beta endpoints ({beta_start}, {beta_end}) must satisfy 0 < start <= end < 1"
        )));
    }
    let mut beta = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut alpha_bar = Vec::with_capacity(steps);
    let mut running = 1.0;
    for i in 0..steps {
        let frac = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
        let b = beta_start + (beta_end - beta_start) * frac;
        let a = 1.0 - b;
        running *= a;
        beta.push(b);
        alpha.push(a);
        alpha_bar.push(running);
    }
    Ok(NoiseSchedule { beta, alpha, alpha_bar })
}

impl NoiseSchedule {
    pub fn default_schedule() -> NoiseSchedule {
        make_schedule(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default endpoints are valid")
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, t: usize) -> usize {
        assert!(
            t >= 1 && t <= self.steps(),
            "step {t} outside 1..={} of this schedule",
            self.steps()
        );
        t - 1
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[self.check(t)]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[self.check(t)]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[self.check(t)]
    }

    /// alpha_bar at t-1, with the t=1 case pinned to exactly 1.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        let i = self.check(t);
        if i == 0 { 1.0 } else { self.alpha_bar[i - 1] }
    }

    /// Posterior variance beta-tilde = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t.
    /// Exactly 0 at t = 1.
    pub fn posterior_beta(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar_prev(t)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }

    /// True iff t names a step of this schedule. The accessors panic on a
    /// bad step; operations that take a user-supplied t gate on this first.
    pub fn contains(&self, t: usize) -> bool {
        t >= 1 && t <= self.steps()
    }
}
