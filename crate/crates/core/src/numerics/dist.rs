use std::f64::consts::PI;

use super::RngStream;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of a diagonal Gaussian, summed over dimensions.
pub fn gaussian_logprob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    debug_assert!(mean.len() == log_std.len() && mean.len() == action.len());
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn diag_gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std
        .iter()
        .map(|&ls| ls + 0.5 * (1.0 + (2.0 * PI).ln()))
        .sum()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `sum_i ln(1 - tanh(u_i)^2)`, evaluated without cancellation for large `|u|`.
pub fn squash_log_correction(pre_tanh: &[f64]) -> f64 {
    pre_tanh
        .iter()
        .map(|&u| 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u)))
        .sum()
}

/// One reparameterized draw from a tanh-squashed diagonal Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample {
    /// `tanh(pre_tanh)`, strictly inside `(-1, 1)`.
    pub action: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    /// Standard-normal noise used for the draw.
    pub noise: Vec<f64>,
    /// Log density of `action`, including the change-of-variables term.
    pub log_prob: f64,
}

/// Largest magnitude an action can take; `tanh` rounds to exactly 1 beyond |u| ~ 19.
const ACTION_LIMIT: f64 = 1.0 - f64::EPSILON;

pub fn squashed_gaussian_sample(
    mean: &[f64],
    log_std: &[f64],
    rng: &mut RngStream,
) -> SquashedSample {
    let noise: Vec<f64> = mean.iter().map(|_| rng.normal()).collect();
    squash_with_noise(mean, log_std, noise)
}

pub(crate) fn squash_with_noise(mean: &[f64], log_std: &[f64], noise: Vec<f64>) -> SquashedSample {
    debug_assert_eq!(mean.len(), log_std.len());
    let clamped: Vec<f64> = log_std
        .iter()
        .map(|ls| ls.clamp(LOG_STD_MIN, LOG_STD_MAX))
        .collect();
    let pre_tanh: Vec<f64> = mean
        .iter()
        .zip(&clamped)
        .zip(&noise)
        .map(|((&m, &ls), &e)| m + ls.exp() * e)
        .collect();
    let action = pre_tanh
        .iter()
        .map(|u| u.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT))
        .collect();
    let log_prob = gaussian_logprob(mean, &clamped, &pre_tanh) - squash_log_correction(&pre_tanh);
    SquashedSample {
        action,
        pre_tanh,
        noise,
        log_prob,
    }
}
