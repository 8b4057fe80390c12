use crate::error::check_len;
use crate::numerics::{diag_gaussian_entropy, Mlp};
use crate::{Error, Result};

/// A mini-batch in row-major layout.
#[derive(Debug, Clone, Copy)]
pub struct PpoBatch<'a> {
    pub observations: &'a [f64],
    pub actions: &'a [f64],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

impl PpoBatch<'_> {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    /// Mean clipped surrogate (to be maximized).
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// `-surrogate + c1 * value_loss - c2 * entropy`.
    pub total: f64,
    /// Fraction of samples whose clipped branch was active.
    pub clip_fraction: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoGrads {
    pub policy: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: Vec<f64>,
}

/// Combined PPO loss and its exact gradient.
pub fn ppo_loss_and_grad(
    policy: &Mlp,
    log_std: &[f64],
    value: &Mlp,
    batch: &PpoBatch<'_>,
    clip_eps: f64,
    value_coef: f64,
    entropy_coef: f64,
) -> Result<(LossParts, PpoGrads)> {
    let n = batch.len();
    let obs_dim = policy.input_dim();
    let act_dim = policy.output_dim();
    check_len("ppo batch observations", n * obs_dim, batch.observations.len())?;
    check_len("ppo batch actions", n * act_dim, batch.actions.len())?;
    check_len("ppo batch advantages", n, batch.advantages.len())?;
    check_len("ppo batch returns", n, batch.returns.len())?;
    check_len("ppo log_std", act_dim, log_std.len())?;
    if n == 0 {
        return Err(Error::Config("empty PPO mini-batch".into()));
    }
    let nf = n as f64;

    let pcache = policy.forward_batch(batch.observations, n)?;
    let means = pcache.output();
    let vcache = value.forward_batch(batch.observations, n)?;
    let values = vcache.output();

    let inv_var: Vec<f64> = log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();
    let mut d_mean = vec![0.0; n * act_dim];
    let mut d_log_std = vec![0.0; act_dim];
    let mut surrogate = 0.0;
    let mut clipped = 0usize;
    let mut ratio_sum = 0.0;
    for i in 0..n {
        let mu = &means[i * act_dim..(i + 1) * act_dim];
        let a = &batch.actions[i * act_dim..(i + 1) * act_dim];
        let logp = crate::numerics::gaussian_logprob(mu, log_std, a);
        let ratio = (logp - batch.old_log_probs[i]).exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let clipped_term = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
        ratio_sum += ratio;
        if unclipped <= clipped_term {
            surrogate += unclipped;
            // d(-unclipped / n) = -(adv * ratio / n) * d logp
            let scale = -adv * ratio / nf;
            for k in 0..act_dim {
                let diff = a[k] - mu[k];
                d_mean[i * act_dim + k] = scale * diff * inv_var[k];
                d_log_std[k] += scale * (diff * diff * inv_var[k] - 1.0);
            }
        } else {
            surrogate += clipped_term;
            clipped += 1;
        }
    }
    surrogate /= nf;

    let mut value_loss = 0.0;
    let mut d_value = vec![0.0; n];
    for i in 0..n {
        let err = values[i] - batch.returns[i];
        value_loss += err * err;
        d_value[i] = value_coef * 2.0 * err / nf;
    }
    value_loss /= nf;

    let entropy = diag_gaussian_entropy(log_std);
    d_log_std.iter_mut().for_each(|g| *g -= entropy_coef);

    let total = -surrogate + value_coef * value_loss - entropy_coef * entropy;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("PPO loss ({total})")));
    }

    let mut g_policy = vec![0.0; policy.param_count()];
    policy.backward(&pcache, &d_mean, &mut g_policy)?;
    let mut g_value = vec![0.0; value.param_count()];
    value.backward(&vcache, &d_value, &mut g_value)?;

    Ok((
        LossParts {
            surrogate,
            value_loss,
            entropy,
            total,
            clip_fraction: clipped as f64 / nf,
            mean_ratio: ratio_sum / nf,
        },
        PpoGrads {
            policy: g_policy,
            log_std: d_log_std,
            value: g_value,
        },
    ))
}
