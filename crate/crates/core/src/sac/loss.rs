//! Pure loss functions. Every source of randomness is passed in as standard
//! normal noise, so the functions are deterministic and can be checked
//! against finite differences.

use crate::error::check_len;
use crate::numerics::{squash_with_noise, Mlp, LOG_STD_MAX, LOG_STD_MIN};
use crate::{Error, Result};

use super::SacBatch;

/// Concatenates each observation row with its action row.
pub(crate) fn q_inputs(obs: &[f64], actions: &[f64], n: usize) -> Vec<f64> {
    let (od, ad) = (obs.len() / n.max(1), actions.len() / n.max(1));
    let mut x = Vec::with_capacity(n * (od + ad));
    for i in 0..n {
        x.extend_from_slice(&obs[i * od..(i + 1) * od]);
        x.extend_from_slice(&actions[i * ad..(i + 1) * ad]);
    }
    x
}

fn finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{what} loss is {v}")))
    }
}

/// Soft Bellman targets `r + γ(1−done)(min Q̄(s′,a′) − α log π(a′|s′))`, with
/// `a′` drawn from the current policy using `next_noise`.
pub fn critic_targets(
    policy: &Mlp,
    q1_target: &Mlp,
    q2_target: &Mlp,
    alpha: f64,
    gamma: f64,
    batch: &SacBatch,
    next_noise: &[f64],
) -> Result<Vec<f64>> {
    let n = batch.len();
    let act_dim = policy.output_dim() / 2;
    check_len("critic_targets noise", n * act_dim, next_noise.len())?;
    let out = policy.forward_batch(&batch.next_observations, n)?;
    let mut next_actions = Vec::with_capacity(n * act_dim);
    let mut log_probs = Vec::with_capacity(n);
    for (row, noise) in out.output().chunks_exact(2 * act_dim).zip(next_noise.chunks_exact(act_dim)) {
        let s = squash_with_noise(&row[..act_dim], &row[act_dim..], noise.to_vec());
        next_actions.extend_from_slice(&s.action);
        log_probs.push(s.log_prob);
    }
    let x = q_inputs(&batch.next_observations, &next_actions, n);
    let q1 = q1_target.forward_batch(&x, n)?;
    let q2 = q2_target.forward_batch(&x, n)?;
    Ok((0..n)
        .map(|i| {
            if batch.dones[i] || gamma == 0.0 {
                return batch.rewards[i];
            }
            let soft = q1.output()[i].min(q2.output()[i]) - alpha * log_probs[i];
            batch.rewards[i] + gamma * soft
        })
        .collect())
}

/// Mean squared error of `q(s, a)` against fixed targets, with its gradient.
pub fn critic_loss_and_grad(q: &Mlp, observations: &[f64], actions: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = targets.len();
    let x = q_inputs(observations, actions, n);
    let cache = q.forward_batch(&x, n)?;
    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let upstream: Vec<f64> = cache
        .output()
        .iter()
        .zip(targets)
        .map(|(qv, y)| {
            let d = qv - y;
            loss += d * d * inv;
            2.0 * d * inv
        })
        .collect();
    finite("critic", loss)?;
    let mut grads = vec![0.0; q.param_count()];
    q.backward(&cache, &upstream, &mut grads)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorOutput {
    pub loss: f64,
    pub grads: Vec<f64>,
    /// Log-probabilities of the reparameterized actions.
    pub log_probs: Vec<f64>,
}

/// `mean(α log π(a|s) − min(Q1, Q2)(s, a))` with `a = tanh(μ + σ·noise)`.
pub fn actor_loss_and_grad(
    policy: &Mlp,
    q1: &Mlp,
    q2: &Mlp,
    alpha: f64,
    observations: &[f64],
    noise: &[f64],
) -> Result<ActorOutput> {
    let act_dim = policy.output_dim() / 2;
    let n = noise.len() / act_dim;
    check_len("actor_loss observations", n * policy.input_dim(), observations.len())?;
    let cache = policy.forward_batch(observations, n)?;
    let samples: Vec<_> = cache
        .output()
        .chunks_exact(2 * act_dim)
        .zip(noise.chunks_exact(act_dim))
        .map(|(row, e)| squash_with_noise(&row[..act_dim], &row[act_dim..], e.to_vec()))
        .collect();
    let actions: Vec<f64> = samples.iter().flat_map(|s| s.action.iter().copied()).collect();
    let x = q_inputs(observations, &actions, n);
    let c1 = q1.forward_batch(&x, n)?;
    let c2 = q2.forward_batch(&x, n)?;

    let inv = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut up1 = vec![0.0; n];
    let mut up2 = vec![0.0; n];
    for i in 0..n {
        let (a, b) = (c1.output()[i], c2.output()[i]);
        if a <= b {
            up1[i] = -inv;
        } else {
            up2[i] = -inv;
        }
        loss += inv * (alpha * samples[i].log_prob - a.min(b));
    }
    finite("actor", loss)?;
    let g1 = q1.input_gradient(&c1, &up1)?;
    let g2 = q2.input_gradient(&c2, &up2)?;

    let in_dim = q1.input_dim();
    let obs_dim = in_dim - act_dim;
    let mut upstream = Vec::with_capacity(n * 2 * act_dim);
    for (i, s) in samples.iter().enumerate() {
        let row = &cache.output()[i * 2 * act_dim..(i + 1) * 2 * act_dim];
        let mut d_mean = Vec::with_capacity(act_dim);
        let mut d_log_std = Vec::with_capacity(act_dim);
        for j in 0..act_dim {
            let d_action = g1[i * in_dim + obs_dim + j] + g2[i * in_dim + obs_dim + j];
            let a = s.action[j];
            // log π depends on u only through the squash correction, whose
            // derivative is 2·tanh(u).
            let d_u = d_action * (1.0 - a * a) + alpha * inv * 2.0 * s.pre_tanh[j].tanh();
            d_mean.push(d_u);
            let ls = row[act_dim + j];
            d_log_std.push(if ls > LOG_STD_MIN && ls < LOG_STD_MAX {
                -alpha * inv + d_u * ls.exp() * s.noise[j]
            } else {
                0.0
            });
        }
        upstream.extend(d_mean);
        upstream.extend(d_log_std);
    }
    let mut grads = vec![0.0; policy.param_count()];
    policy.backward(&cache, &upstream, &mut grads)?;
    Ok(ActorOutput {
        loss,
        grads,
        log_probs: samples.iter().map(|s| s.log_prob).collect(),
    })
}

/// `mean(−exp(log α)·(log π + target))` and its derivative in `log α`.
pub fn temperature_loss_and_grad(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let alpha = log_alpha.exp();
    let mean = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / log_probs.len().max(1) as f64;
    (-alpha * mean, -alpha * mean)
}
