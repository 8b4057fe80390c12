//! Soft actor-critic with twin Q-networks, Polyak-averaged targets and a
//! learned entropy temperature.

mod buffer;
mod loss;

use serde::{Deserialize, Serialize};

use crate::envs::{EnvKind, EpisodeDriver, StepResult};
use crate::numerics::{polyak_average, squashed_gaussian_sample, Activation, AdamState, Mlp, RngStream, SquashedSample};
use crate::{Error, Result};

pub use buffer::{ReplayBuffer, SacBatch, Transition};
pub use loss::{actor_loss_and_grad, critic_loss_and_grad, critic_targets, temperature_loss_and_grad, ActorOutput};

pub const HIDDEN: usize = 256;

fn default_min_fill() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacConfig {
    pub buffer_size: usize,
    pub batch_size: usize,
    /// Target smoothing coefficient.
    pub tau: f64,
    pub gamma: f64,
    /// Shared by actor, critics and temperature.
    pub learning_rate: f64,
    /// Transitions required before the first update round.
    #[serde(default = "default_min_fill")]
    pub min_fill: usize,
    /// Defaults to minus the action dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_entropy: Option<f64>,
}

impl SacConfig {
    pub fn crawler() -> Self {
        Self {
            buffer_size: 500_000,
            batch_size: 512,
            tau: 0.0721,
            gamma: 0.8097,
            learning_rate: 0.001738,
            min_fill: default_min_fill(),
            target_entropy: None,
        }
    }

    pub fn reach() -> Self {
        Self {
            buffer_size: 10_000,
            batch_size: 512,
            tau: 0.0877,
            gamma: 0.9646,
            learning_rate: 0.001092,
            min_fill: default_min_fill(),
            target_entropy: None,
        }
    }

    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::QuadCrawler => Self::crawler(),
            EnvKind::ReachArm => Self::reach(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(format!("sac: {m}")));
        if self.buffer_size == 0 || self.batch_size == 0 || self.min_fill == 0 {
            return err("buffer_size, batch_size and min_fill must be >= 1");
        }
        if self.batch_size > self.buffer_size || self.min_fill > self.buffer_size {
            return err("batch_size and min_fill must not exceed buffer_size");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return err("tau must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return err("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate >= 0.0) {
            return err("learning_rate must be >= 0");
        }
        if self.target_entropy.is_some_and(|h| !h.is_finite()) {
            return err("target_entropy must be finite");
        }
        Ok(())
    }

    pub fn target_entropy_for(&self, act_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(act_dim as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SacUpdateStats {
    pub critic_loss: [f64; 2],
    pub actor_loss: f64,
    pub alpha: f64,
    pub mean_log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent {
    pub config: SacConfig,
    /// Outputs the Gaussian mean followed by its log standard deviation.
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub policy_opt: AdamState,
    pub q1_opt: AdamState,
    pub q2_opt: AdamState,
    pub alpha_opt: AdamState,
    pub update_rounds: u64,
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, config: SacConfig, rng: &mut RngStream) -> Result<Self> {
        Self::with_hidden(obs_dim, act_dim, HIDDEN, config, rng)
    }

    pub fn with_hidden(obs_dim: usize, act_dim: usize, hidden: usize, config: SacConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let acts = [Activation::Relu, Activation::Relu];
        let policy = Mlp::xavier(&[obs_dim, hidden, hidden, 2 * act_dim], &acts, rng)?;
        let q1 = Mlp::xavier(&[obs_dim + act_dim, hidden, hidden, 1], &acts, rng)?;
        let q2 = Mlp::xavier(&[obs_dim + act_dim, hidden, hidden, 1], &acts, rng)?;
        Ok(Self {
            policy_opt: AdamState::new(policy.param_count()),
            q1_opt: AdamState::new(q1.param_count()),
            q2_opt: AdamState::new(q2.param_count()),
            alpha_opt: AdamState::new(1),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            log_alpha: 0.0,
            config,
            update_rounds: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.output_dim() / 2
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Stochastic action used during collection.
    pub fn act(&self, obs: &[f64], rng: &mut RngStream) -> Result<SquashedSample> {
        let out = self.policy.forward(obs)?;
        let d = self.act_dim();
        Ok(squashed_gaussian_sample(&out[..d], &out[d..], rng))
    }

    /// Deterministic evaluation action `tanh(mean)`.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let out = self.policy.forward(obs)?;
        Ok(out[..self.act_dim()].iter().map(|m| m.tanh()).collect())
    }

    /// One round: critic, actor and temperature steps, then target averaging.
    pub fn update(&mut self, buffer: &ReplayBuffer, rng: &mut RngStream) -> Result<SacUpdateStats> {
        let batch = buffer.sample_batch(self.config.batch_size, rng);
        let noise_len = batch.len() * self.act_dim();
        let next_noise: Vec<f64> = (0..noise_len).map(|_| rng.normal()).collect();
        let actor_noise: Vec<f64> = (0..noise_len).map(|_| rng.normal()).collect();
        let lr = self.config.learning_rate;

        let targets = critic_targets(
            &self.policy,
            &self.q1_target,
            &self.q2_target,
            self.alpha(),
            self.config.gamma,
            &batch,
            &next_noise,
        )?;
        let (l1, g1) = critic_loss_and_grad(&self.q1, &batch.observations, &batch.actions, &targets)?;
        let (l2, g2) = critic_loss_and_grad(&self.q2, &batch.observations, &batch.actions, &targets)?;
        self.q1_opt.step(self.q1.params_mut(), &g1, lr)?;
        self.q2_opt.step(self.q2.params_mut(), &g2, lr)?;

        let actor = actor_loss_and_grad(&self.policy, &self.q1, &self.q2, self.alpha(), &batch.observations, &actor_noise)?;
        self.policy_opt.step(self.policy.params_mut(), &actor.grads, lr)?;

        let target_entropy = self.config.target_entropy_for(self.act_dim());
        let (_, g_alpha) = temperature_loss_and_grad(self.log_alpha, &actor.log_probs, target_entropy);
        let mut la = [self.log_alpha];
        self.alpha_opt.step(&mut la, &[g_alpha], lr)?;
        self.log_alpha = la[0];

        polyak_average(self.q1_target.params_mut(), self.q1.params(), self.config.tau)?;
        polyak_average(self.q2_target.params_mut(), self.q2.params(), self.config.tau)?;
        self.update_rounds += 1;
        Ok(SacUpdateStats {
            critic_loss: [l1, l2],
            actor_loss: actor.loss,
            alpha: self.alpha(),
            mean_log_prob: actor.log_probs.iter().sum::<f64>() / actor.log_probs.len() as f64,
        })
    }
}

/// One environment interaction and, once the buffer holds `min_fill`
/// transitions, one update round.
pub fn sac_step(
    agent: &mut SacAgent,
    driver: &mut EpisodeDriver,
    buffer: &mut ReplayBuffer,
    action_rng: &mut RngStream,
    update_rng: &mut RngStream,
) -> Result<StepResult> {
    let obs = driver.observation().to_vec();
    let sample = agent.act(&obs, action_rng)?;
    let result = driver.step(&sample.action)?;
    buffer.store(Transition {
        observation: &obs,
        action: &sample.action,
        reward: result.reward,
        next_observation: &result.observation,
        done: result.done,
    })?;
    if buffer.len() >= agent.config.min_fill {
        agent.update(buffer, update_rng)?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests;
