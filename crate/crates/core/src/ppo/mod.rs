//! Clipped-surrogate PPO with separate policy and value networks.
//!
//! Code-level details: orthogonal initialization, tanh hidden layers, GAE
//! with per-memory advantage normalization, and a linearly decaying learning
//! rate whose schedule can be restarted when the environment changes.

mod loss;
mod memory;

use serde::{Deserialize, Serialize};

use crate::envs::{EnvKind, EpisodeDriver, StepResult};
use crate::numerics::{gaussian_logprob, Activation, AdamState, Mlp, RngStream};
use crate::{Error, Result};

pub use loss::{ppo_loss_and_grad, LossParts, PpoBatch, PpoGrads};
pub use memory::{compute_gae, normalize, RolloutMemory, TransitionRef};

pub const HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    /// Memory capacity: environment steps collected per update.
    pub n_steps: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    /// Fraction of the initial learning rate removed by the end of the schedule.
    pub lr_decay: f64,
}

impl PpoConfig {
    /// Tuned values for the locomotion task.
    pub fn crawler() -> Self {
        Self {
            n_steps: 4096,
            minibatch_size: 1024,
            epochs: 5,
            clip_eps: 0.3,
            gamma: 0.9839,
            gae_lambda: 0.911,
            value_coef: 1.0,
            entropy_coef: 0.0019,
            learning_rate: 0.000123,
            lr_decay: 0.25,
        }
    }

    /// Tuned values for the reaching task.
    pub fn reach() -> Self {
        Self {
            n_steps: 2048,
            minibatch_size: 8,
            epochs: 24,
            clip_eps: 0.3,
            gamma: 0.848,
            gae_lambda: 0.9327,
            value_coef: 1.0,
            entropy_coef: 0.0007,
            learning_rate: 0.000275,
            lr_decay: 1.0,
        }
    }

    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::QuadCrawler => Self::crawler(),
            EnvKind::ReachArm => Self::reach(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(format!("ppo: {m}")));
        if self.n_steps == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return err("n_steps, minibatch_size and epochs must be >= 1");
        }
        if self.minibatch_size > self.n_steps {
            return err("minibatch_size must not exceed n_steps");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return err("clip_eps must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return err("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate >= 0.0) || !(self.lr_decay >= 0.0) {
            return err("learning_rate and lr_decay must be >= 0");
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return err("loss coefficients must be >= 0");
        }
        Ok(())
    }

    /// Updates a phase of `steps` environment steps can perform.
    pub fn planned_updates(&self, steps: u64) -> u64 {
        steps.div_ceil(self.n_steps as u64).max(1)
    }
}

/// `initial * (1 - decay * k / K)`, floored at zero.
pub fn lr_schedule(initial: f64, update: u64, total: u64, decay: f64) -> f64 {
    let total = total.max(1);
    let k = update.min(total) as f64;
    (initial * (1.0 - decay * k / total as f64)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub learning_rate: f64,
    pub minibatches: usize,
    /// Loss parts of the first and last mini-batch.
    pub first: LossParts,
    pub last: LossParts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoAgent {
    pub config: PpoConfig,
    pub policy: Mlp,
    pub log_std: Vec<f64>,
    pub value: Mlp,
    pub policy_opt: AdamState,
    pub log_std_opt: AdamState,
    pub value_opt: AdamState,
    pub updates_done: u64,
    pub total_updates: u64,
}

impl PpoAgent {
    pub fn new(obs_dim: usize, act_dim: usize, config: PpoConfig, total_updates: u64, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let hidden = [Activation::Tanh, Activation::Tanh];
        let sqrt2 = std::f64::consts::SQRT_2;
        let policy = Mlp::orthogonal(&[obs_dim, HIDDEN, HIDDEN, act_dim], &hidden, sqrt2, 0.01, rng)?;
        let value = Mlp::orthogonal(&[obs_dim, HIDDEN, HIDDEN, 1], &hidden, sqrt2, 1.0, rng)?;
        Ok(Self {
            policy_opt: AdamState::new(policy.param_count()),
            log_std_opt: AdamState::new(act_dim),
            value_opt: AdamState::new(value.param_count()),
            policy,
            log_std: vec![0.0; act_dim],
            value,
            config,
            updates_done: 0,
            total_updates: total_updates.max(1),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.output_dim()
    }

    pub fn current_lr(&self) -> f64 {
        lr_schedule(self.config.learning_rate, self.updates_done, self.total_updates, self.config.lr_decay)
    }

    /// Restarts the learning-rate schedule for a new phase of `total_updates`
    /// updates. Parameters and optimizer moments are untouched.
    pub fn reset_schedule(&mut self, total_updates: u64) {
        self.updates_done = 0;
        self.total_updates = total_updates.max(1);
    }

    /// Gaussian mean, used as the deterministic evaluation action.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.policy.forward(obs)
    }

    pub fn value_of(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.forward(obs)?[0])
    }

    /// Samples an unsquashed action. The log-probability is that of the raw
    /// sample; clamping to the action box happens in the environment.
    pub fn act(&self, obs: &[f64], rng: &mut RngStream) -> Result<Sampled> {
        let mean = self.policy.forward(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.normal())
            .collect();
        let log_prob = gaussian_logprob(&mean, &self.log_std, &action);
        Ok(Sampled {
            action,
            log_prob,
            value: self.value_of(obs)?,
        })
    }

    /// One PPO update over the whole memory, which is cleared afterwards.
    pub fn update(&mut self, memory: &mut RolloutMemory, shuffle_rng: &mut RngStream) -> Result<UpdateStats> {
        if memory.is_empty() {
            return Err(Error::Config("PPO update on an empty memory".into()));
        }
        let cfg = self.config.clone();
        let (mut advantages, returns) = compute_gae(
            &memory.rewards,
            &memory.values,
            &memory.dones,
            memory.bootstrap_value,
            cfg.gamma,
            cfg.gae_lambda,
        );
        normalize(&mut advantages);
        let lr = self.current_lr();
        let n = memory.len();
        let (obs_dim, act_dim) = (memory.obs_dim(), memory.act_dim());
        let mut order: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats {
            learning_rate: lr,
            ..Default::default()
        };
        let mb = cfg.minibatch_size.min(n);
        let mut obs = Vec::with_capacity(mb * obs_dim);
        let mut act = Vec::with_capacity(mb * act_dim);
        let (mut old, mut adv, mut ret) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..cfg.epochs {
            shuffle_rng.shuffle(&mut order);
            for chunk in order.chunks(mb) {
                obs.clear();
                act.clear();
                old.clear();
                adv.clear();
                ret.clear();
                for &i in chunk {
                    let t = memory.get(i);
                    obs.extend_from_slice(t.observation);
                    act.extend_from_slice(t.action);
                    old.push(t.log_prob);
                    adv.push(advantages[i]);
                    ret.push(returns[i]);
                }
                let batch = PpoBatch {
                    observations: &obs,
                    actions: &act,
                    old_log_probs: &old,
                    advantages: &adv,
                    returns: &ret,
                };
                let (parts, grads) = ppo_loss_and_grad(
                    &self.policy,
                    &self.log_std,
                    &self.value,
                    &batch,
                    cfg.clip_eps,
                    cfg.value_coef,
                    cfg.entropy_coef,
                )?;
                self.policy_opt.step(self.policy.params_mut(), &grads.policy, lr)?;
                self.log_std_opt.step(&mut self.log_std, &grads.log_std, lr)?;
                self.value_opt.step(self.value.params_mut(), &grads.value, lr)?;
                if stats.minibatches == 0 {
                    stats.first = parts;
                }
                stats.last = parts;
                stats.minibatches += 1;
            }
        }
        memory.clear();
        self.updates_done += 1;
        Ok(stats)
    }
}

/// One environment interaction under the stochastic policy, stored in
/// `memory`. When the memory becomes full the bootstrap value of the
/// following state is recorded.
pub fn ppo_interact(
    agent: &PpoAgent,
    driver: &mut EpisodeDriver,
    memory: &mut RolloutMemory,
    action_rng: &mut RngStream,
) -> Result<StepResult> {
    let obs = driver.observation().to_vec();
    let sampled = agent.act(&obs, action_rng)?;
    let result = driver.step(&sampled.action)?;
    memory.push(TransitionRef {
        observation: &obs,
        action: &sampled.action,
        reward: result.reward,
        done: result.done,
        value: sampled.value,
        log_prob: sampled.log_prob,
    })?;
    if memory.is_full() {
        let bootstrap = if result.done {
            0.0
        } else {
            agent.value_of(driver.observation())?
        };
        memory.set_bootstrap_value(bootstrap);
    }
    Ok(result)
}

/// Interacts until `memory` is full.
pub fn collect_rollout(
    agent: &PpoAgent,
    driver: &mut EpisodeDriver,
    memory: &mut RolloutMemory,
    action_rng: &mut RngStream,
) -> Result<()> {
    while !memory.is_full() {
        ppo_interact(agent, driver, memory, action_rng)?;
    }
    Ok(())
}
