//! Evaluation, multi-seed aggregation, adaptation savings, state-visitation
//! heatmaps and random-search hyperparameter optimization.

mod heatmap;
mod hpo;
mod stats;

use serde::{Deserialize, Serialize};

use crate::envs::{Env, EnvConfig};
use crate::numerics::RngStream;
use crate::ppo::PpoAgent;
use crate::sac::SacAgent;
use crate::{Error, Result};

pub use heatmap::{histogram, state_visitation, HeatmapData, DEFAULT_BINS};
pub use hpo::{ppo_space, sac_space, sample_hpo_config, select_best, Assignment, Domain, HpoSpace, Selection};
pub use stats::{adaptation_savings, aggregate, t_quantile_975, CiSummary, Savings};

/// Episodes per evaluation point.
pub const EVAL_EPISODES: usize = 10;

/// Mean return of a uniform random policy on the default reaching task,
/// over 1000 episodes with episode seeds drawn from stream 0.
pub const RANDOM_REACH_RETURN: f64 = -64.163_610_476_965_05;

/// Anything that maps an observation to a deterministic action.
pub trait Policy {
    fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>>;
}

impl Policy for PpoAgent {
    fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_action(obs)
    }
}

impl Policy for SacAgent {
    fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.mean_action(obs)
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> Policy for F {
    fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self(obs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: u64,
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

impl EvalRecord {
    pub fn new(step: u64, returns: Vec<f64>) -> Self {
        let mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
        Self {
            step,
            mean_return,
            returns,
        }
    }
}

/// Evaluation records of one run and phase, in strictly increasing step order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    records: Vec<EvalRecord>,
}

impl LearningCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<EvalRecord>) -> Result<Self> {
        let mut c = Self::new();
        for r in records {
            c.push(r)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, record: EvalRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::Harness(format!(
                    "evaluation steps must increase: {} after {}",
                    record.step, last.step
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn steps(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.step).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_return).collect()
    }

    /// Mean over the last `k` evaluation points.
    pub fn final_mean(&self, k: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(k)..];
        tail.iter().map(|r| r.mean_return).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Runs `n_episodes` with deterministic actions on a private environment.
/// Episode seeds come from `RngStream::new(eval_seed)`, so every evaluation
/// point of a run sees the same initial states and goals.
pub fn evaluate_policy(
    policy: &impl Policy,
    env_config: &EnvConfig,
    n_episodes: usize,
    eval_seed: u64,
    step: u64,
) -> Result<EvalRecord> {
    let mut env = Env::new(env_config.clone())?;
    let mut seeds = RngStream::new(eval_seed);
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut obs = env.reset(seeds.next_u64());
        let mut total = 0.0;
        loop {
            let action = policy.deterministic_action(&obs)?;
            let r = env.step(&action)?;
            total += r.reward;
            if r.done {
                break;
            }
            obs = r.observation;
        }
        returns.push(total);
    }
    Ok(EvalRecord::new(step, returns))
}

/// Mean undiscounted return of uniform random actions in `[-1, 1]`.
pub fn random_policy_return(env_config: &EnvConfig, episodes: usize, seed: u64) -> Result<f64> {
    let mut env = Env::new(env_config.clone())?;
    let mut rng = RngStream::new(seed);
    let dim = env_config.action_dim();
    let mut total = 0.0;
    for _ in 0..episodes {
        env.reset(rng.next_u64());
        loop {
            let a: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let r = env.step(&a)?;
            total += r.reward;
            if r.done {
                break;
            }
        }
    }
    Ok(total / episodes as f64)
}
