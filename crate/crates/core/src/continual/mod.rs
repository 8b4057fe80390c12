//! Three-phase fault protocol: learn on the healthy machine, inject a fault,
//! then continue learning with some combination of the prior parameters and
//! experience storage carried across the fault.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envs::{apply_fault, EnvConfig, EnvKind, EpisodeDriver, Env, FaultSpec, StepResult};
use crate::harness::{evaluate_policy, LearningCurve, Policy};
use crate::numerics::RngStream;
use crate::ppo::{ppo_interact, PpoAgent, PpoConfig, RolloutMemory};
use crate::sac::{sac_step, ReplayBuffer, SacAgent, SacConfig};
use crate::{Error, Result};

/// Fixed offsets deriving the independent random streams of one run.
pub mod offsets {
    pub const EPISODES: u64 = 0;
    pub const INIT: u64 = 10_007;
    pub const ACTIONS: u64 = 20_011;
    pub const UPDATES: u64 = 30_013;
    pub const EVAL: u64 = 40_009;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedStreams {
    pub episodes: RngStream,
    pub init: RngStream,
    pub actions: RngStream,
    /// Mini-batch shuffling (PPO) or replay sampling and update noise (SAC).
    pub updates: RngStream,
    pub eval_seed: u64,
}

impl SeedStreams {
    pub fn for_run(seed: u64) -> Self {
        Self {
            episodes: RngStream::new(seed.wrapping_add(offsets::EPISODES)),
            init: RngStream::new(seed.wrapping_add(offsets::INIT)),
            actions: RngStream::new(seed.wrapping_add(offsets::ACTIONS)),
            updates: RngStream::new(seed.wrapping_add(offsets::UPDATES)),
            eval_seed: seed.wrapping_add(offsets::EVAL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmConfig {
    Ppo(PpoConfig),
    Sac(SacConfig),
}

impl AlgorithmConfig {
    pub fn default_for(algorithm: Algorithm, kind: EnvKind) -> Self {
        match algorithm {
            Algorithm::Ppo => AlgorithmConfig::Ppo(PpoConfig::default_for(kind)),
            Algorithm::Sac => AlgorithmConfig::Sac(SacConfig::default_for(kind)),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmConfig::Ppo(_) => Algorithm::Ppo,
            AlgorithmConfig::Sac(_) => Algorithm::Sac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Ppo(c) => c.validate(),
            AlgorithmConfig::Sac(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    Sac,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::Sac => "sac",
        }
    }
}

/// Network parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ppo(PpoAgent),
    Sac(SacAgent),
}

impl Model {
    /// Freshly initialized model sized for `env`.
    pub fn fresh(algorithm: &AlgorithmConfig, env: &EnvConfig, steps: u64, init: &mut RngStream) -> Result<Self> {
        let (o, a) = (env.observation_dim(), env.action_dim());
        Ok(match algorithm {
            AlgorithmConfig::Ppo(c) => Model::Ppo(PpoAgent::new(o, a, c.clone(), c.planned_updates(steps), init)?),
            AlgorithmConfig::Sac(c) => Model::Sac(SacAgent::new(o, a, c.clone(), init)?),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Model::Ppo(_) => Algorithm::Ppo,
            Model::Sac(_) => Algorithm::Sac,
        }
    }

    pub fn config(&self) -> AlgorithmConfig {
        match self {
            Model::Ppo(a) => AlgorithmConfig::Ppo(a.config.clone()),
            Model::Sac(a) => AlgorithmConfig::Sac(a.config.clone()),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Model::Ppo(a) => (a.obs_dim(), a.act_dim()),
            Model::Sac(a) => (a.obs_dim(), a.act_dim()),
        }
    }
}

impl Policy for Model {
    fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Ppo(a) => a.deterministic_action(obs),
            Model::Sac(a) => a.deterministic_action(obs),
        }
    }
}

/// Experience storage: PPO's rollout memory or SAC's replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Rollout(RolloutMemory),
    Replay(ReplayBuffer),
}

impl Storage {
    pub fn empty_for(model: &Model) -> Self {
        let (o, a) = model.dims();
        match model {
            Model::Ppo(p) => Storage::Rollout(RolloutMemory::new(p.config.n_steps, o, a)),
            Model::Sac(s) => Storage::Replay(ReplayBuffer::new(s.config.buffer_size, o, a)),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Storage::Rollout(_) => Algorithm::Ppo,
            Storage::Replay(_) => Algorithm::Sac,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Storage::Rollout(m) => m.len(),
            Storage::Replay(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            Storage::Rollout(m) => (m.obs_dim(), m.act_dim()),
            Storage::Replay(b) => (b.obs_dim(), b.act_dim()),
        }
    }
}

/// A model together with its storage, ready to interact and learn.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub model: Model,
    pub storage: Storage,
}

impl Learner {
    pub fn fresh(algorithm: &AlgorithmConfig, env: &EnvConfig, steps: u64, init: &mut RngStream) -> Result<Self> {
        let model = Model::fresh(algorithm, env, steps, init)?;
        Ok(Self {
            storage: Storage::empty_for(&model),
            model,
        })
    }

    /// One environment step plus whatever learning it triggers.
    pub fn interact(&mut self, driver: &mut EpisodeDriver, actions: &mut RngStream, updates: &mut RngStream) -> Result<StepResult> {
        match (&mut self.model, &mut self.storage) {
            (Model::Ppo(agent), Storage::Rollout(memory)) => {
                let r = ppo_interact(agent, driver, memory, actions)?;
                if memory.is_full() {
                    agent.update(memory, updates)?;
                }
                Ok(r)
            }
            (Model::Sac(agent), Storage::Replay(buffer)) => sac_step(agent, driver, buffer, actions, updates),
            _ => Err(Error::Config("model and storage belong to different algorithms".into())),
        }
    }
}

/// Knowledge captured at the fault boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeSnapshot {
    pub model: Model,
    /// `None` when the storage was not persisted.
    pub storage: Option<Storage>,
    /// Environment steps completed before the fault.
    pub captured_at: u64,
}

impl KnowledgeSnapshot {
    pub fn new(model: Model, storage: Option<Storage>, captured_at: u64) -> Result<Self> {
        if let Some(s) = &storage {
            if s.algorithm() != model.algorithm() || s.dims() != model.dims() {
                return Err(Error::Checkpoint("storage does not match the model".into()));
            }
        }
        Ok(Self {
            model,
            storage,
            captured_at,
        })
    }
}

/// Deep copy of a learner's state.
pub fn snapshot(learner: &Learner, captured_at: u64) -> KnowledgeSnapshot {
    KnowledgeSnapshot {
        model: learner.model.clone(),
        storage: Some(learner.storage.clone()),
        captured_at,
    }
}

/// What is carried across the fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TransferApproach {
    /// Keep parameters and storage.
    RetainAll,
    /// Keep parameters, discard storage.
    RetainModel,
    /// Discard parameters, keep storage.
    RetainStorage,
    /// Start from scratch.
    DiscardAll,
}

impl TransferApproach {
    pub const ALL: [TransferApproach; 4] = [Self::RetainAll, Self::RetainModel, Self::RetainStorage, Self::DiscardAll];

    pub fn number(self) -> u8 {
        self.into()
    }

    pub fn retains_model(self) -> bool {
        matches!(self, Self::RetainAll | Self::RetainModel)
    }

    pub fn retains_storage(self) -> bool {
        matches!(self, Self::RetainAll | Self::RetainStorage)
    }
}

impl TryFrom<u8> for TransferApproach {
    type Error = String;

    fn try_from(n: u8) -> std::result::Result<Self, String> {
        match n {
            1 => Ok(Self::RetainAll),
            2 => Ok(Self::RetainModel),
            3 => Ok(Self::RetainStorage),
            4 => Ok(Self::DiscardAll),
            _ => Err(format!("approach must be 1, 2, 3 or 4, got {n}")),
        }
    }
}

impl From<TransferApproach> for u8 {
    fn from(a: TransferApproach) -> u8 {
        match a {
            TransferApproach::RetainAll => 1,
            TransferApproach::RetainModel => 2,
            TransferApproach::RetainStorage => 3,
            TransferApproach::DiscardAll => 4,
        }
    }
}

impl fmt::Display for TransferApproach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "approach {}", self.number())
    }
}

/// Builds the phase-3 learner. Retained parts are copied verbatim; discarded
/// parameters are re-initialized from `init`, discarded storage starts empty.
/// Optimizer state follows the parameters. A retained PPO model restarts its
/// learning-rate schedule over `adapt_steps`.
pub fn apply_transfer(
    snap: &KnowledgeSnapshot,
    approach: TransferApproach,
    fault_env: &EnvConfig,
    adapt_steps: u64,
    init: &mut RngStream,
) -> Result<Learner> {
    let mut model = if approach.retains_model() {
        let mut m = snap.model.clone();
        if let Model::Ppo(a) = &mut m {
            a.reset_schedule(a.config.planned_updates(adapt_steps));
        }
        m
    } else {
        Model::fresh(&snap.model.config(), fault_env, adapt_steps, init)?
    };
    let storage = if approach.retains_storage() {
        snap.storage
            .clone()
            .ok_or_else(|| Error::Checkpoint(format!("{approach} needs the stored experience, but the snapshot has none")))?
    } else {
        Storage::empty_for(&model)
    };
    // SAC bookkeeping follows the buffer.
    if let (Model::Sac(a), Model::Sac(prev)) = (&mut model, &snap.model) {
        a.update_rounds = if approach.retains_storage() { prev.update_rounds } else { 0 };
    }
    Ok(Learner { model, storage })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePlan {
    /// Phase-1 budget; the fault arrives after this many steps.
    pub train_steps: u64,
    pub train_eval_every: u64,
    pub fault: FaultSpec,
    pub adapt_steps: u64,
    pub adapt_eval_every: u64,
}

impl PhasePlan {
    /// Budgets must be positive multiples of the episode horizon, so that the
    /// fault never lands mid-episode.
    pub fn validate(&self, env: &EnvConfig) -> Result<()> {
        let h = env.horizon as u64;
        for (name, steps, every) in [
            ("train", self.train_steps, self.train_eval_every),
            ("adapt", self.adapt_steps, self.adapt_eval_every),
        ] {
            if steps == 0 || steps % h != 0 {
                return Err(Error::Config(format!(
                    "{name}_steps must be a positive multiple of the horizon {h}, got {steps}"
                )));
            }
            if every == 0 || every > steps {
                return Err(Error::Config(format!("{name}_eval_every must lie in 1..={steps}, got {every}")));
            }
        }
        apply_fault(env, self.fault.clone()).map(|_| ())
    }
}

/// A learner bound to an environment and the random streams of one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub learner: Learner,
    driver: EpisodeDriver,
    actions: RngStream,
    updates: RngStream,
    eval_seed: u64,
    steps_done: u64,
}

impl Trainer {
    /// All streams are derived from `seed`, so a trainer built in a given
    /// environment behaves the same no matter what happened earlier in the run.
    pub fn new(learner: Learner, env: &EnvConfig, seed: u64) -> Result<Self> {
        let s = SeedStreams::for_run(seed);
        Ok(Self {
            learner,
            driver: EpisodeDriver::new(Env::new(env.clone())?, s.episodes),
            actions: s.actions,
            updates: s.updates,
            eval_seed: s.eval_seed,
            steps_done: 0,
        })
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    pub fn env_config(&self) -> &EnvConfig {
        self.driver.env().config()
    }

    pub fn evaluate(&self, episodes: usize) -> Result<crate::harness::EvalRecord> {
        evaluate_policy(&self.learner.model, self.env_config(), episodes, self.eval_seed, self.steps_done)
    }

    /// Trains for `steps`, evaluating before the first step and after every
    /// `eval_every` steps. Step indices restart at zero for each call.
    pub fn train(&mut self, steps: u64, eval_every: u64, eval_episodes: usize) -> Result<LearningCurve> {
        self.steps_done = 0;
        let mut curve = LearningCurve::new();
        curve.push(self.evaluate(eval_episodes)?)?;
        for t in 1..=steps {
            self.learner.interact(&mut self.driver, &mut self.actions, &mut self.updates)?;
            self.steps_done = t;
            if t % eval_every == 0 {
                curve.push(self.evaluate(eval_episodes)?)?;
            }
        }
        Ok(curve)
    }
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub curve: LearningCurve,
    pub learner: Learner,
}

/// Trains a freshly initialized learner in `env` exactly as given.
pub fn train_from_scratch(
    algorithm: &AlgorithmConfig,
    env: &EnvConfig,
    steps: u64,
    eval_every: u64,
    eval_episodes: usize,
    seed: u64,
) -> Result<PhaseOutcome> {
    let mut streams = SeedStreams::for_run(seed);
    let learner = Learner::fresh(algorithm, env, steps, &mut streams.init)?;
    let mut trainer = Trainer::new(learner, env, seed)?;
    let curve = trainer.train(steps, eval_every, eval_episodes)?;
    Ok(PhaseOutcome {
        curve,
        learner: trainer.learner,
    })
}

/// Phase 1: learn from scratch in the healthy environment.
pub fn run_phase1(algorithm: &AlgorithmConfig, env: &EnvConfig, plan: &PhasePlan, eval_episodes: usize, seed: u64) -> Result<PhaseOutcome> {
    algorithm.validate()?;
    plan.validate(env)?;
    train_from_scratch(algorithm, &env.healthy(), plan.train_steps, plan.train_eval_every, eval_episodes, seed)
}

/// Phases 2 and 3: inject the fault and continue from `snap`.
pub fn run_adaptation(
    snap: &KnowledgeSnapshot,
    approach: TransferApproach,
    env: &EnvConfig,
    plan: &PhasePlan,
    eval_episodes: usize,
    seed: u64,
) -> Result<PhaseOutcome> {
    plan.validate(env)?;
    let fault_env = apply_fault(&env.healthy(), plan.fault.clone())?;
    let mut streams = SeedStreams::for_run(seed);
    let learner = apply_transfer(snap, approach, &fault_env, plan.adapt_steps, &mut streams.init)?;
    let mut trainer = Trainer::new(learner, &fault_env, seed)?;
    let curve = trainer.train(plan.adapt_steps, plan.adapt_eval_every, eval_episodes)?;
    Ok(PhaseOutcome {
        curve,
        learner: trainer.learner,
    })
}

#[derive(Debug, Clone)]
pub struct ThreePhaseOutcome {
    pub phase1: LearningCurve,
    pub snapshot: KnowledgeSnapshot,
    pub phase3: LearningCurve,
    pub learner: Learner,
}

pub fn run_three_phase(
    algorithm: &AlgorithmConfig,
    env: &EnvConfig,
    plan: &PhasePlan,
    approach: TransferApproach,
    eval_episodes: usize,
    seed: u64,
) -> Result<ThreePhaseOutcome> {
    let p1 = run_phase1(algorithm, env, plan, eval_episodes, seed)?;
    let snap = snapshot(&p1.learner, plan.train_steps);
    let p3 = run_adaptation(&snap, approach, env, plan, eval_episodes, seed)?;
    Ok(ThreePhaseOutcome {
        phase1: p1.curve,
        snapshot: snap,
        phase3: p3.curve,
        learner: p3.learner,
    })
}
