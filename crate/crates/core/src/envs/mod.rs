//! Deterministic kinematic environments and the fault layer.
//!
//! `ReachArm` is a three-joint planar arm that must bring its end effector to
//! a random goal. `QuadCrawler` is a four-legged walker whose body advances
//! when feet in ground contact sweep backwards. Both use joint-space
//! velocity control: an action in `[-1, 1]^d` commands per-joint deltas of
//! at most `action_scale` radians.

mod fault;
mod kinematics;

use serde::{Deserialize, Serialize};

use crate::numerics::RngStream;
use crate::{Error, Result};

pub use fault::{apply_fault, FaultSpec};
pub use kinematics::{crawler_foot, forward_kinematics, CrawlerGeometry, Foot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    ReachArm,
    QuadCrawler,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::ReachArm => "reach_arm",
            EnvKind::QuadCrawler => "quad_crawler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointRange {
    pub min: f64,
    pub max: f64,
}

impl JointRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    Arm {
        link_lengths: Vec<f64>,
        /// Goal radius interval; goals are drawn uniform in radius and angle.
        goal_radius: [f64; 2],
    },
    Crawler(CrawlerGeometry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub horizon: usize,
    /// Largest commanded joint delta per step (radians).
    pub action_scale: f64,
    /// Weight of the quadratic action penalty.
    pub ctrl_cost: f64,
    /// Original (healthy) joint ranges.
    pub joint_ranges: Vec<JointRange>,
    /// Joint angles at reset, before noise.
    pub home_pose: Vec<f64>,
    /// Half-width of the uniform reset noise on every joint.
    pub reset_noise: f64,
    pub geometry: Geometry,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

impl EnvConfig {
    pub fn reach_arm() -> Self {
        let limit = 150f64.to_radians();
        Self {
            kind: EnvKind::ReachArm,
            horizon: 50,
            action_scale: 0.1,
            ctrl_cost: 0.0,
            joint_ranges: vec![JointRange::new(-limit, limit); 3],
            home_pose: vec![0.0; 3],
            reset_noise: 0.1,
            geometry: Geometry::Arm {
                link_lengths: vec![0.5, 0.4, 0.3],
                goal_radius: [0.3, 1.1],
            },
            faults: Vec::new(),
        }
    }

    pub fn quad_crawler() -> Self {
        let hip = JointRange::new((-30f64).to_radians(), 30f64.to_radians());
        let ankle = JointRange::new(30f64.to_radians(), 70f64.to_radians());
        let legs = 4;
        Self {
            kind: EnvKind::QuadCrawler,
            horizon: 200,
            action_scale: 0.05,
            ctrl_cost: 0.01,
            joint_ranges: (0..legs).flat_map(|_| [hip, ankle]).collect(),
            home_pose: (0..legs).flat_map(|_| [0.0, 50f64.to_radians()]).collect(),
            reset_noise: 0.05,
            geometry: Geometry::Crawler(CrawlerGeometry::default()),
            faults: Vec::new(),
        }
    }

    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::ReachArm => Self::reach_arm(),
            EnvKind::QuadCrawler => Self::quad_crawler(),
        }
    }

    pub fn num_joints(&self) -> usize {
        self.joint_ranges.len()
    }

    pub fn num_legs(&self) -> usize {
        match &self.geometry {
            Geometry::Crawler(g) => g.leg_offsets.len(),
            Geometry::Arm { .. } => 0,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.num_joints()
    }

    pub fn observation_dim(&self) -> usize {
        match self.kind {
            // sensed angles, sensed end effector, goal
            EnvKind::ReachArm => self.num_joints() + 4,
            // sensed angles, contact flags, previous body displacement
            EnvKind::QuadCrawler => self.num_joints() + self.num_legs() + 1,
        }
    }

    /// Range of each joint after every active range restriction.
    pub fn effective_ranges(&self) -> Vec<JointRange> {
        let mut ranges = self.joint_ranges.clone();
        for fault in &self.faults {
            if let FaultSpec::RomRestriction { joint, min, max } = *fault {
                let r = &mut ranges[joint];
                r.min = r.min.max(min);
                r.max = r.max.min(max);
            }
        }
        ranges
    }

    /// Same configuration with every fault removed.
    pub fn healthy(&self) -> Self {
        Self {
            faults: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.horizon == 0 {
            return err("environment horizon must be >= 1".into());
        }
        if !(self.action_scale > 0.0 && self.action_scale.is_finite()) {
            return err("action_scale must be > 0".into());
        }
        if !(self.ctrl_cost >= 0.0 && self.ctrl_cost.is_finite()) {
            return err("ctrl_cost must be >= 0".into());
        }
        if self.joint_ranges.is_empty() {
            return err("at least one joint is required".into());
        }
        if let Some(j) = self.joint_ranges.iter().position(|r| !(r.min < r.max)) {
            return err(format!("joint {j} range must satisfy min < max"));
        }
        if self.home_pose.len() != self.num_joints() {
            return err("home_pose length must equal the number of joints".into());
        }
        if !(self.reset_noise >= 0.0) {
            return err("reset_noise must be >= 0".into());
        }
        match (&self.geometry, self.kind) {
            (Geometry::Arm { link_lengths, goal_radius }, EnvKind::ReachArm) => {
                if link_lengths.len() != self.num_joints() {
                    return err("arm needs one link length per joint".into());
                }
                if !(goal_radius[0] >= 0.0 && goal_radius[0] <= goal_radius[1]) {
                    return err("goal_radius must be an ordered pair".into());
                }
            }
            (Geometry::Crawler(g), EnvKind::QuadCrawler) => {
                if 2 * g.leg_offsets.len() != self.num_joints() {
                    return err("crawler needs a hip and an ankle per leg".into());
                }
            }
            _ => return err("geometry does not match environment kind".into()),
        }
        for fault in &self.faults {
            fault.validate(self)?;
        }
        Ok(())
    }
}

/// Underlying true state of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// True joint angles.
    pub q: Vec<f64>,
    pub body_x: f64,
    pub goal: [f64; 2],
    pub step: usize,
    /// Body displacement of the previous step.
    pub prev_dx: f64,
}

/// True-state quantities reported alongside each transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub joint_angles: Vec<f64>,
    pub body_displacement: f64,
    pub end_effector: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub diagnostics: Diagnostics,
}

/// A running environment instance.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    ranges: Vec<JointRange>,
    slip: Vec<f64>,
    frozen: Vec<Option<f64>>,
    /// Per leg: effective lower-link length and dangling length.
    legs: Vec<(f64, f64)>,
    state: EnvState,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let joints = config.num_joints();
        let mut env = Self {
            ranges: Vec::new(),
            slip: Vec::new(),
            frozen: Vec::new(),
            legs: Vec::new(),
            state: EnvState {
                q: config.home_pose.clone(),
                body_x: 0.0,
                goal: [0.0, 0.0],
                step: 0,
                prev_dx: 0.0,
            },
            config,
        };
        env.derive();
        debug_assert_eq!(env.state.q.len(), joints);
        env.clamp_joints();
        Ok(env)
    }

    fn derive(&mut self) {
        let joints = self.config.num_joints();
        self.ranges = self.config.effective_ranges();
        self.slip = vec![0.0; joints];
        self.frozen = vec![None; joints];
        for fault in &self.config.faults {
            match *fault {
                FaultSpec::PositionSlippage { joint, offset } => self.slip[joint] += offset,
                FaultSpec::FrozenSensor { joint, value } => self.frozen[joint] = Some(value),
                _ => {}
            }
        }
        self.legs = match &self.config.geometry {
            Geometry::Crawler(g) => (0..g.leg_offsets.len())
                .map(|leg| kinematics::leg_links(g, leg, &self.config.faults))
                .collect(),
            Geometry::Arm { .. } => Vec::new(),
        };
    }

    fn clamp_joints(&mut self) {
        for (q, r) in self.state.q.iter_mut().zip(&self.ranges) {
            *q = r.clamp(*q);
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn effective_ranges(&self) -> &[JointRange] {
        &self.ranges
    }

    /// Activates `fault` mid-life. Joint angles outside a newly restricted
    /// range are clamped into it.
    pub fn apply_fault(&mut self, fault: FaultSpec) -> Result<()> {
        self.config = apply_fault(&self.config, fault)?;
        self.derive();
        self.clamp_joints();
        Ok(())
    }

    /// Starts a new episode; all noise comes from `episode_seed`.
    pub fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(episode_seed);
        let noise = self.config.reset_noise;
        let q: Vec<f64> = self
            .config
            .home_pose
            .iter()
            .map(|&h| h + rng.uniform(-noise, noise))
            .collect();
        let goal = match &self.config.geometry {
            Geometry::Arm { goal_radius, .. } => {
                let r = rng.uniform(goal_radius[0], goal_radius[1]);
                let theta = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
                [r * theta.cos(), r * theta.sin()]
            }
            Geometry::Crawler(_) => [0.0, 0.0],
        };
        self.state = EnvState {
            q,
            body_x: 0.0,
            goal,
            step: 0,
            prev_dx: 0.0,
        };
        self.clamp_joints();
        self.observe()
    }

    /// Places the episode in an explicit state (joint angles are clamped).
    pub fn set_state(&mut self, state: EnvState) -> Result<()> {
        crate::error::check_len("Env::set_state q", self.config.num_joints(), state.q.len())?;
        self.state = state;
        self.clamp_joints();
        Ok(())
    }

    /// Joint angles as reported by the (possibly faulty) position sensors.
    pub fn sensed_angles(&self) -> Vec<f64> {
        self.state
            .q
            .iter()
            .zip(&self.frozen)
            .map(|(&q, f)| f.unwrap_or(q))
            .collect()
    }

    fn foot(&self, leg: usize, q: &[f64]) -> Foot {
        let Geometry::Crawler(g) = &self.config.geometry else {
            unreachable!("feet exist on the crawler only")
        };
        let (lower, dangle) = self.legs[leg];
        kinematics::foot_with_links(g, leg, q[2 * leg], q[2 * leg + 1], lower, dangle)
    }

    /// True end-effector position (arm only).
    pub fn end_effector(&self) -> Option<[f64; 2]> {
        match &self.config.geometry {
            Geometry::Arm { link_lengths, .. } => Some(forward_kinematics(&self.state.q, link_lengths)),
            Geometry::Crawler(_) => None,
        }
    }

    pub fn observe(&self) -> Vec<f64> {
        let sensed = self.sensed_angles();
        let mut obs = Vec::with_capacity(self.config.observation_dim());
        obs.extend_from_slice(&sensed);
        match &self.config.geometry {
            Geometry::Arm { link_lengths, .. } => {
                obs.extend_from_slice(&forward_kinematics(&sensed, link_lengths));
                obs.extend_from_slice(&self.state.goal);
            }
            Geometry::Crawler(g) => {
                for leg in 0..g.leg_offsets.len() {
                    let contact = self.foot(leg, &self.state.q).height <= 0.0;
                    obs.push(if contact { 1.0 } else { 0.0 });
                }
                obs.push(self.state.prev_dx);
            }
        }
        obs
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        crate::error::check_len("Env::step action", self.config.action_dim(), action.len())?;
        if let Some(i) = action.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("action entry {i} ({})", action[i])));
        }
        let action: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let before = self.state.q.clone();
        for (j, a) in action.iter().enumerate() {
            let delta = a * self.config.action_scale + self.slip[j];
            self.state.q[j] = self.ranges[j].clamp(before[j] + delta);
        }
        let reward = match &self.config.geometry {
            Geometry::Arm { link_lengths, .. } => {
                let ee = forward_kinematics(&self.state.q, link_lengths);
                -((ee[0] - self.state.goal[0]).powi(2) + (ee[1] - self.state.goal[1]).powi(2)).sqrt()
            }
            Geometry::Crawler(g) => {
                let mut shift = 0.0;
                let mut stance = 0usize;
                for leg in 0..g.leg_offsets.len() {
                    let (f0, f1) = (self.foot(leg, &before), self.foot(leg, &self.state.q));
                    if f0.height <= 0.0 && f1.height <= 0.0 {
                        shift += f1.rel_x - f0.rel_x;
                        stance += 1;
                    }
                }
                let dx = if stance > 0 { -shift / stance as f64 } else { 0.0 };
                self.state.body_x += dx;
                self.state.prev_dx = dx;
                let effort: f64 = action.iter().map(|a| a * a).sum();
                dx - self.config.ctrl_cost * effort
            }
        };
        self.state.step += 1;
        let done = self.state.step >= self.config.horizon;
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done,
            diagnostics: Diagnostics {
                joint_angles: self.state.q.clone(),
                body_displacement: self.state.prev_dx,
                end_effector: self.end_effector(),
            },
        })
    }
}

/// An environment plus its current observation. A new episode is started,
/// with a seed drawn from the episode stream, whenever one ends.
#[derive(Debug, Clone)]
pub struct EpisodeDriver {
    env: Env,
    observation: Vec<f64>,
    episodes: RngStream,
}

impl EpisodeDriver {
    pub fn new(mut env: Env, mut episodes: RngStream) -> Self {
        let observation = env.reset(episodes.next_u64());
        Self {
            env,
            observation,
            episodes,
        }
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    /// Observation the next action will be chosen from.
    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    /// Steps the environment. The returned result carries the observation that
    /// followed the action, even when the episode ended and was restarted.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let result = self.env.step(action)?;
        self.observation = if result.done {
            self.env.reset(self.episodes.next_u64())
        } else {
            result.observation.clone()
        };
        Ok(result)
    }
}

#[cfg(test)]
mod tests;
