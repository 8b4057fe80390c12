//! Continual reinforcement learning under injected hardware faults.
//!
//! An agent (PPO or SAC) learns a task on a healthy simulated machine, a
//! hardware fault is injected, and learning continues with one of four
//! knowledge-transfer approaches deciding which parts of the agent's
//! knowledge (network parameters, experience storage) survive the fault.
//!
//! Module map:
//! - [`numerics`]: MLP forward/backward, Adam, initializers, Gaussian policy heads.
//! - [`envs`]: the `ReachArm` and `QuadCrawler` kinematic environments and the fault layer.
//! - [`ppo`], [`sac`]: the two learning agents.
//! - [`continual`]: snapshots, transfer approaches and the three-phase protocol.
//! - [`harness`]: evaluation, confidence intervals, adaptation savings, heatmaps, random search.
//! - [`config`], [`checkpoint`]: the experiment config schema and the binary checkpoint container.

pub mod checkpoint;
pub mod config;
pub mod continual;
pub mod envs;
mod error;
pub mod harness;
pub mod numerics;
pub mod ppo;
pub mod sac;

pub use error::{Error, Result};
