use serde::{Deserialize, Serialize};

use super::Policy;
use crate::envs::{Env, EnvConfig, JointRange};
use crate::numerics::RngStream;
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 25;

/// Per-joint visitation probabilities over equal-width bins of the joint's
/// healthy range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapData {
    pub bins: usize,
    /// One row per joint; each row sums to 1.
    pub joints: Vec<Vec<f64>>,
    pub samples: usize,
}

/// Bins angle samples (one `Vec` per recorded state) into per-joint
/// probability rows. Angles are normalized over `ranges`.
pub fn histogram(samples: &[Vec<f64>], ranges: &[JointRange], bins: usize) -> Result<HeatmapData> {
    if bins < 2 {
        return Err(Error::Harness(format!("heatmap needs at least 2 bins, got {bins}")));
    }
    if samples.is_empty() {
        return Err(Error::Harness("heatmap needs at least one sample".into()));
    }
    let mut counts = vec![vec![0u64; bins]; ranges.len()];
    for q in samples {
        crate::error::check_len("heatmap sample", ranges.len(), q.len())?;
        for ((row, &angle), range) in counts.iter_mut().zip(q).zip(ranges) {
            let norm = ((angle - range.min) / (range.max - range.min)).clamp(0.0, 1.0);
            let bin = ((norm * bins as f64) as usize).min(bins - 1);
            row[bin] += 1;
        }
    }
    let total = samples.len() as f64;
    Ok(HeatmapData {
        bins,
        joints: counts
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / total).collect())
            .collect(),
        samples: samples.len(),
    })
}

/// Runs `episodes` deterministic episodes in `env_config` (faults included)
/// and records the true joint angles after every step.
pub fn state_visitation(
    policy: &impl Policy,
    env_config: &EnvConfig,
    episodes: usize,
    bins: usize,
    seed: u64,
) -> Result<HeatmapData> {
    let mut env = Env::new(env_config.clone())?;
    let mut seeds = RngStream::new(seed);
    let mut samples = Vec::with_capacity(episodes * env_config.horizon as usize);
    for _ in 0..episodes {
        let mut obs = env.reset(seeds.next_u64());
        loop {
            let r = env.step(&policy.deterministic_action(&obs)?)?;
            samples.push(r.diagnostics.joint_angles.clone());
            if r.done {
                break;
            }
            obs = r.observation;
        }
    }
    histogram(&samples, &env_config.joint_ranges, bins)
}
