//! Experiment configuration: a strict JSON document with per-environment
//! defaults. Unknown keys are rejected and every error names the offending
//! key. The fully resolved form parses back to itself.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::continual::{AlgorithmConfig, PhasePlan, TransferApproach};
use crate::envs::{EnvConfig, EnvKind, FaultSpec};
use crate::harness::{Assignment, DEFAULT_BINS, EVAL_EPISODES};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSettings {
    /// Episodes per evaluation point.
    pub episodes: usize,
    pub heatmap_episodes: usize,
    pub heatmap_bins: usize,
    /// Phase-3 steps at which early-performance bars are reported.
    pub report_checkpoints: Vec<u64>,
}

impl EvaluationSettings {
    pub fn default_for(kind: EnvKind) -> Self {
        Self {
            episodes: EVAL_EPISODES,
            heatmap_episodes: 100,
            heatmap_bins: DEFAULT_BINS,
            report_checkpoints: match kind {
                EnvKind::QuadCrawler => vec![0, 300_000],
                EnvKind::ReachArm => vec![0, 30_000],
            },
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment_id: String,
    pub environment: EnvConfig,
    pub algorithm: AlgorithmConfig,
    pub phases: PhasePlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<TransferApproach>,
    pub seeds: Vec<u64>,
    pub evaluation: EvaluationSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

const TOP_KEYS: [&str; 9] = [
    "schema_version",
    "experiment_id",
    "environment",
    "algorithm",
    "phases",
    "approach",
    "seeds",
    "evaluation",
    "output_dir",
];

fn parse_err(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        key: key.into(),
        message: message.into(),
    }
}

/// Deserializes `value`, reporting the full key path of the first failure.
fn strict<T: DeserializeOwned>(section: &str, value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let key = if inner == "." { section.to_string() } else { format!("{section}.{inner}") };
        parse_err(key, e.inner().to_string())
    })
}

/// Overlays the keys of `user` onto the serialized defaults.
fn overlay(section: &str, defaults: impl Serialize, user: Option<Value>) -> Result<Value> {
    let mut base = serde_json::to_value(defaults).expect("defaults serialize");
    match user {
        None => {}
        Some(Value::Object(map)) => {
            let obj = base.as_object_mut().expect("defaults are objects");
            for (k, v) in map {
                obj.insert(k, v);
            }
        }
        Some(other) => return Err(parse_err(section, format!("expected an object, found {other}"))),
    }
    Ok(base)
}

/// Desk-scale phase budgets.
pub fn default_phases(kind: EnvKind, algorithm: &AlgorithmConfig) -> PhasePlan {
    let sac = matches!(algorithm, AlgorithmConfig::Sac(_));
    let (train_steps, adapt_steps, fault) = match kind {
        EnvKind::QuadCrawler => (if sac { 300_000 } else { 2_000_000 }, 300_000, FaultSpec::hip_rom()),
        EnvKind::ReachArm => (if sac { 100_000 } else { 500_000 }, 30_000, FaultSpec::frozen_shoulder()),
    };
    PhasePlan {
        train_steps,
        train_eval_every: 10_000,
        fault,
        adapt_steps,
        adapt_eval_every: 10_000,
    }
}

/// Parses `"0-29"`, `"3"` or comma-separated mixtures such as `"0-4,9"`.
pub fn parse_seed_range(text: &str) -> Result<Vec<u64>> {
    let bad = |m: String| parse_err("seeds", m);
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim) {
        let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad(format!("invalid seed {s:?} in {text:?}")));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(bad(format!("descending range {part:?}")));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(num(part)?),
        }
    }
    check_seeds(&seeds)?;
    Ok(seeds)
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(parse_err("seeds", "seed list is empty"));
    }
    let mut seen = BTreeSet::new();
    if let Some(d) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(parse_err("seeds", format!("duplicate seed {d}")));
    }
    Ok(())
}

fn parse_fault(value: Value) -> Result<Value> {
    match value {
        Value::String(name) => FaultSpec::preset(&name)
            .map(|f| serde_json::to_value(f).expect("fault serializes"))
            .ok_or_else(|| parse_err("phases.fault", format!("unknown fault preset {name:?}"))),
        other => Ok(other),
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| parse_err("<document>", e.to_string()))?;
        let Value::Object(mut top) = root else {
            return Err(parse_err("<document>", "expected a JSON object"));
        };
        if let Some(k) = top.keys().find(|k| !TOP_KEYS.contains(&k.as_str())) {
            return Err(parse_err(k.clone(), "unknown key"));
        }
        let mut take = |k: &str| top.remove(k);

        let version: u32 = strict("schema_version", take("schema_version").ok_or_else(|| parse_err("schema_version", "missing required key"))?)?;
        if version != SCHEMA_VERSION {
            return Err(parse_err(
                "schema_version",
                format!("unsupported version {version}; this build reads version {SCHEMA_VERSION}"),
            ));
        }
        let experiment_id = match take("experiment_id") {
            Some(v) => strict("experiment_id", v)?,
            None => "experiment".to_string(),
        };

        let env_value = take("environment").ok_or_else(|| parse_err("environment", "missing required key"))?;
        let kind: EnvKind = match env_value.get("kind") {
            Some(k) => strict("environment.kind", k.clone())?,
            None => return Err(parse_err("environment.kind", "missing required key")),
        };
        let environment: EnvConfig = strict("environment", overlay("environment", EnvConfig::default_for(kind), Some(env_value))?)?;
        environment.validate()?;

        let algorithm = match take("algorithm") {
            None => return Err(parse_err("algorithm", "missing required key")),
            Some(Value::Object(map)) if map.len() == 1 => {
                let (name, body) = map.into_iter().next().unwrap();
                let section = format!("algorithm.{name}");
                match name.as_str() {
                    "ppo" => AlgorithmConfig::Ppo(strict(&section, overlay(&section, crate::ppo::PpoConfig::default_for(kind), Some(body))?)?),
                    "sac" => AlgorithmConfig::Sac(strict(&section, overlay(&section, crate::sac::SacConfig::default_for(kind), Some(body))?)?),
                    _ => return Err(parse_err("algorithm", format!("unknown algorithm {name:?}; expected \"ppo\" or \"sac\""))),
                }
            }
            Some(_) => return Err(parse_err("algorithm", "expected an object with exactly one of \"ppo\" or \"sac\"")),
        };
        algorithm.validate()?;

        let mut phase_value = take("phases");
        if let Some(Value::Object(m)) = &mut phase_value {
            if let Some(f) = m.remove("fault") {
                m.insert("fault".into(), parse_fault(f)?);
            }
        }
        let phases: PhasePlan = strict("phases", overlay("phases", default_phases(kind, &algorithm), phase_value)?)?;
        phases.validate(&environment)?;

        let approach = match take("approach") {
            None | Some(Value::Null) => None,
            Some(v) => Some(strict("approach", v)?),
        };
        let seeds = match take("seeds") {
            None => (0..30).collect(),
            Some(Value::String(s)) => parse_seed_range(&s)?,
            Some(v) => strict::<Vec<u64>>("seeds", v)?,
        };
        check_seeds(&seeds)?;
        let evaluation: EvaluationSettings = strict("evaluation", overlay("evaluation", EvaluationSettings::default_for(kind), take("evaluation"))?)?;
        if evaluation.episodes == 0 || evaluation.heatmap_episodes == 0 || evaluation.heatmap_bins < 2 {
            return Err(parse_err("evaluation", "episodes must be >= 1 and heatmap_bins >= 2"));
        }
        let output_dir = match take("output_dir") {
            None | Some(Value::Null) => None,
            Some(v) => Some(strict("output_dir", v)?),
        };
        Ok(Self {
            schema_version: version,
            experiment_id,
            environment,
            algorithm,
            phases,
            approach,
            seeds,
            evaluation,
            output_dir,
        })
    }

    /// Resolved config with every default materialized.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON of the healthy environment and the
    /// algorithm section. Checkpoints carry it so that adaptation refuses a
    /// snapshot trained under different settings.
    pub fn digest(&self) -> String {
        config_digest(&self.environment, &self.algorithm)
    }
}

pub fn config_digest(environment: &EnvConfig, algorithm: &AlgorithmConfig) -> String {
    let mut doc = Map::new();
    doc.insert("algorithm".into(), serde_json::to_value(algorithm).expect("serializes"));
    doc.insert("environment".into(), serde_json::to_value(environment.healthy()).expect("serializes"));
    // serde_json maps are ordered by key, which makes the encoding canonical
    let bytes = serde_json::to_vec(&Value::Object(doc)).expect("serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Overrides algorithm hyperparameters with a random-search draw. A PPO
/// mini-batch larger than the memory is clamped to the memory size.
pub fn apply_assignment(algorithm: &AlgorithmConfig, assignment: &Assignment) -> Result<AlgorithmConfig> {
    let (name, defaults) = match algorithm {
        AlgorithmConfig::Ppo(c) => ("ppo", serde_json::to_value(c)),
        AlgorithmConfig::Sac(c) => ("sac", serde_json::to_value(c)),
    };
    let mut merged = defaults.expect("algorithm config serializes");
    let obj = merged.as_object_mut().expect("object");
    for (k, v) in assignment {
        obj.insert(k.clone(), v.clone());
    }
    let section = format!("hpo.{name}");
    let mut out = match algorithm {
        AlgorithmConfig::Ppo(_) => AlgorithmConfig::Ppo(strict(&section, merged)?),
        AlgorithmConfig::Sac(_) => AlgorithmConfig::Sac(strict(&section, merged)?),
    };
    if let AlgorithmConfig::Ppo(c) = &mut out {
        c.minibatch_size = c.minibatch_size.min(c.n_steps);
    }
    out.validate()?;
    Ok(out)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json_str(&text)
}
