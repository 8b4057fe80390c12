use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::LearningCurve;
use crate::numerics::RngStream;
use crate::{Error, Result};

/// Where one hyperparameter is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    /// Uniform over a finite set.
    Choice(Vec<f64>),
    /// Uniform over the integers `min..=max`.
    Integers { min: i64, max: i64 },
    /// Uniform over the interval `[min, max]`.
    Uniform { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpoSpace {
    pub params: BTreeMap<String, Domain>,
}

/// Hyperparameter name to sampled value.
pub type Assignment = BTreeMap<String, Value>;

fn number(x: f64) -> Value {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Value::from(x as i64)
    } else {
        Value::from(x)
    }
}

impl HpoSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in &self.params {
            let ok = match d {
                Domain::Choice(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
                Domain::Integers { min, max } => min <= max,
                Domain::Uniform { min, max } => min.is_finite() && max.is_finite() && min < max,
            };
            if !ok {
                return Err(Error::Config(format!("hpo domain for {name:?} is empty or inverted")));
            }
        }
        Ok(())
    }
}

/// Search space of the on-policy agent.
pub fn ppo_space() -> HpoSpace {
    let params = BTreeMap::from([
        ("n_steps".into(), Domain::Integers { min: 32, max: 5000 }),
        ("minibatch_size".into(), Domain::Choice((2..=13).map(|p| f64::from(1u32 << p)).collect())),
        ("epochs".into(), Domain::Integers { min: 3, max: 30 }),
        ("clip_eps".into(), Domain::Choice(vec![0.1, 0.2, 0.3])),
        ("gamma".into(), Domain::Uniform { min: 0.8, max: 0.9997 }),
        ("gae_lambda".into(), Domain::Uniform { min: 0.9, max: 1.0 }),
        ("value_coef".into(), Domain::Choice(vec![0.5, 1.0])),
        ("entropy_coef".into(), Domain::Uniform { min: 0.0, max: 0.01 }),
        ("learning_rate".into(), Domain::Uniform { min: 0.000005, max: 0.006 }),
    ]);
    HpoSpace { params }
}

/// Search space of the off-policy agent.
pub fn sac_space() -> HpoSpace {
    let params = BTreeMap::from([
        ("buffer_size".into(), Domain::Choice(vec![10_000.0, 100_000.0, 500_000.0, 1_000_000.0])),
        ("batch_size".into(), Domain::Choice(vec![16.0, 64.0, 256.0, 512.0])),
        ("tau".into(), Domain::Uniform { min: 0.0001, max: 0.1 }),
        ("gamma".into(), Domain::Uniform { min: 0.8, max: 0.9997 }),
        ("learning_rate".into(), Domain::Uniform { min: 0.000005, max: 0.006 }),
    ]);
    HpoSpace { params }
}

/// Draws every hyperparameter, in name order, from `RngStream::new(config_seed)`.
pub fn sample_hpo_config(space: &HpoSpace, config_seed: u64) -> Assignment {
    let mut rng = RngStream::new(config_seed);
    space
        .params
        .iter()
        .map(|(name, d)| {
            let v = match d {
                Domain::Choice(values) => number(values[rng.below(values.len())]),
                Domain::Integers { min, max } => Value::from(min + rng.below((max - min + 1) as usize) as i64),
                Domain::Uniform { min, max } => Value::from(rng.uniform(*min, *max)),
            };
            (name.clone(), v)
        })
        .collect()
}

/// Outcome of the two-step selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub winner: usize,
    /// Mean over the final 10 evaluation points, averaged across runs.
    pub final_scores: Vec<f64>,
    /// Trapezoid area under the mean curve over the first quarter of points.
    pub early_scores: Vec<f64>,
    /// Configurations within one pooled standard error of the best final score.
    pub tied: Vec<usize>,
    pub tie_band: f64,
}

const FINAL_POINTS: usize = 10;

fn early_area(curves: &[LearningCurve]) -> f64 {
    let points = curves[0].len().div_ceil(4);
    let mean_at = |j: usize| curves.iter().map(|c| c.records()[j].mean_return).sum::<f64>() / curves.len() as f64;
    let step_at = |j: usize| curves[0].records()[j].step as f64;
    (1..points)
        .map(|j| 0.5 * (mean_at(j) + mean_at(j - 1)) * (step_at(j) - step_at(j - 1)))
        .sum()
}

/// Picks the configuration with the best final performance; near-ties are
/// broken by early learning speed, then by the lowest index.
pub fn select_best(results: &[Vec<LearningCurve>]) -> Result<Selection> {
    if results.is_empty() {
        return Err(Error::Harness("select_best needs at least one configuration".into()));
    }
    for (i, runs) in results.iter().enumerate() {
        if runs.is_empty() || runs.iter().any(|c| c.len() < FINAL_POINTS || c.steps() != runs[0].steps()) {
            return Err(Error::Harness(format!(
                "configuration {i} needs runs on one grid with at least {FINAL_POINTS} evaluation points"
            )));
        }
    }
    let per_run: Vec<Vec<f64>> = results
        .iter()
        .map(|runs| runs.iter().map(|c| c.final_mean(FINAL_POINTS)).collect())
        .collect();
    let final_scores: Vec<f64> = per_run.iter().map(|x| x.iter().sum::<f64>() / x.len() as f64).collect();

    // pooled within-configuration variance of the per-run scores
    let (mut ss, mut dof) = (0.0, 0usize);
    for (x, &m) in per_run.iter().zip(&final_scores) {
        ss += x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        dof += x.len() - 1;
    }
    let best = final_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let best_idx = final_scores.iter().position(|&s| s == best).unwrap();
    let tie_band = if dof > 0 {
        (ss / dof as f64).sqrt() / (per_run[best_idx].len() as f64).sqrt()
    } else {
        0.0
    };
    let tied: Vec<usize> = (0..results.len()).filter(|&i| final_scores[i] >= best - tie_band).collect();
    let early_scores: Vec<f64> = results.iter().map(|runs| early_area(runs)).collect();
    let mut winner = tied[0];
    for &i in &tied[1..] {
        if early_scores[i] > early_scores[winner] {
            winner = i;
        }
    }
    Ok(Selection {
        winner,
        final_scores,
        early_scores,
        tied,
        tie_band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::EvalRecord;
    use std::collections::BTreeSet;

    fn curve(values: impl IntoIterator<Item = f64>) -> LearningCurve {
        LearningCurve::from_records(
            values
                .into_iter()
                .enumerate()
                .map(|(i, v)| EvalRecord::new(i as u64 * 100, vec![v]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ppo_space_draws() {
        let space = ppo_space();
        let mut distinct = BTreeSet::new();
        for seed in 0..=100 {
            let a = sample_hpo_config(&space, seed);
            let eps = a["clip_eps"].as_f64().unwrap();
            assert!([0.1, 0.2, 0.3].contains(&eps));
            let g = a["gamma"].as_f64().unwrap();
            assert!((0.8..=0.9997).contains(&g));
            let mb = a["minibatch_size"].as_u64().unwrap();
            assert!(mb.is_power_of_two() && (4..=8192).contains(&mb));
            let epochs = a["epochs"].as_u64().unwrap();
            assert!((3..=30).contains(&epochs));
            distinct.insert(serde_json::to_string(&a).unwrap());
        }
        assert!(distinct.len() >= 80);
        assert_eq!(sample_hpo_config(&space, 7), sample_hpo_config(&space, 7));
    }

    #[test]
    fn sac_space_draws() {
        for seed in 0..50 {
            let a = sample_hpo_config(&sac_space(), seed);
            assert!([16, 64, 256, 512].contains(&a["batch_size"].as_u64().unwrap()));
            let g = a["gamma"].as_f64().unwrap();
            assert!((0.8..=0.9997).contains(&g));
        }
    }

    #[test]
    fn invalid_domains() {
        let bad = HpoSpace {
            params: BTreeMap::from([("x".to_string(), Domain::Uniform { min: 1.0, max: 1.0 })]),
        };
        assert!(bad.validate().is_err());
        assert!(ppo_space().validate().is_ok());
    }

    #[test]
    fn single_config_wins() {
        let s = select_best(&[vec![curve((0..12).map(f64::from))]]).unwrap();
        assert_eq!(s.winner, 0);
        assert!(select_best(&[]).is_err());
    }

    #[test]
    fn equal_final_scores_use_early_area() {
        let slow: Vec<f64> = (0..12).map(|i| if i < 2 { 0.0 } else { 5.0 }).collect();
        let fast: Vec<f64> = (0..12).map(|i| if i < 1 { 0.0 } else { 5.0 }).collect();
        let s = select_best(&[vec![curve(slow.clone())], vec![curve(fast)]]).unwrap();
        assert_eq!(s.tied, vec![0, 1]);
        assert_eq!(s.winner, 1);
    }
}
