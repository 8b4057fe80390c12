use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::LearningCurve;
use crate::{Error, Result};

/// Across-run summary at one evaluation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiSummary {
    pub step: u64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Two-sided 95% critical value of Student's t with `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975)
}

/// Mean and `mean ± t·s/√n` interval per evaluation step.
pub fn aggregate(curves: &[LearningCurve]) -> Result<Vec<CiSummary>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Harness("aggregate needs at least one curve".into()))?;
    let steps = first.steps();
    for (i, c) in curves.iter().enumerate() {
        if c.steps() != steps {
            return Err(Error::Harness(format!("curve {i} uses a different step grid")));
        }
    }
    let n = curves.len();
    let t = if n >= 2 { t_quantile_975(n - 1) } else { 0.0 };
    Ok(steps
        .iter()
        .enumerate()
        .map(|(j, &step)| {
            let xs: Vec<f64> = curves.iter().map(|c| c.records()[j].mean_return).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let half = if n >= 2 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                t * var.sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            CiSummary {
                step,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
                n,
            }
        })
        .collect())
}

/// Percentage of steps saved relative to the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Savings {
    Percent(f64),
    /// The approach never reached the baseline's threshold.
    NotReached,
}

impl fmt::Display for Savings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Savings::Percent(p) => write!(f, "{p:.2}"),
            Savings::NotReached => f.write_str("—"),
        }
    }
}

fn first_reaching(summary: &[CiSummary], threshold: f64) -> Option<u64> {
    summary.iter().find(|s| s.mean >= threshold).map(|s| s.step)
}

/// The threshold is the lower CI bound of the baseline at its final step.
/// Both curves are searched for the first grid point whose mean reaches it.
pub fn adaptation_savings(approach: &[CiSummary], baseline: &[CiSummary]) -> Result<Savings> {
    let steps = |s: &[CiSummary]| s.iter().map(|c| c.step).collect::<Vec<_>>();
    if approach.is_empty() || steps(approach) != steps(baseline) {
        return Err(Error::Harness("savings needs two summaries on the same non-empty grid".into()));
    }
    let threshold = baseline.last().unwrap().ci_low;
    let t_baseline = first_reaching(baseline, threshold)
        .ok_or_else(|| Error::Harness("baseline never reaches its own final lower bound".into()))?;
    match first_reaching(approach, threshold) {
        None => Ok(Savings::NotReached),
        Some(0) => Ok(Savings::Percent(100.0)),
        Some(_) if t_baseline == 0 => Err(Error::Harness(
            "baseline reaches its threshold at step 0; savings undefined".into(),
        )),
        Some(t) => Ok(Savings::Percent(100.0 - t as f64 / t_baseline as f64 * 100.0)),
    }
}
