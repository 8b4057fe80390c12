//! Plain-text run artifacts. Floats are written with Rust's shortest
//! round-trip formatting, so reading a CSV back recovers every value exactly.

use std::fs;
use std::path::Path;

use faultadapt::harness::{CiSummary, EvalRecord, HeatmapData, LearningCurve};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{io, CliError, Result};

pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.ftrl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(faultadapt::Error::Parse {
            key: path.display().to_string(),
            message: e.to_string(),
        })
    })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn finish(path: &Path, mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(|e| io(path, e))
}

fn row<W: std::io::Write>(path: &Path, w: &mut csv::Writer<W>, fields: Vec<String>) -> Result<()> {
    w.write_record(fields).map_err(|e| CliError::csv(path, e))
}

/// Columns: step, mean_return, ep_return_0, ep_return_1, ...
pub fn write_curve(path: &Path, curve: &LearningCurve) -> Result<()> {
    let episodes = curve.records().first().map_or(0, |r| r.returns.len());
    let mut w = writer(path)?;
    let mut header = vec!["step".to_string(), "mean_return".to_string()];
    header.extend((0..episodes).map(|i| format!("ep_return_{i}")));
    row(path, &mut w, header)?;
    for r in curve.records() {
        let mut fields = vec![r.step.to_string(), r.mean_return.to_string()];
        fields.extend(r.returns.iter().map(f64::to_string));
        row(path, &mut w, fields)?;
    }
    finish(path, w)
}

pub fn read_curve(path: &Path) -> Result<LearningCurve> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let bad = |m: String| {
        CliError::Core(faultadapt::Error::Parse {
            key: path.display().to_string(),
            message: m,
        })
    };
    let mut records = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let step: u64 = rec.get(0).unwrap_or("").parse().map_err(|_| bad(format!("bad step in {rec:?}")))?;
        let returns = rec
            .iter()
            .skip(2)
            .map(|x| x.parse::<f64>().map_err(|_| bad(format!("bad return {x:?}"))))
            .collect::<Result<Vec<_>>>()?;
        records.push(EvalRecord::new(step, returns));
    }
    Ok(LearningCurve::from_records(records)?)
}

/// Columns: step, mean, ci_low, ci_high, n
pub fn write_summary(path: &Path, summary: &[CiSummary]) -> Result<()> {
    let mut w = writer(path)?;
    row(path, &mut w, ["step", "mean", "ci_low", "ci_high", "n"].map(String::from).to_vec())?;
    for s in summary {
        row(
            path,
            &mut w,
            vec![s.step.to_string(), s.mean.to_string(), s.ci_low.to_string(), s.ci_high.to_string(), s.n.to_string()],
        )?;
    }
    finish(path, w)
}

/// One row per joint: joint, bin_0, bin_1, ...
pub fn write_heatmap(path: &Path, heatmap: &HeatmapData) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["joint".to_string()];
    header.extend((0..heatmap.bins).map(|i| format!("bin_{i}")));
    row(path, &mut w, header)?;
    for (j, probs) in heatmap.joints.iter().enumerate() {
        let mut fields = vec![j.to_string()];
        fields.extend(probs.iter().map(f64::to_string));
        row(path, &mut w, fields)?;
    }
    finish(path, w)
}

/// Writes an arbitrary table with a header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    row(path, &mut w, header.iter().map(|s| s.to_string()).collect())?;
    for r in rows {
        row(path, &mut w, r.clone())?;
    }
    finish(path, w)
}
