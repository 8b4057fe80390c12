use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use faultadapt::checkpoint::{load_checkpoint, read_meta, save_checkpoint};
use faultadapt::config::{apply_assignment, parse_config, parse_seed_range, ExperimentConfig};
use faultadapt::continual::{offsets, run_adaptation, snapshot, train_from_scratch, Algorithm, AlgorithmConfig, TransferApproach};
use faultadapt::envs::apply_fault;
use faultadapt::harness::{
    adaptation_savings, aggregate, ppo_space, sac_space, sample_hpo_config, select_best, state_visitation, Assignment, CiSummary,
    HeatmapData, HpoSpace, LearningCurve,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{Command, RunArgs};
use crate::artifacts::{
    ensure_dir, read_curve, read_json, write_curve, write_heatmap, write_json, write_summary, write_table, CHECKPOINT_FILE, CURVE_FILE,
    MANIFEST_FILE, RESOLVED_CONFIG_FILE,
};
use crate::error::{io, CliError, Result};
use crate::manifest::{ManifestWriter, RunManifest, SeedEntry, SeedStatus};

/// Default output root when neither `--out` nor the config names one.
pub const OUT_ENV: &str = "FAULTADAPT_OUT";

/// Run seeds of a random-search configuration unless `--seeds` says otherwise.
pub const HPO_RUN_SEEDS: std::ops::RangeInclusive<u64> = 0..=9;

pub fn execute(command: Command) -> Result<Value> {
    match command {
        Command::Train(run) => cmd_train(&run),
        Command::Adapt { run, snapshot, approach } => cmd_adapt(&run, snapshot.as_deref(), approach),
        Command::Hpo { run, space, budget } => cmd_hpo(&run, space.as_deref(), budget),
        Command::Report { dirs, out } => cmd_report(&dirs, out.as_deref()),
        Command::Heatmap { run, snapshot } => cmd_heatmap(&run, snapshot.as_deref()),
    }
}

/// `--out`, then the config's `output_dir`, then `$FAULTADAPT_OUT`, then `runs`.
pub fn output_root(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed_{seed}"))
}

struct Experiment {
    config: ExperimentConfig,
    dir: PathBuf,
    jobs: usize,
}

fn load_experiment(run: &RunArgs) -> Result<Experiment> {
    let mut config = parse_config(&run.config)?;
    if let Some(s) = &run.seeds {
        config.seeds = parse_seed_range(s)?;
    }
    let dir = output_root(run.out.as_deref(), &config).join(&config.experiment_id);
    Ok(Experiment {
        config,
        dir,
        jobs: run.jobs as usize,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn new_manifest(config: &ExperimentConfig, command: &str, fault: Option<String>, approach: Option<u8>) -> RunManifest {
    RunManifest {
        experiment_id: config.experiment_id.clone(),
        command: command.to_string(),
        algorithm: config.algorithm.algorithm().name().to_string(),
        fault,
        approach,
        config_digest: config.digest(),
        seeds: config
            .seeds
            .iter()
            .map(|&seed| SeedEntry {
                seed,
                status: SeedStatus::Pending,
                artifacts: BTreeMap::new(),
                duration_secs: None,
                error: None,
            })
            .collect(),
    }
}

type Artifacts = BTreeMap<String, PathBuf>;

/// Runs `job` once per seed on `exp.jobs` workers. Each job owns its seed
/// directory; the manifest is rewritten after every status change. A failing
/// seed does not stop the others.
fn run_seeds<F>(exp: &Experiment, run_dir: &Path, manifest: RunManifest, job: F) -> Result<RunManifest>
where
    F: Fn(u64, &Path) -> Result<Artifacts> + Sync,
{
    ensure_dir(run_dir)?;
    write_json(&run_dir.join(RESOLVED_CONFIG_FILE), &exp.config)?;
    let writer = ManifestWriter::create(run_dir.join(MANIFEST_FILE), manifest)?;
    let bookkeeping: Vec<Result<()>> = thread_pool(exp.jobs)?.install(|| {
        exp.config
            .seeds
            .par_iter()
            .map(|&seed| {
                writer.update(seed, |e| e.status = SeedStatus::Running)?;
                let dir = seed_dir(run_dir, seed);
                let start = Instant::now();
                let outcome = ensure_dir(&dir).and_then(|_| job(seed, &dir));
                let secs = start.elapsed().as_secs_f64();
                writer.update(seed, |e| {
                    e.duration_secs = Some(secs);
                    match outcome {
                        Ok(artifacts) => {
                            e.status = SeedStatus::Done;
                            e.artifacts = artifacts
                                .into_iter()
                                .map(|(k, p)| (k, p.strip_prefix(run_dir).map(Path::to_path_buf).unwrap_or(p)))
                                .collect();
                        }
                        Err(err) => {
                            e.status = SeedStatus::Failed;
                            e.error = Some(err.to_string());
                        }
                    }
                })
            })
            .collect()
    });
    bookkeeping.into_iter().collect::<Result<()>>()?;
    let manifest = writer.snapshot();
    let failed = manifest.seeds.iter().filter(|e| e.status == SeedStatus::Failed).count();
    if failed > 0 {
        return Err(CliError::SeedsFailed {
            failed,
            total: manifest.seeds.len(),
            manifest: writer.path().to_path_buf(),
        });
    }
    Ok(manifest)
}

fn artifacts(pairs: &[(&str, &Path)]) -> Artifacts {
    pairs.iter().map(|(k, p)| (k.to_string(), p.to_path_buf())).collect()
}

/// Trains every seed from scratch in the configured environment (healthy
/// unless the config lists faults) and saves the final knowledge snapshot.
fn cmd_train(run: &RunArgs) -> Result<Value> {
    let exp = load_experiment(run)?;
    let cfg = &exp.config;
    let digest = cfg.digest();
    let run_dir = exp.dir.join("train");
    let manifest = run_seeds(&exp, &run_dir, new_manifest(cfg, "train", None, None), |seed, dir| {
        let out = train_from_scratch(
            &cfg.algorithm,
            &cfg.environment,
            cfg.phases.train_steps,
            cfg.phases.train_eval_every,
            cfg.evaluation.episodes,
            seed,
        )?;
        let curve = dir.join(CURVE_FILE);
        write_curve(&curve, &out.curve)?;
        let ckpt = dir.join(CHECKPOINT_FILE);
        save_checkpoint(&ckpt, &snapshot(&out.learner, cfg.phases.train_steps), &digest)?;
        Ok(artifacts(&[("curve", &curve), ("checkpoint", &ckpt)]))
    })?;
    Ok(json!({ "command": "train", "run_dir": run_dir, "seeds_done": manifest.done_seeds() }))
}

/// Checkpoint path of every configured seed. A file is shared by all seeds; a
/// directory is expected to hold `seed_<n>/checkpoint.ftrl`.
fn snapshot_paths(exp: &Experiment, source: Option<&Path>) -> Result<BTreeMap<u64, PathBuf>> {
    let source = source.map(Path::to_path_buf).unwrap_or_else(|| exp.dir.join("train"));
    let per_seed = source.is_dir();
    let paths: BTreeMap<u64, PathBuf> = exp
        .config
        .seeds
        .iter()
        .map(|&s| (s, if per_seed { seed_dir(&source, s).join(CHECKPOINT_FILE) } else { source.clone() }))
        .collect();
    // every snapshot is checked before any run starts
    let expected = exp.config.algorithm.algorithm();
    let digest = exp.config.digest();
    for path in paths.values() {
        let meta = read_meta(path)?;
        if meta.algorithm != expected {
            return Err(CliError::SnapshotMismatch {
                path: path.clone(),
                reason: format!("snapshot holds a {} learner, config asks for {}", meta.algorithm.name(), expected.name()),
            });
        }
        if meta.config_digest != digest {
            return Err(CliError::SnapshotMismatch {
                path: path.clone(),
                reason: format!("config digest {} differs from the snapshot's {}", digest, meta.config_digest),
            });
        }
    }
    Ok(paths)
}

fn cmd_adapt(run: &RunArgs, source: Option<&Path>, approach: Option<u8>) -> Result<Value> {
    let exp = load_experiment(run)?;
    let cfg = &exp.config;
    let number = approach
        .or(cfg.approach.map(TransferApproach::number))
        .ok_or_else(|| CliError::Usage("adapt needs --approach or an \"approach\" key in the config".into()))?;
    let approach = TransferApproach::try_from(number).map_err(CliError::Usage)?;
    cfg.phases.validate(&cfg.environment)?;
    let paths = snapshot_paths(&exp, source)?;
    let label = cfg.phases.fault.label();
    let digest = cfg.digest();
    let run_dir = exp.dir.join(format!("adapt_{label}_approach{number}"));
    let manifest = new_manifest(cfg, "adapt", Some(label.clone()), Some(number));
    let manifest = run_seeds(&exp, &run_dir, manifest, |seed, dir| {
        let ckpt = load_checkpoint(&paths[&seed])?;
        let out = run_adaptation(&ckpt.snapshot, approach, &cfg.environment, &cfg.phases, cfg.evaluation.episodes, seed)?;
        let curve = dir.join(CURVE_FILE);
        write_curve(&curve, &out.curve)?;
        let path = dir.join(CHECKPOINT_FILE);
        save_checkpoint(&path, &snapshot(&out.learner, cfg.phases.adapt_steps), &digest)?;
        Ok(artifacts(&[("curve", &curve), ("checkpoint", &path)]))
    })?;
    Ok(json!({
        "command": "adapt",
        "run_dir": run_dir,
        "fault": label,
        "approach": number,
        "seeds_done": manifest.done_seeds(),
    }))
}

fn mean_heatmap(maps: &[HeatmapData]) -> HeatmapData {
    let first = &maps[0];
    let n = maps.len() as f64;
    HeatmapData {
        bins: first.bins,
        joints: (0..first.joints.len())
            .map(|j| (0..first.bins).map(|b| maps.iter().map(|m| m.joints[j][b]).sum::<f64>() / n).collect())
            .collect(),
        samples: maps.iter().map(|m| m.samples).sum(),
    }
}

/// Visitation of each saved policy in the healthy and the faulty environment,
/// per seed and pooled over seeds.
fn cmd_heatmap(run: &RunArgs, source: Option<&Path>) -> Result<Value> {
    let exp = load_experiment(run)?;
    let cfg = &exp.config;
    let paths = snapshot_paths(&exp, source)?;
    let healthy = cfg.environment.healthy();
    let faulty = apply_fault(&healthy, cfg.phases.fault.clone())?;
    let label = cfg.phases.fault.label();
    let run_dir = exp.dir.join(format!("heatmap_{label}"));
    let maps: Mutex<BTreeMap<u64, [HeatmapData; 2]>> = Mutex::new(BTreeMap::new());
    let manifest = new_manifest(cfg, "heatmap", Some(label.clone()), None);
    run_seeds(&exp, &run_dir, manifest, |seed, dir| {
        let ckpt = load_checkpoint(&paths[&seed])?;
        let eval_seed = seed.wrapping_add(offsets::EVAL);
        let visit = |env| state_visitation(&ckpt.snapshot.model, env, cfg.evaluation.heatmap_episodes, cfg.evaluation.heatmap_bins, eval_seed);
        let pair = [visit(&healthy)?, visit(&faulty)?];
        let (h, f) = (dir.join("healthy.csv"), dir.join("fault.csv"));
        write_heatmap(&h, &pair[0])?;
        write_heatmap(&f, &pair[1])?;
        maps.lock().expect("heatmap lock").insert(seed, pair);
        Ok(artifacts(&[("healthy", &h), ("fault", &f)]))
    })?;
    let maps = maps.into_inner().expect("heatmap lock");
    let (healthy_maps, fault_maps): (Vec<_>, Vec<_>) = maps.into_values().map(|[h, f]| (h, f)).unzip();
    write_heatmap(&run_dir.join("healthy.csv"), &mean_heatmap(&healthy_maps))?;
    write_heatmap(&run_dir.join("fault.csv"), &mean_heatmap(&fault_maps))?;
    Ok(json!({ "command": "heatmap", "run_dir": run_dir, "fault": label, "seeds": healthy_maps.len() }))
}

struct Candidate {
    config_seed: u64,
    assignment: Assignment,
    algorithm: std::result::Result<AlgorithmConfig, String>,
}

/// Random search: config seeds `0..budget` are sampled, duplicates dropped,
/// and every remaining configuration is trained on each run seed for the
/// phase-1 budget.
fn cmd_hpo(run: &RunArgs, space_path: Option<&Path>, budget: u64) -> Result<Value> {
    let mut run = run.clone();
    if run.seeds.is_none() {
        run.seeds = Some(format!("{}-{}", HPO_RUN_SEEDS.start(), HPO_RUN_SEEDS.end()));
    }
    let exp = load_experiment(&run)?;
    let cfg = &exp.config;
    if budget == 0 {
        return Err(CliError::Usage("--budget must be at least 1".into()));
    }
    let space: HpoSpace = match space_path {
        Some(p) => read_json(p)?,
        None => match cfg.algorithm.algorithm() {
            Algorithm::Ppo => ppo_space(),
            Algorithm::Sac => sac_space(),
        },
    };
    space.validate()?;
    cfg.phases.validate(&cfg.environment)?;

    let mut seen = BTreeSet::new();
    let candidates: Vec<Candidate> = (0..budget)
        .filter_map(|config_seed| {
            let assignment = sample_hpo_config(&space, config_seed);
            seen.insert(serde_json::to_string(&assignment).expect("assignment serializes")).then(|| Candidate {
                config_seed,
                algorithm: apply_assignment(&cfg.algorithm, &assignment).map_err(|e| e.to_string()),
                assignment,
            })
        })
        .collect();

    let run_dir = exp.dir.join("hpo");
    ensure_dir(&run_dir)?;
    write_json(&run_dir.join(RESOLVED_CONFIG_FILE), cfg)?;
    write_json(&run_dir.join("space.json"), &space)?;

    let jobs: Vec<(usize, u64)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.algorithm.is_ok())
        .flat_map(|(i, _)| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let curves: Vec<Result<LearningCurve>> = thread_pool(exp.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let c = &candidates[i];
                let algorithm = c.algorithm.as_ref().expect("filtered");
                let out = train_from_scratch(algorithm, &cfg.environment, cfg.phases.train_steps, cfg.phases.train_eval_every, cfg.evaluation.episodes, seed)?;
                let dir = seed_dir(&run_dir.join(format!("config_{}", c.config_seed)), seed);
                ensure_dir(&dir)?;
                write_curve(&dir.join(CURVE_FILE), &out.curve)?;
                Ok(out.curve)
            })
            .collect()
    });

    let mut per_config: BTreeMap<usize, Vec<LearningCurve>> = BTreeMap::new();
    let mut failed: BTreeMap<usize, String> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.algorithm.as_ref().err().map(|e| (i, e.clone())))
        .collect();
    for (&(i, seed), result) in jobs.iter().zip(curves) {
        match result {
            Ok(curve) => per_config.entry(i).or_default().push(curve),
            Err(e) => {
                failed.entry(i).or_insert_with(|| format!("seed {seed}: {e}"));
            }
        }
    }
    per_config.retain(|i, _| !failed.contains_key(i));
    for (&i, runs) in &per_config {
        let dir = run_dir.join(format!("config_{}", candidates[i].config_seed));
        write_json(&dir.join("assignment.json"), &candidates[i].assignment)?;
        write_summary(&dir.join("aggregate.csv"), &aggregate(runs)?)?;
    }
    if per_config.is_empty() {
        return Err(CliError::Usage("every sampled configuration failed; see the leaderboard".into()));
    }

    let indices: Vec<usize> = per_config.keys().copied().collect();
    let results: Vec<Vec<LearningCurve>> = per_config.into_values().collect();
    let selection = select_best(&results)?;
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by(|&a, &b| selection.final_scores[b].total_cmp(&selection.final_scores[a]).then(a.cmp(&b)));
    let entries: Vec<Value> = order
        .iter()
        .enumerate()
        .map(|(rank, &k)| {
            let c = &candidates[indices[k]];
            json!({
                "rank": rank + 1,
                "config_seed": c.config_seed,
                "assignment": c.assignment,
                "final_score": selection.final_scores[k],
                "early_score": selection.early_scores[k],
                "tied_with_best": selection.tied.contains(&k),
            })
        })
        .collect();
    let winner = &candidates[indices[selection.winner]];
    let failures: Vec<Value> = failed
        .iter()
        .map(|(&i, e)| json!({ "config_seed": candidates[i].config_seed, "error": e }))
        .collect();
    let leaderboard = json!({
        "algorithm": cfg.algorithm.algorithm().name(),
        "budget": budget,
        "unique_configs": candidates.len(),
        "run_seeds": cfg.seeds,
        "tie_band": selection.tie_band,
        "winner": { "config_seed": winner.config_seed, "assignment": winner.assignment },
        "entries": entries,
        "failed": failures,
    });
    let path = run_dir.join("leaderboard.json");
    write_json(&path, &leaderboard)?;
    Ok(json!({
        "command": "hpo",
        "run_dir": run_dir,
        "unique_configs": candidates.len(),
        "winner_config_seed": winner.config_seed,
        "leaderboard": path,
    }))
}

/// Run directories named by `dirs`: a directory with a manifest is a run,
/// otherwise its immediate children with manifests are.
fn discover_runs(dirs: &[PathBuf], missing: &mut Vec<String>) -> Vec<PathBuf> {
    let mut runs = Vec::new();
    for d in dirs {
        if d.join(MANIFEST_FILE).is_file() {
            runs.push(d.clone());
            continue;
        }
        let mut children: Vec<PathBuf> = fs::read_dir(d)
            .map(|it| it.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join(MANIFEST_FILE).is_file()).collect())
            .unwrap_or_default();
        children.sort();
        if children.is_empty() {
            missing.push(format!("{}: no run manifests found", d.display()));
        }
        runs.extend(children);
    }
    runs
}

struct AdaptRun {
    name: String,
    approach: u8,
    summary: Vec<CiSummary>,
    config: ExperimentConfig,
    dir: PathBuf,
    first_seed: u64,
}

fn load_resolved(run_dir: &Path) -> Result<ExperimentConfig> {
    let path = run_dir.join(RESOLVED_CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    Ok(ExperimentConfig::from_json_str(&text)?)
}

/// Aggregates finished runs. Missing or unreadable artifacts are listed in
/// `report.json`; everything that can be computed is still written.
fn cmd_report(dirs: &[PathBuf], out: Option<&Path>) -> Result<Value> {
    let mut missing = Vec::new();
    let mut errors = Vec::new();
    let runs = discover_runs(dirs, &mut missing);
    let out = match (out, runs.first()) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(r)) => r.parent().map(|p| p.join("report")).unwrap_or_else(|| PathBuf::from("report")),
        (None, None) => dirs[0].join("report"),
    };
    ensure_dir(&out)?;
    let mut files: Vec<PathBuf> = Vec::new();
    let mut groups: BTreeMap<(String, String, String), Vec<AdaptRun>> = BTreeMap::new();

    for run_dir in &runs {
        let dir_name = run_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let manifest = match RunManifest::load(&run_dir.join(MANIFEST_FILE)) {
            Ok(m) => m,
            Err(e) => {
                errors.push(e.to_string());
                continue;
            }
        };
        if manifest.command == "heatmap" {
            continue;
        }
        let name = format!("{}_{}", manifest.experiment_id, dir_name);
        let mut curves = Vec::new();
        let mut done = Vec::new();
        for entry in &manifest.seeds {
            let path = seed_dir(run_dir, entry.seed).join(CURVE_FILE);
            if entry.status != SeedStatus::Done {
                missing.push(format!("{}: seed {} is {:?}", run_dir.display(), entry.seed, entry.status));
                continue;
            }
            match read_curve(&path) {
                Ok(c) => {
                    curves.push(c);
                    done.push(entry.seed);
                }
                Err(e) => missing.push(format!("{}: {e}", path.display())),
            }
        }
        if curves.is_empty() {
            missing.push(format!("{}: no finished curves", run_dir.display()));
            continue;
        }
        let summary = match aggregate(&curves) {
            Ok(s) => s,
            Err(e) => {
                errors.push(format!("{name}: {e}"));
                continue;
            }
        };
        let path = out.join(format!("{name}_aggregate.csv"));
        write_summary(&path, &summary)?;
        files.push(path);
        if manifest.command != "adapt" {
            continue;
        }
        let (Some(fault), Some(approach)) = (manifest.fault.clone(), manifest.approach) else {
            errors.push(format!("{name}: adapt manifest lacks fault or approach"));
            continue;
        };
        match load_resolved(run_dir) {
            Ok(config) => groups
                .entry((manifest.experiment_id.clone(), manifest.algorithm.clone(), fault))
                .or_default()
                .push(AdaptRun {
                    name,
                    approach,
                    summary,
                    config,
                    dir: run_dir.clone(),
                    first_seed: done[0],
                }),
            Err(e) => errors.push(format!("{name}: {e}")),
        }
    }

    let mut savings_rows = Vec::new();
    let mut bar_rows = Vec::new();
    for ((experiment, algorithm, fault), group) in &mut groups {
        group.sort_by_key(|r| r.approach);
        let key = vec![experiment.clone(), algorithm.clone(), fault.clone()];
        match group.iter().find(|r| r.approach == 4) {
            None => missing.push(format!("{experiment}/{algorithm}/{fault}: no approach 4 baseline, savings skipped")),
            Some(base) => {
                for r in group.iter() {
                    match adaptation_savings(&r.summary, &base.summary) {
                        Ok(s) => {
                            let mut row = key.clone();
                            row.extend([r.approach.to_string(), s.to_string()]);
                            savings_rows.push(row);
                        }
                        Err(e) => errors.push(format!("{}: {e}", r.name)),
                    }
                }
            }
        }
        for r in group.iter() {
            for &step in &r.config.evaluation.report_checkpoints {
                match r.summary.iter().find(|s| s.step == step) {
                    Some(s) => {
                        let mut row = key.clone();
                        row.extend([
                            r.approach.to_string(),
                            step.to_string(),
                            s.mean.to_string(),
                            s.ci_low.to_string(),
                            s.ci_high.to_string(),
                            s.n.to_string(),
                        ]);
                        bar_rows.push(row);
                    }
                    None => missing.push(format!("{}: no evaluation at checkpoint step {step}", r.name)),
                }
            }
            match report_heatmap(r) {
                Ok(h) => {
                    let path = out.join(format!("{}_heatmap.csv", r.name));
                    write_heatmap(&path, &h)?;
                    files.push(path);
                }
                Err(e) => missing.push(format!("{}: heatmap skipped: {e}", r.name)),
            }
        }
    }
    if !savings_rows.is_empty() {
        let path = out.join("savings.csv");
        write_table(&path, &["experiment", "algorithm", "fault", "approach", "savings_percent"], &savings_rows)?;
        files.push(path);
    }
    if !bar_rows.is_empty() {
        let path = out.join("early_performance.csv");
        write_table(&path, &["experiment", "algorithm", "fault", "approach", "step", "mean", "ci_low", "ci_high", "n"], &bar_rows)?;
        files.push(path);
    }
    let report = json!({
        "runs": runs,
        "files": files,
        "missing": missing,
        "errors": errors,
    });
    write_json(&out.join("report.json"), &report)?;
    Ok(json!({ "command": "report", "out": out, "files": files.len(), "missing": missing, "errors": errors }))
}

/// Fault-environment visitation of the first finished seed's adapted policy.
fn report_heatmap(run: &AdaptRun) -> Result<HeatmapData> {
    let cfg = &run.config;
    let ckpt = load_checkpoint(&seed_dir(&run.dir, run.first_seed).join(CHECKPOINT_FILE))?;
    let env = apply_fault(&cfg.environment.healthy(), cfg.phases.fault.clone())?;
    Ok(state_visitation(
        &ckpt.snapshot.model,
        &env,
        cfg.evaluation.heatmap_episodes,
        cfg.evaluation.heatmap_bins,
        run.first_seed.wrapping_add(offsets::EVAL),
    )?)
}
