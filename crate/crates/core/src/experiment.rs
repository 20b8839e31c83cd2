//! Experiment orchestration and result files.
//!
//! Output layout under `<out>`:
//!
//! * `runs/<policy>_<seed>.csv`: one row per query, preceded by a
//!   `# config_hash: <hex>` comment line.
//! * `summary.json`: per-policy aggregates over trials.
//! * `config.json`: the resolved configuration and thresholds.
//! * `failures.json`: only when some runs failed.
//!
//! `ablate` writes one such directory per swept value, named
//! `<axis>_<value>`, plus `ablation.csv` / `ablation.json` comparison tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::baselines::PolicyKind;
use crate::check::{run_check, CheckReport};
use crate::config::{AblationAxis, ExperimentConfig};
use crate::error::{invalid, Error, Result};
use crate::metrics::{aggregate_trials, PolicySummary, TrialSummary};
use crate::search::{run, RunResult};

pub const HASH_PREFIX: &str = "# config_hash: ";

/// Successful runs plus the aggregated summary.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub config_hash: String,
    pub thresholds: Vec<f64>,
    pub results: Vec<RunResult>,
    pub summaries: BTreeMap<PolicyKind, PolicySummary>,
}

#[derive(Debug, Clone, Serialize)]
struct Failure {
    policy: String,
    seed: u64,
    error: String,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes the per-iteration log of one run.
pub fn write_run_csv(path: &Path, result: &RunResult, config_hash: &str) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{HASH_PREFIX}{config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    let m = result.thresholds.len();
    let mut header = vec!["t".to_string(), "chosen_id".to_string()];
    header.extend((1..=m).map(|i| format!("y{i}")));
    header.extend(
        ["feasible", "P", "fill", "covered", "acq_value", "wall_ms"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for rec in &result.records {
        let mut row = vec![rec.t.to_string(), rec.chosen_id.clone().unwrap_or_default()];
        row.extend(rec.y.iter().copied().map(fmt_f64));
        row.push(u8::from(rec.feasible).to_string());
        row.push(rec.positives.to_string());
        row.push(fmt_f64(rec.fill));
        row.push(fmt_f64(rec.covered));
        row.push(rec.acq_value.map(fmt_f64).unwrap_or_default());
        row.push(fmt_f64(rec.wall_ms));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn stat(a: &crate::metrics::Aggregate) -> Value {
    json!({ "mean": a.mean, "se": a.se })
}

/// JSON form of one policy's aggregates.
pub fn summary_json(summary: &PolicySummary, trials: usize, config_hash: &str) -> Value {
    let t_at: serde_json::Map<String, Value> = summary
        .t_at
        .iter()
        .map(|(x, a)| {
            (
                x.to_string(),
                json!({ "mean": a.mean, "se": a.se, "not_reached": a.not_reached }),
            )
        })
        .collect();
    json!({
        "aup": stat(&summary.aup),
        "positives": stat(&summary.positives),
        "fill": stat(&summary.fill),
        "covered": stat(&summary.covered),
        "t_at": t_at,
        "trials": trials,
        "config_hash": config_hash,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Runs every (policy, seed) pair of `config` and writes results to `out`.
///
/// Successful runs are always written. If any run fails a `failures.json`
/// manifest is written next to the summary and [`Error::BenchFailed`] is
/// returned.
pub fn bench(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<BenchReport> {
    config.validate()?;
    let (problem, thresholds) = config.build_problem()?;
    let hash = config.hash();
    let runs_dir = out.join("runs");
    fs::create_dir_all(&runs_dir)?;
    write_json(
        &out.join("config.json"),
        &json!({ "config_hash": hash, "thresholds": thresholds, "config": config }),
    )?;

    let jobs: Vec<(PolicyKind, u64)> = config
        .policies
        .iter()
        .flat_map(|&p| config.seeds().into_iter().map(move |s| (p, s)))
        .collect();
    let space = problem.space();
    let outcomes: Vec<std::result::Result<RunResult, Failure>> = thread_pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(policy, seed)| {
                let moc = config.moc_config(thresholds.clone(), seed);
                let written = run(policy, space, &moc).and_then(|res| {
                    write_run_csv(&runs_dir.join(format!("{policy}_{seed}.csv")), &res, &hash)?;
                    Ok(res)
                });
                written.map_err(|e| Failure {
                    policy: policy.to_string(),
                    seed,
                    error: e.to_string(),
                })
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }

    let mut by_policy: BTreeMap<PolicyKind, Vec<TrialSummary>> = BTreeMap::new();
    for r in &results {
        by_policy.entry(r.policy).or_default().push(r.summary.clone());
    }
    let summaries: BTreeMap<PolicyKind, PolicySummary> =
        by_policy.iter().map(|(p, trials)| (*p, aggregate_trials(trials))).collect();
    let summary_file: serde_json::Map<String, Value> = summaries
        .iter()
        .map(|(p, s)| (p.to_string(), summary_json(s, by_policy[p].len(), &hash)))
        .collect();
    write_json(&out.join("summary.json"), &Value::Object(summary_file))?;

    if !failures.is_empty() {
        let manifest = out.join("failures.json");
        write_json(&manifest, &json!({ "config_hash": hash, "failures": failures }))?;
        return Err(Error::BenchFailed {
            failed: failures.len(),
            manifest,
        });
    }
    Ok(BenchReport {
        config_hash: hash,
        thresholds,
        results,
        summaries,
    })
}

/// A single run: the first configured policy with the first seed.
pub fn run_single(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<BenchReport> {
    let seed = config.seeds()[0];
    let single = ExperimentConfig {
        policies: vec![config.policies[0]],
        trials: 1,
        seeds: Some(vec![seed]),
        ..config.clone()
    };
    bench(&single, out, workers)
}

/// The config `ablate` uses for one swept value.
pub fn ablation_config(config: &ExperimentConfig, axis: AblationAxis, value: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        policies: vec![PolicyKind::MocCas],
        ablate_axis: None,
        ablate_values: Vec::new(),
        ..config.clone()
    };
    match axis {
        AblationAxis::R => c.r = value,
        AblationAxis::Beta0 => c.beta0 = value,
    }
    c
}

pub fn ablation_dir(out: &Path, axis: AblationAxis, value: f64) -> PathBuf {
    out.join(format!("{}_{}", axis.name(), fmt_f64(value)))
}

/// Runs MOC-CAS once per value of `axis`, everything else (seeds included) frozen.
pub fn ablate(
    config: &ExperimentConfig,
    axis: AblationAxis,
    values: &[f64],
    out: &Path,
    workers: usize,
) -> Result<BTreeMap<String, PolicySummary>> {
    if values.is_empty() {
        return Err(invalid("ablate_values", "need at least one value"));
    }
    fs::create_dir_all(out)?;
    let hash = config.hash();
    let mut table = BTreeMap::new();
    let mut rows = Vec::new();
    for &v in values {
        let cfg = ablation_config(config, axis, v);
        cfg.validate()?;
        let report = bench(&cfg, &ablation_dir(out, axis, v), workers)?;
        let s = report.summaries[&PolicyKind::MocCas].clone();
        rows.push((v, s.clone()));
        table.insert(fmt_f64(v), s);
    }

    let mut file = fs::File::create(out.join("ablation.csv"))?;
    writeln!(file, "{HASH_PREFIX}{hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "axis",
        "value",
        "aup_mean",
        "aup_se",
        "positives_mean",
        "positives_se",
        "fill_mean",
        "fill_se",
    ])?;
    for (v, s) in &rows {
        w.write_record([
            axis.name().to_string(),
            fmt_f64(*v),
            fmt_f64(s.aup.mean),
            fmt_f64(s.aup.se),
            fmt_f64(s.positives.mean),
            fmt_f64(s.positives.se),
            fmt_f64(s.fill.mean),
            fmt_f64(s.fill.se),
        ])?;
    }
    w.flush()?;

    let groups: serde_json::Map<String, Value> = rows
        .iter()
        .map(|(v, s)| (fmt_f64(*v), summary_json(s, config.trials, &ablation_config(config, axis, *v).hash())))
        .collect();
    write_json(
        &out.join("ablation.json"),
        &json!({ "axis": axis.name(), "config_hash": hash, "groups": groups }),
    )?;
    Ok(table)
}

/// Runs the hard/soft gap check and writes `check_report.json`.
pub fn check(config: &ExperimentConfig, out: &Path, workers: usize) -> Result<CheckReport> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let report = thread_pool(workers)?.install(|| run_check(&config.check_config()))?;
    let mut value = serde_json::to_value(&report)?;
    if let Value::Object(map) = &mut value {
        map.insert("config_hash".into(), Value::String(config.hash()));
        map.insert("passed".into(), Value::Bool(report.passed()));
    }
    write_json(&out.join("check_report.json"), &value)?;
    report.into_result()
}
