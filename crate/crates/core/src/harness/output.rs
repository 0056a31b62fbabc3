//! Result files.
//!
//! | file             | columns                                        |
//! |------------------|------------------------------------------------|
//! | `estimates.csv`  | `trial,algorithm,step,node,x,y[,z],error`      |
//! | `summary.csv`    | `algorithm,trial,error`                        |
//! | `cdf_<algo>.csv` | `value,fraction`                               |
//! | `stats.csv`      | `algorithm,trials,mean,variance`               |
//! | `locdyn.csv`     | `trial,step,node,x,y[,z],iterations,grad_norm` |
//! | `run.toml`       | config echo, seeds, version, runtime           |
//!
//! Floats are written in shortest round-trip form, so every file except
//! `run.toml` is a pure function of config and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::experiment::{Algorithm, AlgorithmSummary, ExperimentConfig, MonteCarloRun, ResultSummary, SweepPoint};
use super::metrics::{empirical_cdf, mean_step_error, step_error, ErrorMetric};
use crate::error::{Error, Result};
use crate::solver::EstimateHistory;

pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const RUN_META_FILE: &str = "run.toml";
pub const SWEEP_FILE: &str = "sweep.csv";

pub fn cdf_file_name(algorithm: Algorithm) -> String {
    format!("cdf_{}.csv", algorithm.name())
}

pub fn estimates_csv(run: &MonteCarloRun, dim: usize) -> String {
    let mut out = String::from("trial,algorithm,step,node,");
    out.push_str(["x", "y", "z"][..dim].join(",").as_str());
    out.push_str(",error\n");
    for r in &run.runs {
        for (k, (est, errs)) in r.estimates.iter().zip(&r.node_errors).enumerate() {
            for (i, (pt, e)) in est.nodes().zip(errs).enumerate() {
                let _ = write!(out, "{},{},{},{}", r.trial, r.algorithm.name(), k + 1, i);
                for v in pt {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out, ",{e}");
            }
        }
    }
    out
}

/// Per-step LocDyn log: `trial,step,node,x,y[,z],iterations,grad_norm`.
pub fn locdyn_log_csv(trial: usize, history: &EstimateHistory) -> String {
    let dim = history.estimates.first().map_or(2, |p| p.dim());
    let mut out = String::from("trial,step,node,");
    out.push_str(["x", "y", "z"][..dim].join(",").as_str());
    out.push_str(",iterations,grad_norm\n");
    for (k, (est, diag)) in history.estimates.iter().zip(&history.diagnostics).enumerate() {
        for (i, pt) in est.nodes().enumerate() {
            let _ = write!(out, "{trial},{},{i}", k + 1);
            for v in pt {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{},{}", diag.iterations, diag.grad_norm);
        }
    }
    out
}

pub fn summary_csv(summary: &ResultSummary) -> String {
    let mut out = String::from("algorithm,trial,error\n");
    for a in &summary.algorithms {
        for (t, e) in a.errors.iter().enumerate() {
            let _ = writeln!(out, "{},{t},{e}", a.algorithm.name());
        }
    }
    out
}

pub fn cdf_csv(cdf: &[(f64, f64)]) -> String {
    let mut out = String::from("value,fraction\n");
    for (v, f) in cdf {
        let _ = writeln!(out, "{v},{f}");
    }
    out
}

pub fn stats_csv(summary: &ResultSummary) -> String {
    let mut out = String::from("algorithm,trials,mean,variance\n");
    for a in &summary.algorithms {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            a.algorithm.name(),
            a.errors.len(),
            a.mean,
            a.variance
        );
    }
    out
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("lambda,algorithm,mean,variance\n");
    for p in points {
        for a in &p.summary.algorithms {
            let _ = writeln!(out, "{},{},{},{}", p.lambda, a.algorithm.name(), a.mean, a.variance);
        }
    }
    out
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'a str,
    scenario: &'a str,
    runtime_secs: f64,
    trial_seeds: &'a [u64],
    config: &'a ExperimentConfig,
}

pub fn run_meta_toml(config: &ExperimentConfig, run: &MonteCarloRun) -> Result<String> {
    toml::to_string(&RunMeta {
        version: env!("CARGO_PKG_VERSION"),
        scenario: &run.summary.scenario,
        runtime_secs: run.runtime_secs,
        trial_seeds: &run.summary.trial_seeds,
        config,
    })
    .map_err(|e| Error::Parse(e.to_string()))
}

/// Writes the summary files, `run.toml`, and `estimates.csv` when the run
/// kept its estimates.
pub fn write_results(dir: impl AsRef<Path>, config: &ExperimentConfig, run: &MonteCarloRun, dim: usize) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    if !run.runs.is_empty() {
        fs::write(dir.join(ESTIMATES_FILE), estimates_csv(run, dim))?;
    }
    write_summary_files(dir, &run.summary)?;
    fs::write(dir.join(RUN_META_FILE), run_meta_toml(config, run)?)?;
    Ok(())
}

/// `summary.csv`, `stats.csv` and one `cdf_<algo>.csv` per algorithm.
pub fn write_summary_files(dir: impl AsRef<Path>, summary: &ResultSummary) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SUMMARY_FILE), summary_csv(summary))?;
    fs::write(dir.join(STATS_FILE), stats_csv(summary))?;
    for a in &summary.algorithms {
        fs::write(dir.join(cdf_file_name(a.algorithm)), cdf_csv(&a.cdf))?;
    }
    Ok(())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    let line = record.position().map_or(0, |p| p.line());
    record[idx]
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} '{}'", &record[idx])))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

type Groups = BTreeMap<(usize, usize), f64>;

fn push_algorithm(order: &mut Vec<Algorithm>, a: Algorithm) -> usize {
    order.iter().position(|&x| x == a).unwrap_or_else(|| {
        order.push(a);
        order.len() - 1
    })
}

fn summaries_from_groups(order: Vec<Algorithm>, groups: Groups) -> Result<Vec<AlgorithmSummary>> {
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    order
        .into_iter()
        .enumerate()
        .map(|(idx, alg)| {
            let errors: Vec<f64> = groups.range((idx, 0)..(idx + 1, 0)).map(|(_, v)| *v).collect();
            AlgorithmSummary::from_errors(alg, errors)
        })
        .collect()
}

/// Rebuilds per-trial errors from an `estimates.csv` log. With the same
/// metric the result equals the in-run summary bit for bit.
pub fn summary_from_estimates(text: &str, metric: ErrorMetric) -> Result<Vec<AlgorithmSummary>> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 6 || cols[..4] != ["trial", "algorithm", "step", "node"] || cols.last() != Some(&"error") {
        return Err(Error::Parse(format!("not an estimates log header: {header:?}")));
    }
    let err_col = cols.len() - 1;
    let mut order = Vec::new();
    // (algorithm, trial, step) -> [(node, error)]
    let mut rows: BTreeMap<(usize, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let a = push_algorithm(&mut order, record[1].parse()?);
        let trial = parse_field(&record, 0, "trial")?;
        let step = parse_field(&record, 2, "step")?;
        let node = parse_field(&record, 3, "node")?;
        let err = parse_field(&record, err_col, "error")?;
        rows.entry((a, trial, step)).or_default().push((node, err));
    }
    let mut per_trial: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for ((a, trial, _step), mut nodes) in rows {
        nodes.sort_by_key(|(n, _)| *n);
        let errs: Vec<f64> = nodes.into_iter().map(|(_, e)| e).collect();
        per_trial.entry((a, trial)).or_default().push(step_error(&errs, metric));
    }
    let mut groups = Groups::new();
    for (key, steps) in per_trial {
        groups.insert(key, mean_step_error(&steps)?);
    }
    summaries_from_groups(order, groups)
}

/// Reads a `summary.csv` back into per-algorithm summaries.
pub fn summary_from_summary_csv(text: &str) -> Result<Vec<AlgorithmSummary>> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != ["algorithm", "trial", "error"] {
        return Err(Error::Parse(format!("not a summary header: {header:?}")));
    }
    let mut order = Vec::new();
    let mut groups = Groups::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let a = push_algorithm(&mut order, record[0].parse()?);
        let trial = parse_field(&record, 1, "trial")?;
        groups.insert((a, trial), parse_field(&record, 2, "error")?);
    }
    summaries_from_groups(order, groups)
}

/// Summaries from either log type, chosen by header.
pub fn summarize_log(text: &str, metric: ErrorMetric) -> Result<Vec<AlgorithmSummary>> {
    if text.starts_with("trial,") {
        summary_from_estimates(text, metric)
    } else {
        summary_from_summary_csv(text)
    }
}

/// CDF of plain error values, one per line (an optional header is skipped).
pub fn cdf_from_values(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if ln == 0 => continue,
            Err(_) => return Err(Error::Parse(format!("line {}: '{t}'", ln + 1))),
        }
    }
    empirical_cdf(&values)
}
