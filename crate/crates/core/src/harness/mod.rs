//! Experiment runner: builds environments, runs optimizers and writes
//! traces and summaries as CSV.
//!
//! Output layout under `output_dir`:
//!
//! * `config.toml`: the effective configuration, loadable as-is;
//! * `env_r{r}.txt`: the model of repeat `r` (see [`crate::env::format`]);
//! * `trace_{algorithm}_r{r}.csv`: one row per iteration;
//! * `summary.csv`: one row per (algorithm, repeat) describing the
//!   returned iterate;
//! * `compare.csv`: written by [`compare_wallclock`].

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;

use crate::env::{format::write_env, Environment};
use crate::error::{Error, Result};
use crate::optim::{run_algorithm, Algorithm, ModelSource, RunResult};
use crate::surrogate::max_violation;

/// Returned iterate of one (algorithm, repeat) run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub repeat: usize,
    pub env_seed: u64,
    pub optimizer_seed: u64,
    pub best_iteration: usize,
    pub active_index: usize,
    pub surrogate_value: f64,
    /// Canonical `J_0 .. J_K`.
    pub values: Vec<f64>,
    /// The same values in each signal's native sense.
    pub native_values: Vec<f64>,
    pub native_thresholds: Vec<f64>,
    pub feasible: bool,
    /// `max_n J_n - b_n` in canonical units.
    pub max_violation: f64,
    pub wall_ms_total: f64,
    pub evaluator_calls: usize,
    pub fixed_point_sweeps: usize,
    pub trace_file: PathBuf,
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub rows: Vec<RunSummary>,
    pub summary_file: PathBuf,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn trace_header(n_signals: usize, native: bool) -> Vec<String> {
    let mut h: Vec<String> = ["iteration", "wall_ms", "active_index", "surrogate_value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..n_signals).map(|i| format!("j_{i}")));
    if native {
        h.extend((0..n_signals).map(|i| format!("native_{i}")));
    }
    h
}

fn write_trace(path: &Path, result: &RunResult, env: &Environment, config: &ExperimentConfig) -> Result<()> {
    let n = env.model.costs.len();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(n, config.report_native_sense))?;
    for st in &result.trace {
        let wall = if config.record_wall_ms { st.wall_ms } else { 0.0 };
        let mut row = vec![st.iteration.to_string(), num(wall), st.active_index.to_string(), num(st.surrogate_value)];
        row.extend(st.objective_values.iter().map(|v| num(*v)));
        if config.report_native_sense {
            row.extend(st.objective_values.iter().enumerate().map(|(i, v)| num(env.model.to_native(i, *v))));
        }
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn summarize(result: &RunResult, env: &Environment, repeat: usize, optimizer_seed: u64, trace_file: PathBuf) -> RunSummary {
    let best = result.best_state();
    let model = env.model(result.best_iteration);
    let violation = max_violation(&best.objective_values, &model.thresholds);
    RunSummary {
        algorithm: result.algorithm,
        repeat,
        env_seed: env.spec.seed,
        optimizer_seed,
        best_iteration: result.best_iteration,
        active_index: best.active_index,
        surrogate_value: best.surrogate_value,
        values: best.objective_values.clone(),
        native_values: best.objective_values.iter().enumerate().map(|(i, v)| model.to_native(i, *v)).collect(),
        native_thresholds: model.native_thresholds(),
        feasible: violation <= 0.0,
        max_violation: violation,
        wall_ms_total: result.wall_ms_total,
        evaluator_calls: result.evaluator_calls,
        fixed_point_sweeps: result.fixed_point_sweeps,
        trace_file,
    }
}

fn write_summary(path: &Path, rows: &[RunSummary]) -> Result<()> {
    let n = rows.first().map(|r| r.values.len()).unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = [
        "algorithm",
        "repeat",
        "env_seed",
        "optimizer_seed",
        "best_iteration",
        "active_index",
        "surrogate_value",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n).map(|i| format!("j_{i}")));
    header.extend((0..n).map(|i| format!("native_{i}")));
    header.extend((1..n).map(|i| format!("native_threshold_{i}")));
    header.extend(
        ["feasible", "max_violation", "wall_ms_total", "evaluator_calls", "fixed_point_sweeps", "trace_file"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![
            r.algorithm.to_string(),
            r.repeat.to_string(),
            r.env_seed.to_string(),
            r.optimizer_seed.to_string(),
            r.best_iteration.to_string(),
            r.active_index.to_string(),
            num(r.surrogate_value),
        ];
        row.extend(r.values.iter().map(|v| num(*v)));
        row.extend(r.native_values.iter().map(|v| num(*v)));
        row.extend(r.native_thresholds.iter().map(|v| num(*v)));
        row.push(r.feasible.to_string());
        row.push(num(r.max_violation));
        row.push(num(r.wall_ms_total));
        row.push(r.evaluator_calls.to_string());
        row.push(r.fixed_point_sweeps.to_string());
        let file = r.trace_file.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        row.push(file);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare_dir(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    fs::write(config.output_dir.join("config.toml"), config.to_toml_string()?)?;
    Ok(())
}

fn build_repeat(config: &ExperimentConfig, repeat: usize) -> Result<(Environment, crate::optim::OptimizerConfig)> {
    let (spec, opt) = config.for_repeat(repeat);
    let env = Environment::new(spec)?;
    let file = File::create(config.output_dir.join(format!("env_r{repeat}.txt")))?;
    write_env(&env.model, BufWriter::new(file))?;
    Ok((env, opt))
}

/// Run every (algorithm, repeat) pair, writing traces and `summary.csv`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    prepare_dir(config)?;
    let mut rows = Vec::new();
    for repeat in 0..config.repeats {
        let (env, opt) = build_repeat(config, repeat)?;
        for &alg in &config.algorithms {
            let result = run_algorithm(&env, &opt, alg)?;
            let trace_file = config.output_dir.join(format!("trace_{alg}_r{repeat}.csv"));
            write_trace(&trace_file, &result, &env, config)?;
            rows.push(summarize(&result, &env, repeat, opt.seed, trace_file));
        }
    }
    let summary_file = config.output_dir.join("summary.csv");
    write_summary(&summary_file, &rows)?;
    Ok(ExperimentSummary { rows, summary_file })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub algorithm: Algorithm,
    pub wall_ms: f64,
    pub evaluator_calls: usize,
    pub fixed_point_sweeps: usize,
    /// `wall_ms` over the epigraph baseline's `wall_ms`.
    pub ratio_to_epirc: f64,
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub compare_file: PathBuf,
}

impl CompareReport {
    pub fn ratio(&self, algorithm: Algorithm) -> Option<f64> {
        self.rows.iter().find(|r| r.algorithm == algorithm).map(|r| r.ratio_to_epirc)
    }
}

/// Time each configured algorithm against `epirc` at a matched budget
/// (`iterations == epirc_outer * epirc_inner`) on repeat 0, writing
/// `compare.csv`. Traces and the summary are written as in
/// [`run_experiment`].
pub fn compare_wallclock(config: &ExperimentConfig) -> Result<CompareReport> {
    let opt = &config.optimizer;
    if opt.iterations != opt.epirc_outer * opt.epirc_inner {
        return Err(Error::Config(format!(
            "optimizer.iterations: budgets differ ({} vs epirc_outer * epirc_inner = {})",
            opt.iterations,
            opt.epirc_outer * opt.epirc_inner
        )));
    }
    if !config.algorithms.contains(&Algorithm::Epirc) || config.algorithms.len() < 2 {
        return Err(Error::Config("algorithms: compare needs epirc and at least one other algorithm".into()));
    }
    prepare_dir(config)?;
    let (env, opt) = build_repeat(config, 0)?;
    let mut results = Vec::new();
    let mut summaries = Vec::new();
    for &alg in &config.algorithms {
        let result = run_algorithm(&env, &opt, alg)?;
        let trace_file = config.output_dir.join(format!("trace_{alg}_r0.csv"));
        write_trace(&trace_file, &result, &env, config)?;
        summaries.push(summarize(&result, &env, 0, opt.seed, trace_file));
        results.push(result);
    }
    write_summary(&config.output_dir.join("summary.csv"), &summaries)?;
    let base = results
        .iter()
        .find(|r| r.algorithm == Algorithm::Epirc)
        .map(|r| r.wall_ms_total)
        .expect("epirc present");
    let rows: Vec<CompareRow> = results
        .iter()
        .map(|r| CompareRow {
            algorithm: r.algorithm,
            wall_ms: r.wall_ms_total,
            evaluator_calls: r.evaluator_calls,
            fixed_point_sweeps: r.fixed_point_sweeps,
            ratio_to_epirc: r.wall_ms_total / base,
        })
        .collect();
    let compare_file = config.output_dir.join("compare.csv");
    let mut w = csv::Writer::from_path(&compare_file)?;
    w.write_record(["algorithm", "wall_ms", "evaluator_calls", "fixed_point_sweeps", "ratio_to_epirc"])?;
    for r in &rows {
        w.write_record([
            r.algorithm.to_string(),
            num(r.wall_ms),
            r.evaluator_calls.to_string(),
            r.fixed_point_sweeps.to_string(),
            num(r.ratio_to_epirc),
        ])?;
    }
    w.flush()?;
    Ok(CompareReport { rows, compare_file })
}
