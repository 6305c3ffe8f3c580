//! Epigraph baseline: binary search over the objective level `b_0`, with a
//! projected-gradient subroutine that minimizes
//! `max(J_0 - b_0, max_n J_n - b_n)` for each level.
//!
//! The search bracket is `[0, 1/(1-gamma)]` in canonical units. A level is
//! accepted when the subroutine's best iterate meets every epigraph
//! constraint; accepted levels shrink the bracket from above, rejected ones
//! raise it from below. Each level restarts from the uniform policy.

use nalgebra::DMatrix;

use super::rppg::projected_step;
use super::{Algorithm, ModelSource, OptimizerConfig, Recorder, RunResult};
use crate::error::Result;
use crate::mdp::TabularCMDP;
use crate::policy::Policy;
use crate::robust::RobustEvaluator;

/// Binary-search record of an epigraph run.
#[derive(Clone, Debug, PartialEq)]
pub struct EpigraphReport {
    /// Level tried at each outer iteration.
    pub levels: Vec<f64>,
    /// Best epigraph objective reached by the subroutine at each level.
    pub level_scores: Vec<f64>,
    pub level_feasible: Vec<bool>,
    /// Final bracket.
    pub lower: f64,
    pub upper: f64,
    /// False when no level was ever met; the returned policy then falls back
    /// to the surrogate minimizer of the trace.
    pub feasible_found: bool,
}

/// `max(J_0 - b_0, max_n J_n - b_n)` and its maximizing index (ties to the
/// smallest).
fn epigraph_objective(values: &[f64], level: f64, thresholds: &[f64]) -> (f64, usize) {
    let mut best = values[0] - level;
    let mut index = 0;
    for (n, (j, b)) in values[1..].iter().zip(thresholds).enumerate() {
        if j - b > best {
            best = j - b;
            index = n + 1;
        }
    }
    (best, index)
}

struct InnerOutcome {
    score: f64,
    iteration: usize,
    policy: Policy,
}

fn pgs_inner<M: ModelSource + ?Sized>(
    source: &M,
    config: &OptimizerConfig,
    level: f64,
    total: usize,
    evaluator: &mut RobustEvaluator,
    rec: &mut Recorder,
) -> Result<InnerOutcome> {
    let (ns, na) = {
        let m = source.model(rec.len());
        (m.n_states, m.n_actions)
    };
    let mut probs = DMatrix::from_element(ns, na, 1.0 / na as f64);
    let mut best: Option<InnerOutcome> = None;
    for _ in 0..config.epirc_inner {
        let t = rec.len();
        let cmdp = source.model(t);
        let evals = evaluator.evaluate_all(&cmdp, &probs)?;
        let values: Vec<f64> = evals.iter().map(|e| e.j_hat).collect();
        let (score, index) = epigraph_objective(&values, level, &cmdp.thresholds);
        let alpha = config.step(&cmdp, total);
        let policy = Policy::Direct(probs.clone());
        rec.record(values, &cmdp.thresholds, config, alpha, &policy)?;
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(InnerOutcome { score, iteration: t, policy });
        }
        projected_step(&mut probs, &evals[index].grad, alpha);
    }
    Ok(best.expect("epirc_inner >= 1"))
}

/// Projected-gradient subroutine at one fixed level, run for `epirc_inner`
/// iterations.
pub fn run_pgs_fixed_level(cmdp: &TabularCMDP, config: &OptimizerConfig, level: f64) -> Result<RunResult> {
    config.validate()?;
    cmdp.validate()?;
    let mut evaluator = RobustEvaluator::new(config.robust);
    let mut rec = Recorder::new(cmdp.costs.len(), config.epirc_inner);
    let inner = pgs_inner(cmdp, config, level, config.epirc_inner, &mut evaluator, &mut rec)?;
    let mut result = rec.finish(Algorithm::Epirc, evaluator.calls(), evaluator.total_sweeps());
    result.best_iteration = inner.iteration;
    result.best_policy = inner.policy;
    Ok(result)
}

pub fn run_epirc_pgs(cmdp: &TabularCMDP, config: &OptimizerConfig) -> Result<RunResult> {
    run_epirc_pgs_on(cmdp, config)
}

pub fn run_epirc_pgs_on<M: ModelSource + ?Sized>(source: &M, config: &OptimizerConfig) -> Result<RunResult> {
    config.validate()?;
    let (n_costs, horizon) = {
        let m = source.model(0);
        m.validate()?;
        (m.costs.len(), m.horizon())
    };
    let total = config.epirc_outer * config.epirc_inner;
    let mut evaluator = RobustEvaluator::new(config.robust);
    let mut rec = Recorder::new(n_costs, total);
    let (mut lower, mut upper) = (0.0, horizon);
    let mut report = EpigraphReport {
        levels: Vec::with_capacity(config.epirc_outer),
        level_scores: Vec::with_capacity(config.epirc_outer),
        level_feasible: Vec::with_capacity(config.epirc_outer),
        lower,
        upper,
        feasible_found: false,
    };
    let mut selected: Option<InnerOutcome> = None;
    for _ in 0..config.epirc_outer {
        let level = 0.5 * (lower + upper);
        let inner = pgs_inner(source, config, level, total, &mut evaluator, &mut rec)?;
        let feasible = inner.score <= 0.0;
        report.levels.push(level);
        report.level_scores.push(inner.score);
        report.level_feasible.push(feasible);
        if feasible {
            upper = level;
            selected = Some(inner);
        } else {
            lower = level;
        }
    }
    report.lower = lower;
    report.upper = upper;
    report.feasible_found = selected.is_some();

    let mut result = rec.finish(Algorithm::Epirc, evaluator.calls(), evaluator.total_sweeps());
    if let Some(inner) = selected {
        result.best_iteration = inner.iteration;
        result.best_policy = inner.policy;
    }
    result.epigraph = Some(report);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epigraph_ties_go_to_objective() {
        assert_eq!(epigraph_objective(&[5.0, 3.0], 4.0, &[2.0]), (1.0, 0));
        assert_eq!(epigraph_objective(&[5.0, 4.0], 4.0, &[2.0]), (2.0, 1));
    }
}
