use nalgebra::DMatrix;

use super::primitives::{floor_row, simplex_project};
use super::{Algorithm, ModelSource, OptimizerConfig, Recorder, RunResult};
use crate::error::Result;
use crate::mdp::TabularCMDP;
use crate::policy::Policy;
use crate::robust::RobustEvaluator;

/// Robust projected policy gradient on the surrogate objective.
pub fn run_rppg(cmdp: &TabularCMDP, config: &OptimizerConfig) -> Result<RunResult> {
    run_rppg_on(cmdp, config)
}

pub fn run_rppg_on<M: ModelSource + ?Sized>(source: &M, config: &OptimizerConfig) -> Result<RunResult> {
    config.validate()?;
    let first = source.model(0);
    first.validate()?;
    let (ns, na) = (first.n_states, first.n_actions);
    let n_costs = first.costs.len();
    drop(first);

    let mut probs = DMatrix::from_element(ns, na, 1.0 / na as f64);
    let mut evaluator = RobustEvaluator::new(config.robust);
    let mut rec = Recorder::new(n_costs, config.iterations);
    for t in 0..config.iterations {
        let cmdp = source.model(t);
        let evals = evaluator.evaluate_all(&cmdp, &probs)?;
        let values = evals.iter().map(|e| e.j_hat).collect();
        let alpha = config.step(&cmdp, config.iterations);
        let policy = Policy::Direct(probs.clone());
        let (_, active) = rec.record(values, &cmdp.thresholds, config, alpha, &policy)?;
        let scale = if active == 0 { 1.0 / config.lambda } else { 1.0 };
        projected_step(&mut probs, &evals[active].grad, alpha * scale);
    }
    Ok(rec.finish(Algorithm::Rppg, evaluator.calls(), evaluator.total_sweeps()))
}

/// `probs[s] <- Proj(probs[s] - step * grad[s])` for every state.
pub(crate) fn projected_step(probs: &mut DMatrix<f64>, grad: &DMatrix<f64>, step: f64) {
    for s in 0..probs.nrows() {
        let target: Vec<f64> = (0..probs.ncols())
            .map(|a| probs[(s, a)] - step * grad[(s, a)])
            .collect();
        let mut row = simplex_project(&target);
        floor_row(&mut row);
        for (a, x) in row.into_iter().enumerate() {
            probs[(s, a)] = x;
        }
    }
}
