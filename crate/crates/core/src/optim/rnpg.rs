use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::primitives::mirror_step;
use super::{Algorithm, ModelSource, OptimizerConfig, Parameterization, Recorder, RunResult, SoftmaxInit};
use crate::error::{Error, Result};
use crate::mdp::TabularCMDP;
use crate::policy::Policy;
use crate::rng::{stream, Stream};
use crate::robust::RobustEvaluator;

/// Robust natural policy gradient on the surrogate objective.
pub fn run_rnpg(cmdp: &TabularCMDP, config: &OptimizerConfig, parameterization: Parameterization) -> Result<RunResult> {
    run_rnpg_on(cmdp, config, parameterization)
}

pub fn run_rnpg_on<M: ModelSource + ?Sized>(
    source: &M,
    config: &OptimizerConfig,
    parameterization: Parameterization,
) -> Result<RunResult> {
    config.validate()?;
    let first = source.model(0);
    first.validate()?;
    let (ns, na) = (first.n_states, first.n_actions);
    let mut policy = match parameterization {
        Parameterization::Direct => Policy::uniform(ns, na),
        Parameterization::Softmax => Policy::Softmax(initial_logits(ns, na, config)),
    };
    drop(first);

    let algorithm = match parameterization {
        Parameterization::Direct => Algorithm::RnpgDirect,
        Parameterization::Softmax => Algorithm::RnpgSoftmax,
    };
    let mut evaluator = RobustEvaluator::new(config.robust);
    let mut rec = Recorder::new(source.model(0).costs.len(), config.iterations);

    for t in 0..config.iterations {
        let cmdp = source.model(t);
        let probs = policy.probs();
        let evals = evaluator.evaluate_all(&cmdp, &probs)?;
        let values = evals.iter().map(|e| e.j_hat).collect();
        let alpha = config.step(&cmdp, config.iterations);
        let (_, active) = rec.record(values, &cmdp.thresholds, config, alpha, &policy)?;
        // the objective enters the surrogate as J_0 / lambda
        let scale = if active == 0 { 1.0 / config.lambda } else { 1.0 };
        let active_eval = &evals[active];

        policy = match policy {
            Policy::Direct(mut p) => {
                let q = &active_eval.q_table * scale;
                for s in 0..ns {
                    let row: Vec<f64> = p.row(s).iter().copied().collect();
                    let qrow: Vec<f64> = q.row(s).iter().copied().collect();
                    let next = mirror_step(&row, &qrow, alpha);
                    for (a, x) in next.into_iter().enumerate() {
                        p[(s, a)] = x;
                    }
                }
                Policy::Direct(p)
            }
            Policy::Softmax(mut theta) => {
                let grad = &active_eval.grad * scale;
                let eta = config.npg_lr / (2.0 * alpha);
                for s in 0..ns {
                    let pi = DVector::from_iterator(na, probs.row(s).iter().copied());
                    let g = DVector::from_iterator(na, grad.row(s).iter().copied());
                    let dir = natural_direction(&pi, &g, config.fisher_damping)?;
                    for a in 0..na {
                        theta[(s, a)] -= eta * dir[a];
                    }
                }
                if theta.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("softmax logits after iteration {t}")));
                }
                Policy::Softmax(theta)
            }
        };
    }
    Ok(rec.finish(algorithm, evaluator.calls(), evaluator.total_sweeps()))
}

fn initial_logits(ns: usize, na: usize, config: &OptimizerConfig) -> DMatrix<f64> {
    match config.softmax_init {
        SoftmaxInit::Zeros => DMatrix::zeros(ns, na),
        SoftmaxInit::Normal => {
            let mut rng = stream(config.seed, Stream::Policy);
            DMatrix::from_fn(ns, na, |_, _| StandardNormal.sample(&mut rng))
        }
    }
}

/// `(F_s + damping I)^{-1} grad_theta` for one state, where
/// `F_s = diag(pi) - pi pi^T` and `grad_theta = F_s g` by the softmax chain rule.
pub(crate) fn natural_direction(pi: &DVector<f64>, g: &DVector<f64>, damping: f64) -> Result<DVector<f64>> {
    let mut fisher = DMatrix::from_diagonal(pi) - pi * pi.transpose();
    let grad_theta = &fisher * g;
    for i in 0..pi.len() {
        fisher[(i, i)] += damping;
    }
    fisher
        .cholesky()
        .map(|c| c.solve(&grad_theta))
        .ok_or(Error::Singular("damped Fisher matrix"))
}
