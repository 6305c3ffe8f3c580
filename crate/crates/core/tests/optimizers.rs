//! Optimizer behavior on toy models with known answers.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rcmdp::env::{build, EnvName, EnvSpec};
use rcmdp::optim::{
    run_epirc_pgs, run_pgs_fixed_level, run_rnpg, run_rppg, simplex_project, OptimizerConfig, Parameterization,
    RunResult, PROB_FLOOR,
};
use rcmdp::robust::{FixedPointMethod, RobustEvaluator};
use rcmdp::{surrogate, SurrogateState, TabularCMDP};

/// One state, two actions, objective costs `(0, 1)`.
fn one_state(constraint: Option<(f64, f64)>, threshold: f64) -> TabularCMDP {
    let kernel = DMatrix::from_element(2, 1, 1.0);
    let mut costs = vec![DMatrix::from_row_slice(1, 2, &[0.0, 1.0])];
    let mut thresholds = vec![];
    if let Some((c0, c1)) = constraint {
        costs.push(DMatrix::from_row_slice(1, 2, &[c0, c1]));
        thresholds.push(threshold);
    }
    TabularCMDP::new(kernel, costs, thresholds, 0.9, DVector::from_element(1, 1.0), 1.0).unwrap()
}

fn without_wall(trace: &[SurrogateState]) -> Vec<SurrogateState> {
    trace.iter().cloned().map(|s| SurrogateState { wall_ms: 0.0, ..s }).collect()
}

fn same_run(a: &RunResult, b: &RunResult) -> bool {
    without_wall(&a.trace) == without_wall(&b.trace) && a.best_policy == b.best_policy && a.best_iteration == b.best_iteration
}

#[test]
fn unconstrained_toy_follows_multiplicative_weights() {
    let m = one_state(None, 0.0);
    let config = OptimizerConfig { step_size: 0.1, lambda: 1.0, iterations: 200, ..Default::default() };
    let run = run_rnpg(&m, &config, Parameterization::Direct).unwrap();
    // Q differs by exactly 1 between the actions, so after t steps the mass
    // on action 0 is 1 / (1 + exp(-0.1 t))
    let t = run.best_iteration as f64;
    let mass = run.best_policy.probs()[(0, 0)];
    assert_eq!(run.best_iteration, 199);
    assert!((mass - 1.0 / (1.0 + (-0.1 * t).exp())).abs() < 1e-9);
    assert!(mass > 0.99);
    assert!(run.trace.iter().all(|s| s.active_index == 0));
}

#[test]
fn infeasible_toy_never_activates_the_objective() {
    let m = one_state(Some((1.0, 1.0)), 0.5);
    let config = OptimizerConfig { iterations: 50, ..Default::default() };
    for p in [Parameterization::Direct, Parameterization::Softmax] {
        let run = run_rnpg(&m, &config, p).unwrap();
        assert!(run.trace.iter().all(|s| s.active_index != 0));
    }
    let run = run_rppg(&m, &config).unwrap();
    assert!(run.trace.iter().all(|s| s.active_index != 0));
}

#[test]
fn rppg_keeps_policy_when_gradient_is_flat() {
    let mut r = rng(30);
    let kernel = random_kernel(&mut r, 3, 2);
    let flat = DMatrix::from_element(3, 2, 0.4);
    let rho = DVector::from_element(3, 1.0 / 3.0);
    let m = TabularCMDP::new(kernel, vec![flat.clone(), flat], vec![100.0], 0.9, rho, 0.5).unwrap();
    let config = OptimizerConfig { step_size: 0.5, iterations: 20, ..Default::default() };
    let run = run_rppg(&m, &config).unwrap();
    let uniform = DMatrix::from_element(3, 2, 0.5);
    assert!((run.best_policy.probs() - uniform).amax() < 1e-15);
    let first = &run.trace[0].objective_values;
    assert!(run.trace.iter().all(|s| (s.objective_values[0] - first[0]).abs() < 1e-12));
}

#[test]
fn rppg_step_is_gradient_then_projection() {
    let mut r = rng(31);
    let m = random_cmdp(&mut r, 2, 3, 1, 0.9, 0.7);
    let config = OptimizerConfig { step_size: 0.05, iterations: 2, ..Default::default() };
    let run = run_rppg(&m, &config).unwrap();

    let mut evaluator = RobustEvaluator::new(config.robust);
    let uniform = DMatrix::from_element(2, 3, 1.0 / 3.0);
    let evals = evaluator.evaluate_all(&m, &uniform).unwrap();
    let values: Vec<f64> = evals.iter().map(|e| e.j_hat).collect();
    let (_, active) = surrogate(&values, &m.thresholds, config.lambda, config.xi);
    let scale = if active == 0 { 1.0 / config.lambda } else { 1.0 };
    let mut next = uniform.clone();
    for s in 0..2 {
        let target: Vec<f64> = (0..3).map(|a| uniform[(s, a)] - config.step_size * scale * evals[active].grad[(s, a)]).collect();
        let mut row = simplex_project(&target);
        row.iter_mut().for_each(|p| *p = p.max(PROB_FLOOR));
        let z: f64 = row.iter().sum();
        for a in 0..3 {
            next[(s, a)] = row[a] / z;
        }
    }
    let second: Vec<f64> = evaluator.evaluate_all(&m, &next).unwrap().iter().map(|e| e.j_hat).collect();
    assert_eq!(run.trace[0].objective_values, values);
    for (a, b) in run.trace[1].objective_values.iter().zip(&second) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn epigraph_bracket_closes_on_the_optimum() {
    let m = one_state(None, 0.0);
    let config = OptimizerConfig { step_size: 0.1, epirc_outer: 8, epirc_inner: 20, ..Default::default() };
    let run = run_epirc_pgs(&m, &config).unwrap();
    let report = run.epigraph.unwrap();
    let h = m.horizon();
    // the optimum is 0 (always take the free action)
    assert!(report.feasible_found);
    assert!(report.lower <= 1e-9);
    assert!(report.upper <= h * 0.5f64.powi(8) + 1e-9);
    assert_eq!(run.trace.len(), 160);
}

#[test]
fn single_level_epigraph_is_one_fixed_level_run() {
    let m = build(&EnvSpec { gamma: 0.9, ..EnvSpec::named(EnvName::Crs) }).unwrap();
    let config = OptimizerConfig { epirc_outer: 1, epirc_inner: 30, step_size: 0.01, ..Default::default() };
    let search = run_epirc_pgs(&m, &config).unwrap();
    let fixed = run_pgs_fixed_level(&m, &config, 0.5 * m.horizon()).unwrap();
    assert_eq!(without_wall(&search.trace), without_wall(&fixed.trace));
    assert_eq!(search.epigraph.unwrap().levels, vec![0.5 * m.horizon()]);
}

#[test]
fn runs_are_deterministic() {
    let m = build(&EnvSpec::named(EnvName::Crs)).unwrap();
    let config = OptimizerConfig { iterations: 40, epirc_outer: 4, epirc_inner: 10, ..Default::default() };
    let runs = |m: &TabularCMDP| {
        vec![
            run_rnpg(m, &config, Parameterization::Direct).unwrap(),
            run_rnpg(m, &config, Parameterization::Softmax).unwrap(),
            run_rppg(m, &config).unwrap(),
            run_epirc_pgs(m, &config).unwrap(),
        ]
    };
    for (a, b) in runs(&m).iter().zip(&runs(&m)) {
        assert!(same_run(a, b), "{}", a.algorithm);
    }
}

#[test]
fn trajectory_evaluator_is_seeded() {
    let m = build(&EnvSpec { gamma: 0.9, ..EnvSpec::named(EnvName::Crs) }).unwrap();
    let mut config = OptimizerConfig { iterations: 10, ..Default::default() };
    config.robust.method = FixedPointMethod::Trajectory;
    config.robust.max_sweeps = 200;
    let a = run_rnpg(&m, &config, Parameterization::Direct).unwrap();
    let b = run_rnpg(&m, &config, Parameterization::Direct).unwrap();
    assert!(same_run(&a, &b));
    config.robust.seed = 1;
    let c = run_rnpg(&m, &config, Parameterization::Direct).unwrap();
    assert_ne!(without_wall(&a.trace), without_wall(&c.trace));
}

#[test]
fn parameterizations_agree_on_the_first_step() {
    let mut r = rng(32);
    for _ in 0..5 {
        let m = random_cmdp(&mut r, 4, 3, 2, 0.9, 0.5);
        let config = OptimizerConfig { iterations: 3, ..Default::default() };
        let direct = run_rnpg(&m, &config, Parameterization::Direct).unwrap();
        let soft = run_rnpg(&m, &config, Parameterization::Softmax).unwrap();
        assert_eq!(direct.trace[0].active_index, soft.trace[0].active_index);
        assert_eq!(direct.trace[0].objective_values, soft.trace[0].objective_values);
    }
}

#[test]
fn slack_constraints_reduce_to_the_unconstrained_run() {
    let m = build(&EnvSpec { gamma: 0.9, ..EnvSpec::named(EnvName::Crs) }).unwrap();
    let mut loose = m.clone();
    loose.thresholds = vec![1e6];
    let mut bare = m.clone();
    bare.costs.truncate(1);
    bare.thresholds.clear();
    bare.senses.truncate(1);
    bare.transforms.truncate(1);
    let config = OptimizerConfig { iterations: 50, ..Default::default() };
    let a = run_rnpg(&loose, &config, Parameterization::Direct).unwrap();
    let b = run_rnpg(&bare, &config, Parameterization::Direct).unwrap();
    assert!(a.trace.iter().all(|s| s.active_index == 0));
    assert_eq!(a.per_cost_curves[0], b.per_cost_curves[0]);
    assert_eq!(a.best_policy, b.best_policy);
}

#[test]
fn best_surrogate_never_exceeds_the_first() {
    let m = build(&EnvSpec::named(EnvName::Crs)).unwrap();
    let config = OptimizerConfig { iterations: 100, ..Default::default() };
    for p in [Parameterization::Direct, Parameterization::Softmax] {
        let run = run_rnpg(&m, &config, p).unwrap();
        assert!(run.best_state().surrogate_value <= run.trace[0].surrogate_value);
        assert!(run.trace.iter().all(|s| s.surrogate_value >= run.best_state().surrogate_value));
    }
}

#[test]
fn rppg_on_garnet_stays_feasible() {
    let m = build(&EnvSpec::named(EnvName::Garnet)).unwrap();
    let run = run_rppg(&m, &OptimizerConfig::default()).unwrap();
    for s in &run.trace {
        assert!(s.objective_values[1] <= m.thresholds[0], "iteration {}", s.iteration);
    }
}
