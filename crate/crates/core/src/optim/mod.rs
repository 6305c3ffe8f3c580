//! Policy optimizers for the surrogate objective
//! `max(J_0 / lambda, max_n J_n - b_n + xi)` and the epigraph baseline.

mod epirc;
pub mod primitives;
mod rnpg;
mod rppg;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularCMDP;
use crate::policy::Policy;
use crate::robust::RobustSettings;
use crate::surrogate::SurrogateState;

pub use epirc::{run_epirc_pgs, run_epirc_pgs_on, run_pgs_fixed_level, EpigraphReport};
pub use primitives::{mirror_step, simplex_project, PROB_FLOOR};
pub use rnpg::{run_rnpg, run_rnpg_on};
pub use rppg::{run_rppg, run_rppg_on};

/// Supplies the model an optimizer sees at a given iteration. A fixed
/// [`TabularCMDP`] is its own source; environments with resampled hazards
/// hand out a fresh instance per iteration.
pub trait ModelSource {
    fn model(&self, iteration: usize) -> Cow<'_, TabularCMDP>;
}

impl ModelSource for TabularCMDP {
    fn model(&self, _iteration: usize) -> Cow<'_, TabularCMDP> {
        Cow::Borrowed(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    Direct,
    Softmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RnpgDirect,
    RnpgSoftmax,
    Rppg,
    Epirc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RnpgDirect => "rnpg_direct",
            Algorithm::RnpgSoftmax => "rnpg_softmax",
            Algorithm::Rppg => "rppg",
            Algorithm::Epirc => "epirc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnpg_direct" => Ok(Algorithm::RnpgDirect),
            "rnpg_softmax" => Ok(Algorithm::RnpgSoftmax),
            "rppg" => Ok(Algorithm::Rppg),
            "epirc" => Ok(Algorithm::Epirc),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Step-size rule `alpha_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `step_size` at every iteration.
    Constant,
    /// `(1 - gamma) / sqrt(T * S)`.
    Theoretical,
}

/// Initial logits of the softmax parameterization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftmaxInit {
    Zeros,
    /// Standard normal draws from the policy stream of `seed`.
    Normal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lambda: f64,
    pub xi: f64,
    pub step_size: f64,
    pub step_schedule: StepSchedule,
    /// Learning rate of the softmax natural-gradient step.
    pub npg_lr: f64,
    pub fisher_damping: f64,
    pub iterations: usize,
    pub epirc_outer: usize,
    pub epirc_inner: usize,
    pub seed: u64,
    pub softmax_init: SoftmaxInit,
    pub robust: RobustSettings,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lambda: 50.0,
            xi: 0.0,
            step_size: 1e-3,
            step_schedule: StepSchedule::Constant,
            npg_lr: 1e-5,
            fisher_damping: 1e-6,
            iterations: 1000,
            epirc_outer: 10,
            epirc_inner: 100,
            seed: 0,
            softmax_init: SoftmaxInit::Zeros,
            robust: RobustSettings::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("step_size", self.step_size),
            ("npg_lr", self.npg_lr),
            ("fisher_damping", self.fisher_damping),
            ("robust.tolerance", self.robust.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("optimizer.{name} must be > 0, got {v}")));
            }
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::Config(format!("optimizer.xi must be >= 0, got {}", self.xi)));
        }
        let counts = [
            ("iterations", self.iterations),
            ("epirc_outer", self.epirc_outer),
            ("epirc_inner", self.epirc_inner),
            ("robust.max_sweeps", self.robust.max_sweeps),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("optimizer.{name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub(crate) fn step(&self, cmdp: &TabularCMDP, total_iterations: usize) -> f64 {
        match self.step_schedule {
            StepSchedule::Constant => self.step_size,
            StepSchedule::Theoretical => {
                (1.0 - cmdp.discount) / ((total_iterations * cmdp.n_states) as f64).sqrt()
            }
        }
    }
}

/// Outcome of one optimizer run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub trace: Vec<SurrogateState>,
    pub best_policy: Policy,
    /// Iterate returned by the run. For the surrogate methods it is the
    /// trace's surrogate minimizer; for the epigraph baseline it is the
    /// iterate selected by the binary search.
    pub best_iteration: usize,
    /// `per_cost_curves[i][t]` is `J_i` at iteration `t`.
    pub per_cost_curves: Vec<Vec<f64>>,
    pub wall_ms_total: f64,
    pub evaluator_calls: usize,
    pub fixed_point_sweeps: usize,
    pub epigraph: Option<EpigraphReport>,
}

impl RunResult {
    pub fn best_state(&self) -> &SurrogateState {
        &self.trace[self.best_iteration]
    }
}

/// Shared bookkeeping of the iteration loops.
pub(crate) struct Recorder {
    start: Instant,
    trace: Vec<SurrogateState>,
    curves: Vec<Vec<f64>>,
    best: Option<(f64, usize, Policy)>,
}

impl Recorder {
    pub(crate) fn new(n_costs: usize, capacity: usize) -> Self {
        Recorder {
            start: Instant::now(),
            trace: Vec::with_capacity(capacity),
            curves: vec![Vec::with_capacity(capacity); n_costs],
            best: None,
        }
    }

    /// Append an iteration; `policy` is the iterate that was evaluated.
    pub(crate) fn record(
        &mut self,
        values: Vec<f64>,
        thresholds: &[f64],
        config: &OptimizerConfig,
        step_size: f64,
        policy: &Policy,
    ) -> Result<(f64, usize)> {
        let t = self.trace.len();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("robust values at iteration {t}: {values:?}")));
        }
        let (value, index) = crate::surrogate::surrogate(&values, thresholds, config.lambda, config.xi);
        for (curve, v) in self.curves.iter_mut().zip(&values) {
            curve.push(*v);
        }
        if self.best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            self.best = Some((value, t, policy.clone()));
        }
        self.trace.push(SurrogateState {
            iteration: t,
            objective_values: values,
            active_index: index,
            surrogate_value: value,
            step_size,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        Ok((value, index))
    }

    pub(crate) fn len(&self) -> usize {
        self.trace.len()
    }

    pub(crate) fn finish(self, algorithm: Algorithm, calls: usize, sweeps: usize) -> RunResult {
        let wall_ms_total = self.start.elapsed().as_secs_f64() * 1e3;
        let (_, best_iteration, best_policy) = self.best.expect("at least one iteration");
        RunResult {
            algorithm,
            trace: self.trace,
            best_policy,
            best_iteration,
            per_cost_curves: self.curves,
            wall_ms_total,
            evaluator_calls: calls,
            fixed_point_sweeps: sweeps,
            epigraph: None,
        }
    }
}

/// Run any algorithm by name.
pub fn run_algorithm<M: ModelSource + ?Sized>(
    source: &M,
    config: &OptimizerConfig,
    algorithm: Algorithm,
) -> Result<RunResult> {
    match algorithm {
        Algorithm::RnpgDirect => run_rnpg_on(source, config, Parameterization::Direct),
        Algorithm::RnpgSoftmax => run_rnpg_on(source, config, Parameterization::Softmax),
        Algorithm::Rppg => run_rppg_on(source, config),
        Algorithm::Epirc => run_epirc_pgs_on(source, config),
    }
}
