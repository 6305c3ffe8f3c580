//! Worst-case policy evaluation over a KL uncertainty set around the nominal
//! kernel, in its regularized (exponential-tilt) form.
//!
//! For every state-action pair the adversary re-weights the nominal successor
//! distribution by `exp(V / C_KL)`. Because the worst case maximizes canonical
//! cost, the tilt always carries a plus sign.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{self, gradient_from, occupancy_probs, state_space_q, state_values};
use crate::error::{Error, Result};
use crate::mdp::TabularCMDP;
use crate::policy::Policy;
use crate::rng::evaluator_stream;

/// `p0 * exp(v / c_kl)`, normalized, written into `out`.
fn tilt_into(p0: &[f64], v: &[f64], c_kl: f64, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for (p, x) in p0.iter().zip(v) {
        if *p > 0.0 {
            max = max.max(x / c_kl);
        }
    }
    let mut z = 0.0;
    for ((o, p), x) in out.iter_mut().zip(p0).zip(v) {
        *o = if *p > 0.0 { p * (x / c_kl - max).exp() } else { 0.0 };
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

/// Maximizer of `<p, v> - c_kl * KL(p || p0)` over the simplex.
///
/// The result keeps the support of `p0`.
pub fn kl_tilt(p0_row: &[f64], v: &[f64], c_kl: f64) -> Result<Vec<f64>> {
    if p0_row.len() != v.len() {
        return Err(Error::Dimension(format!(
            "p0 has {} entries, v has {}",
            p0_row.len(),
            v.len()
        )));
    }
    if !(c_kl > 0.0) || !c_kl.is_finite() {
        return Err(Error::InvalidArgument(format!("c_kl must be positive, got {c_kl}")));
    }
    let mut out = vec![0.0; p0_row.len()];
    tilt_into(p0_row, v, c_kl, &mut out);
    Ok(out)
}

/// Tilt every row of `kernel` toward high values of `v`.
pub fn worst_kernel(kernel: &DMatrix<f64>, v: &DVector<f64>, c_kl: f64) -> DMatrix<f64> {
    // rows of a column-major matrix are strided; work on a transposed copy
    let kt = kernel.transpose();
    let mut out = DMatrix::zeros(kt.nrows(), kt.ncols());
    for (src, mut dst) in kt.column_iter().zip(out.column_iter_mut()) {
        tilt_into(src.as_slice(), v.as_slice(), c_kl, dst.as_mut_slice());
    }
    out.transpose()
}

/// How the robust Bellman fixed point is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointMethod {
    /// Synchronous full-table sweeps `Q <- c + gamma <tilt(V), V>`.
    Bellman,
    /// Each step tries both a plain sweep and an exact policy-evaluation
    /// solve on the kernel tilted at the current `V`, and keeps whichever
    /// leaves the smaller fixed-point residual.
    TiltSolve,
    /// One sampled trajectory of `max_sweeps` single-entry updates from
    /// `Q = 0`: draw `a ~ pi(s)` and `s' ~ p0(s, a)`, update `Q[s][a]`, move to
    /// `s'`. Stops early only when an update leaves the table unchanged. The
    /// result is far from the fixed point at long horizons and is always
    /// reported as converged.
    Trajectory,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustSettings {
    /// Target sup-norm distance of the Q table to the fixed point.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub method: FixedPointMethod,
    /// Seed of the sampled trajectories; unused by the other methods.
    pub seed: u64,
}

impl Default for RobustSettings {
    fn default() -> Self {
        RobustSettings { tolerance: 1e-8, max_sweeps: 1000, method: FixedPointMethod::TiltSolve, seed: 0 }
    }
}

/// Output of the robust Bellman iteration.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub q: DMatrix<f64>,
    pub v: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Sup-norm Bellman residual `|B(Q) - Q|` before each sweep.
    pub residuals: Vec<f64>,
}

fn cost_of(cmdp: &TabularCMDP, cost_index: usize) -> Result<&DMatrix<f64>> {
    cmdp.costs.get(cost_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "cost index {cost_index} out of range ({} costs)",
            cmdp.costs.len()
        ))
    })
}

fn check_radius(cmdp: &TabularCMDP) -> Result<()> {
    if cmdp.kl_radius > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("robust evaluation needs kl_radius > 0".into()))
    }
}

/// One synchronous sweep `c + gamma * <tilt(p0(s,a), V), V>`.
fn bellman_sweep(cmdp: &TabularCMDP, cost: &DMatrix<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    let p = worst_kernel(&cmdp.kernel, v, cmdp.kl_radius);
    let next = &p * v;
    DMatrix::from_fn(cmdp.n_states, cmdp.n_actions, |s, a| {
        cost[(s, a)] + cmdp.discount * next[cmdp.sa(s, a)]
    })
}

/// Regularized robust Q table with default settings, from a cold start.
pub fn robust_q_fixed_point(cmdp: &TabularCMDP, policy: &Policy, cost_index: usize) -> Result<FixedPoint> {
    robust_q_fixed_point_with(cmdp, &policy.probs(), cost_index, &RobustSettings::default(), None)
}

/// Regularized robust Q table.
///
/// `warm` seeds the iteration with a previous value vector. The returned
/// `converged` flag is false when the sweep cap was hit first.
pub fn robust_q_fixed_point_with(
    cmdp: &TabularCMDP,
    probs: &DMatrix<f64>,
    cost_index: usize,
    settings: &RobustSettings,
    warm: Option<&DVector<f64>>,
) -> Result<FixedPoint> {
    fixed_point(cmdp, probs, cost_index, settings, warm, 0)
}

/// `call` picks the sampling stream of the trajectory method.
fn fixed_point(
    cmdp: &TabularCMDP,
    probs: &DMatrix<f64>,
    cost_index: usize,
    settings: &RobustSettings,
    warm: Option<&DVector<f64>>,
    call: u64,
) -> Result<FixedPoint> {
    check_radius(cmdp)?;
    let cost = cost_of(cmdp, cost_index)?;
    let (ns, na) = (cmdp.n_states, cmdp.n_actions);
    if probs.shape() != (ns, na) {
        return Err(Error::Dimension(format!(
            "policy {}x{} for model {ns}x{na}",
            probs.nrows(),
            probs.ncols()
        )));
    }
    if settings.method == FixedPointMethod::Trajectory {
        let mut rng = evaluator_stream(settings.seed, call);
        return Ok(trajectory_q(cmdp, probs, cost, settings.max_sweeps, &mut rng));
    }
    // a cold start begins from Q = 0, a warm start one sweep past the old V
    let mut q = match warm {
        Some(v) => bellman_sweep(cmdp, cost, v),
        None => DMatrix::zeros(ns, na),
    };
    let mut v = state_values(probs, &q);
    let mut swept = bellman_sweep(cmdp, cost, &v);
    let mut residuals = Vec::new();
    for sweep in 1..=settings.max_sweeps {
        if swept.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("robust Q table for cost {cost_index}")));
        }
        let r = (&swept - &q).amax();
        residuals.push(r);
        // a residual r puts Q within r / (1 - gamma) of the fixed point
        if r <= settings.tolerance * (1.0 - cmdp.discount) {
            return Ok(FixedPoint { q, v, converged: true, sweeps: sweep, residuals });
        }
        let next_v = state_values(probs, &swept);
        let next_swept = bellman_sweep(cmdp, cost, &next_v);
        let mut next = (swept, next_v, next_swept);
        if settings.method == FixedPointMethod::TiltSolve {
            let p = worst_kernel(&cmdp.kernel, &v, cmdp.kl_radius);
            let cand = state_space_q(probs, &p, cost, cmdp.discount)?.0;
            let cand_v = state_values(probs, &cand);
            let cand_swept = bellman_sweep(cmdp, cost, &cand_v);
            if (&cand_swept - &cand).amax() < (&next.2 - &next.0).amax() {
                next = (cand, cand_v, cand_swept);
            }
        }
        let (next_q, next_v, next_swept) = next;
        q = next_q;
        v = next_v;
        swept = next_swept;
    }
    Ok(FixedPoint { q, v, converged: false, sweeps: settings.max_sweeps, residuals })
}

fn sample_index<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn trajectory_q<R: Rng>(cmdp: &TabularCMDP, probs: &DMatrix<f64>, cost: &DMatrix<f64>, steps: usize, rng: &mut R) -> FixedPoint {
    let (ns, na) = (cmdp.n_states, cmdp.n_actions);
    let mut q = DMatrix::<f64>::zeros(ns, na);
    let mut v = DVector::zeros(ns);
    let mut tilted = vec![0.0; ns];
    let mut s = sample_index(rng, cmdp.initial_dist.iter().copied());
    let mut residuals = Vec::new();
    let mut used = 0;
    for _ in 0..steps {
        used += 1;
        let a = sample_index(rng, probs.row(s).iter().copied());
        let row: Vec<f64> = cmdp.kernel.row(cmdp.sa(s, a)).iter().copied().collect();
        let next = sample_index(rng, row.iter().copied());
        tilt_into(&row, v.as_slice(), cmdp.kl_radius, &mut tilted);
        let backup: f64 = tilted.iter().zip(v.iter()).map(|(p, x)| p * x).sum();
        let updated = cost[(s, a)] + cmdp.discount * backup;
        let change = (updated - q[(s, a)]).abs();
        q[(s, a)] = updated;
        v = state_values(probs, &q);
        residuals.push(change);
        s = next;
        if change == 0.0 {
            break;
        }
    }
    FixedPoint { q, v, converged: true, sweeps: used, residuals }
}

/// Sup-norm violation of `Q = c + gamma <tilt(V), V>` with `V` derived from `Q`.
pub fn bellman_residual(cmdp: &TabularCMDP, policy: &Policy, cost_index: usize, q: &DMatrix<f64>) -> Result<f64> {
    check_radius(cmdp)?;
    let cost = cost_of(cmdp, cost_index)?;
    let v = state_values(&policy.probs(), q);
    Ok((bellman_sweep(cmdp, cost, &v) - q).amax())
}

/// Worst-case value, gradient and supporting tables for one cost signal.
#[derive(Clone, Debug)]
pub struct RobustEvaluation {
    pub cost_index: usize,
    pub j_hat: f64,
    pub grad: DMatrix<f64>,
    pub q_table: DMatrix<f64>,
    pub v_table: DVector<f64>,
    pub worst_kernel: DMatrix<f64>,
    pub occupancy: DVector<f64>,
    pub sweeps_used: usize,
}

/// Robust evaluation from a cold start with default settings.
pub fn robust_evaluate(cmdp: &TabularCMDP, policy: &Policy, cost_index: usize) -> Result<RobustEvaluation> {
    robust_evaluate_with(cmdp, &policy.probs(), cost_index, &RobustSettings::default(), None)
        .map(|(e, _)| e)
}

/// Robust evaluation. Also returns the fixed-point value vector so callers can
/// warm-start the next evaluation of the same signal.
pub fn robust_evaluate_with(
    cmdp: &TabularCMDP,
    probs: &DMatrix<f64>,
    cost_index: usize,
    settings: &RobustSettings,
    warm: Option<&DVector<f64>>,
) -> Result<(RobustEvaluation, DVector<f64>)> {
    evaluate_call(cmdp, probs, cost_index, settings, warm, 0)
}

fn evaluate_call(
    cmdp: &TabularCMDP,
    probs: &DMatrix<f64>,
    cost_index: usize,
    settings: &RobustSettings,
    warm: Option<&DVector<f64>>,
    call: u64,
) -> Result<(RobustEvaluation, DVector<f64>)> {
    let fp = fixed_point(cmdp, probs, cost_index, settings, warm, call)?;
    if !fp.converged {
        return Err(Error::NotConverged {
            sweeps: fp.sweeps,
            residual: fp.residuals.last().copied().unwrap_or(f64::INFINITY),
        });
    }
    let cost = &cmdp.costs[cost_index];
    let worst = worst_kernel(&cmdp.kernel, &fp.v, cmdp.kl_radius);
    let (q, v) = state_space_q(probs, &worst, cost, cmdp.discount)?;
    let d = occupancy_probs(probs, &worst, &cmdp.initial_dist, cmdp.discount)?;
    let j_hat = cmdp.initial_dist.dot(&v);
    if !j_hat.is_finite() {
        return Err(Error::NonFinite(format!("robust value of cost {cost_index}")));
    }
    let grad = gradient_from(&d, &q, cmdp.discount);
    Ok((
        RobustEvaluation {
            cost_index,
            j_hat,
            grad,
            q_table: q,
            v_table: v,
            worst_kernel: worst,
            occupancy: d,
            sweeps_used: fp.sweeps,
        },
        fp.v,
    ))
}

/// Nominal (non-robust) value of a policy, for comparisons.
pub fn nominal_value(cmdp: &TabularCMDP, policy: &Policy, cost_index: usize) -> Result<f64> {
    let cost = cost_of(cmdp, cost_index)?;
    eval::objective(policy, &cmdp.kernel, cost, cmdp.discount, &cmdp.initial_dist)
}

/// Stateful evaluator used by the optimizers: keeps the last fixed-point
/// value per signal for warm starts and counts calls.
#[derive(Clone, Debug)]
pub struct RobustEvaluator {
    pub settings: RobustSettings,
    warm: Vec<Option<DVector<f64>>>,
    calls: usize,
    sweeps: usize,
}

impl RobustEvaluator {
    pub fn new(settings: RobustSettings) -> Self {
        RobustEvaluator { settings, warm: Vec::new(), calls: 0, sweeps: 0 }
    }

    pub fn evaluate(&mut self, cmdp: &TabularCMDP, probs: &DMatrix<f64>, cost_index: usize) -> Result<RobustEvaluation> {
        if self.warm.len() < cmdp.costs.len() {
            self.warm.resize(cmdp.costs.len(), None);
        }
        let warm = self.warm[cost_index]
            .as_ref()
            .filter(|v| v.len() == cmdp.n_states);
        let (eval, v) = evaluate_call(cmdp, probs, cost_index, &self.settings, warm, self.calls as u64)?;
        self.warm[cost_index] = Some(v);
        self.calls += 1;
        self.sweeps += eval.sweeps_used;
        Ok(eval)
    }

    /// Evaluate every signal `0..=K`.
    pub fn evaluate_all(&mut self, cmdp: &TabularCMDP, probs: &DMatrix<f64>) -> Result<Vec<RobustEvaluation>> {
        (0..cmdp.costs.len()).map(|i| self.evaluate(cmdp, probs, i)).collect()
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn total_sweeps(&self) -> usize {
        self.sweeps
    }
}

/// Hard-constrained worst case `max { <p, v> : KL(p || p0) <= radius }`
/// through its scalar dual `min_theta theta * radius + theta * ln <p0, exp(v / theta)>`.
#[derive(Clone, Debug)]
pub struct DualWorstCase {
    pub value: f64,
    /// `f64::INFINITY` when `v` is constant on the support, `0` when the
    /// radius admits the whole argmax face.
    pub theta_star: f64,
    pub p_star: Vec<f64>,
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

pub fn kl_dual_worst_value(p0_row: &[f64], v: &[f64], radius: f64) -> Result<DualWorstCase> {
    if p0_row.len() != v.len() {
        return Err(Error::Dimension("p0 and v lengths differ".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let support: Vec<usize> = (0..v.len()).filter(|&i| p0_row[i] > 0.0).collect();
    let vmax = support.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    let vmin = support.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
    let mean: f64 = support.iter().map(|&i| p0_row[i] * v[i]).sum();
    if vmax - vmin <= 1e-300 {
        return Ok(DualWorstCase { value: mean, theta_star: f64::INFINITY, p_star: p0_row.to_vec() });
    }
    // The argmax face is reachable when radius >= -ln p0(face).
    let face_mass: f64 = support.iter().filter(|&&i| v[i] == vmax).map(|&i| p0_row[i]).sum();
    if radius >= -face_mass.ln() {
        let p_star = (0..v.len())
            .map(|i| if p0_row[i] > 0.0 && v[i] == vmax { p0_row[i] / face_mass } else { 0.0 })
            .collect();
        return Ok(DualWorstCase { value: vmax, theta_star: 0.0, p_star });
    }
    // d/dtheta of the dual is radius - KL(p_theta || p0), increasing in theta:
    // bisect in log(theta) for the root.
    let span = vmax - vmin;
    let tilted = |theta: f64| {
        let mut p = vec![0.0; v.len()];
        tilt_into(p0_row, v, theta, &mut p);
        p
    };
    let (mut lo, mut hi) = ((span * 1e-8).ln(), (span * 1e8).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kl(&tilted(mid.exp()), p0_row) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = (0.5 * (lo + hi)).exp();
    let p_star = tilted(theta);
    let log_mgf: f64 = support
        .iter()
        .map(|&i| p0_row[i] * ((v[i] - vmax) / theta).exp())
        .sum::<f64>()
        .ln();
    let value = theta * radius + vmax + theta * log_mgf;
    Ok(DualWorstCase { value, theta_star: theta, p_star })
}
