//! Exact policy evaluation on a fixed transition kernel.
//!
//! All kernels are `(S*A) x S` matrices with row `s * A + a`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::policy::Policy;

fn check_dims(probs: &DMatrix<f64>, kernel: &DMatrix<f64>, cost: Option<&DMatrix<f64>>) -> Result<()> {
    let (ns, na) = probs.shape();
    if kernel.nrows() != ns * na || kernel.ncols() != ns {
        return Err(Error::Dimension(format!(
            "kernel {}x{} does not fit policy {ns}x{na}",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    if let Some(c) = cost {
        if c.shape() != (ns, na) {
            return Err(Error::Dimension(format!(
                "cost {}x{} does not fit policy {ns}x{na}",
                c.nrows(),
                c.ncols()
            )));
        }
    }
    Ok(())
}

/// Lift a kernel to the state-action chain:
/// `T[(s,a),(s',a')] = kernel[(s,a), s'] * pi(a'|s')`.
pub fn state_action_transition(policy: &Policy, kernel: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let probs = policy.probs();
    check_dims(&probs, kernel, None)?;
    Ok(lift(&probs, kernel))
}

pub(crate) fn lift(probs: &DMatrix<f64>, kernel: &DMatrix<f64>) -> DMatrix<f64> {
    let (ns, na) = probs.shape();
    let n = ns * na;
    let mut t = DMatrix::zeros(n, n);
    for row in 0..n {
        for sp in 0..ns {
            let p = kernel[(row, sp)];
            if p == 0.0 {
                continue;
            }
            for ap in 0..na {
                t[(row, sp * na + ap)] = p * probs[(sp, ap)];
            }
        }
    }
    t
}

/// State-to-state chain `T[s,s'] = sum_a pi(a|s) kernel[(s,a),s']`.
pub(crate) fn state_chain(probs: &DMatrix<f64>, kernel: &DMatrix<f64>) -> DMatrix<f64> {
    let (ns, na) = probs.shape();
    let mut t = DMatrix::zeros(ns, ns);
    for s in 0..ns {
        for a in 0..na {
            let w = probs[(s, a)];
            if w == 0.0 {
                continue;
            }
            let row = kernel.row(s * na + a);
            for sp in 0..ns {
                t[(s, sp)] += w * row[sp];
            }
        }
    }
    t
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    let (ns, na) = m.shape();
    DVector::from_fn(ns * na, |i, _| m[(i / na, i % na)])
}

pub(crate) fn state_values(probs: &DMatrix<f64>, q: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(q.nrows(), |s, _| probs.row(s).dot(&q.row(s)))
}

/// Exact `(Q, V)` solving `Q = c + gamma * T_sa Q` in state-action space.
pub fn exact_q(
    policy: &Policy,
    kernel: &DMatrix<f64>,
    cost: &DMatrix<f64>,
    discount: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let probs = policy.probs();
    check_dims(&probs, kernel, Some(cost))?;
    exact_q_probs(&probs, kernel, cost, discount)
}

pub(crate) fn exact_q_probs(
    probs: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    cost: &DMatrix<f64>,
    discount: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (ns, na) = probs.shape();
    let n = ns * na;
    let mut m = lift(probs, kernel);
    m *= -discount;
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    let q_flat = m
        .lu()
        .solve(&flatten(cost))
        .ok_or(Error::Singular("exact_q"))?;
    let q = DMatrix::from_fn(ns, na, |s, a| q_flat[s * na + a]);
    let v = state_values(probs, &q);
    Ok((q, v))
}

/// Same fixed point as [`exact_q`] via the `S x S` state system:
/// `V = (I - gamma P_pi)^{-1} c_pi`, then `Q = c + gamma * kernel V`.
pub(crate) fn state_space_q(
    probs: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    cost: &DMatrix<f64>,
    discount: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (ns, na) = probs.shape();
    let mut m = state_chain(probs, kernel);
    m *= -discount;
    for i in 0..ns {
        m[(i, i)] += 1.0;
    }
    let c_pi = state_values(probs, cost);
    let v = m.lu().solve(&c_pi).ok_or(Error::Singular("state value solve"))?;
    let next = kernel * &v;
    let q = DMatrix::from_fn(ns, na, |s, a| cost[(s, a)] + discount * next[s * na + a]);
    Ok((q, v))
}

/// Normalized discounted state occupancy `d = (1-gamma)(I - gamma T^T)^{-1} rho`.
pub fn occupancy(
    policy: &Policy,
    kernel: &DMatrix<f64>,
    initial_dist: &DVector<f64>,
    discount: f64,
) -> Result<DVector<f64>> {
    let probs = policy.probs();
    check_dims(&probs, kernel, None)?;
    if initial_dist.len() != probs.nrows() {
        return Err(Error::Dimension(format!(
            "initial distribution has {} entries for {} states",
            initial_dist.len(),
            probs.nrows()
        )));
    }
    occupancy_probs(&probs, kernel, initial_dist, discount)
}

pub(crate) fn occupancy_probs(
    probs: &DMatrix<f64>,
    kernel: &DMatrix<f64>,
    initial_dist: &DVector<f64>,
    discount: f64,
) -> Result<DVector<f64>> {
    let ns = probs.nrows();
    let mut m = state_chain(probs, kernel).transpose();
    m *= -discount;
    for i in 0..ns {
        m[(i, i)] += 1.0;
    }
    let rhs = initial_dist * (1.0 - discount);
    let d = m.lu().solve(&rhs).ok_or(Error::Singular("occupancy"))?;
    // clip round-off below zero
    Ok(d.map(|x| x.max(0.0)))
}

/// `J = rho^T V` for a fixed kernel.
pub fn objective(
    policy: &Policy,
    kernel: &DMatrix<f64>,
    cost: &DMatrix<f64>,
    discount: f64,
    initial_dist: &DVector<f64>,
) -> Result<f64> {
    let (_, v) = exact_q(policy, kernel, cost, discount)?;
    Ok(initial_dist.dot(&v))
}

/// Gradient of `J` with respect to the direct policy probabilities at a
/// fixed kernel: `H * d(s) * Q(s, a)`.
pub fn policy_gradient(
    policy: &Policy,
    kernel: &DMatrix<f64>,
    cost: &DMatrix<f64>,
    discount: f64,
    initial_dist: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let (q, _) = exact_q(policy, kernel, cost, discount)?;
    let d = occupancy(policy, kernel, initial_dist, discount)?;
    Ok(gradient_from(&d, &q, discount))
}

pub(crate) fn gradient_from(d: &DVector<f64>, q: &DMatrix<f64>, discount: f64) -> DMatrix<f64> {
    let h = 1.0 / (1.0 - discount);
    DMatrix::from_fn(q.nrows(), q.ncols(), |s, a| h * d[s] * q[(s, a)])
}

/// Both sides of the performance-difference identity
/// `J(b) - J(a) = H * sum_s d_a(s) sum_a' (pi_b - pi_a)(a'|s) Q_b(s, a')`.
pub fn performance_difference(
    pi_a: &Policy,
    pi_b: &Policy,
    kernel: &DMatrix<f64>,
    cost: &DMatrix<f64>,
    discount: f64,
    initial_dist: &DVector<f64>,
) -> Result<(f64, f64)> {
    let (_, v_a) = exact_q(pi_a, kernel, cost, discount)?;
    let (q_b, v_b) = exact_q(pi_b, kernel, cost, discount)?;
    let d_a = occupancy(pi_a, kernel, initial_dist, discount)?;
    let lhs = initial_dist.dot(&v_b) - initial_dist.dot(&v_a);
    let (pa, pb) = (pi_a.probs(), pi_b.probs());
    let h = 1.0 / (1.0 - discount);
    let mut rhs = 0.0;
    for s in 0..pa.nrows() {
        let inner: f64 = (0..pa.ncols())
            .map(|a| (pb[(s, a)] - pa[(s, a)]) * q_b[(s, a)])
            .sum();
        rhs += d_a[s] * inner;
    }
    Ok((lhs, h * rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state() -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::from_row_slice(1, 1, &[1.0]), DVector::from_vec(vec![1.0]))
    }

    #[test]
    fn identity_chain_lifts_to_identity() {
        let (k, _) = one_state();
        let t = state_action_transition(&Policy::uniform(1, 1), &k).unwrap();
        assert_eq!(t, DMatrix::from_row_slice(1, 1, &[1.0]));
    }

    #[test]
    fn uniform_two_action_rows_split_evenly() {
        // deterministic s -> s' for every action
        let k = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let t = state_action_transition(&Policy::uniform(2, 2), &k).unwrap();
        for r in 0..4 {
            let nz: Vec<f64> = t.row(r).iter().copied().filter(|x| *x != 0.0).collect();
            assert_eq!(nz, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn geometric_series_value() {
        let (k, _) = one_state();
        let c = DMatrix::from_row_slice(1, 1, &[1.0]);
        let (q, v) = exact_q(&Policy::uniform(1, 1), &k, &c, 0.99).unwrap();
        assert!((q[(0, 0)] - 100.0).abs() < 1e-9);
        assert!((v[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn zero_cost_zero_q_and_gradient() {
        let k = DMatrix::from_row_slice(4, 2, &[0.3, 0.7, 1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
        let c = DMatrix::zeros(2, 2);
        let rho = DVector::from_vec(vec![0.4, 0.6]);
        let pi = Policy::uniform(2, 2);
        let (q, _) = exact_q(&pi, &k, &c, 0.9).unwrap();
        assert!(q.iter().all(|x| *x == 0.0));
        let g = policy_gradient(&pi, &k, &c, 0.9, &rho).unwrap();
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn absorbing_state_occupancy() {
        let (k, rho) = one_state();
        let d = occupancy(&Policy::uniform(1, 1), &k, &rho, 0.99).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_discount_occupancy_is_rho() {
        let k = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let rho = DVector::from_vec(vec![0.3, 0.7]);
        let d = occupancy(&Policy::uniform(2, 2), &k, &rho, 1e-12).unwrap();
        assert!((d - &rho).amax() < 1e-10);
    }

    #[test]
    fn state_space_route_matches_lifted_route() {
        let k = DMatrix::from_row_slice(4, 2, &[0.3, 0.7, 1.0, 0.0, 0.5, 0.5, 0.2, 0.8]);
        let c = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.4, 0.0]);
        let probs = DMatrix::from_row_slice(2, 2, &[0.25, 0.75, 0.6, 0.4]);
        let (q1, v1) = exact_q_probs(&probs, &k, &c, 0.95).unwrap();
        let (q2, v2) = state_space_q(&probs, &k, &c, 0.95).unwrap();
        assert!((q1 - q2).amax() < 1e-10);
        assert!((v1 - v2).amax() < 1e-10);
    }

    #[test]
    fn identical_policies_have_no_difference() {
        let k = DMatrix::from_row_slice(4, 2, &[0.3, 0.7, 1.0, 0.0, 0.5, 0.5, 0.2, 0.8]);
        let c = DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.4, 0.0]);
        let rho = DVector::from_vec(vec![0.5, 0.5]);
        let pi = Policy::uniform(2, 2);
        let (l, r) = performance_difference(&pi, &pi, &k, &c, 0.9, &rho).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_reported() {
        let k = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let c = DMatrix::zeros(2, 2);
        let err = exact_q(&Policy::uniform(2, 2), &k, &c, 0.9).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }
}
