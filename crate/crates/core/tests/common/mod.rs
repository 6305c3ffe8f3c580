//! Random instances and reference implementations on plain vectors, kept
//! independent of the library's linear algebra.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcmdp::{Policy, TabularCMDP};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random_range(1e-6f64..1.0).ln()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn random_kernel<R: Rng>(rng: &mut R, ns: usize, na: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(ns * na, ns);
    for r in 0..ns * na {
        for (j, p) in random_simplex(rng, ns).into_iter().enumerate() {
            k[(r, j)] = p;
        }
    }
    k
}

pub fn random_cost<R: Rng>(rng: &mut R, ns: usize, na: usize) -> DMatrix<f64> {
    DMatrix::from_fn(ns, na, |_, _| rng.random_range(0.0..1.0))
}

pub fn random_policy<R: Rng>(rng: &mut R, ns: usize, na: usize) -> Policy {
    let mut p = DMatrix::zeros(ns, na);
    for s in 0..ns {
        for (a, x) in random_simplex(rng, na).into_iter().enumerate() {
            p[(s, a)] = x;
        }
    }
    Policy::Direct(p)
}

/// Random model with `k` constraints and thresholds at half the horizon.
pub fn random_cmdp<R: Rng>(rng: &mut R, ns: usize, na: usize, k: usize, gamma: f64, c_kl: f64) -> TabularCMDP {
    let kernel = random_kernel(rng, ns, na);
    let costs = (0..=k).map(|_| random_cost(rng, ns, na)).collect();
    let rho = DVector::from_vec(random_simplex(rng, ns));
    TabularCMDP::new(kernel, costs, vec![0.5 / (1.0 - gamma); k], gamma, rho, c_kl).unwrap()
}

pub fn nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Policy-evaluation value iteration on nested vectors until the sup change
/// drops below `tol`. `kernel[s * na + a][s']`, `cost[s][a]`, `pi[s][a]`.
pub fn value_iteration(kernel: &[Vec<f64>], cost: &[Vec<f64>], pi: &[Vec<f64>], gamma: f64, tol: f64) -> Vec<Vec<f64>> {
    let (ns, na) = (cost.len(), cost[0].len());
    let mut q = vec![vec![0.0; na]; ns];
    loop {
        let v: Vec<f64> = (0..ns).map(|s| (0..na).map(|a| pi[s][a] * q[s][a]).sum()).collect();
        let mut change = 0.0f64;
        let mut next = vec![vec![0.0; na]; ns];
        for s in 0..ns {
            for a in 0..na {
                let ev: f64 = kernel[s * na + a].iter().zip(&v).map(|(p, x)| p * x).sum();
                next[s][a] = cost[s][a] + gamma * ev;
                change = change.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if change < tol {
            return q;
        }
    }
}

/// `rho^T V` for an arbitrary (not necessarily stochastic) policy matrix,
/// by Gauss-Seidel-free plain iteration to `1e-14`.
pub fn plain_objective(kernel: &[Vec<f64>], cost: &[Vec<f64>], pi: &[Vec<f64>], gamma: f64, rho: &[f64]) -> f64 {
    let q = value_iteration(kernel, cost, pi, gamma, 1e-14);
    let na = cost[0].len();
    (0..rho.len()).map(|s| rho[s] * (0..na).map(|a| pi[s][a] * q[s][a]).sum::<f64>()).sum()
}

/// Central differences of `f` with respect to every entry of `probs`.
pub fn finite_difference(probs: &DMatrix<f64>, h: f64, f: impl Fn(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(probs.nrows(), probs.ncols());
    for s in 0..probs.nrows() {
        for a in 0..probs.ncols() {
            let mut up = probs.clone();
            up[(s, a)] += h;
            let mut down = probs.clone();
            down[(s, a)] -= h;
            g[(s, a)] = (f(&up) - f(&down)) / (2.0 * h);
        }
    }
    g
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Maximizer of `f` over the 2- or 3-point simplex: a grid of spacing
/// `step`, refined twice around the best cell.
pub fn simplex_grid_argmax(n: usize, step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    assert!(n == 2 || n == 3);
    let mut center = vec![1.0 / n as f64; n];
    let mut radius = 1.0;
    let mut h = step;
    for _ in 0..3 {
        let mut best = (f64::NEG_INFINITY, center.clone());
        let lo0 = (center[0] - radius).max(0.0);
        let hi0 = (center[0] + radius).min(1.0);
        let mut x = lo0;
        while x <= hi0 + 1e-15 {
            if n == 2 {
                let p = [x, 1.0 - x];
                let v = f(&p);
                if v > best.0 {
                    best = (v, p.to_vec());
                }
            } else {
                let lo1 = (center[1] - radius).max(0.0);
                let hi1 = (center[1] + radius).min(1.0 - x);
                let mut y = lo1;
                while y <= hi1 + 1e-15 {
                    let p = [x, y, (1.0 - x - y).max(0.0)];
                    let v = f(&p);
                    if v > best.0 {
                        best = (v, p.to_vec());
                    }
                    y += h;
                }
            }
            x += h;
        }
        center = best.1;
        radius = 2.0 * h;
        h /= 20.0;
    }
    center
}
