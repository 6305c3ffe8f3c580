use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{softmax, EnvSpec};
use crate::error::Result;
use crate::mdp::{NativeSignal, Sense, TabularCMDP};
use crate::rng::{stream, Stream};

/// `[s][a]` table of `N(mu, 1)` draws with one `mu ~ U(0, 10)` per table.
fn signal_table<R: Rng>(rng: &mut R, ns: usize, na: usize) -> DMatrix<f64> {
    let mu: f64 = rng.random_range(0.0..10.0);
    let normal = Normal::new(mu, 1.0).expect("unit variance");
    let mut out = DMatrix::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            out[(s, a)] = normal.sample(rng);
        }
    }
    out
}

/// Garnet random MDP: the objective is a reward and the constraint asks the
/// utility to stay above its threshold.
///
/// Each kernel row is the softmax of `n_states` draws from `N(mu, 1)` with
/// `mu ~ U(0, 100)` drawn per state-action pair. Draw order: row by row
/// (state-major), means before entries.
pub fn build_garnet(spec: &EnvSpec) -> Result<TabularCMDP> {
    let (ns, na) = (spec.n_states, spec.n_actions);
    let mut rng = stream(spec.seed, Stream::Kernel);
    let mut kernel = DMatrix::zeros(ns * na, ns);
    for r in 0..ns * na {
        let mu: f64 = rng.random_range(0.0..100.0);
        let z: Vec<f64> = (0..ns)
            .map(|_| mu + Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        for (s2, p) in softmax(&z).into_iter().enumerate() {
            kernel[(r, s2)] = p;
        }
    }
    let reward = signal_table(&mut stream(spec.seed, Stream::Objective), ns, na);
    let utility = signal_table(&mut stream(spec.seed, Stream::Constraint), ns, na);
    TabularCMDP::from_native(
        kernel,
        vec![
            NativeSignal { values: reward, sense: Sense::Maximize },
            NativeSignal { values: utility, sense: Sense::Maximize },
        ],
        &spec.native_thresholds(),
        spec.gamma,
        spec.initial_dist(ns),
        spec.kl_radius(),
    )
}
