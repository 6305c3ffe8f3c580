use nalgebra::DMatrix;

use super::EnvSpec;
use crate::error::Result;
use crate::mdp::{NativeSignal, Sense, TabularCMDP};

pub const N_STATES: usize = 6;
const REWARD: [f64; N_STATES] = [0.001, 0.0, 0.0, 0.0, 0.1, 1.0];
const SAFETY_COST: [f64; N_STATES] = [0.2, 0.035, 0.0, 0.01, 0.08, 0.9];

/// Row of `P(. | s, a)`. Action 0 swims left, action 1 swims right. Mass
/// that would leave the river at either bank stays in place.
fn transition_row(s: usize, a: usize) -> [f64; N_STATES] {
    let last = N_STATES - 1;
    let mut row = [0.0; N_STATES];
    let (stay, left, right) = match (s, a) {
        (0, 0) => (0.9, 0.0, 0.1),
        (s, 1) if s == last => (0.9, 0.1, 0.0),
        (_, 0) => (0.6, 0.3, 0.1),
        _ => (0.6, 0.1, 0.3),
    };
    row[s] += stay;
    if s > 0 {
        row[s - 1] += left;
    } else {
        row[s] += left;
    }
    if s < last {
        row[s + 1] += right;
    } else {
        row[s] += right;
    }
    row
}

/// Constrained river swim: maximize reward subject to a cumulative safety
/// cost ceiling.
pub fn build_crs(spec: &EnvSpec) -> Result<TabularCMDP> {
    let na = 2;
    let kernel = DMatrix::from_fn(N_STATES * na, N_STATES, |r, s2| transition_row(r / na, r % na)[s2]);
    let per_state = |v: &[f64; N_STATES]| DMatrix::from_fn(N_STATES, na, |s, _| v[s]);
    TabularCMDP::from_native(
        kernel,
        vec![
            NativeSignal { values: per_state(&REWARD), sense: Sense::Maximize },
            NativeSignal { values: per_state(&SAFETY_COST), sense: Sense::Minimize },
        ],
        &spec.native_thresholds(),
        spec.gamma,
        spec.initial_dist(N_STATES),
        spec.kl_radius(),
    )
}
