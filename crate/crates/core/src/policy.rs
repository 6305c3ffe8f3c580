use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Stochastic tabular policy.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Row-stochastic `[s][a]` matrix.
    Direct(DMatrix<f64>),
    /// `[s][a]` logits; probabilities are the row-wise softmax.
    Softmax(DMatrix<f64>),
}

impl Policy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy::Direct(DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64))
    }

    /// Validated direct policy.
    pub fn direct(probs: DMatrix<f64>) -> Result<Self> {
        for (s, row) in probs.row_iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!("policy row {s} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "policy row {s} sums to {total}"
                )));
            }
        }
        Ok(Policy::Direct(probs))
    }

    pub fn n_states(&self) -> usize {
        match self {
            Policy::Direct(m) | Policy::Softmax(m) => m.nrows(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Policy::Direct(m) | Policy::Softmax(m) => m.ncols(),
        }
    }

    /// Action probabilities as an `[s][a]` matrix.
    pub fn probs(&self) -> DMatrix<f64> {
        match self {
            Policy::Direct(m) => m.clone(),
            Policy::Softmax(logits) => {
                let mut out = logits.clone();
                for mut row in out.row_iter_mut() {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.iter_mut().for_each(|x| *x = (*x - max).exp());
                    let z: f64 = row.iter().sum();
                    row.iter_mut().for_each(|x| *x /= z);
                }
                out
            }
        }
    }
}
