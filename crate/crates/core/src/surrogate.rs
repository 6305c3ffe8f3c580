use serde::Serialize;

/// Per-iteration record of an optimizer run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurrogateState {
    pub iteration: usize,
    /// Robust values `J_0 .. J_K` in canonical sense.
    pub objective_values: Vec<f64>,
    pub active_index: usize,
    pub surrogate_value: f64,
    pub step_size: f64,
    /// Milliseconds since the start of the optimizer loop.
    pub wall_ms: f64,
}

/// `max(J_0 / lambda, max_n J_n - b_n + xi)` and the index attaining it.
///
/// Ties go to the smallest index, so the objective wins a tie with any
/// constraint.
pub fn surrogate(values: &[f64], thresholds: &[f64], lambda: f64, xi: f64) -> (f64, usize) {
    debug_assert_eq!(values.len(), thresholds.len() + 1);
    let mut best = values[0] / lambda;
    let mut index = 0;
    for (n, (&j, &b)) in values[1..].iter().zip(thresholds).enumerate() {
        let term = j - b + xi;
        if term > best {
            best = term;
            index = n + 1;
        }
    }
    (best, index)
}

/// Worst constraint slack `max_n J_n - b_n` (negative infinity without constraints).
pub fn max_violation(values: &[f64], thresholds: &[f64]) -> f64 {
    values[1..]
        .iter()
        .zip(thresholds)
        .map(|(j, b)| j - b)
        .fold(f64::NEG_INFINITY, f64::max)
}
