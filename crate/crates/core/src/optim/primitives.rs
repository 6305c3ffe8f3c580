//! Per-state policy update primitives.

/// Smallest probability kept in a direct policy row.
pub const PROB_FLOOR: f64 = 1e-12;

/// Clamp a row at [`PROB_FLOOR`] and renormalize.
pub fn floor_row(row: &mut [f64]) {
    row.iter_mut().for_each(|p| *p = p.max(PROB_FLOOR));
    let z: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= z);
}

/// Closed-form minimizer of `<q, p> + KL(p || policy_row) / alpha` over the
/// simplex, i.e. `policy_row * exp(-alpha * q)` renormalized.
pub fn mirror_step(policy_row: &[f64], q_row: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = policy_row.to_vec();
    floor_row(&mut out);
    // shift by the row minimum so the largest weight is exp(0)
    let qmin = q_row.iter().copied().fold(f64::INFINITY, f64::min);
    for (p, q) in out.iter_mut().zip(q_row) {
        *p *= (-alpha * (q - qmin)).exp();
    }
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    floor_row(&mut out);
    out
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}
