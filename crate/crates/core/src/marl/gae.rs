use super::MarlError;

/// Generalized advantage estimates and critic targets.
///
/// `values` holds one entry per step plus the bootstrap value of the state
/// after the last step. A `done` step neither bootstraps nor propagates.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), MarlError> {
    let n = rewards.len();
    if values.len() != n + 1 || dones.len() != n {
        return Err(MarlError::Contract(format!(
            "gae: {n} rewards, {} values (want {}), {} dones",
            values.len(),
            n + 1,
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Shift and scale the weighted entries to mean 0 and unit standard deviation.
/// Entries with zero weight are set to 0.
pub fn normalize_advantages(adv: &[f64], weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0.0; adv.len()];
    }
    let mean = adv.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() / total;
    let var = adv.iter().zip(weights).map(|(a, w)| w * (a - mean).powi(2)).sum::<f64>() / total;
    let std = var.sqrt().max(1e-8);
    adv.iter()
        .zip(weights)
        .map(|(a, w)| if *w > 0.0 { (a - mean) / std } else { 0.0 })
        .collect()
}
