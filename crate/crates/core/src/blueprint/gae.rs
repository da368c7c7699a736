use alloc::vec;
use alloc::vec::Vec;

use super::BlueprintError;

fn check(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<(), BlueprintError> {
    if rewards.len() != values.len() {
        return Err(BlueprintError::Length(rewards.len(), values.len()));
    }
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(BlueprintError::Config("gamma and lambda must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Generalized advantage estimates and value targets by backward recursion.
/// `bootstrap` is the value after the last step (0 for a terminated trajectory).
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), BlueprintError> {
    check(rewards, values, gamma, lambda)?;
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// Quadratic-time definition `A_t = sum_l (gamma lambda)^l delta_{t+l}`.
pub fn gae_direct(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), BlueprintError> {
    check(rewards, values, gamma, lambda)?;
    let n = rewards.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| rewards[t] + gamma * if t + 1 < n { values[t + 1] } else { bootstrap } - values[t])
        .collect();
    let mut adv = vec![0.0; n];
    for t in 0..n {
        let mut w = 1.0;
        for d in &delta[t..] {
            adv[t] += w * d;
            w *= gamma * lambda;
        }
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}
