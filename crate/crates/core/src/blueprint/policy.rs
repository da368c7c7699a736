//! Acting with policy, value and Q networks.

use alloc::vec::Vec;
use rand::Rng;

use crate::env::Observation;
use crate::math;
use crate::nn::{masked_log_probs, Matrix, NetParams, NnError};

pub fn greedy(values: &[f64], legal: &[bool]) -> Result<usize, NnError> {
    math::argmax_masked(values, legal).ok_or(NnError::NoLegalAction)
}

/// Greedy action of a Q network, restricted to legal actions.
pub fn greedy_q(net: &NetParams, obs: &Observation) -> Result<usize, NnError> {
    greedy(&net.forward(&obs.features)?, &obs.legal)
}

/// Largest legal Q value.
pub fn max_q(net: &NetParams, obs: &Observation) -> Result<f64, NnError> {
    let q = net.forward(&obs.features)?;
    Ok(q[greedy(&q, &obs.legal)?])
}

pub fn uniform_legal<R: Rng + ?Sized>(legal: &[bool], rng: &mut R) -> Result<usize, NnError> {
    let n = legal.iter().filter(|&&l| l).count();
    if n == 0 {
        return Err(NnError::NoLegalAction);
    }
    let k = rng.gen_range(0..n);
    Ok(legal.iter().enumerate().filter(|(_, &l)| l).nth(k).map(|(i, _)| i).expect("k < n"))
}

/// With probability `eps` a uniformly random legal action, else greedy.
pub fn epsilon_greedy<R: Rng + ?Sized>(net: &NetParams, obs: &Observation, eps: f64, rng: &mut R) -> Result<usize, NnError> {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        uniform_legal(&obs.legal, rng)
    } else {
        greedy_q(net, obs)
    }
}

/// Log-probabilities of a policy network over all actions (illegal ones at about -1e9).
pub fn log_probs(net: &NetParams, obs: &Observation) -> Result<Vec<f64>, NnError> {
    Ok(masked_log_probs(&net.forward(&obs.features)?, &obs.legal))
}

pub fn probs(net: &NetParams, obs: &Observation) -> Result<Vec<f64>, NnError> {
    Ok(math::masked_softmax(&net.forward(&obs.features)?, &obs.legal))
}

/// Inverse-CDF draw over legal actions.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], legal: &[bool], rng: &mut R) -> Result<usize, NnError> {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, (&p, &l)) in probs.iter().zip(legal).enumerate() {
        if !l {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return Ok(i);
        }
    }
    last.ok_or(NnError::NoLegalAction)
}

/// Sample from a policy network; returns the action and its log-probability.
pub fn sample_policy<R: Rng + ?Sized>(net: &NetParams, obs: &Observation, rng: &mut R) -> Result<(usize, f64), NnError> {
    let lp = log_probs(net, obs)?;
    let p: Vec<f64> = lp.iter().zip(&obs.legal).map(|(&l, &m)| if m { math::exp(l) } else { 0.0 }).collect();
    let a = sample_index(&p, &obs.legal, rng)?;
    Ok((a, lp[a]))
}

/// Most probable legal action of a policy network.
pub fn greedy_policy(net: &NetParams, obs: &Observation) -> Result<usize, NnError> {
    greedy(&net.forward(&obs.features)?, &obs.legal)
}

pub fn state_value(net: &NetParams, obs: &Observation) -> Result<f64, NnError> {
    Ok(net.forward(&obs.features)?[0])
}

/// Stack feature rows into a batch matrix.
pub fn stack(rows: &[&[f64]]) -> Result<Matrix, NnError> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        if r.len() != cols {
            return Err(NnError::Shape { expected: cols, got: r.len() });
        }
        data.extend_from_slice(r);
    }
    Matrix::from_rows(rows.len(), cols, data)
}
