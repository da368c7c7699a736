use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::policy::{greedy, stack};
use super::Transition;
use crate::nn::{Gradient, Matrix, NetParams, NetVars, NnError, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoCoeffs {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for PpoCoeffs {
    fn default() -> Self {
        Self { clip: 0.2, value_coef: 0.5, entropy_coef: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpoMinibatch {
    pub obs: Matrix,
    pub legal: Vec<Vec<bool>>,
    pub actions: Vec<usize>,
    pub old_logp: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Clipped surrogate + value regression − entropy bonus, averaged over the minibatch.
pub fn ppo_loss(
    tape: &mut Tape,
    policy: (&NetParams, &NetVars),
    value: (&NetParams, &NetVars),
    mb: &PpoMinibatch,
    c: &PpoCoeffs,
) -> Result<(Var, PpoStats), NnError> {
    let n = mb.actions.len();
    for len in [mb.obs.rows, mb.legal.len(), mb.old_logp.len(), mb.advantages.len(), mb.returns.len()] {
        if len != n {
            return Err(NnError::Shape { expected: n, got: len });
        }
    }
    let x = tape.constant(mb.obs.clone());
    let logits = policy.0.forward_tape(tape, policy.1, x)?;
    let logp_all = tape.masked_log_softmax(logits, &mb.legal)?;
    let logp = tape.gather(logp_all, &mb.actions)?;
    let old = tape.constant(Matrix::column(mb.old_logp.clone()));
    let diff = tape.sub(logp, old)?;
    let ratio = tape.exp(diff);
    let adv = tape.constant(Matrix::column(mb.advantages.clone()));
    let s1 = tape.mul(ratio, adv)?;
    let clipped = tape.clip(ratio, 1.0 - c.clip, 1.0 + c.clip);
    let s2 = tape.mul(clipped, adv)?;
    let surr = tape.min(s1, s2)?;
    let surr_mean = tape.mean(surr);
    let policy_loss = tape.scale(surr_mean, -1.0);

    let v = value.0.forward_tape(tape, value.1, x)?;
    let target = tape.constant(Matrix::column(mb.returns.clone()));
    let err = tape.sub(v, target)?;
    let sq = tape.square(err);
    let value_loss = tape.mean(sq);

    let p_all = tape.exp(logp_all);
    let plogp = tape.mul(p_all, logp_all)?;
    let neg_ent_rows = tape.row_sum(plogp);
    let neg_ent = tape.mean(neg_ent_rows);

    let vl = tape.scale(value_loss, c.value_coef);
    let el = tape.scale(neg_ent, c.entropy_coef);
    let partial = tape.add(policy_loss, vl)?;
    let loss = tape.add(partial, el)?;

    let r = &tape.value(ratio).data;
    let clip_fraction = r.iter().filter(|&&x| (x - 1.0).abs() > c.clip).count() as f64 / n.max(1) as f64;
    let stats = PpoStats {
        loss: tape.scalar(loss),
        policy_loss: tape.scalar(policy_loss),
        value_loss: tape.scalar(value_loss),
        entropy: -tape.scalar(neg_ent),
        clip_fraction,
    };
    Ok((loss, stats))
}

/// PPO loss value with gradients for the policy and value networks.
pub fn ppo_grad(
    policy: &NetParams,
    value: &NetParams,
    mb: &PpoMinibatch,
    c: &PpoCoeffs,
) -> Result<(PpoStats, Gradient, Gradient), NnError> {
    let mut tape = Tape::new();
    let pv = tape.register(policy);
    let vv = tape.register(value);
    let (loss, stats) = ppo_loss(&mut tape, (policy, &pv), (value, &vv), mb, c)?;
    let mut grads = tape.backward(loss)?;
    let mut gv = core::mem::take(&mut grads[1]);
    let mut gp = core::mem::take(&mut grads[0]);
    gp.0.resize(policy.len(), 0.0);
    gv.0.resize(value.len(), 0.0);
    Ok((stats, gp, gv))
}

/// Double-Q targets: `r` when terminated, else `r + gamma * Q'(s', argmax_legal Q(s', .))`.
pub fn bellman_targets(online: &NetParams, target: &NetParams, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>, NnError> {
    let live: Vec<usize> = (0..batch.len()).filter(|&i| !batch[i].terminated).collect();
    let mut y: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    if live.is_empty() || gamma == 0.0 {
        return Ok(y);
    }
    let rows: Vec<&[f64]> = live.iter().map(|&i| batch[i].next_obs.as_slice()).collect();
    let x = stack(&rows)?;
    let q_on = online.forward_batch(&x)?;
    let q_tg = target.forward_batch(&x)?;
    for (row, &i) in live.iter().enumerate() {
        let a = greedy(q_on.row(row), &batch[i].next_legal)?;
        y[i] += gamma * q_tg.row(row)[a];
    }
    Ok(y)
}

/// Mean squared Bellman error of `online` against precomputed targets.
pub fn bellman_loss(tape: &mut Tape, online: (&NetParams, &NetVars), batch: &[&Transition], targets: &[f64]) -> Result<Var, NnError> {
    if targets.len() != batch.len() {
        return Err(NnError::Shape { expected: batch.len(), got: targets.len() });
    }
    let rows: Vec<&[f64]> = batch.iter().map(|t| t.obs.as_slice()).collect();
    let x = tape.constant(stack(&rows)?);
    let q = online.0.forward_tape(tape, online.1, x)?;
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let qa = tape.gather(q, &actions)?;
    let y = tape.constant(Matrix::column(targets.to_vec()));
    let err = tape.sub(qa, y)?;
    let sq = tape.square(err);
    Ok(tape.mean(sq))
}

pub fn bellman_grad(online: &NetParams, target: &NetParams, batch: &[&Transition], gamma: f64) -> Result<(f64, Gradient), NnError> {
    let y = bellman_targets(online, target, batch, gamma)?;
    crate::nn::grad(online, |tape, vars| bellman_loss(tape, (online, vars), batch, &y))
}
