use alloc::vec::Vec;
use rand::Rng;

use super::{RlError, Roots, SearchConfig};
use crate::blueprint::policy::{epsilon_greedy, max_q};
use crate::blueprint::{bellman_grad, collect_rollouts, PpoConfig, ReplayBuffer, Transition};
use crate::env::Simulator;
use crate::nn::{clip_grad_norm, NetParams, OptState};

/// Policy-gradient improvement: `gradient_steps` iterations of collecting
/// `rollouts` trajectories of at most `horizon` steps and one PPO update. GAE
/// uses the evolving value net, except that truncated trajectories bootstrap
/// from the frozen blueprint value `phi`. Returns the fine-tuned policy and value.
pub fn pg_finetune<S: Simulator, R: Rng + ?Sized>(
    roots: Roots<'_, S>,
    theta: &NetParams,
    phi: &NetParams,
    cfg: &SearchConfig,
    rng: &mut R,
    samples: &mut u64,
) -> Result<(NetParams, NetParams), RlError> {
    cfg.validate()?;
    let mut policy = theta.clone();
    let mut value = phi.clone();
    if cfg.gradient_steps == 0 {
        return Ok((policy, value));
    }
    let ppo = PpoConfig {
        hidden: Vec::new(),
        lr: cfg.pg_lr,
        lambda: cfg.lambda,
        coeffs: cfg.ppo,
        epochs: cfg.ppo_epochs,
        minibatch: cfg.ppo_minibatch,
        max_grad_norm: cfg.pg_max_grad_norm,
        ..PpoConfig::default()
    };
    let mut popt = OptState::for_net(&policy, cfg.pg_lr);
    let mut vopt = OptState::for_net(&value, cfg.pg_lr);
    let gamma = cfg.gamma.unwrap_or_else(|| roots.env_gamma());
    for _ in 0..cfg.gradient_steps {
        let starts = (0..cfg.rollouts).map(|_| roots.draw(rng)).collect::<Result<Vec<S>, _>>()?;
        let mut it = starts.into_iter();
        let batch = collect_rollouts(
            |_: &mut R| Ok(it.next().expect("one start per rollout")),
            &policy,
            &value,
            phi,
            cfg.rollouts,
            cfg.horizon,
            rng,
            samples,
        )?;
        let data = batch.to_samples(gamma, cfg.lambda)?;
        crate::blueprint::ppo_epochs(&mut policy, &mut value, &mut popt, &mut vopt, &data, &ppo, rng)?;
    }
    Ok((policy, value))
}

/// One fine-tuning trajectory as Bellman transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct QTrajectory {
    pub transitions: Vec<Transition>,
    /// The episode ended inside the horizon.
    pub terminated: bool,
}

/// Collect `rollouts` trajectories of at most `horizon` steps, acting
/// epsilon-greedily on `theta`. Each transition bootstraps from the
/// observation of whoever acts next.
pub fn collect_q_trajectories<S: Simulator, R: Rng + ?Sized>(
    roots: Roots<'_, S>,
    theta: &NetParams,
    cfg: &SearchConfig,
    rng: &mut R,
    samples: &mut u64,
) -> Result<Vec<QTrajectory>, RlError> {
    let mut out = Vec::with_capacity(cfg.rollouts);
    for _ in 0..cfg.rollouts {
        let mut s = roots.draw(rng)?;
        let mut t = QTrajectory { transitions: Vec::new(), terminated: s.is_terminal() };
        while t.transitions.len() < cfg.horizon && !s.is_terminal() {
            let obs = s.observe(s.current_agent());
            let a = epsilon_greedy(theta, &obs, cfg.explore, rng)?;
            let step = s.step(a)?;
            *samples += 1;
            let next = s.observe(s.current_agent());
            t.transitions.push(Transition {
                obs: obs.features,
                legal: obs.legal,
                action: a,
                reward: step.reward,
                next_obs: next.features,
                next_legal: next.legal,
                terminated: step.terminated,
            });
            t.terminated = step.terminated;
        }
        out.push(t);
    }
    Ok(out)
}

/// For a trajectory cut off by the horizon, add the blueprint's best value at
/// the cut to the last reward and make that step terminal.
pub fn truncate_with_blueprint(t: &mut QTrajectory, theta: &NetParams) -> Result<(), RlError> {
    if t.terminated {
        return Ok(());
    }
    if let Some(last) = t.transitions.last_mut() {
        let obs = crate::env::Observation { agent: None, features: last.next_obs.clone(), legal: last.next_legal.clone() };
        last.reward += max_q(theta, &obs)?;
        last.terminated = true;
    }
    Ok(())
}

/// Q-value improvement: collect local trajectories once, rewrite truncated
/// ends with the blueprint, then take `gradient_steps` Bellman steps on batches
/// mixing the global buffer (probability `buffer_mix`) with local transitions.
pub fn q_finetune<S: Simulator, R: Rng + ?Sized>(
    roots: Roots<'_, S>,
    theta: &NetParams,
    global: Option<&ReplayBuffer>,
    cfg: &SearchConfig,
    rng: &mut R,
    samples: &mut u64,
) -> Result<NetParams, RlError> {
    cfg.validate()?;
    let mut online = theta.clone();
    if cfg.gradient_steps == 0 {
        return Ok(online);
    }
    let gamma = cfg.gamma.unwrap_or_else(|| roots.env_gamma());
    let mut trajs = collect_q_trajectories(roots, theta, cfg, rng, samples)?;
    for t in &mut trajs {
        truncate_with_blueprint(t, theta)?;
    }
    let local: Vec<Transition> = trajs.into_iter().flat_map(|t| t.transitions).collect();
    let global = global.filter(|g| !g.is_empty());
    if local.is_empty() && global.is_none() {
        return Ok(online);
    }
    let mut target = theta.clone();
    let mut opt = OptState::for_net(&online, cfg.q_lr);
    for step in 1..=cfg.gradient_steps {
        let batch: Vec<&Transition> = (0..cfg.batch)
            .map(|_| match global {
                Some(g) if local.is_empty() || rng.gen::<f64>() < cfg.buffer_mix => g.sample(rng).expect("non-empty buffer"),
                _ => &local[rng.gen_range(0..local.len())],
            })
            .collect();
        let (_, mut g) = bellman_grad(&online, &target, &batch, gamma)?;
        clip_grad_norm(&mut g, cfg.max_grad_norm);
        opt.step(&mut online, &g)?;
        if step % cfg.target_refresh == 0 {
            target = online.clone();
        }
    }
    Ok(online)
}
