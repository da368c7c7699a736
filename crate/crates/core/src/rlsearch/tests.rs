extern crate std;

use super::*;
use crate::belief::{BeliefConfig, ParticleBelief};
use crate::blueprint::policy::probs;
use crate::blueprint::{ReplayBuffer, Transition};
use crate::clock::NoClock;
use crate::env::toy::{Bandit, CoinFlip};
use crate::env::{CoordGame, GridPacman, Simulator, Viewer};
use crate::nn::{Arch, HeadKind, NetParams};
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

fn rng(seed: u64) -> Pcg64Mcg {
    Pcg64Mcg::seed_from_u64(seed)
}

/// Linear net that ignores its input and outputs `bias`.
fn constant_net(head: HeadKind, obs_len: usize, bias: &[f64]) -> NetParams {
    let arch = Arch::default_for(head, obs_len, bias.len()).with_hidden(vec![]);
    let mut net = NetParams::zeros(arch);
    let off = obs_len * bias.len();
    net.params[off..].copy_from_slice(bias);
    net
}

fn coord_blueprint() -> NetParams {
    constant_net(HeadKind::QValues, CoordGame::reset(0).spec().obs_len, &[1.0, 0.0])
}

fn coord_cfg(mode: SearchMode) -> SearchConfig {
    SearchConfig {
        horizon: 2,
        gradient_steps: 2000,
        explore: 0.5,
        q_lr: 1e-2,
        eval_rollouts: 50,
        target_refresh: 50,
        ..SearchConfig::for_mode(mode)
    }
}

fn coord_belief(viewer: Viewer) -> ParticleBelief<CoordGame> {
    ParticleBelief::init(&CoordGame::reset(0), viewer, BeliefConfig { particles: 1, ..Default::default() }, 0).unwrap()
}

fn ppo_nets(obs_len: usize, actions: usize, seed: u64) -> (NetParams, NetParams) {
    let mut r = rng(seed);
    let p = NetParams::init(Arch::default_for(HeadKind::PolicyLogits, obs_len, actions).with_hidden(vec![16]), 0.01, &mut r);
    let v = NetParams::init(Arch::default_for(HeadKind::StateValue, obs_len, 1).with_hidden(vec![16]), 1.0, &mut r);
    (p, v)
}

#[test]
fn mode_defaults() {
    let s = SearchConfig::for_mode(SearchMode::Single);
    assert_eq!((s.horizon, s.gradient_steps, s.eval_rollouts, s.gate_eps), (3, 5000, 10_000, 0.05));
    let m = SearchConfig::for_mode(SearchMode::Multi);
    assert_eq!((m.horizon, m.gradient_steps, m.eval_rollouts, m.gate_eps), (1, 10_000, 10_000, 0.035));
    assert_eq!(SearchConfig::replan().horizon, 30);
    assert_eq!(SearchConfig::default(), s);
}

#[test]
fn config_validation() {
    assert!(SearchConfig { horizon: 0, ..Default::default() }.validate().is_err());
    assert!(SearchConfig { buffer_mix: 1.5, ..Default::default() }.validate().is_err());
    assert!(SearchConfig { gate_eps: -0.1, ..Default::default() }.validate().is_err());
    assert!(SearchConfig { gamma: Some(2.0), ..Default::default() }.validate().is_err());
    assert!(SearchConfig::default().validate().is_ok());
}

#[test]
fn config_rejects_unknown_fields() {
    assert!(serde_json::from_str::<SearchConfig>(r#"{"horizon": 2, "bogus": 1}"#).is_err());
    let c: SearchConfig = serde_json::from_str(r#"{"horizon": 2, "mode": "multi"}"#).unwrap();
    assert_eq!((c.horizon, c.mode), (2, SearchMode::Multi));
}

#[test]
fn zero_budget_is_identity() {
    let g = GridPacman::reset(3);
    let spec = g.spec();
    let (p, v) = ppo_nets(spec.obs_len, spec.num_actions, 1);
    let cfg = SearchConfig { gradient_steps: 0, ..SearchConfig::replan() };
    let mut n = 0;
    let (p2, v2) = pg_finetune(Roots::State(&g), &p, &v, &cfg, &mut rng(2), &mut n).unwrap();
    assert_eq!((p2, v2, n), (p, v, 0));

    let b = coord_belief(Viewer::Agent(0));
    let q = coord_blueprint();
    let cfg = SearchConfig { gradient_steps: 0, ..coord_cfg(SearchMode::Single) };
    let q2 = q_finetune(Roots::Belief(&b), &q, None, &cfg, &mut rng(3), &mut n).unwrap();
    assert_eq!((q2, n), (q, 0));
}

#[test]
fn truncation_adds_blueprint_max_q() {
    let theta = constant_net(HeadKind::QValues, 1, &[1.0, 3.0]);
    let tr = |terminated| Transition {
        obs: vec![1.0],
        legal: vec![true; 2],
        action: 0,
        reward: 0.5,
        next_obs: vec![1.0],
        next_legal: vec![true; 2],
        terminated,
    };
    let mut cut = QTrajectory { transitions: vec![tr(false), tr(false)], terminated: false };
    truncate_with_blueprint(&mut cut, &theta).unwrap();
    assert_eq!(cut.transitions[0], tr(false));
    assert_eq!(cut.transitions[1].reward, 3.5);
    assert!(cut.transitions[1].terminated);

    // Only legal actions count toward the max.
    let mut masked = QTrajectory { transitions: vec![Transition { next_legal: vec![true, false], ..tr(false) }], terminated: false };
    truncate_with_blueprint(&mut masked, &theta).unwrap();
    assert_eq!(masked.transitions[0].reward, 1.5);

    let mut done = QTrajectory { transitions: vec![tr(false), tr(true)], terminated: true };
    let before = done.clone();
    truncate_with_blueprint(&mut done, &theta).unwrap();
    assert_eq!(done, before);
}

#[test]
fn collected_trajectories_respect_horizon() {
    let b = coord_belief(Viewer::Public);
    let cfg = SearchConfig { horizon: 1, rollouts: 30, ..coord_cfg(SearchMode::Multi) };
    let mut n = 0;
    let ts = collect_q_trajectories(Roots::Belief(&b), &coord_blueprint(), &cfg, &mut rng(1), &mut n).unwrap();
    assert_eq!((ts.len(), n), (30, 30));
    assert!(ts.iter().all(|t| t.transitions.len() == 1 && !t.terminated));
    let cfg = SearchConfig { horizon: 5, ..cfg };
    let ts = collect_q_trajectories(Roots::Belief(&b), &coord_blueprint(), &cfg, &mut rng(1), &mut n).unwrap();
    assert!(ts.iter().all(|t| t.transitions.len() == 2 && t.terminated && t.transitions[1].terminated));
}

#[test]
fn buffer_mix_one_trains_on_global_only() {
    let env = Bandit::new(vec![0.0, 0.0]);
    let theta = constant_net(HeadKind::QValues, 1, &[0.0, 0.0]);
    let mut global = ReplayBuffer::new(8);
    global.push(Transition {
        obs: vec![1.0],
        legal: vec![true; 2],
        action: 0,
        reward: 5.0,
        next_obs: vec![1.0],
        next_legal: vec![false; 2],
        terminated: true,
    });
    let q0 = |p: f64| {
        let cfg = SearchConfig { buffer_mix: p, horizon: 1, gradient_steps: 1000, q_lr: 2e-2, ..SearchConfig::default() };
        let mut n = 0;
        let net = q_finetune(Roots::State(&env), &theta, Some(&global), &cfg, &mut rng(4), &mut n).unwrap();
        net.forward(&[1.0]).unwrap()[0]
    };
    assert!((q0(1.0) - 5.0).abs() < 0.1);
    assert!(q0(0.0).abs() < 0.1);
}

#[test]
fn gate_is_inclusive_at_eps() {
    let r = |mean| EvalReport { mean, ..Default::default() };
    assert!(gate(&r(1.5), &r(1.0), 0.5));
    assert!(!gate(&r(1.49), &r(1.0), 0.5));
    assert!(gate(&r(1.0), &r(1.0), 0.0));
    assert!(!gate(&r(0.9), &r(1.0), 0.0));
}

#[test]
fn evaluation_of_deterministic_blueprint_is_exact() {
    let g = CoordGame::reset(0);
    let bp = coord_blueprint();
    let seeds: Vec<u64> = (0..100).collect();
    let r = evaluate_policy(Actor::greedy(&bp), Actor::greedy(&bp), Roots::State(&g), Scope::All, 2, &seeds).unwrap();
    assert_eq!((r.mean, r.sem, r.count, r.steps), (1.0, 0.0, 100, 200));
}

#[test]
fn evaluation_of_bernoulli_reward_is_unbiased() {
    let env = CoinFlip::new(0.3, 0);
    let bp = constant_net(HeadKind::QValues, 1, &[0.0]);
    let seeds: Vec<u64> = (0..10_000).collect();
    let r = evaluate_policy(Actor::greedy(&bp), Actor::greedy(&bp), Roots::State(&env), Scope::All, 1, &seeds).unwrap();
    let expect_sem = (0.3f64 * 0.7 / 10_000.0).sqrt();
    assert!((r.mean - 0.3).abs() < 3.0 * expect_sem, "{r:?}");
    assert!((r.sem - expect_sem).abs() < 0.1 * expect_sem);
}

#[test]
fn evaluation_scope_limits_who_deviates() {
    let g = CoordGame::reset(0);
    let bp = coord_blueprint();
    let always1 = constant_net(HeadKind::QValues, g.spec().obs_len, &[0.0, 1.0]);
    let seeds = [1, 2, 3];
    let eval = |scope, h| evaluate_policy(Actor::greedy(&always1), Actor::greedy(&bp), Roots::State(&g), scope, h, &seeds).unwrap().mean;
    assert_eq!(eval(Scope::All, 2), 2.0);
    assert_eq!(eval(Scope::All, 1), 0.0);
    assert_eq!(eval(Scope::Searcher(0), 2), 0.0);
    assert_eq!(eval(Scope::Searcher(1), 2), 0.0);
    assert_eq!(eval(Scope::All, 0), 1.0);
}

#[test]
fn policy_gradient_solves_bandit() {
    let env = Bandit::new(vec![0.0, 1.0]);
    let cfg = SearchConfig { horizon: 1, gradient_steps: 200, rollouts: 16, ppo_minibatch: 16, pg_lr: 1e-2, ..SearchConfig::replan() };
    let mut good = 0;
    for seed in 0..10 {
        let (p, v) = ppo_nets(1, 2, seed);
        let mut n = 0;
        let (p2, _) = pg_finetune(Roots::State(&env), &p, &v, &cfg, &mut rng(100 + seed), &mut n).unwrap();
        assert_eq!(n, 200 * 16);
        if probs(&p2, &env.observe(0)).unwrap()[1] >= 0.9 {
            good += 1;
        }
    }
    assert!(good >= 9, "{good}/10");
}

#[test]
fn unilateral_search_never_adopts_in_coordgame() {
    let b = coord_belief(Viewer::Agent(0));
    let bp = coord_blueprint();
    for seed in 0..3 {
        let plan = single_agent_search_move(0, &b, &bp, None, &coord_cfg(SearchMode::Single), &mut rng(seed)).unwrap();
        assert!(!plan.adopted);
        assert_eq!((plan.moves_remaining, plan.params.is_none()), (0, true));
        assert!(plan.candidate.unwrap().mean <= 1.0);
        assert_eq!(plan.blueprint.unwrap().mean, 1.0);
    }
}

#[test]
fn joint_search_finds_better_equilibrium() {
    let b = coord_belief(Viewer::Public);
    let bp = coord_blueprint();
    let cfg = coord_cfg(SearchMode::Multi);
    let plan = multi_agent_search_move(&b, &bp, None, &cfg, &mut rng(7)).unwrap();
    assert!(plan.adopted, "{:?}", plan.candidate);
    assert_eq!(plan.candidate.unwrap().mean, 2.0);
    assert_eq!(plan.moves_remaining, 2);
    assert!(plan.covers(0, 0) && plan.covers(1, 1) && !plan.covers(2, 0));
    // Collection plus both evaluations, two steps each.
    assert_eq!(plan.samples, (2 * cfg.rollouts + 2 * 2 * cfg.eval_rollouts) as u64);
}

#[test]
fn rl_multi_episode_plays_the_adopted_plan() {
    let bp = coord_blueprint();
    let before = bp.clone();
    let cfg = RunConfig { mode: Mode::RlMulti, search: coord_cfg(SearchMode::Multi), ..Default::default() };
    let blue = Blueprint { net: &bp, value: None, buffer: None };
    let rep = run_episode(CoordGame::reset(0), &blue, &cfg, &NoClock, 11).unwrap();
    assert_eq!(rep.ret, 2.0);
    assert_eq!((rep.moves_searched, rep.gate_passes, rep.steps), (1, 1, 2));
    assert_eq!(rep.moves.iter().map(|m| m.action).collect::<Vec<_>>(), vec![1, 1]);
    assert!(rep.moves[0].searched && !rep.moves[1].searched);
    assert_eq!(rep.samples, rep.moves[0].samples);
    assert_eq!(bp, before);
    let again = run_episode(CoordGame::reset(0), &blue, &cfg, &NoClock, 11).unwrap();
    assert_eq!(rep, again);
}

#[test]
fn rl_single_episode_keeps_blueprint_in_coordgame() {
    let bp = coord_blueprint();
    let cfg = RunConfig { mode: Mode::RlSingle, search: coord_cfg(SearchMode::Single), ..Default::default() };
    let rep = run_episode(CoordGame::reset(0), &Blueprint { net: &bp, value: None, buffer: None }, &cfg, &NoClock, 5).unwrap();
    assert_eq!(rep.ret, 1.0);
    assert_eq!((rep.moves_searched, rep.gate_passes), (1, 0));
    assert_eq!(rep.gate_pass_rate(), 0.0);
}

#[test]
fn zero_budget_replanning_matches_blueprint_play() {
    let g = GridPacman::reset(9);
    let spec = g.spec();
    let (p, v) = ppo_nets(spec.obs_len, spec.num_actions, 4);
    let blue = Blueprint { net: &p, value: Some(&v), buffer: None };
    let base = RunConfig { mode: Mode::Blueprint, ..Default::default() };
    let replan = RunConfig { mode: Mode::RlSingle, search: SearchConfig { gradient_steps: 0, ..SearchConfig::replan() }, ..Default::default() };
    for seed in 0..3 {
        let a = run_episode(g.clone(), &blue, &base, &NoClock, seed).unwrap();
        let b = run_episode(g.clone(), &blue, &replan, &NoClock, seed).unwrap();
        assert_eq!(a.ret, b.ret);
        let acts = |r: &EpisodeReport| r.moves.iter().map(|m| m.action).collect::<Vec<_>>();
        assert_eq!(acts(&a), acts(&b));
        assert_eq!(b.samples, 0);
    }
}

#[test]
fn replanning_counts_samples_and_is_deterministic() {
    let g = GridPacman::reset(2);
    let spec = g.spec();
    let (p, v) = ppo_nets(spec.obs_len, spec.num_actions, 6);
    let blue = Blueprint { net: &p, value: Some(&v), buffer: None };
    let cfg = RunConfig { mode: Mode::RlSingle, search: SearchConfig { gradient_steps: 2, rollouts: 4, horizon: 5, ..SearchConfig::replan() }, ..Default::default() };
    let a = run_episode(g.clone(), &blue, &cfg, &NoClock, 1).unwrap();
    let b = run_episode(g.clone(), &blue, &cfg, &NoClock, 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.moves_searched, a.steps.div_ceil(5));
    assert_eq!(a.samples, a.moves.iter().map(|m| m.samples).sum::<u64>());
    assert!(a.moves.iter().all(|m| m.samples <= 2 * 4 * 5));
    assert!(a.moves.iter().all(|m| m.wall_ms == 0));
}

#[test]
fn mcts_requires_full_observability() {
    let h = crate::env::MiniHanabi::reset(0);
    let bp = constant_net(HeadKind::QValues, h.spec().obs_len, &vec![0.0; h.spec().num_actions]);
    let cfg = RunConfig { mode: Mode::Mcts, ..Default::default() };
    assert!(matches!(run_episode(h, &Blueprint { net: &bp, value: None, buffer: None }, &cfg, &NoClock, 0), Err(RlError::Config(_))));
}

#[test]
fn mode_names_round_trip() {
    for m in [Mode::Blueprint, Mode::Sparta, Mode::Mcts, Mode::RlSingle, Mode::RlMulti] {
        assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        assert_eq!(serde_json::to_string(&m).unwrap(), std::format!("\"{}\"", m.name()));
    }
    assert!("rl".parse::<Mode>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn plan_invariants(eps in 0.0f64..2.0, steps in 0usize..400, seed in 0u64..1000) {
        let b = coord_belief(Viewer::Public);
        let bp = coord_blueprint();
        let cfg = SearchConfig { gate_eps: eps, gradient_steps: steps, ..coord_cfg(SearchMode::Multi) };
        let plan = multi_agent_search_move(&b, &bp, None, &cfg, &mut rng(seed)).unwrap();
        let (c, bl) = (plan.candidate.unwrap(), plan.blueprint.unwrap());
        prop_assert_eq!(plan.adopted, c.mean - bl.mean >= eps);
        prop_assert_eq!(plan.adopted, plan.params.is_some());
        prop_assert!(plan.moves_remaining <= cfg.horizon);
        if !plan.adopted {
            prop_assert_eq!(plan.moves_remaining, 0);
            prop_assert!(!plan.covers(0, 0));
        }
        prop_assert_eq!(bp, coord_blueprint());
    }

    #[test]
    fn evaluation_is_seed_deterministic(seed in 0u64..1000) {
        let g = GridPacman::reset(seed);
        let spec = g.spec();
        let (p, _) = ppo_nets(spec.obs_len, spec.num_actions, seed);
        let actor = Actor { net: &p, rule: ActionRule::Sample };
        let seeds = [seed, seed + 1];
        let a = evaluate_policy(actor, actor, Roots::State(&g), Scope::All, 3, &seeds).unwrap();
        let b = evaluate_policy(actor, actor, Roots::State(&g), Scope::All, 3, &seeds).unwrap();
        prop_assert_eq!(a, b);
    }
}
