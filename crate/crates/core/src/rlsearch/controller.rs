use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate_pair, gate, EvalReport, Scope};
use super::finetune::{pg_finetune, q_finetune};
use super::{ActionRule, Actor, RlError, Roots, SearchConfig};
use crate::belief::{BeliefConfig, BeliefError, ParticleBelief};
use crate::blueprint::ReplayBuffer;
use crate::clock::Clock;
use crate::env::{AohRecord, Simulator, Viewer};
use crate::nn::{HeadKind, NetParams};
use crate::tabsearch::{sparta_select, LeafValue, Mcts, MctsConfig, NetGuide, SpartaDecision};

/// Outcome of one search call.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayPlan {
    pub adopted: bool,
    /// Fine-tuned network, present exactly when adopted.
    pub params: Option<NetParams>,
    pub start_turn: u32,
    /// Turns from `start_turn` the plan covers; zero unless adopted.
    pub moves_remaining: usize,
    pub scope: Scope,
    pub candidate: Option<EvalReport>,
    pub blueprint: Option<EvalReport>,
    pub samples: u64,
    pub empty_belief: bool,
}

impl PlayPlan {
    fn fallback(start_turn: u32, scope: Scope, samples: u64, empty_belief: bool) -> Self {
        Self { adopted: false, params: None, start_turn, moves_remaining: 0, scope, candidate: None, blueprint: None, samples, empty_belief }
    }

    /// True when `agent` should act with the fine-tuned network at `turn`.
    pub fn covers(&self, turn: u32, agent: usize) -> bool {
        self.adopted && turn >= self.start_turn && ((turn - self.start_turn) as usize) < self.moves_remaining && self.scope.covers(agent)
    }
}

fn is_empty_belief(e: &RlError) -> bool {
    matches!(e, RlError::Belief(BeliefError::EmptyBelief))
}

fn search_move<S: Simulator, R: Rng + ?Sized>(
    scope: Scope,
    belief: &ParticleBelief<S>,
    theta: &NetParams,
    global: Option<&ReplayBuffer>,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<PlayPlan, RlError> {
    let turn = belief.aoh().len() as u32;
    let roots = Roots::Belief(belief);
    let mut samples = 0;
    let cand = match q_finetune(roots, theta, global, cfg, rng, &mut samples) {
        Ok(c) => c,
        Err(e) if is_empty_belief(&e) => return Ok(PlayPlan::fallback(turn, scope, samples, true)),
        Err(e) => return Err(e),
    };
    let (c, b) = match evaluate_pair(Actor::greedy(&cand), Actor::greedy(theta), roots, scope, cfg.horizon, cfg.eval_rollouts, rng) {
        Ok(r) => r,
        Err(e) if is_empty_belief(&e) => return Ok(PlayPlan::fallback(turn, scope, samples, true)),
        Err(e) => return Err(e),
    };
    samples += c.steps + b.steps;
    let adopted = gate(&c, &b, cfg.gate_eps);
    Ok(PlayPlan {
        adopted,
        params: adopted.then_some(cand),
        start_turn: turn,
        moves_remaining: if adopted { cfg.horizon } else { 0 },
        scope,
        candidate: Some(c),
        blueprint: Some(b),
        samples,
        empty_belief: false,
    })
}

/// Q fine-tuning on `agent`'s private belief; partners are assumed to play the blueprint.
pub fn single_agent_search_move<S: Simulator, R: Rng + ?Sized>(
    agent: usize,
    belief: &ParticleBelief<S>,
    theta: &NetParams,
    global: Option<&ReplayBuffer>,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<PlayPlan, RlError> {
    search_move(Scope::Searcher(agent), belief, theta, global, cfg, rng)
}

/// Joint Q fine-tuning on the public belief; every agent plays the result.
pub fn multi_agent_search_move<S: Simulator, R: Rng + ?Sized>(
    belief: &ParticleBelief<S>,
    theta: &NetParams,
    global: Option<&ReplayBuffer>,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<PlayPlan, RlError> {
    search_move(Scope::All, belief, theta, global, cfg, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Blueprint,
    Sparta,
    Mcts,
    RlSingle,
    RlMulti,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Blueprint => "blueprint",
            Mode::Sparta => "sparta",
            Mode::Mcts => "mcts",
            Mode::RlSingle => "rl-single",
            Mode::RlMulti => "rl-multi",
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = RlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::Blueprint, Mode::Sparta, Mode::Mcts, Mode::RlSingle, Mode::RlMulti]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| RlError::Config(alloc::format!("unknown mode {s:?}")))
    }
}

/// Networks available to a controller. `net` is a Q network or a policy; a
/// policy needs `value` for replanning and tree search.
#[derive(Clone, Copy, Debug)]
pub struct Blueprint<'a> {
    pub net: &'a NetParams,
    pub value: Option<&'a NetParams>,
    pub buffer: Option<&'a ReplayBuffer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub search: SearchConfig,
    pub belief: BeliefConfig,
    pub mcts: MctsConfig,
    pub sparta_rollouts: usize,
    pub sparta_eps: f64,
    /// The searching agent in single-agent modes; partners play the blueprint.
    pub searcher: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Blueprint,
            search: SearchConfig::default(),
            belief: BeliefConfig::default(),
            mcts: MctsConfig::default(),
            sparta_rollouts: 1000,
            sparta_eps: 0.05,
            searcher: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveLog {
    pub turn: u32,
    pub agent: usize,
    pub action: usize,
    pub searched: bool,
    pub adopted: Option<bool>,
    pub samples: u64,
    pub wall_ms: u64,
    pub candidate: Option<EvalReport>,
    pub blueprint: Option<EvalReport>,
    pub sparta: Option<SpartaDecision>,
    pub particles: usize,
    pub ess: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub ret: f64,
    pub steps: u64,
    pub samples: u64,
    pub wall_ms: u64,
    pub moves_searched: u64,
    pub gate_passes: u64,
    pub empty_belief_fallbacks: u64,
    pub moves: Vec<MoveLog>,
}

impl EpisodeReport {
    pub fn gate_pass_rate(&self) -> f64 {
        if self.moves_searched == 0 {
            0.0
        } else {
            self.gate_passes as f64 / self.moves_searched as f64
        }
    }
}

/// Replanning driver for single-agent MDPs: every `horizon` steps fine-tune
/// the policy from the true state, then play it for `horizon` steps.
#[allow(clippy::too_many_arguments)]
pub fn amortized_replan_controller<S: Simulator>(
    start: S,
    theta: &NetParams,
    phi: &NetParams,
    cfg: &SearchConfig,
    clock: &dyn Clock,
    play_rng: &mut Pcg64Mcg,
    search_rng: &mut Pcg64Mcg,
) -> Result<EpisodeReport, RlError> {
    let t_start = clock.elapsed_ms();
    let mut s = start;
    let mut rep = EpisodeReport::default();
    let mut current = theta.clone();
    let mut left = 0;
    while !s.is_terminal() {
        let agent = s.current_agent();
        let mut log = MoveLog { turn: s.turn(), agent, ..MoveLog::default() };
        if left == 0 {
            let t0 = clock.elapsed_ms();
            let mut n = 0;
            current = pg_finetune(Roots::State(&s), theta, phi, cfg, search_rng, &mut n)?.0;
            left = cfg.horizon;
            rep.moves_searched += 1;
            rep.samples += n;
            log.searched = true;
            log.samples = n;
            log.particles = 1;
            log.ess = 1.0;
            log.wall_ms = clock.elapsed_ms().saturating_sub(t0);
        }
        let a = Actor { net: &current, rule: cfg.policy_play }.act(&s.observe(agent), play_rng)?;
        rep.ret += s.step(a)?.reward;
        rep.steps += 1;
        left -= 1;
        log.action = a;
        rep.moves.push(log);
    }
    rep.wall_ms = clock.elapsed_ms().saturating_sub(t_start);
    Ok(rep)
}

/// Belief of `viewer` that tolerates collapse: once empty it stays gone and
/// callers fall back to the blueprint.
struct Tracker<S> {
    viewer: Viewer,
    belief: Option<ParticleBelief<S>>,
}

impl<S: Simulator> Tracker<S> {
    fn new(start: &S, viewer: Viewer, cfg: &BeliefConfig, seed: u64) -> Result<Self, RlError> {
        let mut cfg = cfg.clone();
        if start.spec().fully_observable {
            cfg.particles = 1;
        }
        let belief = match ParticleBelief::init(start, viewer, cfg, seed) {
            Ok(b) => Some(b),
            Err(BeliefError::EmptyBelief) => None,
            Err(e) => return Err(e.into()),
        };
        Ok(Self { viewer, belief })
    }

    fn update(&mut self, actor: usize, action: usize, reward: f64, next: &S) -> Result<(), RlError> {
        if let Some(b) = self.belief.as_mut() {
            match b.update(AohRecord { actor, action, reward, obs: next.view(self.viewer) }) {
                Ok(()) => {}
                Err(BeliefError::EmptyBelief) => self.belief = None,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }
}

/// Play one episode from `start` under `cfg.mode`. The seed fixes every
/// random stream of the episode other than the environment's own.
pub fn run_episode<S: Simulator>(start: S, bp: &Blueprint<'_>, cfg: &RunConfig, clock: &dyn Clock, seed: u64) -> Result<EpisodeReport, RlError> {
    cfg.search.validate()?;
    let mut master = Pcg64Mcg::seed_from_u64(seed);
    let mut play_rng = Pcg64Mcg::seed_from_u64(master.gen());
    let mut search_rng = Pcg64Mcg::seed_from_u64(master.gen());
    let belief_seed: u64 = master.gen();
    let is_policy = bp.net.arch.head == HeadKind::PolicyLogits;
    let rule = if is_policy { cfg.search.policy_play } else { ActionRule::Greedy };
    let blueprint = Actor { net: bp.net, rule };

    if cfg.mode == Mode::RlSingle && is_policy {
        let phi = bp.value.ok_or_else(|| RlError::Config("policy fine-tuning needs a value network".into()))?;
        return amortized_replan_controller(start, bp.net, phi, &cfg.search, clock, &mut play_rng, &mut search_rng);
    }
    if cfg.mode == Mode::Mcts && !start.spec().fully_observable {
        return Err(RlError::Config("tree search needs a fully observable environment".into()));
    }
    if matches!(cfg.mode, Mode::RlSingle | Mode::RlMulti) && is_policy {
        return Err(RlError::Config("Q fine-tuning needs a Q network blueprint".into()));
    }

    let t_start = clock.elapsed_ms();
    let mut rep = EpisodeReport::default();
    let mut s = start;
    let viewer = match cfg.mode {
        Mode::RlMulti => Some(Viewer::Public),
        Mode::RlSingle | Mode::Sparta => Some(Viewer::Agent(cfg.searcher)),
        _ => None,
    };
    let mut tracker = match viewer {
        Some(v) => Some(Tracker::new(&s, v, &cfg.belief, belief_seed)?),
        None => None,
    };
    let leaf = match (bp.value, is_policy) {
        (Some(v), _) => LeafValue::Value(v),
        (None, false) => LeafValue::MaxQ(bp.net),
        (None, true) => LeafValue::Zero,
    };
    let guide = NetGuide { policy: bp.net, leaf };
    let mut mcts = Mcts::new(cfg.mcts.clone());
    let mut plan: Option<PlayPlan> = None;

    while !s.is_terminal() {
        let agent = s.current_agent();
        let turn = s.turn();
        let obs = s.observe(agent);
        let mut log = MoveLog { turn, agent, ..MoveLog::default() };
        let t0 = clock.elapsed_ms();
        let searching = match cfg.mode {
            Mode::Blueprint => false,
            Mode::Mcts => true,
            Mode::RlMulti => true,
            Mode::RlSingle | Mode::Sparta => agent == cfg.searcher,
        };
        let a = if !searching {
            blueprint.act(&obs, &mut play_rng)?
        } else if let Some(p) = plan.as_ref().filter(|p| p.covers(turn, agent)) {
            Actor::greedy(p.params.as_ref().expect("adopted plan has params")).act(&obs, &mut play_rng)?
        } else {
            match cfg.mode {
                Mode::Mcts => {
                    let (a, stats) = mcts.search(&s, &guide, &mut search_rng)?;
                    rep.moves_searched += 1;
                    log.searched = true;
                    log.samples = stats.steps;
                    a
                }
                Mode::Sparta => match tracker.as_ref().and_then(|t| t.belief.as_ref()) {
                    Some(b) => {
                        let d = sparta_select(b, &obs, bp.net, cfg.sparta_eps, cfg.sparta_rollouts, &mut search_rng)?;
                        rep.moves_searched += 1;
                        rep.gate_passes += d.deviated() as u64;
                        log.searched = true;
                        log.samples = d.steps;
                        log.adopted = Some(d.deviated());
                        log.particles = b.len();
                        log.ess = b.ess();
                        let a = d.action;
                        log.sparta = Some(d);
                        a
                    }
                    None => {
                        rep.empty_belief_fallbacks += 1;
                        blueprint.act(&obs, &mut play_rng)?
                    }
                },
                _ => match tracker.as_ref().and_then(|t| t.belief.as_ref()) {
                    Some(b) => {
                        let p = if cfg.mode == Mode::RlMulti {
                            multi_agent_search_move(b, bp.net, bp.buffer, &cfg.search, &mut search_rng)?
                        } else {
                            single_agent_search_move(agent, b, bp.net, bp.buffer, &cfg.search, &mut search_rng)?
                        };
                        log.particles = b.len();
                        log.ess = b.ess();
                        log.samples = p.samples;
                        if p.empty_belief {
                            rep.empty_belief_fallbacks += 1;
                        } else {
                            rep.moves_searched += 1;
                            rep.gate_passes += p.adopted as u64;
                            log.searched = true;
                            log.adopted = Some(p.adopted);
                            log.candidate = p.candidate;
                            log.blueprint = p.blueprint;
                        }
                        let a = if p.covers(turn, agent) {
                            Actor::greedy(p.params.as_ref().expect("adopted plan has params")).act(&obs, &mut play_rng)?
                        } else {
                            blueprint.act(&obs, &mut play_rng)?
                        };
                        plan = Some(p);
                        a
                    }
                    None => {
                        rep.empty_belief_fallbacks += 1;
                        blueprint.act(&obs, &mut play_rng)?
                    }
                },
            }
        };
        let step = s.step(a)?;
        rep.ret += step.reward;
        rep.steps += 1;
        rep.samples += log.samples;
        if let Some(t) = tracker.as_mut() {
            t.update(agent, a, step.reward, &s)?;
        }
        if cfg.mode == Mode::Mcts {
            mcts.advance(a, &s);
        }
        log.action = a;
        log.wall_ms = clock.elapsed_ms().saturating_sub(t0);
        rep.moves.push(log);
    }
    rep.wall_ms = clock.elapsed_ms().saturating_sub(t_start);
    Ok(rep)
}
