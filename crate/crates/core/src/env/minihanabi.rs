//! Two-player cooperative card game with hidden own hands.
//!
//! Actions: `0..2` play slot, `2..4` discard slot, `4..6` hint a color to the
//! partner, `6..9` hint a rank to the partner.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use super::{one_hot, Branch, Enumerable, EnvError, EnvSpec, Observation, Simulator, Step};

pub const COLORS: usize = 2;
pub const RANKS: usize = 3;
pub const NUM_TYPES: usize = COLORS * RANKS;
pub const COPIES: [u8; RANKS] = [2, 2, 1];
pub const DECK_SIZE: usize = 10;
pub const HAND: usize = 2;
pub const MAX_HINTS: u8 = 3;
pub const MAX_LIVES: u8 = 2;
pub const MAX_SCORE: u8 = (COLORS * RANKS) as u8;
pub const NUM_ACTIONS: usize = 2 * HAND + COLORS + RANKS;
pub const MAX_TURNS: u32 = 30;
const ALL_TYPES: u8 = (1 << NUM_TYPES) - 1;
const EMPTY: u8 = u8::MAX;

const LAST_LEN: usize = NUM_ACTIONS + 2;
const SHARED_LEN: usize = 4 * COLORS + NUM_TYPES + (MAX_HINTS as usize + 1) + (MAX_LIVES as usize + 1) + 2;
const KNOW_LEN: usize = HAND * NUM_TYPES + HAND;
pub const PUBLIC_OBS_LEN: usize = 2 + 2 * KNOW_LEN + SHARED_LEN + LAST_LEN + 2;
pub const OBS_LEN: usize = 1 + 2 * KNOW_LEN + HAND * NUM_TYPES + SHARED_LEN + LAST_LEN + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Card {
    pub color: u8,
    /// Zero-based: rank 1 is `0`.
    pub rank: u8,
}

impl Card {
    pub fn from_type(t: u8) -> Self {
        Card { color: t / RANKS as u8, rank: t % RANKS as u8 }
    }

    pub fn type_id(self) -> u8 {
        self.color * RANKS as u8 + self.rank
    }
}

fn copies_of(t: u8) -> u8 {
    COPIES[(t % RANKS as u8) as usize]
}

fn color_mask(c: u8) -> u8 {
    (0..NUM_TYPES as u8).filter(|&t| t / RANKS as u8 == c).fold(0, |m, t| m | 1 << t)
}

fn rank_mask(r: u8) -> u8 {
    (0..NUM_TYPES as u8).filter(|&t| t % RANKS as u8 == r).fold(0, |m, t| m | 1 << t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct LastAction {
    actor: u8,
    action: u8,
    success: bool,
    failed: bool,
}

#[derive(Clone, Debug)]
pub struct MiniHanabi {
    hands: [[u8; HAND]; 2],
    knowledge: [[u8; HAND]; 2],
    deck: [u8; NUM_TYPES],
    deck_size: u8,
    fireworks: [u8; COLORS],
    discards: [u8; NUM_TYPES],
    hints: u8,
    lives: u8,
    score: u8,
    current: u8,
    turn: u32,
    terminated: bool,
    countdown: Option<u8>,
    last: Option<LastAction>,
    rng: Pcg64Mcg,
}

impl MiniHanabi {
    fn empty_table(seed: u64) -> Self {
        let mut deck = [0; NUM_TYPES];
        for (t, d) in deck.iter_mut().enumerate() {
            *d = copies_of(t as u8);
        }
        Self {
            hands: [[EMPTY; HAND]; 2],
            knowledge: [[ALL_TYPES; HAND]; 2],
            deck,
            deck_size: DECK_SIZE as u8,
            fireworks: [0; COLORS],
            discards: [0; NUM_TYPES],
            hints: MAX_HINTS,
            lives: MAX_LIVES,
            score: 0,
            current: 0,
            turn: 0,
            terminated: false,
            countdown: None,
            last: None,
            rng: Pcg64Mcg::seed_from_u64(seed),
        }
    }

    pub fn reset(seed: u64) -> Self {
        let mut s = Self::empty_table(seed);
        for p in 0..2 {
            for k in 0..HAND {
                s.hands[p][k] = s.draw(None);
            }
        }
        s
    }

    /// A state dealt with explicit hands; the remaining deck keeps its counts.
    pub fn with_hands(hands: [[Card; HAND]; 2], seed: u64) -> Result<Self, EnvError> {
        let mut s = Self::empty_table(seed);
        for p in 0..2 {
            for k in 0..HAND {
                let t = hands[p][k].type_id();
                if t as usize >= NUM_TYPES || s.deck[t as usize] == 0 {
                    return Err(EnvError::IllegalAction { agent: p, action: t as usize, turn: 0 });
                }
                s.deck[t as usize] -= 1;
                s.deck_size -= 1;
                s.hands[p][k] = t;
            }
        }
        Ok(s)
    }

    fn draw(&mut self, forced: Option<u8>) -> u8 {
        debug_assert!(self.deck_size > 0);
        let mut u = self.rng.gen_range(0..self.deck_size);
        let t = match forced {
            Some(t) => t,
            None => {
                let mut t = 0;
                while u >= self.deck[t] {
                    u -= self.deck[t];
                    t += 1;
                }
                t as u8
            }
        };
        self.deck[t as usize] -= 1;
        self.deck_size -= 1;
        t
    }

    pub fn hand(&self, player: usize) -> [Option<Card>; HAND] {
        let mut out = [None; HAND];
        for (k, &t) in self.hands[player].iter().enumerate() {
            if t != EMPTY {
                out[k] = Some(Card::from_type(t));
            }
        }
        out
    }

    /// Possible card types per slot as known from hints, as a bitmask over type ids.
    pub fn knowledge(&self, player: usize) -> [u8; HAND] {
        self.knowledge[player]
    }

    pub fn fireworks(&self) -> [u8; COLORS] {
        self.fireworks
    }

    pub fn hint_tokens(&self) -> u8 {
        self.hints
    }

    pub fn lives(&self) -> u8 {
        self.lives
    }

    pub fn score(&self) -> u8 {
        self.score
    }

    pub fn deck_size(&self) -> u8 {
        self.deck_size
    }

    pub fn deck_counts(&self) -> [u8; NUM_TYPES] {
        self.deck
    }

    pub fn set_hint_tokens(&mut self, hints: u8) {
        self.hints = hints.min(MAX_HINTS);
    }

    fn check(&self, action: usize) -> Result<(), EnvError> {
        self.check_legal(action)
    }

    /// Apply `action`; `forced` selects the card type drawn (if any) while
    /// still consuming the chance stream exactly as a free draw would.
    fn apply(&mut self, action: usize, forced: Option<u8>) -> Step {
        let me = self.current as usize;
        let partner = 1 - me;
        let mut reward = 0.0;
        let mut success = false;
        let mut failed = false;
        match action {
            a if a < 2 * HAND => {
                let k = a % HAND;
                let card = Card::from_type(self.hands[me][k]);
                if a < HAND {
                    if self.fireworks[card.color as usize] == card.rank {
                        self.fireworks[card.color as usize] += 1;
                        self.score += 1;
                        reward = 1.0;
                        success = true;
                        if card.rank as usize == RANKS - 1 && self.hints < MAX_HINTS {
                            self.hints += 1;
                        }
                    } else {
                        self.discards[card.type_id() as usize] += 1;
                        self.lives -= 1;
                        failed = true;
                    }
                } else {
                    self.discards[card.type_id() as usize] += 1;
                    self.hints += 1;
                }
                self.knowledge[me][k] = ALL_TYPES;
                if self.deck_size > 0 {
                    self.hands[me][k] = self.draw(forced);
                    if self.deck_size == 0 {
                        self.countdown = Some(3);
                    }
                } else {
                    self.hands[me][k] = EMPTY;
                }
            }
            a => {
                let mask = if a < 2 * HAND + COLORS {
                    color_mask((a - 2 * HAND) as u8)
                } else {
                    rank_mask((a - 2 * HAND - COLORS) as u8)
                };
                for k in 0..HAND {
                    let t = self.hands[partner][k];
                    if t == EMPTY {
                        continue;
                    }
                    if mask & (1 << t) != 0 {
                        self.knowledge[partner][k] &= mask;
                    } else {
                        self.knowledge[partner][k] &= !mask;
                    }
                }
                self.hints -= 1;
            }
        }
        self.last = Some(LastAction { actor: me as u8, action: action as u8, success, failed });
        self.turn += 1;
        self.current = partner as u8;
        if let Some(c) = self.countdown.as_mut() {
            *c -= 1;
        }
        self.terminated = self.lives == 0
            || self.score == MAX_SCORE
            || self.countdown == Some(0)
            || self.turn >= MAX_TURNS;
        Step { reward, terminated: self.terminated }
    }

    fn draws_card(&self, action: usize) -> bool {
        action < 2 * HAND && self.deck_size > 0
    }

    fn push_knowledge(&self, f: &mut Vec<f64>, player: usize) {
        for k in 0..HAND {
            let m = self.knowledge[player][k];
            let occupied = self.hands[player][k] != EMPTY;
            f.extend((0..NUM_TYPES).map(|t| if occupied && m & (1 << t) != 0 { 1.0 } else { 0.0 }));
        }
        f.extend((0..HAND).map(|k| (self.hands[player][k] != EMPTY) as u8 as f64));
    }

    fn push_shared(&self, f: &mut Vec<f64>) {
        for c in 0..COLORS {
            one_hot(f, Some(self.fireworks[c] as usize), RANKS + 1);
        }
        f.extend((0..NUM_TYPES).map(|t| self.discards[t] as f64 / copies_of(t as u8) as f64));
        one_hot(f, Some(self.hints as usize), MAX_HINTS as usize + 1);
        one_hot(f, Some(self.lives as usize), MAX_LIVES as usize + 1);
        f.push(self.deck_size as f64 / (DECK_SIZE - 2 * HAND) as f64);
        f.push(self.countdown.is_some() as u8 as f64);
    }

    fn push_last(&self, f: &mut Vec<f64>) {
        one_hot(f, self.last.map(|l| l.action as usize), NUM_ACTIONS);
        f.push(self.last.is_some_and(|l| l.success) as u8 as f64);
        f.push(self.last.is_some_and(|l| l.failed) as u8 as f64);
    }
}

impl Simulator for MiniHanabi {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: 2,
            num_actions: NUM_ACTIONS,
            obs_len: OBS_LEN,
            public_obs_len: PUBLIC_OBS_LEN,
            max_episode_len: MAX_TURNS,
            gamma: 1.0,
            fully_observable: false,
        }
    }

    fn fresh(&self, seed: u64) -> Self {
        Self::reset(seed)
    }

    fn turn(&self) -> u32 {
        self.turn
    }

    fn is_terminal(&self) -> bool {
        self.terminated
    }

    fn current_agent(&self) -> usize {
        self.current as usize
    }

    fn legal_actions(&self) -> Vec<bool> {
        let mut legal = vec![false; NUM_ACTIONS];
        if self.terminated {
            return legal;
        }
        let me = self.current as usize;
        for k in 0..HAND {
            let held = self.hands[me][k] != EMPTY;
            legal[k] = held;
            legal[HAND + k] = held && self.hints < MAX_HINTS;
        }
        for l in legal.iter_mut().skip(2 * HAND) {
            *l = self.hints > 0;
        }
        legal
    }

    /// Viewer-relative: own knowledge first, then the partner's knowledge and cards.
    fn observe(&self, agent: usize) -> Observation {
        let partner = 1 - agent;
        let mut f = Vec::with_capacity(OBS_LEN);
        f.push((self.current as usize == agent) as u8 as f64);
        self.push_knowledge(&mut f, agent);
        self.push_knowledge(&mut f, partner);
        for k in 0..HAND {
            let t = self.hands[partner][k];
            one_hot(&mut f, (t != EMPTY).then_some(t as usize), NUM_TYPES);
        }
        self.push_shared(&mut f);
        self.push_last(&mut f);
        f.push(self.last.is_some_and(|l| l.actor as usize == partner) as u8 as f64);
        debug_assert_eq!(f.len(), OBS_LEN);
        Observation { agent: Some(agent), features: f, legal: self.legal_actions() }
    }

    fn public_observe(&self) -> Observation {
        let mut f = Vec::with_capacity(PUBLIC_OBS_LEN);
        one_hot(&mut f, Some(self.current as usize), 2);
        self.push_knowledge(&mut f, 0);
        self.push_knowledge(&mut f, 1);
        self.push_shared(&mut f);
        self.push_last(&mut f);
        one_hot(&mut f, self.last.map(|l| l.actor as usize), 2);
        debug_assert_eq!(f.len(), PUBLIC_OBS_LEN);
        Observation { agent: None, features: f, legal: self.legal_actions() }
    }

    fn public_of(obs: &Observation) -> Observation {
        let Some(me) = obs.agent else {
            return obs.clone();
        };
        let x = &obs.features;
        let own = &x[1..1 + KNOW_LEN];
        let other = &x[1 + KNOW_LEN..1 + 2 * KNOW_LEN];
        let rest = &x[1 + 2 * KNOW_LEN + HAND * NUM_TYPES..];
        let (shared_last, partner_flag) = rest.split_at(SHARED_LEN + LAST_LEN);
        let mut f = Vec::with_capacity(PUBLIC_OBS_LEN);
        let current = if x[0] == 1.0 { me } else { 1 - me };
        one_hot(&mut f, Some(current), 2);
        let (k0, k1) = if me == 0 { (own, other) } else { (other, own) };
        f.extend_from_slice(k0);
        f.extend_from_slice(k1);
        f.extend_from_slice(shared_last);
        let any_last = shared_last[SHARED_LEN..SHARED_LEN + NUM_ACTIONS].iter().any(|&v| v != 0.0);
        let actor = any_last.then(|| if partner_flag[0] == 1.0 { 1 - me } else { me });
        one_hot(&mut f, actor, 2);
        Observation { agent: None, features: f, legal: obs.legal.clone() }
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        self.check(action)?;
        Ok(self.apply(action, None))
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = Pcg64Mcg::seed_from_u64(seed);
    }

    fn chance_outcomes(&self, action: usize) -> Option<Result<Vec<Branch<Self>>, EnvError>> {
        if let Err(e) = self.check(action) {
            return Some(Err(e));
        }
        if !self.draws_card(action) {
            let mut s = self.clone();
            let step = s.apply(action, None);
            return Some(Ok(vec![Branch { prob: 1.0, state: s, step }]));
        }
        let total = self.deck_size as f64;
        Some(Ok((0..NUM_TYPES as u8)
            .filter(|&t| self.deck[t as usize] > 0)
            .map(|t| {
                let mut s = self.clone();
                let step = s.apply(action, Some(t));
                Branch { prob: self.deck[t as usize] as f64 / total, state: s, step }
            })
            .collect()))
    }

    fn state_key(&self) -> u64 {
        let last = self.last.map_or([EMPTY; 4], |l| [l.actor, l.action, l.success as u8, l.failed as u8]);
        crate::math::fnv1a(
            self.hands
                .iter()
                .chain(self.knowledge.iter())
                .flatten()
                .copied()
                .chain(self.deck)
                .chain(self.fireworks)
                .chain(self.discards)
                .chain([
                    self.deck_size,
                    self.hints,
                    self.lives,
                    self.score,
                    self.current,
                    self.terminated as u8,
                    self.countdown.unwrap_or(EMPTY),
                ])
                .chain(last)
                .chain(self.turn.to_le_bytes()),
        )
    }
}

impl Enumerable for MiniHanabi {
    fn initial_distribution(&self) -> Result<Vec<(f64, Self)>, EnvError> {
        let mut out = Vec::new();
        let base = Self::empty_table(0);
        fn rec(s: MiniHanabi, p: f64, slot: usize, out: &mut Vec<(f64, MiniHanabi)>) {
            if slot == 2 * HAND {
                out.push((p, s));
                return;
            }
            for t in 0..NUM_TYPES as u8 {
                let c = s.deck[t as usize];
                if c == 0 {
                    continue;
                }
                let mut n = s.clone();
                let q = c as f64 / n.deck_size as f64;
                n.deck[t as usize] -= 1;
                n.deck_size -= 1;
                n.hands[slot / HAND][slot % HAND] = t;
                rec(n, p * q, slot + 1, out);
            }
        }
        rec(base, 1.0, 0, &mut out);
        Ok(out)
    }
}
