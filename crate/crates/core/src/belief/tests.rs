extern crate std;

use super::*;
use crate::env::toy::Bandit;
use crate::env::{Card, CoordGame, GridPacman, MiniHanabi, Viewer};
use alloc::vec;
use proptest::prelude::*;

fn rng(seed: u64) -> Pcg64Mcg {
    Pcg64Mcg::seed_from_u64(seed)
}

fn cfg(particles: usize) -> BeliefConfig {
    BeliefConfig { particles, ..BeliefConfig::default() }
}

/// Play `turns` uniformly random legal moves, returning the final state and the viewer's history.
fn random_game<S: Simulator>(start: S, viewer: Viewer, turns: usize, seed: u64) -> (S, Aoh, Vec<AohRecord>) {
    let mut r = rng(seed);
    let mut s = start;
    let aoh = Aoh::start(&s, viewer);
    let mut full = aoh.clone();
    for _ in 0..turns {
        if s.is_terminal() {
            break;
        }
        let legal = s.legal_actions();
        let a = crate::blueprint::policy::uniform_legal(&legal, &mut r).unwrap();
        let actor = s.current_agent();
        let step = s.step(a).unwrap();
        full.push(actor, a, step.reward, &s);
    }
    (s, aoh, full.records)
}

fn cards(t: [u8; 2]) -> [Card; 2] {
    [Card::from_type(t[0]), Card::from_type(t[1])]
}

#[test]
fn coordgame_particles_identical() {
    let g = CoordGame::reset(3);
    let b = ParticleBelief::init(&g, Viewer::Agent(0), cfg(50), 1).unwrap();
    assert_eq!(b.len(), 50);
    assert!(b.particles().iter().all(|p| *p.traj.last() == g));
    assert!(b.weights().iter().all(|&w| (w - 1.0 / 50.0).abs() < 1e-15));
}

#[test]
fn minihanabi_init_matches_partner_hand() {
    let g = MiniHanabi::reset(11);
    let b = ParticleBelief::init(&g, Viewer::Agent(0), cfg(500), 2).unwrap();
    let mut own = std::collections::BTreeSet::new();
    for p in b.particles() {
        assert_eq!(p.traj.last().hand(1), g.hand(1));
        own.insert(p.traj.last().hand(0).map(|c| c.map(|c| c.type_id())));
    }
    assert!(own.len() > 1);
}

#[test]
fn minihanabi_own_hand_marginal_matches_enumeration() {
    let g = MiniHanabi::reset(5);
    let aoh = Aoh::start(&g, Viewer::Agent(0));
    let b = ParticleBelief::from_aoh(&g, aoh.clone(), cfg(10_000), 3).unwrap();
    let exact = exact_posterior(&g, &aoh).unwrap();
    let key = |s: &MiniHanabi| s.hand(0).map(|c| c.map(|c| c.type_id()));
    let mut oracle = BTreeMap::new();
    for (t, p) in &exact {
        *oracle.entry(key(t.last())).or_insert(0.0) += p;
    }
    let tv = total_variation(&b.distribution_by(key), &oracle);
    assert!(tv <= 0.05, "tv {tv}");
}

#[test]
fn deterministic_step_keeps_weights() {
    let g = CoordGame::reset(0);
    let mut b = ParticleBelief::init(&g, Viewer::Agent(1), cfg(20), 4).unwrap();
    let w = b.weights();
    let mut t = g.clone();
    let step = t.step(0).unwrap();
    let mut aoh = b.aoh().clone();
    let rec = aoh.push(0, 0, step.reward, &t).clone();
    b.update(rec).unwrap();
    assert_eq!(b.weights(), w);
    assert_eq!(b.stats.deleted, 0);
}

#[test]
fn mismatching_particle_is_removed() {
    let truth = MiniHanabi::with_hands([cards([0, 3]), cards([1, 4])], 7).unwrap();
    let other = MiniHanabi::with_hands([cards([2, 3]), cards([1, 4])], 7).unwrap();
    let aoh = Aoh::start(&truth, Viewer::Agent(0));
    let items = vec![(Trajectory::new(truth.clone()), 1.0), (Trajectory::new(other), 1.0)];
    let mut b = ParticleBelief::from_weighted(&truth, aoh, items, BeliefConfig { particles: 2, replenish_below: 0.0, ..cfg(2) }, 5).unwrap();
    // Player 0 plays slot 0; the outcome reveals the card.
    let mut t = truth.clone();
    let step = t.step(0).unwrap();
    let mut full = b.aoh().clone();
    let rec = full.push(0, 0, step.reward, &t).clone();
    b.update(rec).unwrap();
    assert_eq!(b.len(), 1);
    assert_eq!(b.stats.deleted, 1);
    assert_eq!(b.particles()[0].traj.states[0].hand(0), truth.hand(0));
}

#[test]
fn rank_hint_constrains_slot() {
    // Player 1 holds a rank-1 card (rank index 0) in slot 0 only.
    let truth = MiniHanabi::with_hands([cards([1, 2]), cards([0, 4])], 9).unwrap();
    let mut b = ParticleBelief::init(&truth, Viewer::Agent(1), cfg(2000), 6).unwrap();
    let mut t = truth.clone();
    let step = t.step(6).unwrap();
    let mut full = b.aoh().clone();
    let rec = full.push(0, 6, step.reward, &t).clone();
    b.update(rec).unwrap();
    assert!(!b.is_empty());
    for p in b.particles() {
        let h = p.traj.last().hand(1);
        assert_eq!(h[0].unwrap().rank, 0);
        assert_ne!(h[1].unwrap().rank, 0);
    }
}

#[test]
fn single_particle_always_sampled() {
    let g = CoordGame::reset(0);
    let b = ParticleBelief::init(&g, Viewer::Public, cfg(1), 7).unwrap();
    let mut r = rng(8);
    for _ in 0..100 {
        assert_eq!(b.sample_index(&mut r).unwrap(), 0);
        assert_eq!(b.sample(&mut r).unwrap(), g);
    }
}

#[test]
fn weighted_sampling_frequencies() {
    let env = Bandit::new(vec![0.0, 1.0]);
    let aoh = Aoh::start(&env, Viewer::Agent(0));
    let items = vec![(Trajectory::new(env.clone()), 0.75), (Trajectory::new(env.clone()), 0.25)];
    let b = ParticleBelief::from_weighted(&env, aoh, items, cfg(2), 0).unwrap();
    let mut r = rng(9);
    let n = 100_000;
    let hits = (0..n).filter(|_| b.sample_index(&mut r).unwrap() == 0).count() as f64;
    let sd = (n as f64 * 0.75 * 0.25).sqrt();
    assert!((hits - 0.75 * n as f64).abs() < 5.0 * sd, "{hits}");
}

#[test]
fn sampled_clone_is_independent() {
    let g = MiniHanabi::reset(1);
    let b = ParticleBelief::init(&g, Viewer::Agent(0), cfg(10), 10).unwrap();
    let mut r = rng(11);
    let i = b.sample_index(&mut rng(12)).unwrap();
    let before = b.particles()[i].traj.last().state_key();
    let mut s = b.sample(&mut rng(12)).unwrap();
    s.step(0).unwrap();
    let _ = b.sample(&mut r).unwrap();
    assert_eq!(b.particles()[i].traj.last().state_key(), before);
    assert_eq!(b.particles()[i].traj.last().turn(), 0);
}

#[test]
fn impossible_history_is_empty() {
    let g = CoordGame::reset(0);
    let mut aoh = Aoh::start(&g, Viewer::Agent(0));
    // A record claiming agent 1 moved first can never be reproduced.
    let mut t = g.clone();
    t.step(0).unwrap();
    aoh.records.push(AohRecord { actor: 1, action: 0, reward: 0.0, obs: t.observe(0) });
    let r = ParticleBelief::from_aoh(&g, aoh.clone(), BeliefConfig { particles: 5, max_attempts: 100, ..cfg(5) }, 0);
    assert!(matches!(r, Err(BeliefError::EmptyBelief)));
    assert!(matches!(exact_posterior(&g, &aoh), Err(BeliefError::EmptyBelief)));
}

#[test]
fn exact_posterior_coordgame_single() {
    let g = CoordGame::reset(0);
    let (_, aoh0, recs) = random_game(g.clone(), Viewer::Agent(1), 1, 3);
    let mut aoh = aoh0;
    aoh.records = recs;
    let post = exact_posterior(&g, &aoh).unwrap();
    assert_eq!(post.len(), 1);
    assert_eq!(post[0].1, 1.0);
}

#[test]
fn exact_posterior_turn_zero_is_hypergeometric() {
    let g = MiniHanabi::reset(17);
    let aoh = Aoh::start(&g, Viewer::Agent(0));
    let post = exact_posterior(&g, &aoh).unwrap();
    let sum: f64 = post.iter().map(|(_, p)| p).sum();
    assert!((sum - 1.0).abs() < 1e-12);
    // Copies per type once the partner hand is removed; a copy-labelled deal is
    // uniform, so an ordered own hand (x, y) has weight c_x * (c_y - [x == y]).
    let mut copies = [2u32, 2, 1, 2, 2, 1];
    for c in g.hand(1).iter().flatten() {
        copies[c.type_id() as usize] -= 1;
    }
    let mut oracle = BTreeMap::new();
    let mut z = 0.0;
    for x in 0..6 {
        for y in 0..6 {
            let w = copies[x] as f64 * (copies[y] as f64 - (x == y) as u8 as f64);
            if w > 0.0 {
                oracle.insert([x as u8, y as u8], w);
                z += w;
            }
        }
    }
    assert_eq!(post.len(), oracle.len());
    for (t, p) in &post {
        let h = t.last().hand(0).map(|c| c.unwrap().type_id());
        assert!((p - oracle[&h] / z).abs() < 1e-12);
    }
}

#[test]
fn exact_posterior_intractable_for_gridpacman() {
    let g = GridPacman::reset(0);
    let aoh = Aoh::start(&g, Viewer::Agent(0));
    assert!(matches!(exact_posterior(&g, &aoh), Err(BeliefError::Env(EnvError::Intractable(_)))));
}

#[test]
fn gridpacman_belief_survives_ghost_moves() {
    let g = GridPacman::reset(4);
    let (_, aoh0, recs) = random_game(g.clone(), Viewer::Agent(0), 40, 13);
    let mut b = ParticleBelief::from_aoh(&g, aoh0, cfg(3), 1).unwrap();
    for rec in recs {
        b.update(rec).unwrap();
    }
    assert_eq!(b.len(), 3);
    for p in b.particles() {
        assert!(Aoh::from_trajectory(Viewer::Agent(0), &p.traj).same_as(b.aoh()));
    }
}

#[test]
fn total_variation_basics() {
    let a: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
    let b: BTreeMap<u8, f64> = [(1, 0.25), (2, 0.75)].into_iter().collect();
    assert_eq!(total_variation(&a, &a), 0.0);
    assert!((total_variation(&a, &b) - 0.75).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn particles_replay_to_history(seed in 0u64..10_000, turns in 0usize..7, public in any::<bool>()) {
        let g = MiniHanabi::reset(seed);
        let viewer = if public { Viewer::Public } else { Viewer::Agent((seed % 2) as usize) };
        let (_, aoh0, recs) = random_game(g.clone(), viewer, turns, seed ^ 0x55);
        let mut b = ParticleBelief::from_aoh(&g, aoh0, cfg(300), seed).unwrap();
        for rec in recs {
            b.update(rec).unwrap();
            let z: f64 = b.weights().iter().sum();
            prop_assert!((z - 1.0).abs() < 1e-9);
        }
        for p in b.particles() {
            prop_assert!(Aoh::from_trajectory(viewer, &p.traj).same_as(b.aoh()));
        }
    }

    #[test]
    fn public_support_contains_private(seed in 0u64..10_000, turns in 0usize..5, agent in 0usize..2) {
        let g = MiniHanabi::reset(seed);
        let (_, priv0, recs) = random_game(g.clone(), Viewer::Agent(agent), turns, seed);
        let mut private = priv0;
        private.records = recs;
        let public = private.to_public::<MiniHanabi>();
        let pp = exact_posterior(&g, &private).unwrap();
        let pubs: std::collections::BTreeSet<u64> = exact_posterior(&g, &public).unwrap().iter().map(|(t, _)| t.last().state_key()).collect();
        for (t, _) in &pp {
            prop_assert!(pubs.contains(&t.last().state_key()));
        }
        let z: f64 = pp.iter().map(|(_, p)| p).sum();
        prop_assert!((z - 1.0).abs() < 1e-12);
    }
}
