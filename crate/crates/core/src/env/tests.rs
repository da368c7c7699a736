use super::minihanabi::{MAX_HINTS, OBS_LEN as HANABI_OBS, PUBLIC_OBS_LEN as HANABI_PUB};
use super::toy::DecisionTree;
use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

fn card(color: u8, rank: u8) -> Card {
    Card { color, rank: rank - 1 }
}

fn pick_legal(legal: &[bool], choice: u32) -> usize {
    let idx: Vec<usize> = (0..legal.len()).filter(|&a| legal[a]).collect();
    idx[choice as usize % idx.len()]
}

fn play_random<S: Simulator>(mut s: S, choices: &[u32]) -> Trajectory<S> {
    s.reseed(7);
    let mut traj = Trajectory::new(s);
    for &c in choices {
        if traj.last().is_terminal() {
            break;
        }
        let a = pick_legal(&traj.last().legal_actions(), c);
        traj.step(a).unwrap();
    }
    traj
}

#[test]
fn env_kind_names_round_trip() {
    for k in [EnvKind::GridPacman, EnvKind::MiniHanabi, EnvKind::CoordGame] {
        assert_eq!(k.name().parse::<EnvKind>().unwrap(), k);
    }
    assert!(matches!("atari".parse::<EnvKind>(), Err(EnvError::UnknownKind(_))));
    assert!(reset_named("chess", 1).is_err());
}

#[test]
fn coordgame_reset_ignores_seed() {
    let a = CoordGame::reset(1);
    for seed in [0, 2, 99, u64::MAX] {
        assert_eq!(CoordGame::reset(seed), a);
        assert_eq!(CoordGame::reset(seed).state_key(), a.state_key());
    }
}

#[test]
fn hanabi_reset_is_deterministic() {
    for seed in 0..20 {
        let a = MiniHanabi::reset(seed);
        let b = MiniHanabi::reset(seed);
        assert_eq!(a.hand(0), b.hand(0));
        assert_eq!(a.hand(1), b.hand(1));
        assert_eq!(a.state_key(), b.state_key());
        assert_eq!(a.deck_size(), 6);
    }
    let deals: Vec<_> = (0..20).map(|s| (MiniHanabi::reset(s).hand(0), MiniHanabi::reset(s).hand(1))).collect();
    assert!(deals.iter().any(|d| d != &deals[0]));
}

#[test]
fn pacman_reset_has_all_pellets() {
    for seed in 0..10 {
        let s = GridPacman::reset(seed);
        assert_eq!(s.pellets_left(), 20);
        assert_eq!(s.turn(), 0);
        assert!(!s.is_terminal());
    }
}

#[test]
fn pacman_layout_is_connected() {
    let start = GridPacman::reset(0).pacman_cell();
    for (r, row) in gridpacman_layout().iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            if ch != b'#' {
                assert!(GridPacman::maze_distance(start, (r, c)).is_some_and(|d| d < 40));
            }
        }
    }
}

fn gridpacman_layout() -> [&'static [u8; 9]; 9] {
    super::gridpacman::LAYOUT
}

#[test]
fn pacman_pellet_gives_one() {
    let mut s = GridPacman::reset(3);
    s.place_ghost(7, 7);
    // Start (4,4) -> north (3,4), which holds a pellet.
    assert!(s.has_pellet(3, 4));
    let before = s.pellets_left();
    let step = s.step(0).unwrap();
    assert_eq!(step.reward, 1.0);
    assert!(!s.has_pellet(3, 4));
    assert_eq!(s.pellets_left(), before - 1);
}

#[test]
fn pacman_capture_is_terminal() {
    let mut s = GridPacman::reset(3);
    assert!(s.place_ghost(3, 4));
    let step = s.step(0).unwrap();
    assert_eq!(step, Step { reward: -10.0, terminated: true });
    assert_eq!(s.step(1), Err(EnvError::Terminated));
}

#[test]
fn pacman_walls_are_illegal() {
    let mut s = GridPacman::reset(0);
    // (4,4) has walls east and west.
    assert_eq!(s.legal_actions(), vec![true, false, true, false]);
    assert!(matches!(s.step(1), Err(EnvError::IllegalAction { action: 1, .. })));
    assert_eq!(s.turn(), 0);
}

#[test]
fn pacman_public_equals_private() {
    let traj = play_random(GridPacman::reset(5), &[1, 2, 3, 4, 5, 6, 7]);
    for s in &traj.states {
        let (a, b) = (s.observe(0), s.public_observe());
        assert_eq!(a.features, b.features);
        assert_eq!(a.legal, b.legal);
    }
}

#[test]
fn pacman_observation_encodes_state() {
    let s = GridPacman::reset(1);
    let mut t = s.clone();
    t.place_ghost(1, 3);
    assert_ne!(s.observe(0).features, t.observe(0).features);
}

#[test]
fn pacman_episode_caps_at_200() {
    let mut rng = Pcg64Mcg::seed_from_u64(1);
    for seed in 0..5 {
        let traj = play_random(GridPacman::reset(seed), &(0..400).map(|_| rng.gen()).collect::<Vec<u32>>());
        assert!(traj.last().is_terminal());
        assert!(traj.actions.len() <= 200);
    }
}

#[test]
fn hanabi_successful_play() {
    let mut s = MiniHanabi::with_hands([[card(0, 1), card(1, 2)], [card(1, 1), card(0, 3)]], 1).unwrap();
    let step = s.step(0).unwrap();
    assert_eq!(step.reward, 1.0);
    assert_eq!(s.fireworks(), [1, 0]);
    assert_eq!(s.score(), 1);
    assert_eq!(s.lives(), 2);
}

#[test]
fn hanabi_misplay_costs_life() {
    let mut s = MiniHanabi::with_hands([[card(0, 2), card(1, 2)], [card(1, 1), card(0, 3)]], 1).unwrap();
    let step = s.step(0).unwrap();
    assert_eq!(step.reward, 0.0);
    assert_eq!(s.lives(), 1);
    assert_eq!(s.fireworks(), [0, 0]);
}

#[test]
fn hanabi_hint_needs_token() {
    let mut s = MiniHanabi::reset(4);
    s.set_hint_tokens(0);
    let legal = s.legal_actions();
    assert!(legal[4..].iter().all(|&l| !l));
    assert!(s.step(6).is_err());
    s.set_hint_tokens(1);
    assert!(s.legal_actions()[4..].iter().all(|&l| l));
}

#[test]
fn hanabi_discard_needs_missing_token() {
    let s = MiniHanabi::reset(4);
    assert_eq!(s.hint_tokens(), MAX_HINTS);
    assert!(!s.legal_actions()[2] && !s.legal_actions()[3]);
}

#[test]
fn hanabi_rank_hint_narrows_knowledge() {
    let mut s = MiniHanabi::with_hands([[card(0, 2), card(1, 2)], [card(1, 1), card(0, 3)]], 1).unwrap();
    s.step(6).unwrap();
    let k = s.knowledge(1);
    // Slot 0 is rank 1 -> {color0 rank1, color1 rank1}; slot 1 is not rank 1.
    assert_eq!(k[0], 0b001001);
    assert_eq!(k[1], 0b110110);
}

#[test]
fn hanabi_own_hand_hidden() {
    let a = MiniHanabi::with_hands([[card(0, 1), card(0, 2)], [card(1, 1), card(1, 2)]], 1).unwrap();
    let b = MiniHanabi::with_hands([[card(1, 3), card(0, 1)], [card(1, 1), card(1, 2)]], 1).unwrap();
    assert_eq!(a.observe(0).features, b.observe(0).features);
    assert_ne!(a.observe(1).features, b.observe(1).features);
    assert_eq!(a.observe(0).features.len(), HANABI_OBS);
}

#[test]
fn hanabi_public_hides_every_hand() {
    let a = MiniHanabi::with_hands([[card(0, 1), card(0, 2)], [card(1, 1), card(1, 2)]], 1).unwrap();
    let b = MiniHanabi::with_hands([[card(1, 3), card(0, 1)], [card(0, 2), card(1, 1)]], 1).unwrap();
    assert_eq!(a.public_observe().features, b.public_observe().features);
    assert_eq!(a.public_observe().features.len(), HANABI_PUB);
}

#[test]
fn hanabi_hint_is_public() {
    let s = MiniHanabi::with_hands([[card(0, 1), card(0, 2)], [card(1, 1), card(1, 2)]], 1).unwrap();
    let mut t = s.clone();
    t.step(4).unwrap();
    let mut u = s.clone();
    u.step(5).unwrap();
    assert_ne!(t.public_observe().features, u.public_observe().features);
    assert_ne!(s.public_observe().features, t.public_observe().features);
}

#[test]
fn reseed_keeps_observations() {
    let mut s = MiniHanabi::reset(11);
    let before: Vec<_> = (0..2).map(|i| s.observe(i)).collect();
    s.reseed(12345);
    for i in 0..2 {
        assert!(s.observe(i).same_as(&before[i]));
    }
    let mut p = GridPacman::reset(2);
    let obs = p.observe(0);
    p.reseed(9);
    assert!(p.observe(0).same_as(&obs));
}

#[test]
fn coordgame_payoffs() {
    for (a, b, r) in [(0, 0, 1.0), (1, 1, 2.0), (0, 1, 0.0), (1, 0, 0.0)] {
        let mut s = CoordGame::reset(0);
        assert_eq!(s.current_agent(), 0);
        assert_eq!(s.step(a).unwrap(), Step { reward: 0.0, terminated: false });
        assert_eq!(s.current_agent(), 1);
        assert_eq!(s.step(b).unwrap(), Step { reward: r, terminated: true });
        assert!(s.step(0).is_err());
    }
}

#[test]
fn coordgame_b_sees_a() {
    let mut x = CoordGame::reset(0);
    let mut y = CoordGame::reset(0);
    x.step(0).unwrap();
    y.step(1).unwrap();
    assert_ne!(x.observe(1).features, y.observe(1).features);
}

#[test]
fn hanabi_initial_distribution_normalized() {
    let dist = MiniHanabi::reset(0).initial_distribution().unwrap();
    let total: f64 = dist.iter().map(|(p, _)| p).sum();
    assert!((total - 1.0).abs() < 1e-12);
    // P(first card is color 0 rank 3) = 1/10.
    let p: f64 = dist.iter().filter(|(_, s)| s.hand(0)[0] == Some(card(0, 3))).map(|(p, _)| p).sum();
    assert!((p - 0.1).abs() < 1e-12);
}

#[test]
fn pacman_is_not_enumerable() {
    assert_eq!(GridPacman::reset(0).initial_distribution().unwrap_err(), EnvError::Intractable("gridpacman"));
}

#[test]
fn expectimax_on_fixed_tree() {
    let t = DecisionTree::depth_two();
    let (v, a) = DecisionTree::expectimax(t.table(), 0);
    assert_eq!(a, Some(0));
    assert!((v - 0.55).abs() < 1e-12);
}

#[test]
fn any_state_dispatch() {
    let s = reset(EnvKind::MiniHanabi, 3);
    assert_eq!(s.kind(), EnvKind::MiniHanabi);
    assert_eq!(s.spec().num_actions, 9);
    assert_eq!(s.state_key(), MiniHanabi::reset(3).state_key());
}

fn check_chance_consistency<S: Simulator>(traj: &Trajectory<S>) {
    for (i, &(_, a)) in traj.actions.iter().enumerate() {
        let Some(branches) = traj.states[i].chance_outcomes(a) else { continue };
        let branches = branches.unwrap();
        let total: f64 = branches.iter().map(|b| b.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let next = &traj.states[i + 1];
        let hit: Vec<_> = branches.iter().filter(|b| b.state.state_key() == next.state_key()).collect();
        assert_eq!(hit.len(), 1);
        assert_eq!(hit[0].step.reward, traj.rewards[i]);
        // The branch carries the same chance stream as the sampled successor.
        if !next.is_terminal() {
            let a2 = pick_legal(&next.legal_actions(), 3);
            let (mut x, mut y) = (next.clone(), hit[0].state.clone());
            assert_eq!(x.step(a2).unwrap(), y.step(a2).unwrap());
            assert_eq!(x.state_key(), y.state_key());
        }
    }
}

fn check_invariants<S: Simulator>(start: S, choices: &[u32], reward_ok: impl Fn(f64) -> bool) {
    let spec = start.spec();
    let a = play_random(start.clone(), choices);
    let b = play_random(start, choices);
    assert_eq!(a.actions, b.actions);
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.state_key(), y.state_key());
        for i in 0..spec.num_agents {
            assert!(x.observe(i).same_as(&y.observe(i)));
        }
    }
    assert_eq!(a.rewards.iter().map(|r| r.to_bits()).collect::<Vec<_>>(), b.rewards.iter().map(|r| r.to_bits()).collect::<Vec<_>>());
    assert!(a.rewards.iter().all(|&r| reward_ok(r)));
    assert!(a.actions.len() as u32 <= spec.max_episode_len);
    for s in &a.states {
        for i in 0..spec.num_agents {
            let o = s.observe(i);
            assert_eq!(o.features.len(), spec.obs_len);
            assert_eq!(o.legal.len(), spec.num_actions);
            assert!(S::public_of(&o).same_as(&s.public_observe()));
        }
        assert_eq!(s.public_observe().features.len(), spec.public_obs_len);
        assert_eq!(s.is_terminal(), !s.legal_actions().iter().any(|&l| l));
    }
    for (i, s) in a.states.iter().enumerate() {
        assert_eq!(s.turn() as usize, i);
    }
    let viewers: Vec<Viewer> = (0..spec.num_agents).map(Viewer::Agent).chain([Viewer::Public]).collect();
    for v in viewers {
        let aoh = Aoh::from_trajectory(v, &a);
        assert_eq!(aoh.len() as u32, a.last().turn());
        assert!(aoh.same_as(&Aoh::from_trajectory(v, &b)));
        if let Viewer::Agent(_) = v {
            assert!(aoh.to_public::<S>().same_as(&Aoh::from_trajectory(Viewer::Public, &a)));
        }
    }
    check_chance_consistency(&a);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hanabi_invariants(seed in any::<u64>(), choices in proptest::collection::vec(any::<u32>(), 0..40)) {
        check_invariants(MiniHanabi::reset(seed), &choices, |r| r == 0.0 || r == 1.0);
    }

    #[test]
    fn pacman_invariants(seed in any::<u64>(), choices in proptest::collection::vec(any::<u32>(), 0..250)) {
        check_invariants(GridPacman::reset(seed), &choices, |r| r == 0.0 || r == 1.0 || r == -10.0);
    }

    #[test]
    fn coordgame_invariants(choices in proptest::collection::vec(any::<u32>(), 0..3)) {
        check_invariants(CoordGame::reset(0), &choices, |r| r == 0.0 || r == 1.0 || r == 2.0);
    }

    #[test]
    fn hanabi_games_terminate(seed in any::<u64>(), choices in proptest::collection::vec(any::<u32>(), 40)) {
        let t = play_random(MiniHanabi::reset(seed), &choices);
        prop_assert!(t.last().is_terminal());
    }
}

#[test]
fn hanabi_deck_count_conserved() {
    let mut rng = Pcg64Mcg::seed_from_u64(5);
    for seed in 0..50 {
        let t = play_random(MiniHanabi::reset(seed), &(0..40).map(|_| rng.gen()).collect::<Vec<u32>>());
        for s in &t.states {
            let held: usize = (0..2).map(|p| s.hand(p).iter().flatten().count()).sum();
            let deck: usize = s.deck_counts().iter().map(|&c| c as usize).sum();
            assert_eq!(deck, s.deck_size() as usize);
            assert!(held + deck <= 10);
        }
    }
}
