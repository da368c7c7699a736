//! Single-agent maze with pellets and one randomly wandering ghost.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

use super::{one_hot, Branch, Enumerable, EnvError, EnvSpec, Observation, Simulator, Step};

pub const LAYOUT: [&[u8; WIDTH]; WIDTH] = [
    b"#########",
    b"#o.o#o.o#",
    b"#o#.#.#o#",
    b"#.o.o.o.#",
    b"#o##P##o#",
    b"#.o.o.o.#",
    b"#o#.#.#o#",
    b"#o.o#o.o#",
    b"#########",
];

pub const WIDTH: usize = 9;
pub const MAX_STEPS: u32 = 200;
pub const NUM_PELLETS: usize = 20;
pub const NUM_CELLS: usize = 37;
pub const CAPTURE_REWARD: f64 = -10.0;
pub const PELLET_REWARD: f64 = 1.0;
const GHOST_STARTS: [(usize, usize); 4] = [(1, 1), (1, 7), (7, 1), (7, 7)];
const DIRS: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
const DIST_SCALE: f64 = 16.0;
const NONE: u8 = u8::MAX;
pub const OBS_LEN: usize = 2 * NUM_CELLS + NUM_PELLETS + 3 * DIRS.len() + 1;

/// Actions: 0 north, 1 east, 2 south, 3 west.
#[derive(Clone, Debug)]
pub struct GridPacman {
    pacman: u8,
    ghost: u8,
    pellets: u32,
    turn: u32,
    terminated: bool,
    rng: Pcg64Mcg,
}

struct Maze {
    cells: [(u8, u8); NUM_CELLS],
    index: [[u8; WIDTH]; WIDTH],
    neighbors: [[u8; 4]; NUM_CELLS],
    pellet_slot: [u8; NUM_CELLS],
    start: u8,
    dist: [[u8; NUM_CELLS]; NUM_CELLS],
}

const MAZE: Maze = build_maze();

const fn build_maze() -> Maze {
    let mut m = Maze {
        cells: [(0, 0); NUM_CELLS],
        index: [[NONE; WIDTH]; WIDTH],
        neighbors: [[NONE; 4]; NUM_CELLS],
        pellet_slot: [NONE; NUM_CELLS],
        start: NONE,
        dist: [[NONE; NUM_CELLS]; NUM_CELLS],
    };
    let mut n = 0;
    let mut pellets = 0;
    let mut r = 0;
    while r < WIDTH {
        let mut c = 0;
        while c < WIDTH {
            let ch = LAYOUT[r][c];
            if ch != b'#' {
                m.index[r][c] = n as u8;
                m.cells[n] = (r as u8, c as u8);
                if ch == b'o' {
                    m.pellet_slot[n] = pellets;
                    pellets += 1;
                } else if ch == b'P' {
                    m.start = n as u8;
                }
                n += 1;
            }
            c += 1;
        }
        r += 1;
    }
    assert!(n == NUM_CELLS && pellets as usize == NUM_PELLETS && m.start != NONE);
    let mut i = 0;
    while i < NUM_CELLS {
        let (r, c) = (m.cells[i].0 as isize, m.cells[i].1 as isize);
        let mut d = 0;
        while d < 4 {
            let (nr, nc) = (r + DIRS[d].0, c + DIRS[d].1);
            if nr >= 0 && nc >= 0 && (nr as usize) < WIDTH && (nc as usize) < WIDTH {
                m.neighbors[i][d] = m.index[nr as usize][nc as usize];
            }
            d += 1;
        }
        i += 1;
    }
    let mut src = 0;
    while src < NUM_CELLS {
        let mut queue = [0u8; NUM_CELLS];
        let (mut head, mut tail) = (0, 1);
        queue[0] = src as u8;
        m.dist[src][src] = 0;
        while head < tail {
            let cur = queue[head] as usize;
            head += 1;
            let mut d = 0;
            while d < 4 {
                let nb = m.neighbors[cur][d];
                if nb != NONE && m.dist[src][nb as usize] == NONE {
                    m.dist[src][nb as usize] = m.dist[src][cur] + 1;
                    queue[tail] = nb;
                    tail += 1;
                }
                d += 1;
            }
        }
        src += 1;
    }
    m
}

fn open_neighbors(cell: u8) -> impl Iterator<Item = u8> {
    MAZE.neighbors[cell as usize].into_iter().filter(|&n| n != NONE)
}

impl GridPacman {
    pub fn reset(seed: u64) -> Self {
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let (r, c) = GHOST_STARTS[rng.gen_range(0..GHOST_STARTS.len())];
        Self {
            pacman: MAZE.start,
            ghost: MAZE.index[r][c],
            pellets: (1u32 << NUM_PELLETS) - 1,
            turn: 0,
            terminated: false,
            rng,
        }
    }

    pub fn pellets_left(&self) -> u32 {
        self.pellets.count_ones()
    }

    pub fn pacman_cell(&self) -> (usize, usize) {
        let (r, c) = MAZE.cells[self.pacman as usize];
        (r as usize, c as usize)
    }

    pub fn ghost_cell(&self) -> (usize, usize) {
        let (r, c) = MAZE.cells[self.ghost as usize];
        (r as usize, c as usize)
    }

    pub fn has_pellet(&self, row: usize, col: usize) -> bool {
        match MAZE.index.get(row).and_then(|r| r.get(col)) {
            Some(&id) if id != NONE => {
                let slot = MAZE.pellet_slot[id as usize];
                slot != NONE && self.pellets & (1 << slot) != 0
            }
            _ => false,
        }
    }

    /// Move the ghost to `(row, col)`; used to build specific test positions.
    pub fn place_ghost(&mut self, row: usize, col: usize) -> bool {
        match MAZE.index.get(row).and_then(|r| r.get(col)) {
            Some(&id) if id != NONE && id != self.pacman => {
                self.ghost = id;
                true
            }
            _ => false,
        }
    }

    /// Shortest-path distance between two open cells.
    pub fn maze_distance(a: (usize, usize), b: (usize, usize)) -> Option<u32> {
        let ia = *MAZE.index.get(a.0)?.get(a.1)?;
        let ib = *MAZE.index.get(b.0)?.get(b.1)?;
        (ia != NONE && ib != NONE).then(|| MAZE.dist[ia as usize][ib as usize] as u32)
    }

    fn pacman_move(&mut self, action: usize) -> Step {
        let target = MAZE.neighbors[self.pacman as usize][action];
        debug_assert!(target != NONE);
        self.pacman = target;
        self.turn += 1;
        if self.pacman == self.ghost {
            self.terminated = true;
            return Step { reward: CAPTURE_REWARD, terminated: true };
        }
        let mut reward = 0.0;
        let slot = MAZE.pellet_slot[target as usize];
        if slot != NONE && self.pellets & (1 << slot) != 0 {
            self.pellets &= !(1 << slot);
            reward = PELLET_REWARD;
        }
        if self.pellets == 0 {
            self.terminated = true;
        }
        Step { reward, terminated: self.terminated }
    }

    fn finish(&mut self, mut step: Step) -> Step {
        if self.ghost == self.pacman {
            step = Step { reward: CAPTURE_REWARD, terminated: true };
        }
        if self.turn >= MAX_STEPS {
            step.terminated = true;
        }
        self.terminated = step.terminated;
        step
    }
}

impl Simulator for GridPacman {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            num_agents: 1,
            num_actions: 4,
            obs_len: OBS_LEN,
            public_obs_len: OBS_LEN,
            max_episode_len: MAX_STEPS,
            gamma: 0.99,
            fully_observable: true,
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
        0
    }

    fn legal_actions(&self) -> Vec<bool> {
        if self.terminated {
            return vec![false; 4];
        }
        MAZE.neighbors[self.pacman as usize].iter().map(|&n| n != NONE).collect()
    }

    fn observe(&self, _agent: usize) -> Observation {
        let mut f = Vec::with_capacity(OBS_LEN);
        one_hot(&mut f, Some(self.pacman as usize), NUM_CELLS);
        one_hot(&mut f, Some(self.ghost as usize), NUM_CELLS);
        f.extend((0..NUM_PELLETS).map(|i| ((self.pellets >> i) & 1) as f64));
        for d in 0..DIRS.len() {
            let n = MAZE.neighbors[self.pacman as usize][d];
            if n == NONE {
                f.extend([0.0, 1.0, 1.0]);
                continue;
            }
            let dist = &MAZE.dist[n as usize];
            let nearest = (0..NUM_CELLS)
                .filter(|&c| {
                    let s = MAZE.pellet_slot[c];
                    s != NONE && self.pellets & (1 << s) != 0
                })
                .map(|c| dist[c])
                .min();
            f.push(1.0);
            f.push(nearest.map_or(1.0, |d| (d as f64 / DIST_SCALE).min(1.0)));
            f.push((dist[self.ghost as usize] as f64 / DIST_SCALE).min(1.0));
        }
        f.push(self.turn as f64 / MAX_STEPS as f64);
        Observation { agent: Some(0), features: f, legal: self.legal_actions() }
    }

    fn public_observe(&self) -> Observation {
        Observation { agent: None, ..self.observe(0) }
    }

    fn public_of(obs: &Observation) -> Observation {
        Observation { agent: None, ..obs.clone() }
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        self.check_legal(action)?;
        let step = self.pacman_move(action);
        if step.terminated {
            return Ok(step);
        }
        let moves: Vec<u8> = open_neighbors(self.ghost).collect();
        self.ghost = moves[self.rng.gen_range(0..moves.len())];
        Ok(self.finish(step))
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = Pcg64Mcg::seed_from_u64(seed);
    }

    fn chance_outcomes(&self, action: usize) -> Option<Result<Vec<Branch<Self>>, EnvError>> {
        if let Err(e) = self.check_legal(action) {
            return Some(Err(e));
        }
        let mut base = self.clone();
        let step = base.pacman_move(action);
        if step.terminated {
            return Some(Ok(vec![Branch { prob: 1.0, state: base, step }]));
        }
        let moves: Vec<u8> = open_neighbors(base.ghost).collect();
        // Keep the stream aligned with `step`, which draws once here.
        let _ = base.rng.gen_range(0..moves.len());
        let p = 1.0 / moves.len() as f64;
        Some(Ok(moves
            .into_iter()
            .map(|g| {
                let mut s = base.clone();
                s.ghost = g;
                let step = s.finish(step);
                Branch { prob: p, state: s, step }
            })
            .collect()))
    }

    fn state_key(&self) -> u64 {
        crate::math::fnv1a(
            [self.pacman, self.ghost, self.terminated as u8]
                .into_iter()
                .chain(self.pellets.to_le_bytes())
                .chain(self.turn.to_le_bytes()),
        )
    }
}

impl Enumerable for GridPacman {
    fn initial_distribution(&self) -> Result<Vec<(f64, Self)>, EnvError> {
        Err(EnvError::Intractable("gridpacman"))
    }
}
