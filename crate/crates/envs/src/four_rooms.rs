use std::fmt;

use crate::{EnvError, Environment, Result, TabularModel, Transition};
use hoc_core::HocRng;

pub const SLIP_PROB: f64 = 1.0 / 3.0;

/// The 13×13 four-rooms map; `w` marks a wall.
pub const FOUR_ROOMS_LAYOUT: [&str; 13] = [
    "wwwwwwwwwwwww",
    "w     w     w",
    "w     w     w",
    "w           w",
    "w     w     w",
    "w     w     w",
    "ww wwww     w",
    "w     www www",
    "w     w     w",
    "w     w     w",
    "w           w",
    "w     w     w",
    "wwwwwwwwwwwww",
];

const SIZE: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    fn offset(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }
}

/// Four-rooms navigation with slippery moves and a goal that moves every episode.
///
/// Observations are indices of open cells in row-major order. The goal is not
/// part of the observation.
#[derive(Debug, Clone)]
pub struct FourRooms {
    wall: Vec<bool>,
    /// grid position of each open cell
    cells: Vec<usize>,
    /// open-cell index for each grid position
    index_of: Vec<Option<usize>>,
    /// successor cell for each (cell, direction); staying put when blocked
    moves: Vec<[usize; 4]>,
    /// empty neighbours of each cell
    neighbours: Vec<Vec<usize>>,
    fixed: Option<(usize, usize)>,
    agent: usize,
    goal: usize,
    active: bool,
}

impl FourRooms {
    /// Start and goal are drawn uniformly and independently on every reset.
    pub fn new() -> Self {
        let wall: Vec<bool> = FOUR_ROOMS_LAYOUT
            .iter()
            .flat_map(|row| row.bytes().map(|b| b == b'w'))
            .collect();
        let cells: Vec<usize> = (0..SIZE * SIZE).filter(|&g| !wall[g]).collect();
        let mut index_of = vec![None; SIZE * SIZE];
        for (i, &g) in cells.iter().enumerate() {
            index_of[g] = Some(i);
        }
        let step = |g: usize, d: Direction| -> Option<usize> {
            let (dr, dc) = d.offset();
            let r = (g / SIZE) as isize + dr;
            let c = (g % SIZE) as isize + dc;
            if r < 0 || c < 0 || r >= SIZE as isize || c >= SIZE as isize {
                return None;
            }
            index_of[r as usize * SIZE + c as usize]
        };
        let mut moves = Vec::with_capacity(cells.len());
        let mut neighbours = Vec::with_capacity(cells.len());
        for (i, &g) in cells.iter().enumerate() {
            let mut m = [i; 4];
            let mut n = Vec::new();
            for d in Direction::ALL {
                if let Some(j) = step(g, d) {
                    m[d as usize] = j;
                    n.push(j);
                }
            }
            moves.push(m);
            neighbours.push(n);
        }
        FourRooms {
            wall,
            cells,
            index_of,
            moves,
            neighbours,
            fixed: None,
            agent: 0,
            goal: 0,
            active: false,
        }
    }

    /// Every reset places the agent on `start` and the goal on `goal` (open-cell indices).
    pub fn fixed(start: usize, goal: usize) -> Result<Self> {
        let mut env = FourRooms::new();
        let n = env.cells.len();
        if start >= n || goal >= n {
            return Err(EnvError::Model(format!(
                "cell index out of range for {n} open cells"
            )));
        }
        env.fixed = Some((start, goal));
        Ok(env)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Open-cell index of grid position `(row, col)`, if it is not a wall.
    pub fn cell_at(&self, row: usize, col: usize) -> Option<usize> {
        if row >= SIZE || col >= SIZE {
            return None;
        }
        self.index_of[row * SIZE + col]
    }

    pub fn position(&self, cell: usize) -> (usize, usize) {
        let g = self.cells[cell];
        (g / SIZE, g % SIZE)
    }

    pub fn is_wall(&self, row: usize, col: usize) -> bool {
        self.wall[row * SIZE + col]
    }

    pub fn neighbours(&self, cell: usize) -> &[usize] {
        &self.neighbours[cell]
    }

    /// Where `direction` leads from `cell` without slipping.
    pub fn intended(&self, cell: usize, direction: usize) -> usize {
        self.moves[cell][direction]
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    /// Samples the cell reached from `cell` under `direction` and whether the move slipped.
    pub fn sample_move(&self, cell: usize, direction: usize, rng: &mut HocRng) -> (usize, bool) {
        if rng.bernoulli(SLIP_PROB) {
            let n = &self.neighbours[cell];
            if n.is_empty() {
                (cell, true)
            } else {
                (n[rng.below(n.len())], true)
            }
        } else {
            (self.moves[cell][direction], false)
        }
    }
}

impl Default for FourRooms {
    fn default() -> Self {
        FourRooms::new()
    }
}

impl Environment for FourRooms {
    fn num_states(&self) -> usize {
        self.cells.len()
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, rng: &mut HocRng) -> usize {
        let (agent, goal) = match self.fixed {
            Some(pair) => pair,
            None => {
                let agent = rng.below(self.cells.len());
                (agent, rng.below(self.cells.len()))
            }
        };
        self.agent = agent;
        self.goal = goal;
        self.active = true;
        agent
    }

    fn step(&mut self, action: usize, rng: &mut HocRng) -> Result<Transition> {
        if !self.active {
            return Err(EnvError::Protocol("step called outside an episode".into()));
        }
        if action >= 4 {
            return Err(EnvError::Action {
                action,
                num_actions: 4,
            });
        }
        if self.agent != self.goal {
            self.agent = self.sample_move(self.agent, action, rng).0;
        }
        let done = self.agent == self.goal;
        self.active = !done;
        Ok(Transition {
            next_state: self.agent,
            reward: if done { 1.0 } else { 0.0 },
            done,
        })
    }

    /// Model for the fixed start and goal; the goal cell is terminal.
    fn exact_model(&self) -> Result<TabularModel> {
        let (start, goal) = self
            .fixed
            .ok_or_else(|| EnvError::Model("model needs a fixed start and goal".into()))?;
        if start == goal {
            return Err(EnvError::Model(
                "start equals goal: the episode pays on its first step from a terminal cell".into(),
            ));
        }
        let n = self.cells.len();
        let mut p = vec![0.0; n * 4 * n];
        let mut r = vec![0.0; n * 4];
        let mut terminal = vec![false; n];
        terminal[goal] = true;
        for s in 0..n {
            for a in 0..4 {
                let row = &mut p[(s * 4 + a) * n..(s * 4 + a + 1) * n];
                if s == goal {
                    row[s] = 1.0;
                    continue;
                }
                row[self.moves[s][a]] += 1.0 - SLIP_PROB;
                let nb = &self.neighbours[s];
                if nb.is_empty() {
                    row[s] += SLIP_PROB;
                } else {
                    for &j in nb {
                        row[j] += SLIP_PROB / nb.len() as f64;
                    }
                }
                r[s * 4 + a] = row[goal];
            }
        }
        TabularModel::new(n, 4, p, r, terminal, start)
    }
}

impl fmt::Display for FourRooms {
    /// `#` wall, `.` open, `A` agent, `G` goal.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in 0..SIZE {
            for col in 0..SIZE {
                let g = row * SIZE + col;
                let ch = match self.index_of[g] {
                    None => '#',
                    Some(i) if i == self.agent => 'A',
                    Some(i) if i == self.goal => 'G',
                    Some(_) => '.',
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
