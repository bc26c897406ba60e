use crate::{EnvError, Environment, Result, TabularModel, Transition};
use hoc_core::HocRng;

pub const DP_POSITIONS: usize = 6;

const LEFT: usize = 0;
const RIGHT: usize = 1;

/// Six-state chain where the reward on returning to `s1` depends on whether `s6`
/// was visited.
///
/// Observation `(pos - 1) + 6 * visited` folds the visit flag into the state.
/// `left` is deterministic; `right` succeeds with probability 1/2 and otherwise
/// moves left. A successful `right` at `s6` stays at `s6`.
#[derive(Debug, Clone, Default)]
pub struct StochasticDP {
    pos: usize,
    visited: bool,
    active: bool,
}

impl StochasticDP {
    pub const LEFT: usize = LEFT;
    pub const RIGHT: usize = RIGHT;

    pub fn new() -> Self {
        StochasticDP::default()
    }

    /// An environment mid-episode at position `pos` (1-based, not `s1`).
    pub fn at(pos: usize, visited: bool) -> Self {
        assert!((2..=DP_POSITIONS).contains(&pos), "position {pos} is not a live state");
        StochasticDP {
            pos,
            visited,
            active: true,
        }
    }

    /// Observation for position `pos` (1-based) and visit flag.
    pub fn encode(pos: usize, visited: bool) -> usize {
        (pos - 1) + DP_POSITIONS * visited as usize
    }

    pub fn decode(state: usize) -> (usize, bool) {
        (state % DP_POSITIONS + 1, state >= DP_POSITIONS)
    }

    fn outcome(pos: usize, visited: bool, moved_right: bool) -> (usize, bool, f64, bool) {
        let next = if moved_right {
            (pos + 1).min(DP_POSITIONS)
        } else {
            pos - 1
        };
        let visited = visited || next == DP_POSITIONS;
        if next == 1 {
            let reward = if visited { 1.0 } else { 0.01 };
            (next, visited, reward, true)
        } else {
            (next, visited, 0.0, false)
        }
    }
}

impl Environment for StochasticDP {
    fn num_states(&self) -> usize {
        2 * DP_POSITIONS
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut HocRng) -> usize {
        self.pos = 2;
        self.visited = false;
        self.active = true;
        Self::encode(2, false)
    }

    fn step(&mut self, action: usize, rng: &mut HocRng) -> Result<Transition> {
        if !self.active {
            return Err(EnvError::Protocol("step called outside an episode".into()));
        }
        let right = match action {
            LEFT => false,
            RIGHT => rng.bernoulli(0.5),
            _ => {
                return Err(EnvError::Action {
                    action,
                    num_actions: 2,
                })
            }
        };
        let (pos, visited, reward, done) = Self::outcome(self.pos, self.visited, right);
        self.pos = pos;
        self.visited = visited;
        self.active = !done;
        Ok(Transition {
            next_state: Self::encode(pos, visited),
            reward,
            done,
        })
    }

    fn exact_model(&self) -> Result<TabularModel> {
        let n = 2 * DP_POSITIONS;
        let mut p = vec![0.0; n * 2 * n];
        let mut r = vec![0.0; n * 2];
        let mut terminal = vec![false; n];
        for s in 0..n {
            let (pos, visited) = Self::decode(s);
            if pos == 1 {
                terminal[s] = true;
                for a in 0..2 {
                    p[(s * 2 + a) * n + s] = 1.0;
                }
                continue;
            }
            let branches: [(usize, &[(bool, f64)]); 2] = [
                (LEFT, &[(false, 1.0)]),
                (RIGHT, &[(true, 0.5), (false, 0.5)]),
            ];
            for (a, outcomes) in branches {
                for &(right, prob) in outcomes {
                    let (np, nv, reward, _) = Self::outcome(pos, visited, right);
                    p[(s * 2 + a) * n + Self::encode(np, nv)] += prob;
                    r[s * 2 + a] += prob * reward;
                }
            }
        }
        TabularModel::new(n, 2, p, r, terminal, Self::encode(2, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_s2_unvisited() {
        let mut env = StochasticDP::new();
        let s = env.reset(&mut HocRng::new(0, 1));
        assert_eq!(StochasticDP::decode(s), (2, false));
    }

    #[test]
    fn left_from_s2_pays_small_reward() {
        let mut env = StochasticDP::new();
        let mut rng = HocRng::new(0, 1);
        env.reset(&mut rng);
        let t = env.step(StochasticDP::LEFT, &mut rng).unwrap();
        assert_eq!(t.next_state, StochasticDP::encode(1, false));
        assert_eq!(t.reward, 0.01);
        assert!(t.done);
        assert!(matches!(env.step(0, &mut rng), Err(EnvError::Protocol(_))));
    }

    #[test]
    fn left_from_s6_keeps_flag() {
        let mut env = StochasticDP::at(6, true);
        let t = env.step(StochasticDP::LEFT, &mut HocRng::new(0, 1)).unwrap();
        assert_eq!(t, Transition { next_state: StochasticDP::encode(5, true), reward: 0.0, done: false });
    }

    #[test]
    fn model_rows() {
        let m = StochasticDP::new().exact_model().unwrap();
        let s3 = StochasticDP::encode(3, false);
        assert_eq!(m.prob(s3, RIGHT, StochasticDP::encode(4, false)), 0.5);
        assert_eq!(m.prob(s3, RIGHT, StochasticDP::encode(2, false)), 0.5);
        let s5 = StochasticDP::encode(5, false);
        assert_eq!(m.prob(s5, RIGHT, StochasticDP::encode(6, true)), 0.5);
        let s6 = StochasticDP::encode(6, true);
        assert_eq!(m.prob(s6, RIGHT, s6), 0.5);
        let s2v = StochasticDP::encode(2, true);
        assert_eq!(m.reward(s2v, LEFT), 1.0);
        assert_eq!(m.reward(s2v, RIGHT), 0.5);
        assert!(m.is_terminal(StochasticDP::encode(1, true)));
    }
}
