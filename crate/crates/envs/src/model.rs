use crate::{EnvError, Environment, Result, Transition};
use hoc_core::HocRng;

const ROW_TOL: f64 = 1e-12;

/// Dense finite MDP. Terminal states are absorbing and pay nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    num_states: usize,
    num_actions: usize,
    /// `p[(s * A + a) * S + s']`
    p: Vec<f64>,
    /// `r[s * A + a]`, the expected one-step reward
    r: Vec<f64>,
    terminal: Vec<bool>,
    start: usize,
}

impl TabularModel {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        p: Vec<f64>,
        r: Vec<f64>,
        terminal: Vec<bool>,
        start: usize,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(EnvError::Model("empty state or action space".into()));
        }
        if p.len() != num_states * num_actions * num_states
            || r.len() != num_states * num_actions
            || terminal.len() != num_states
        {
            return Err(EnvError::Model("table sizes do not match the spaces".into()));
        }
        if start >= num_states {
            return Err(EnvError::Model(format!("start state {start} out of range")));
        }
        let m = TabularModel {
            num_states,
            num_actions,
            p,
            r,
            terminal,
            start,
        };
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = m.row(s, a);
                if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return Err(EnvError::Model(format!("negative or >1 entry in row ({s}, {a})")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > ROW_TOL {
                    return Err(EnvError::Model(format!(
                        "row ({s}, {a}) sums to {total}, not 1"
                    )));
                }
                if !m.reward(s, a).is_finite() {
                    return Err(EnvError::Model(format!("non-finite reward at ({s}, {a})")));
                }
                if m.terminal[s] && (row[s] != 1.0 || m.reward(s, a) != 0.0) {
                    return Err(EnvError::Model(format!(
                        "terminal state {s} must be absorbing with zero reward"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.p[(s * self.num_actions + a) * self.num_states + next]
    }

    /// Distribution over next states after taking `a` in `s`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.p[base..base + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.r[s * self.num_actions + a]
    }
}

/// Samples trajectories from a [`TabularModel`], paying the expected reward.
#[derive(Debug, Clone)]
pub struct ModelEnv {
    model: TabularModel,
    state: Option<usize>,
}

impl ModelEnv {
    pub fn new(model: TabularModel) -> Self {
        ModelEnv { model, state: None }
    }

    pub fn model(&self) -> &TabularModel {
        &self.model
    }
}

impl Environment for ModelEnv {
    fn num_states(&self) -> usize {
        self.model.num_states
    }

    fn num_actions(&self) -> usize {
        self.model.num_actions
    }

    fn reset(&mut self, _rng: &mut HocRng) -> usize {
        self.state = Some(self.model.start);
        self.model.start
    }

    fn step(&mut self, action: usize, rng: &mut HocRng) -> Result<Transition> {
        let s = self
            .state
            .ok_or_else(|| EnvError::Protocol("step called outside an episode".into()))?;
        if action >= self.model.num_actions {
            return Err(EnvError::Action {
                action,
                num_actions: self.model.num_actions,
            });
        }
        let next = rng.categorical(self.model.row(s, action));
        let done = self.model.terminal[next];
        self.state = if done { None } else { Some(next) };
        Ok(Transition {
            next_state: next,
            reward: self.model.reward(s, action),
            done,
        })
    }

    fn exact_model(&self) -> Result<TabularModel> {
        Ok(self.model.clone())
    }
}
