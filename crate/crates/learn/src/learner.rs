use hoc_core::gradients::log_policy_score_into;
use hoc_core::policy::{softmax_into, top_option_values_into};
use hoc_core::rng::LEARNER_STREAM;
use hoc_core::{
    eval_q_omega, sigmoid, sigmoid_grad_step, termination_gate, CriticSet, HierarchyConfig, HocRng,
    OptionStack, ParameterSet, StackValues,
};

use crate::{LearnError, Result};

/// One environment transition as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    /// Active options `o^{1:N-1}` when the action was taken.
    pub options: Vec<usize>,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// Levels that terminated on arrival, ascending; always a suffix `j..=N-1`.
    pub terminated_levels: Vec<usize>,
    /// Options after the refresh (equal to `options` when `done`).
    pub next_options: Vec<usize>,
    pub done: bool,
}

impl StepRecord {
    /// Levels that terminated and picked a different option.
    pub fn switched_levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminated_levels
            .iter()
            .copied()
            .filter(|&j| self.options[j - 1] != self.next_options[j - 1])
    }
}

/// Tabular hierarchical option-critic learner.
///
/// Owns its parameters, critics, option stack and RNG stream. Every random
/// choice made by the agent comes from this RNG, never from the environment's.
#[derive(Debug, Clone)]
pub struct Learner {
    pub config: HierarchyConfig,
    pub params: ParameterSet,
    pub critics: CriticSet,
    pub stack: OptionStack,
    seed: u64,
    rng: HocRng,
    probs: Vec<f64>,
    top_values: Vec<f64>,
    arrival: StackValues,
    policy_delta: Vec<Vec<f64>>,
    termination_delta: Vec<f64>,
}

impl Learner {
    pub fn new(config: HierarchyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ParameterSet::zeros(&config);
        let critics = CriticSet::zeros(&config);
        let depth = config.depth();
        let widest = (1..=depth).map(|l| config.choices_at(l)).max().unwrap_or(1);
        let policy_delta = (1..=depth).map(|l| vec![0.0; config.choices_at(l)]).collect();
        Ok(Learner {
            params,
            critics,
            stack: OptionStack::new(),
            seed,
            rng: HocRng::new(seed, LEARNER_STREAM),
            probs: vec![0.0; widest],
            top_values: Vec::new(),
            arrival: StackValues::default(),
            policy_delta,
            termination_delta: vec![0.0; depth - 1],
            config,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.config.depth()
    }

    /// Samples a choice at `level` given the active prefix in `self.stack`.
    ///
    /// With `cached_top` the top-level values are taken from `self.arrival`,
    /// which the caller guarantees is current for `state`.
    fn sample_level(&mut self, level: usize, state: usize, cached_top: bool) -> Result<usize> {
        if level == 1 && self.config.top_is_greedy() {
            let values = if cached_top {
                &self.arrival.top_values
            } else {
                top_option_values_into(&self.config, &self.params, &self.critics, state, &mut self.top_values)?;
                &self.top_values
            };
            return Ok(epsilon_greedy_sample(values, self.config.epsilon, &mut self.rng));
        }
        let prefix = &self.stack.options()[..level - 1];
        let logits = self.params.policy_row(level, state, prefix)?;
        let probs = &mut self.probs[..logits.len()];
        softmax_into(logits, self.config.temperature(level), probs);
        Ok(self.rng.categorical(probs))
    }

    /// Samples `o^{1:N-1}` top-down for the first state of an episode.
    pub fn select_initial_stack(&mut self, state: usize) -> Result<OptionStack> {
        self.stack = OptionStack::new();
        for level in 1..self.depth() {
            let o = self.sample_level(level, state, false)?;
            self.stack.push(o);
        }
        Ok(self.stack.clone())
    }

    /// Samples a primitive action from `π^N(· | state, o^{1:N-1})`.
    pub fn choose_action(&mut self, state: usize) -> Result<usize> {
        self.stack.require_full(self.depth())?;
        let a = self.sample_level(self.depth(), state, false)?;
        self.stack.action = Some(a);
        Ok(a)
    }

    /// Bottom-up termination starting at `level` on arrival in `next_state`.
    ///
    /// Draws `Bernoulli(β^level)`. If it fires, the level above is checked the
    /// same way (at level 1 the top policy simply re-chooses) and then `o^level`
    /// is resampled under the refreshed prefix. Returns the terminated levels in
    /// ascending order.
    pub fn choose_terminated_options(&mut self, next_state: usize, level: usize) -> Result<Vec<usize>> {
        let top = self.depth() - 1;
        if level > top {
            return Err(LearnError::State(format!(
                "termination checked at level {level} but only {top} option levels exist"
            )));
        }
        self.stack.require_full(self.depth())?;
        let mut terminated = Vec::new();
        self.terminate_from(next_state, level, false, &mut terminated)?;
        terminated.reverse();
        Ok(terminated)
    }

    fn terminate_from(
        &mut self,
        state: usize,
        level: usize,
        cached_top: bool,
        out: &mut Vec<usize>,
    ) -> Result<()> {
        if level == 0 {
            return Ok(());
        }
        let logit = self
            .params
            .termination_logit(state, &self.stack.options()[..level])?;
        if !self.rng.bernoulli(sigmoid(logit)) {
            return Ok(());
        }
        out.push(level);
        self.terminate_from(state, level - 1, cached_top, out)?;
        let o = self.sample_level(level, state, cached_top)?;
        self.stack.set(level, o)?;
        Ok(())
    }

    /// One update from the transition `(state, action, reward, next_state)` taken
    /// under the current stack, followed by the stack refresh unless `done`.
    pub fn learn_step(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        done: bool,
    ) -> Result<StepRecord> {
        let depth = self.depth();
        self.stack.require_full(depth).map_err(|e| LearnError::State(e.to_string()))?;
        if action >= self.config.num_actions {
            return Err(hoc_core::HocError::Index {
                what: "action",
                index: action,
                bound: self.config.num_actions,
            }
            .into());
        }
        let options = self.stack.options().to_vec();
        let mut path = options.clone();
        path.push(action);
        let (c, params) = (&self.config, &self.params);

        self.arrival.recompute(c, params, &self.critics, next_state, &options)?;
        let target = if done {
            reward
        } else {
            reward + c.gamma * self.arrival.arrival(depth - 1)?
        };
        for j in 1..=depth {
            let q = self.critics.get_mut(state, &path[..j])?;
            *q += c.lr_critic * (target - *q);
        }
        // values at next_state only read next_state's tables
        if state == next_state {
            self.arrival.recompute(c, params, &self.critics, next_state, &options)?;
        }

        for j in 1..=depth {
            if j == 1 && c.top_is_greedy() {
                continue;
            }
            let logits = params.policy_row(j, state, &path[..j - 1])?;
            let probs = &mut self.probs[..logits.len()];
            softmax_into(logits, c.temperature(j), probs);
            let mut scale = self.critics.get(state, &path[..j])?;
            if c.policy_baseline {
                scale -= eval_q_omega(c, params, &self.critics, state, &path[..j - 1])?;
            }
            let delta = &mut self.policy_delta[j - 1];
            log_policy_score_into(probs, path[j - 1], c.temperature(j), delta);
            let step = c.lr_policy * scale;
            delta.iter_mut().for_each(|d| *d *= step);
        }
        for j in 1..depth {
            let beta = sigmoid(params.termination_logit(next_state, &options[..j])?);
            let gate = termination_gate(params, next_state, &options, j)?;
            let adv = self.arrival.advantage(j)?;
            self.termination_delta[j - 1] = sigmoid_grad_step(beta, gate, adv, c.eta, c.lr_termination);
        }

        for j in 1..=depth {
            if j == 1 && self.config.top_is_greedy() {
                continue;
            }
            let row = self.params.policy_row_mut(j, state, &path[..j - 1])?;
            for (l, d) in row.iter_mut().zip(&self.policy_delta[j - 1]) {
                *l += d;
            }
        }
        for j in 1..depth {
            *self.params.termination_logit_mut(next_state, &options[..j])? += self.termination_delta[j - 1];
        }

        let terminated_levels = if done || depth == 1 {
            Vec::new()
        } else {
            // the updates touched next_state's policies only if it equals state
            let mut out = Vec::new();
            self.terminate_from(next_state, depth - 1, state != next_state, &mut out)?;
            out.reverse();
            out
        };
        self.stack.action = None;
        Ok(StepRecord {
            state,
            options,
            action,
            reward,
            next_state,
            terminated_levels,
            next_options: self.stack.options().to_vec(),
            done,
        })
    }
}

/// ε-greedy draw: one uniform decides exploration, then either a uniform
/// choice or a uniform pick among the tied maximizers.
pub(crate) fn epsilon_greedy_sample(values: &[f64], epsilon: f64, rng: &mut HocRng) -> usize {
    if rng.uniform() < epsilon {
        return rng.below(values.len());
    }
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count();
    let pick = if ties == 1 { 0 } else { rng.below(ties) };
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .nth(pick)
        .map(|(i, _)| i)
        .unwrap()
}
