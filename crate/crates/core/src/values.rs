//! Option values recomputed from the critic tables.
//!
//! `Q_Ω(s, o^{1:ℓ-1}) = Σ_{o^ℓ} π^ℓ(o^ℓ | s, o^{1:ℓ-1}) Q_U(s, o^{1:ℓ})`, with
//! `V_Ω(s)` the empty-prefix case. The arrival value `U` mixes these over the
//! termination partition.

use std::cell::RefCell;

use crate::config::HierarchyConfig;
use crate::critics::CriticSet;
use crate::error::{HocError, Result};
use crate::mutation::{self, Mutation};
use crate::params::ParameterSet;
use crate::policy::{
    epsilon_greedy, epsilon_greedy_into, sigmoid, softmax_into, top_option_values,
    top_option_values_into,
};
use crate::stack::OptionStack;
use crate::termination::{termination_partition_into, TerminationEvent, TerminationKind};

const INLINE: usize = 32;

/// Calls `f` with `π^ℓ(· | state, prefix)` as followed by the agent.
pub(crate) fn with_policy<R>(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    level: usize,
    state: usize,
    prefix: &[usize],
    f: impl FnOnce(&[f64]) -> R,
) -> Result<R> {
    if level == 1 && config.top_is_greedy() {
        let values = top_option_values(config, params, critics, state)?;
        return Ok(f(&epsilon_greedy(&values, config.epsilon)));
    }
    let logits = params.policy_row(level, state, prefix)?;
    let tau = config.temperature(level);
    if logits.len() <= INLINE {
        let mut buf = [0.0; INLINE];
        let out = &mut buf[..logits.len()];
        softmax_into(logits, tau, out);
        Ok(f(out))
    } else {
        let mut out = vec![0.0; logits.len()];
        softmax_into(logits, tau, &mut out);
        Ok(f(&out))
    }
}

/// `Q_Ω(state, prefix)` where `prefix = o^{1:ℓ-1}` and `ℓ = prefix.len() + 1 <= N`.
pub fn eval_q_omega(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    state: usize,
    prefix: &[usize],
) -> Result<f64> {
    let level = prefix.len() + 1;
    if level > config.depth() {
        return Err(HocError::Stack(format!(
            "prefix of {} options is longer than the {} option levels",
            prefix.len(),
            config.depth() - 1
        )));
    }
    let row = critics.row(level, state, prefix)?;
    with_policy(config, params, critics, level, state, prefix, |pi| {
        pi.iter().zip(row).fold(0.0, |acc, (p, q)| acc + p * q)
    })
}

/// `V_Ω(state)`.
pub fn eval_v_omega(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    state: usize,
) -> Result<f64> {
    eval_q_omega(config, params, critics, state, &[])
}

/// Termination probabilities `β^j(state, o^{1:j})` for `j = 1..N-1` along a full stack.
pub fn stack_betas(params: &ParameterSet, state: usize, options: &[usize]) -> Result<Vec<f64>> {
    (1..=options.len())
        .map(|j| Ok(sigmoid(params.termination_logit(state, &options[..j])?)))
        .collect()
}

/// Everything `U` and `A_Ω` need along one option prefix at one state.
///
/// Computing these once per state lets a caller evaluate the arrival value and
/// every level's advantage without repeating the policy expectations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StackValues {
    depth: usize,
    /// `β^j(s, o^{1:j})` at index `j-1`.
    pub betas: Vec<f64>,
    /// `Q_Ω(s, o^{1:i})` at index `i`, so `q[0] = V_Ω(s)`.
    pub q: Vec<f64>,
    /// `Q_Ω(s, o^1)` for every top option when the top level is ε-greedy.
    pub top_values: Vec<f64>,
    top_probs: Vec<f64>,
    events: RefCell<Vec<TerminationEvent>>,
}

impl StackValues {
    pub fn compute(
        config: &HierarchyConfig,
        params: &ParameterSet,
        critics: &CriticSet,
        state: usize,
        options: &[usize],
    ) -> Result<Self> {
        let mut v = StackValues::default();
        v.recompute(config, params, critics, state, options)?;
        Ok(v)
    }

    /// Refills the buffers for `(state, options)`; `options` may be any prefix.
    pub fn recompute(
        &mut self,
        config: &HierarchyConfig,
        params: &ParameterSet,
        critics: &CriticSet,
        state: usize,
        options: &[usize],
    ) -> Result<()> {
        let depth = config.depth();
        if options.len() >= depth {
            return Err(HocError::Stack(format!(
                "{} options given for {} option levels",
                options.len(),
                depth - 1
            )));
        }
        self.depth = depth;
        self.betas.clear();
        self.q.clear();
        self.top_values.clear();
        for j in 1..=options.len() {
            self.betas.push(sigmoid(params.termination_logit(state, &options[..j])?));
        }
        if config.top_is_greedy() {
            top_option_values_into(config, params, critics, state, &mut self.top_values)?;
            self.top_probs.resize(self.top_values.len(), 0.0);
            epsilon_greedy_into(&self.top_values, config.epsilon, &mut self.top_probs);
            let row = critics.row(1, state, &[])?;
            let v = self.top_probs.iter().zip(row).fold(0.0, |acc, (p, q)| acc + p * q);
            self.q.push(v);
            if let Some(&o1) = options.first() {
                let q1 = *self
                    .top_values
                    .get(o1)
                    .ok_or_else(|| HocError::index("option", o1, self.top_values.len()))?;
                self.q.push(q1);
            }
        } else {
            self.q.push(eval_q_omega(config, params, critics, state, &[])?);
        }
        for i in self.q.len()..=options.len() {
            self.q.push(eval_q_omega(config, params, critics, state, &options[..i])?);
        }
        Ok(())
    }

    /// Number of options the values were computed along.
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Arrival value `U(s, o^{1:ℓ})`; requires the full stack.
    pub fn arrival(&self, level: usize) -> Result<f64> {
        let depth = self.depth;
        if self.len() != depth - 1 {
            return Err(HocError::Stack(format!(
                "arrival value needs all {} options, found {}",
                depth - 1,
                self.len()
            )));
        }
        if level >= depth {
            return Err(HocError::Level {
                level,
                depth,
                allowed: "0..=N-1",
            });
        }
        let v = self.q[0];
        if depth == 1 {
            return Ok(v);
        }
        let mut events = self.events.borrow_mut();
        termination_partition_into(&self.betas, level, &mut events)?;
        let mut total = 0.0;
        let mut lower_weight = 0.0;
        let mut any_lower = false;
        for e in events.iter() {
            match e.kind {
                TerminationKind::NoneTerminate => {
                    if !mutation::is_active(Mutation::OmitNoneTerm) {
                        total += e.weight * self.q[depth - 1];
                    }
                }
                TerminationKind::AllTerminate => {
                    if !mutation::is_active(Mutation::OmitAllTerm) {
                        total += e.weight * v;
                    }
                }
                TerminationKind::LowerOnlyTerminate(_) => {
                    any_lower = true;
                    lower_weight += e.weight;
                }
                TerminationKind::HigherTerminate(i) => {
                    if !mutation::is_active(Mutation::OmitHigherTerm) {
                        total += e.weight * self.q[i];
                    }
                }
            }
        }
        if any_lower && !mutation::is_active(Mutation::OmitLowerOnlyTerm) {
            total += lower_weight * self.q[level];
        }
        Ok(total)
    }

    /// Generalized advantage `A_Ω(s, o^{1:ℓ})` for `1 <= ℓ <= len()`.
    pub fn advantage(&self, level: usize) -> Result<f64> {
        let depth = self.depth;
        if level == 0 || level >= depth {
            return Err(HocError::Level {
                level,
                depth,
                allowed: "1..=N-1",
            });
        }
        if self.len() < level {
            return Err(HocError::Stack(format!(
                "advantage at level {level} needs {level} active options, found {}",
                self.len()
            )));
        }
        let mut all_above = 1.0;
        for j in (1..level).rev() {
            all_above *= self.betas[j - 1];
        }
        let mut alternatives = self.q[0] * all_above;
        for i in 1..level {
            let mut above = 1.0;
            for k in (i + 1..level).rev() {
                above *= self.betas[k - 1];
            }
            alternatives += (1.0 - self.betas[i - 1]) * self.q[i] * above;
        }
        Ok(self.q[level] - alternatives)
    }
}

/// Arrival value `U(state, o^{1:ℓ})`.
///
/// `stack` must hold all `N-1` active options, because whether the lowest
/// option continues depends on the full stack. `level` picks which prefix
/// plays the role of `o^{1:ℓ}` (`0..=N-1`). At `level = N-1` every outcome is
/// valued at the prefix that survives it, which is the one-step bootstrap used
/// by the learner. At lower levels the outcomes that keep `o^{1:ℓ}` alive are
/// all valued at `Q_Ω(state, o^{1:ℓ})`.
pub fn eval_u(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    state: usize,
    stack: &OptionStack,
    level: usize,
) -> Result<f64> {
    let depth = config.depth();
    stack.require_full(depth)?;
    if level >= depth {
        return Err(HocError::Level {
            level,
            depth,
            allowed: "0..=N-1",
        });
    }
    StackValues::compute(config, params, critics, state, stack.options())?.arrival(level)
}

/// Generalized advantage `A_Ω(state, o^{1:ℓ})` for `1 <= ℓ <= N-1`.
///
/// The value of keeping `o^ℓ` minus the value of handing control back up,
/// weighted by how far up the termination cascade would reach.
pub fn advantage(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    state: usize,
    stack: &OptionStack,
    level: usize,
) -> Result<f64> {
    let depth = config.depth();
    if level == 0 || level >= depth {
        return Err(HocError::Level {
            level,
            depth,
            allowed: "1..=N-1",
        });
    }
    if stack.len() < level {
        return Err(HocError::Stack(format!(
            "advantage at level {level} needs {level} active options, found {}",
            stack.len()
        )));
    }
    StackValues::compute(config, params, critics, state, &stack.options()[..level])?.advantage(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TopPolicyMode;
    use crate::rng::HocRng;

    fn pg_config(options: Vec<usize>) -> HierarchyConfig {
        let mut c = HierarchyConfig::new(3, 2, options);
        c.top_policy_mode = TopPolicyMode::PolicyGradient;
        c
    }

    fn randomize(c: &HierarchyConfig, seed: u64) -> (ParameterSet, CriticSet) {
        let mut rng = HocRng::new(seed, 0);
        let mut p = ParameterSet::zeros(c);
        let mut q = CriticSet::zeros(c);
        for t in p.policy_logits.iter_mut().chain(p.termination_logits.iter_mut()) {
            t.iter_mut().for_each(|x| *x = rng.range(-2.0, 2.0));
        }
        for t in q.q_u.iter_mut() {
            t.iter_mut().for_each(|x| *x = rng.range(-1.0, 3.0));
        }
        (p, q)
    }

    #[test]
    fn uniform_two_options_average() {
        let c = pg_config(vec![2]);
        let p = ParameterSet::zeros(&c);
        let mut q = CriticSet::zeros(&c);
        *q.get_mut(0, &[0]).unwrap() = 1.0;
        *q.get_mut(0, &[1]).unwrap() = 3.0;
        assert_eq!(eval_v_omega(&c, &p, &q, 0).unwrap(), 2.0);
    }

    #[test]
    fn one_hot_policy_selects_entry() {
        let c = pg_config(vec![2, 2]);
        let (mut p, q) = randomize(&c, 4);
        let row = p.policy_row_mut(2, 1, &[1]).unwrap();
        row[0] = -1e6;
        row[1] = 1e6;
        let got = eval_q_omega(&c, &p, &q, 1, &[1]).unwrap();
        assert_eq!(got, q.get(1, &[1, 1]).unwrap());
    }

    #[test]
    fn q_omega_is_a_dot_product() {
        let c = pg_config(vec![2, 3]);
        let (p, q) = randomize(&c, 9);
        for s in 0..3 {
            for o1 in 0..2 {
                for o2 in 0..3 {
                    let logits = p.policy_row(3, s, &[o1, o2]).unwrap();
                    let tau = c.temperature(3);
                    let z: Vec<f64> = logits.iter().map(|l| (l / tau).exp()).collect();
                    let zs: f64 = z.iter().sum();
                    let mut expect = 0.0;
                    for a in 0..2 {
                        expect += z[a] / zs * q.get(s, &[o1, o2, a]).unwrap();
                    }
                    let got = eval_q_omega(&c, &p, &q, s, &[o1, o2]).unwrap();
                    assert!((got - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn flat_arrival_value_is_state_value() {
        let c = pg_config(vec![]);
        let (p, q) = randomize(&c, 1);
        let u = eval_u(&c, &p, &q, 2, &OptionStack::new(), 0).unwrap();
        assert_eq!(u, eval_v_omega(&c, &p, &q, 2).unwrap());
    }

    #[test]
    fn two_level_limits() {
        let c = pg_config(vec![2]);
        let (mut p, q) = randomize(&c, 2);
        let stack = OptionStack::from_options(vec![1]);
        *p.termination_logit_mut(0, &[1]).unwrap() = -1e3;
        let u = eval_u(&c, &p, &q, 0, &stack, 1).unwrap();
        assert_eq!(u, eval_q_omega(&c, &p, &q, 0, &[1]).unwrap());
        *p.termination_logit_mut(0, &[1]).unwrap() = 1e3;
        let u = eval_u(&c, &p, &q, 0, &stack, 1).unwrap();
        assert_eq!(u, eval_v_omega(&c, &p, &q, 0).unwrap());
    }

    #[test]
    fn two_level_matches_option_critic_formula() {
        let c = pg_config(vec![3]);
        let (p, q) = randomize(&c, 3);
        for s in 0..3 {
            for o in 0..3 {
                let b = sigmoid(p.termination_logit(s, &[o]).unwrap());
                let qo = eval_q_omega(&c, &p, &q, s, &[o]).unwrap();
                let v = eval_v_omega(&c, &p, &q, s).unwrap();
                let u = eval_u(&c, &p, &q, s, &OptionStack::from_options(vec![o]), 1).unwrap();
                assert_eq!(u, (1.0 - b) * qo + b * v);
                let a = advantage(&c, &p, &q, s, &OptionStack::from_options(vec![o]), 1).unwrap();
                assert_eq!(a, qo - v);
            }
        }
    }

    #[test]
    fn advantage_limits_at_level_two() {
        let c = pg_config(vec![2, 2]);
        let (mut p, q) = randomize(&c, 5);
        let stack = OptionStack::from_options(vec![0, 1]);
        let q2 = eval_q_omega(&c, &p, &q, 1, &[0, 1]).unwrap();
        *p.termination_logit_mut(1, &[0]).unwrap() = 1e3;
        let a = advantage(&c, &p, &q, 1, &stack, 2).unwrap();
        let v = eval_v_omega(&c, &p, &q, 1).unwrap();
        assert!((a - (q2 - v)).abs() < 1e-12);
        *p.termination_logit_mut(1, &[0]).unwrap() = -1e3;
        let a = advantage(&c, &p, &q, 1, &stack, 2).unwrap();
        let q1 = eval_q_omega(&c, &p, &q, 1, &[0]).unwrap();
        assert!((a - (q2 - q1)).abs() < 1e-12);
    }

    #[test]
    fn errors_on_malformed_input() {
        let c = pg_config(vec![2, 2]);
        let (p, q) = randomize(&c, 6);
        let short = OptionStack::from_options(vec![0]);
        assert!(matches!(eval_u(&c, &p, &q, 0, &short, 1), Err(HocError::Stack(_))));
        let full = OptionStack::from_options(vec![0, 1]);
        assert!(matches!(eval_u(&c, &p, &q, 0, &full, 3), Err(HocError::Level { .. })));
        assert!(matches!(advantage(&c, &p, &q, 0, &full, 3), Err(HocError::Level { .. })));
        assert!(matches!(advantage(&c, &p, &q, 0, &full, 0), Err(HocError::Level { .. })));
        assert!(matches!(
            eval_q_omega(&c, &p, &q, 7, &[]),
            Err(HocError::Index { .. })
        ));
    }
}
