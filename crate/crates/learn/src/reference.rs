//! Stand-alone flat learners used as reduction references.
//!
//! [`OptionCriticReference`] is tabular option-critic with intra-option
//! Q-learning, written directly over flat arrays with no notion of a hierarchy.
//! [`ActorCriticReference`] is one-step actor-critic. Both draw from the
//! learner RNG stream in the same order as [`Learner`](crate::Learner) and use
//! the same floating-point expressions, so with matched seeds the hierarchical
//! learner at `N = 2` and `N = 1` must reproduce them bit for bit.

use hoc_core::rng::LEARNER_STREAM;
use hoc_core::{HierarchyConfig, HocRng, TopPolicyMode};

fn softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    for &l in logits {
        m = m.max(l);
    }
    let mut out: Vec<f64> = logits.iter().map(|&l| ((l - m) / tau).exp()).collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    out
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        x.exp() / (1.0 + x.exp())
    }
}

fn expectation(probs: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..probs.len() {
        acc += probs[i] * values[i];
    }
    acc
}

/// Softmax score step `((1[k = chosen] - π_k) / τ) * (lr * scale)` added to `logits`.
fn score_step(logits: &mut [f64], probs: &[f64], chosen: usize, tau: f64, lr: f64, scale: f64) {
    for k in 0..logits.len() {
        let indicator = if k == chosen { 1.0 } else { 0.0 };
        logits[k] += (indicator - probs[k]) / tau * (lr * scale);
    }
}

/// Two-level option-critic over `n_o` options.
#[derive(Debug, Clone)]
pub struct OptionCriticReference {
    n_o: usize,
    n_a: usize,
    gamma: f64,
    lr_critic: f64,
    lr_policy: f64,
    lr_termination: f64,
    tau_option: f64,
    tau_action: f64,
    epsilon: f64,
    eta: f64,
    greedy_top: bool,
    baseline: bool,
    /// `Q(s, o)` at `s * n_o + o`
    pub q_option: Vec<f64>,
    /// `Q(s, o, a)` at `(s * n_o + o) * n_a + a`
    pub q_action: Vec<f64>,
    /// option-selection logits at `s * n_o + o` (unused when the top is greedy)
    pub theta_option: Vec<f64>,
    /// intra-option logits at `(s * n_o + o) * n_a + a`
    pub theta_action: Vec<f64>,
    /// termination logits at `s * n_o + o`
    pub phi: Vec<f64>,
    pub option: usize,
    rng: HocRng,
}

impl OptionCriticReference {
    /// Takes sizes and hyperparameters from a two-level `config`.
    pub fn new(config: &HierarchyConfig, seed: u64) -> Self {
        assert_eq!(config.depth(), 2, "option-critic reference needs exactly one option level");
        let (n_s, n_o, n_a) = (config.num_states, config.options_per_level[0], config.num_actions);
        OptionCriticReference {
            n_o,
            n_a,
            gamma: config.gamma,
            lr_critic: config.lr_critic,
            lr_policy: config.lr_policy,
            lr_termination: config.lr_termination,
            tau_option: config.temperature_per_level[0],
            tau_action: config.temperature_per_level[1],
            epsilon: config.epsilon,
            eta: config.eta,
            greedy_top: config.top_policy_mode == TopPolicyMode::EpsilonGreedyOverCritic,
            baseline: config.policy_baseline,
            q_option: vec![0.0; n_s * n_o],
            q_action: vec![0.0; n_s * n_o * n_a],
            theta_option: vec![0.0; n_s * n_o],
            theta_action: vec![0.0; n_s * n_o * n_a],
            phi: vec![0.0; n_s * n_o],
            option: 0,
            rng: HocRng::new(seed, LEARNER_STREAM),
        }
    }

    fn action_probs(&self, s: usize, o: usize) -> Vec<f64> {
        let base = (s * self.n_o + o) * self.n_a;
        softmax(&self.theta_action[base..base + self.n_a], self.tau_action)
    }

    fn q_omega(&self, s: usize, o: usize) -> f64 {
        let base = (s * self.n_o + o) * self.n_a;
        expectation(&self.action_probs(s, o), &self.q_action[base..base + self.n_a])
    }

    fn option_values(&self, s: usize) -> Vec<f64> {
        (0..self.n_o).map(|o| self.q_omega(s, o)).collect()
    }

    fn option_probs(&self, s: usize) -> Vec<f64> {
        if self.greedy_top {
            let values = self.option_values(s);
            let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ties = values.iter().filter(|v| **v == best).count() as f64;
            values
                .iter()
                .map(|&v| {
                    let g = if v == best { (1.0 - self.epsilon) / ties } else { 0.0 };
                    self.epsilon / self.n_o as f64 + g
                })
                .collect()
        } else {
            softmax(&self.theta_option[s * self.n_o..(s + 1) * self.n_o], self.tau_option)
        }
    }

    fn value(&self, s: usize) -> f64 {
        expectation(&self.option_probs(s), &self.q_option[s * self.n_o..(s + 1) * self.n_o])
    }

    fn pick_option(&mut self, s: usize) -> usize {
        if self.greedy_top {
            let values = self.option_values(s);
            if self.rng.uniform() < self.epsilon {
                return self.rng.below(self.n_o);
            }
            let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let argmax: Vec<usize> = (0..self.n_o).filter(|&o| values[o] == best).collect();
            if argmax.len() == 1 {
                argmax[0]
            } else {
                argmax[self.rng.below(argmax.len())]
            }
        } else {
            let p = self.option_probs(s);
            self.rng.categorical(&p)
        }
    }

    pub fn start_episode(&mut self, s: usize) -> usize {
        self.option = self.pick_option(s);
        self.option
    }

    pub fn act(&mut self, s: usize) -> usize {
        let p = self.action_probs(s, self.option);
        self.rng.categorical(&p)
    }

    /// Updates from `(s, a, r, s2)` and returns whether the option terminated.
    pub fn learn(&mut self, s: usize, a: usize, r: f64, s2: usize, done: bool) -> bool {
        let o = self.option;
        let so = s * self.n_o + o;
        let s2o = s2 * self.n_o + o;
        let soa = so * self.n_a + a;

        let target = if done {
            r
        } else {
            let b = logistic(self.phi[s2o]);
            r + self.gamma * ((1.0 - b) * self.q_omega(s2, o) + b * self.value(s2))
        };
        self.q_option[so] += self.lr_critic * (target - self.q_option[so]);
        self.q_action[soa] += self.lr_critic * (target - self.q_action[soa]);

        // all gradients from the pre-step parameters
        let p_top = self.option_probs(s);
        let top_scale = if self.baseline {
            self.q_option[so] - self.value(s)
        } else {
            self.q_option[so]
        };
        let p_act = self.action_probs(s, o);
        let act_scale = if self.baseline {
            self.q_action[soa] - self.q_omega(s, o)
        } else {
            self.q_action[soa]
        };
        let b = logistic(self.phi[s2o]);
        let adv = self.q_omega(s2, o) - self.value(s2);
        let dphi = -self.lr_termination * b * (1.0 - b) * (adv + self.eta);

        if !self.greedy_top {
            let row = &mut self.theta_option[s * self.n_o..(s + 1) * self.n_o];
            score_step(row, &p_top, o, self.tau_option, self.lr_policy, top_scale);
        }
        let base = so * self.n_a;
        let row = &mut self.theta_action[base..base + self.n_a];
        score_step(row, &p_act, a, self.tau_action, self.lr_policy, act_scale);
        self.phi[s2o] += dphi;

        if done {
            return false;
        }
        let terminate = self.rng.bernoulli(logistic(self.phi[s2o]));
        if terminate {
            self.option = self.pick_option(s2);
        }
        terminate
    }
}

/// One-step actor-critic with a softmax policy over actions.
#[derive(Debug, Clone)]
pub struct ActorCriticReference {
    n_a: usize,
    gamma: f64,
    lr_critic: f64,
    lr_policy: f64,
    tau: f64,
    baseline: bool,
    /// `Q(s, a)` at `s * n_a + a`
    pub q: Vec<f64>,
    /// policy logits at `s * n_a + a`
    pub theta: Vec<f64>,
    rng: HocRng,
}

impl ActorCriticReference {
    pub fn new(config: &HierarchyConfig, seed: u64) -> Self {
        assert_eq!(config.depth(), 1, "actor-critic reference is flat");
        let n = config.num_states * config.num_actions;
        ActorCriticReference {
            n_a: config.num_actions,
            gamma: config.gamma,
            lr_critic: config.lr_critic,
            lr_policy: config.lr_policy,
            tau: config.temperature_per_level[0],
            baseline: config.policy_baseline,
            q: vec![0.0; n],
            theta: vec![0.0; n],
            rng: HocRng::new(seed, LEARNER_STREAM),
        }
    }

    fn probs(&self, s: usize) -> Vec<f64> {
        softmax(&self.theta[s * self.n_a..(s + 1) * self.n_a], self.tau)
    }

    fn value(&self, s: usize) -> f64 {
        expectation(&self.probs(s), &self.q[s * self.n_a..(s + 1) * self.n_a])
    }

    pub fn act(&mut self, s: usize) -> usize {
        let p = self.probs(s);
        self.rng.categorical(&p)
    }

    pub fn learn(&mut self, s: usize, a: usize, r: f64, s2: usize, done: bool) {
        let target = if done { r } else { r + self.gamma * self.value(s2) };
        let sa = s * self.n_a + a;
        self.q[sa] += self.lr_critic * (target - self.q[sa]);
        let p = self.probs(s);
        let scale = if self.baseline {
            self.q[sa] - self.value(s)
        } else {
            self.q[sa]
        };
        let row = &mut self.theta[s * self.n_a..(s + 1) * self.n_a];
        score_step(row, &p, a, self.tau, self.lr_policy, scale);
    }
}
