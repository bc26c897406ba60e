use crate::error::{HocError, Result};
use crate::layout::Layout;

/// How the top-level option (level 1) is chosen when `N >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopPolicyMode {
    /// ε-greedy over `Q_Ω(s, o^1)`; level-1 logits are never updated.
    EpsilonGreedyOverCritic,
    /// Softmax over level-1 logits, trained by policy gradient like every other level.
    PolicyGradient,
}

/// Static shape and hyperparameters of a hierarchical agent.
///
/// The depth is implied by `options_per_level`: `N = options_per_level.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    pub num_states: usize,
    pub num_actions: usize,
    /// `|Ω^ℓ|` for `ℓ = 1..N-1`. Empty for a flat actor-critic.
    pub options_per_level: Vec<usize>,
    pub gamma: f64,
    /// One softmax temperature per level `1..N`.
    pub temperature_per_level: Vec<f64>,
    pub lr_critic: f64,
    pub lr_policy: f64,
    pub lr_termination: f64,
    pub epsilon: f64,
    /// Termination regularizer added to the advantage in termination updates.
    pub eta: f64,
    pub top_policy_mode: TopPolicyMode,
    /// Scale policy updates by `Q_U - Q_Ω` instead of the raw `Q_U`.
    pub policy_baseline: bool,
}

impl HierarchyConfig {
    /// A config with uniform temperature 1, γ = 0.99, ε = 0.1, η = 0 and all learning rates 0.5.
    pub fn new(num_states: usize, num_actions: usize, options_per_level: Vec<usize>) -> Self {
        let depth = options_per_level.len() + 1;
        HierarchyConfig {
            num_states,
            num_actions,
            options_per_level,
            gamma: 0.99,
            temperature_per_level: vec![1.0; depth],
            lr_critic: 0.5,
            lr_policy: 0.5,
            lr_termination: 0.5,
            epsilon: 0.1,
            eta: 0.0,
            top_policy_mode: TopPolicyMode::EpsilonGreedyOverCritic,
            policy_baseline: false,
        }
    }

    pub fn depth(&self) -> usize {
        self.options_per_level.len() + 1
    }

    /// Number of choices at level `ℓ` (options for `ℓ < N`, primitive actions at `ℓ = N`).
    pub fn choices_at(&self, level: usize) -> usize {
        if level == self.depth() {
            self.num_actions
        } else {
            self.options_per_level[level - 1]
        }
    }

    pub fn temperature(&self, level: usize) -> f64 {
        self.temperature_per_level[level - 1]
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.num_states, &self.options_per_level, self.num_actions)
    }

    /// True when level 1 is an option level chosen ε-greedily from the critic.
    pub fn top_is_greedy(&self) -> bool {
        self.depth() >= 2 && self.top_policy_mode == TopPolicyMode::EpsilonGreedyOverCritic
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_states == 0 {
            problems.push("num_states must be positive".to_string());
        }
        if self.num_actions == 0 {
            problems.push("num_actions must be positive".to_string());
        }
        if self.options_per_level.contains(&0) {
            problems.push("every option level needs at least one option".to_string());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            problems.push(format!("gamma {} not in [0, 1)", self.gamma));
        }
        if self.temperature_per_level.len() != self.depth() {
            problems.push(format!(
                "expected {} temperatures, got {}",
                self.depth(),
                self.temperature_per_level.len()
            ));
        }
        if self.temperature_per_level.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            problems.push("temperatures must be positive and finite".to_string());
        }
        for (name, lr) in [
            ("lr_critic", self.lr_critic),
            ("lr_policy", self.lr_policy),
            ("lr_termination", self.lr_termination),
        ] {
            if !(lr >= 0.0 && lr.is_finite()) {
                problems.push(format!("{name} must be non-negative, got {lr}"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            problems.push(format!("epsilon {} not in [0, 1]", self.epsilon));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            problems.push(format!("eta must be non-negative, got {}", self.eta));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HocError::Config(problems.join("; ")))
        }
    }
}
