//! Sampling cross-checks that drive the learner's own action and termination
//! machinery with frozen parameters.

use hoc_core::rng::ENV_STREAM;
use hoc_core::{HocRng, OptionStack};
use hoc_envs::TabularModel;
use hoc_learn::Learner;

use crate::chain::AugmentedChain;
use crate::Result;

const STOP_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
}

impl ReturnEstimate {
    /// `|mean - exact|` in standard errors.
    pub fn z_score(&self, exact: f64) -> f64 {
        (self.mean - exact).abs() / self.std_error.max(f64::MIN_POSITIVE)
    }
}

fn frozen_learner(chain: &AugmentedChain, seed: u64) -> Result<Learner> {
    let mut config = chain.config().clone();
    config.lr_critic = 0.0;
    config.lr_policy = 0.0;
    config.lr_termination = 0.0;
    let mut learner = Learner::new(config, seed)?;
    learner.params = chain.params().clone();
    Ok(learner)
}

fn sample_next(model: &TabularModel, s: usize, a: usize, rng: &mut HocRng) -> usize {
    rng.categorical(model.row(s, a))
}

/// Monte Carlo estimate of the chain's start value.
///
/// Each episode starts from the chain's start `(s0, o0)`; after every reward
/// the episode continues with probability `γ`, so the undiscounted sum of
/// rewards is an unbiased sample of the discounted return. Terminal states end
/// the episode.
pub fn monte_carlo_return(chain: &AugmentedChain, episodes: usize, seed: u64) -> Result<ReturnEstimate> {
    let model = chain.model();
    let gamma = chain.config().gamma;
    let (s0, o0) = chain.decode(chain.start());
    let top = chain.config().depth() - 1;
    let mut learner = frozen_learner(chain, seed)?;
    let mut env_rng = HocRng::new(seed, ENV_STREAM);
    let mut stop_rng = HocRng::new(seed, STOP_STREAM);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..episodes {
        learner.stack = OptionStack::from_options(o0.clone());
        let mut s = s0;
        let mut g = 0.0;
        loop {
            let a = learner.choose_action(s)?;
            g += model.reward(s, a);
            let s2 = sample_next(model, s, a, &mut env_rng);
            if model.is_terminal(s2) || !stop_rng.bernoulli(gamma) {
                break;
            }
            learner.choose_terminated_options(s2, top)?;
            s = s2;
        }
        sum += g;
        sum_sq += g * g;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    Ok(ReturnEstimate {
        mean,
        std_error: (var.max(0.0) / n).sqrt(),
        episodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCheck {
    pub steps: usize,
    /// Largest `|count - n K| / sqrt(n K (1 - K))` over entries with `0 < K < 1`.
    pub max_z: f64,
    /// Entries beyond `bound` standard deviations, or observed where `K = 0`.
    pub violations: usize,
}

/// Simulates `steps` one-step transitions of the learner from uniformly drawn
/// augmented states and compares the transition counts with the kernel.
pub fn kernel_frequencies(chain: &AugmentedChain, steps: usize, bound: f64, seed: u64) -> Result<FrequencyCheck> {
    let m = chain.len();
    let top = chain.config().depth() - 1;
    let model = chain.model();
    let mut learner = frozen_learner(chain, seed)?;
    let mut env_rng = HocRng::new(seed, ENV_STREAM);
    let mut pick_rng = HocRng::new(seed, STOP_STREAM);
    let mut counts = vec![0usize; m * m];
    let mut visits = vec![0usize; m];
    for _ in 0..steps {
        let x = pick_rng.below(m);
        let (s, o) = chain.decode(x);
        learner.stack = OptionStack::from_options(o);
        let a = learner.choose_action(s)?;
        let s2 = sample_next(model, s, a, &mut env_rng);
        learner.choose_terminated_options(s2, top)?;
        let x2 = chain.index(s2, learner.stack.options());
        counts[x * m + x2] += 1;
        visits[x] += 1;
    }
    let mut max_z: f64 = 0.0;
    let mut violations = 0;
    for x in 0..m {
        let n = visits[x] as f64;
        for x2 in 0..m {
            let k = chain.kernel[(x, x2)];
            let c = counts[x * m + x2] as f64;
            if k <= 0.0 || k >= 1.0 {
                if (c - n * k).abs() > 0.0 {
                    violations += 1;
                }
                continue;
            }
            let z = (c - n * k).abs() / (n * k * (1.0 - k)).sqrt();
            max_z = max_z.max(z);
            if z > bound {
                violations += 1;
            }
        }
    }
    Ok(FrequencyCheck {
        steps,
        max_z,
        violations,
    })
}
