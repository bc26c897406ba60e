use crate::config::HierarchyConfig;
use crate::critics::CriticSet;
use crate::error::{HocError, Result};
use crate::params::ParameterSet;
use crate::values::eval_q_omega;

/// Writes `softmax(logits / temperature)` into `out`.
pub fn softmax_into(logits: &[f64], temperature: f64, out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = ((l - max) / temperature).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, temperature, &mut out);
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `π^ℓ(· | state, prefix)` from the level's softmax logits.
pub fn softmax_policy(
    config: &HierarchyConfig,
    params: &ParameterSet,
    level: usize,
    state: usize,
    prefix: &[usize],
) -> Result<Vec<f64>> {
    let logits = params.policy_row(level, state, prefix)?;
    Ok(softmax(logits, config.temperature(level)))
}

/// `β^ℓ(state, o^{1:ℓ})` with `ℓ = path.len()`, which must lie in `1..=N-1`.
pub fn termination_prob(params: &ParameterSet, state: usize, path: &[usize]) -> Result<f64> {
    Ok(sigmoid(params.termination_logit(state, path)?))
}

/// ε-greedy distribution over `values`, splitting the greedy mass evenly among ties.
pub fn epsilon_greedy(values: &[f64], epsilon: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    epsilon_greedy_into(values, epsilon, &mut out);
    out
}

/// The distribution the agent actually follows at level `ℓ`.
///
/// This is the softmax policy except at level 1 under
/// [`TopPolicyMode::EpsilonGreedyOverCritic`](crate::TopPolicyMode), where it is
/// ε-greedy over `Q_Ω(state, o^1)`.
pub fn policy_distribution(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    level: usize,
    state: usize,
    prefix: &[usize],
) -> Result<Vec<f64>> {
    if level == 1 && config.top_is_greedy() {
        let values = top_option_values(config, params, critics, state)?;
        Ok(epsilon_greedy(&values, config.epsilon))
    } else {
        softmax_policy(config, params, level, state, prefix)
    }
}

/// `Q_Ω(state, o^1)` for every top-level option.
pub fn top_option_values(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    state: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(config.choices_at(1));
    top_option_values_into(config, params, critics, state, &mut out)?;
    Ok(out)
}

/// [`top_option_values`] into a reusable buffer.
pub fn top_option_values_into(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    state: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    if config.depth() < 2 {
        return Err(HocError::Level {
            level: 1,
            depth: config.depth(),
            allowed: "an option level",
        });
    }
    out.clear();
    for o in 0..config.choices_at(1) {
        out.push(eval_q_omega(config, params, critics, state, &[o])?);
    }
    Ok(())
}

/// Writes the ε-greedy distribution over `values` into `out`.
pub fn epsilon_greedy_into(values: &[f64], epsilon: f64, out: &mut [f64]) {
    let n = values.len();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count();
    for (o, &v) in out.iter_mut().zip(values) {
        let greedy = if v == best {
            (1.0 - epsilon) / ties as f64
        } else {
            0.0
        };
        *o = epsilon / n as f64 + greedy;
    }
}
