//! Stochastic gradient steps for the tabular softmax and sigmoid parameterizations.

use crate::error::{HocError, Result};
use crate::mutation::{self, Mutation};
use crate::params::ParameterSet;
use crate::config::HierarchyConfig;
use crate::policy::{sigmoid, softmax_policy};

/// `∂ log π(chosen) / ∂ logit_k = (1[k = chosen] - π_k) / τ`, written into `out`.
pub fn log_policy_score_into(probs: &[f64], chosen: usize, temperature: f64, out: &mut [f64]) {
    for (k, (o, p)) in out.iter_mut().zip(probs).enumerate() {
        let hit = if k == chosen { 1.0 } else { 0.0 };
        *o = (hit - p) / temperature;
    }
}

pub fn log_policy_score(probs: &[f64], chosen: usize, temperature: f64) -> Result<Vec<f64>> {
    if chosen >= probs.len() {
        return Err(HocError::index("chosen option", chosen, probs.len()));
    }
    let mut out = vec![0.0; probs.len()];
    log_policy_score_into(probs, chosen, temperature, &mut out);
    Ok(out)
}

/// Logit deltas `lr * scale * ∂ log π(chosen) / ∂ logits` for an explicit distribution.
pub fn softmax_grad_step(
    probs: &[f64],
    chosen: usize,
    scale: f64,
    lr: f64,
    temperature: f64,
) -> Result<Vec<f64>> {
    let mut out = log_policy_score(probs, chosen, temperature)?;
    out.iter_mut().for_each(|x| *x *= lr * scale);
    Ok(out)
}

/// Logit delta `-lr * gate * β(1-β) * (advantage + η)`.
pub fn sigmoid_grad_step(beta: f64, gate: f64, advantage: f64, eta: f64, lr: f64) -> f64 {
    let step = -lr * gate * beta * (1.0 - beta) * (advantage + eta);
    if mutation::is_active(Mutation::TerminationSignFlip) {
        -step
    } else {
        step
    }
}

/// Deltas for the level-`ℓ` logits at `(state, prefix)` with `lr_policy`.
pub fn policy_grad_step(
    config: &HierarchyConfig,
    params: &ParameterSet,
    level: usize,
    state: usize,
    prefix: &[usize],
    chosen: usize,
    scale: f64,
) -> Result<Vec<f64>> {
    let probs = softmax_policy(config, params, level, state, prefix)?;
    softmax_grad_step(&probs, chosen, scale, config.lr_policy, config.temperature(level))
}

/// Delta for the termination logit at `(state, path)` with `lr_termination` and `η`.
pub fn termination_grad_step(
    config: &HierarchyConfig,
    params: &ParameterSet,
    state: usize,
    path: &[usize],
    gate: f64,
    advantage: f64,
) -> Result<f64> {
    let beta = sigmoid(params.termination_logit(state, path)?);
    Ok(sigmoid_grad_step(beta, gate, advantage, config.eta, config.lr_termination))
}

/// `Π_{i=ℓ+1}^{N-1} β^i(state, o^{1:i})`, the probability that every option
/// below level `ℓ` has already terminated so that `β^ℓ` is consulted.
pub fn termination_gate(
    params: &ParameterSet,
    state: usize,
    options: &[usize],
    level: usize,
) -> Result<f64> {
    let top = params.depth() - 1;
    if level == 0 || level > top {
        return Err(HocError::Level {
            level,
            depth: top + 1,
            allowed: "1..=N-1",
        });
    }
    if options.len() != top {
        return Err(HocError::Stack(format!(
            "gate needs all {top} active options, found {}",
            options.len()
        )));
    }
    if mutation::is_active(Mutation::DropGate) {
        return Ok(1.0);
    }
    let mut gate = 1.0;
    for i in (level + 1..=top).rev() {
        gate *= sigmoid(params.termination_logit(state, &options[..i])?);
    }
    Ok(gate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::softmax;
    use proptest::prelude::*;

    #[test]
    fn termination_step_example() {
        let beta = sigmoid(0.7);
        let d = sigmoid_grad_step(beta, 0.4, 1.3, 0.0, 1.0);
        // β(0.7) = 0.66818777216816610650 (50-digit reference)
        let expect = -0.4 * 0.668_187_772_168_166_1 * (1.0 - 0.668_187_772_168_166_1) * 1.3;
        assert!((d - expect).abs() < 1e-15);
        assert!(d < 0.0);
        let with_eta = sigmoid_grad_step(beta, 0.4, 1.3, 0.5, 1.0);
        assert!(with_eta < d);
    }

    #[test]
    fn gate_is_product_of_lower_betas() {
        let c = HierarchyConfig::new(1, 2, vec![2, 2, 2]);
        let mut p = ParameterSet::zeros(&c);
        *p.termination_logit_mut(0, &[1, 0]).unwrap() = 0.7;
        *p.termination_logit_mut(0, &[1, 0, 1]).unwrap() = -1.2;
        let o = [1, 0, 1];
        assert_eq!(termination_gate(&p, 0, &o, 3).unwrap(), 1.0);
        assert_eq!(termination_gate(&p, 0, &o, 2).unwrap(), sigmoid(-1.2));
        let g1 = termination_gate(&p, 0, &o, 1).unwrap();
        assert!((g1 - sigmoid(-1.2) * sigmoid(0.7)).abs() < 1e-16);
        assert!(termination_gate(&p, 0, &o, 0).is_err());
        assert!(termination_gate(&p, 0, &o[..2], 1).is_err());
    }

    #[test]
    fn uniform_two_choice_step() {
        let mut c = HierarchyConfig::new(1, 2, vec![]);
        c.lr_policy = 1.0;
        let p = ParameterSet::zeros(&c);
        let d = policy_grad_step(&c, &p, 1, 0, &[], 0, 1.0).unwrap();
        assert_eq!(d, vec![0.5, -0.5]);
        let z = policy_grad_step(&c, &p, 1, 0, &[], 1, 0.0).unwrap();
        assert!(z.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn termination_step_uses_config() {
        let mut c = HierarchyConfig::new(1, 2, vec![2]);
        c.lr_termination = 1.0;
        c.eta = 0.2;
        let mut p = ParameterSet::zeros(&c);
        *p.termination_logit_mut(0, &[1]).unwrap() = 0.7;
        let d = termination_grad_step(&c, &p, 0, &[1], 0.4, 1.1).unwrap();
        assert_eq!(d, sigmoid_grad_step(sigmoid(0.7), 0.4, 1.1, 0.2, 1.0));
        let zero = termination_grad_step(&c, &p, 0, &[1], 0.4, -0.2).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn score_rejects_bad_index() {
        assert!(log_policy_score(&[0.5, 0.5], 2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn score_sums_to_zero_under_policy(
            logits in prop::collection::vec(-3.0f64..3.0, 2..6),
            tau in 0.2f64..2.0,
        ) {
            let pi = softmax(&logits, tau);
            let mut expected = vec![0.0; pi.len()];
            for (c, &pc) in pi.iter().enumerate() {
                let g = log_policy_score(&pi, c, tau).unwrap();
                for (e, x) in expected.iter_mut().zip(g) {
                    *e += pc * x;
                }
            }
            for e in expected {
                prop_assert!(e.abs() < 1e-12);
            }
        }

        #[test]
        fn score_matches_finite_difference(
            logits in prop::collection::vec(-3.0f64..3.0, 2..6),
            tau in 0.3f64..2.0,
            pick in 0usize..6,
        ) {
            let chosen = pick % logits.len();
            let pi = softmax(&logits, tau);
            let g = log_policy_score(&pi, chosen, tau).unwrap();
            let h = 1e-5;
            for k in 0..logits.len() {
                let mut up = logits.clone();
                let mut dn = logits.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (softmax(&up, tau)[chosen].ln() - softmax(&dn, tau)[chosen].ln()) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
            }
        }

        #[test]
        fn sigmoid_derivative_matches_finite_difference(x in -6.0f64..6.0) {
            let h = 1e-5;
            let fd = (sigmoid(x + h) - sigmoid(x - h)) / (2.0 * h);
            let b = sigmoid(x);
            let d = -sigmoid_grad_step(b, 1.0, 1.0, 0.0, 1.0);
            prop_assert!((fd - d).abs() <= 1e-6 * d.max(1e-3));
        }

        #[test]
        fn larger_eta_never_raises_the_logit(
            x in -4.0f64..4.0, gate in 0.0f64..1.0, adv in -2.0f64..2.0,
            eta in 0.0f64..1.0, extra in 0.0f64..1.0,
        ) {
            let b = sigmoid(x);
            let a = sigmoid_grad_step(b, gate, adv, eta, 0.3);
            let c = sigmoid_grad_step(b, gate, adv, eta + extra, 0.3);
            prop_assert!(c <= a);
        }
    }
}
