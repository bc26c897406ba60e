//! Exact gradients of the discounted return and their finite-difference checks.
//!
//! The analytic side weights the learner's own per-sample update directions by
//! exact discounted occupancies of the augmented chain; the finite-difference
//! side only ever re-solves the chain.

use hoc_core::{
    advantage, softmax, softmax_grad_step, termination_gate, termination_grad_step, HierarchyConfig,
    OptionStack, ParameterSet,
};
use hoc_envs::TabularModel;
use nalgebra::DVector;

use crate::chain::{for_each_extension, AugmentedChain};
use crate::exact::{expected_return, solve_discounted, ExactValues};
use crate::{OracleError, Result};

/// Discounted occupancy `μ(x) = Σ_t γ^t P(x_t = x | x_0 = start)`.
pub fn occupancy(chain: &AugmentedChain) -> Result<DVector<f64>> {
    let mut e = DVector::zeros(chain.len());
    e[chain.start()] = 1.0;
    solve_discounted(chain, &e, true)
}

/// Discounted mass of arriving in `s'` with stack `o` still active, before terminations:
/// `Σ_{x : o_x = o} μ(x) γ Σ_a π^N(a | x) P(s' | s_x, a)`, indexed `s' * stacks + o`.
pub fn arrival_occupancy(chain: &AugmentedChain, mu: &DVector<f64>) -> Vec<f64> {
    let stacks = chain.stack_count();
    let gamma = chain.config().gamma;
    let mut out = vec![0.0; chain.len()];
    for x in 0..chain.len() {
        if mu[x] == 0.0 {
            continue;
        }
        let o = x % stacks;
        for (s2, p) in chain.landing(x).into_iter().enumerate() {
            out[s2 * stacks + o] += mu[x] * gamma * p;
        }
    }
    out
}

/// Discounted mass of the events where `π^ℓ` is consulted at `(s', c^{1:ℓ-1})`,
/// in the level-`ℓ` context layout. At `ℓ = N` this is the occupancy itself.
pub fn selection_occupancy(chain: &AugmentedChain, mu: &DVector<f64>, level: usize) -> Vec<f64> {
    let config = chain.config();
    let layout = chain.layout();
    let depth = config.depth();
    if level == depth {
        return mu.iter().copied().collect();
    }
    let stacks = chain.stack_count();
    let arrive = arrival_occupancy(chain, mu);
    let mut out = vec![0.0; layout.context_count(level)];
    for (y, &m) in arrive.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let (s2, o) = (y / stacks, y % stacks);
        let opts = layout.stack_from_index(o);
        let w = chain.survival(s2, o);
        for (h, &wh) in w.iter().enumerate().take(level) {
            let mut prefix = opts[..h].to_vec();
            for_each_extension(config, chain.params(), s2, &mut prefix, level - 1, m * wh, &mut |c, p| {
                let i = layout.context_index(level, s2, c).expect("prefix within layout");
                out[i] += p;
            });
        }
    }
    out
}

fn check_level(config: &HierarchyConfig, level: usize, lowest: usize, highest: usize) -> Result<()> {
    if level < lowest || level > highest {
        return Err(OracleError::Unsupported(format!(
            "level {level} outside {lowest}..={highest} for depth {}",
            config.depth()
        )));
    }
    Ok(())
}

/// `∂ρ/∂θ^ℓ` from the occupancy-weighted expected score directions,
/// `Σ ν_ℓ Σ_k π^ℓ_k · softmax_grad_step(k, scale = Q_U, lr = 1)`, in the logit layout.
pub fn analytic_policy_gradient(chain: &AugmentedChain, values: &ExactValues, level: usize) -> Result<Vec<f64>> {
    let config = chain.config();
    let params = chain.params();
    check_level(config, level, 1, config.depth())?;
    let mu = occupancy(chain)?;
    let nu = selection_occupancy(chain, &mu, level);
    let n = config.choices_at(level);
    let tau = config.temperature(level);
    let logits = &params.policy_logits[level - 1];
    let q = &values.q_u[level - 1];
    let mut grad = vec![0.0; logits.len()];
    for (ctx, &weight) in nu.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let pi = softmax(&logits[ctx * n..(ctx + 1) * n], tau);
        for k in 0..n {
            let step = softmax_grad_step(&pi, k, q[ctx * n + k], 1.0, tau)?;
            for (g, d) in grad[ctx * n..(ctx + 1) * n].iter_mut().zip(step) {
                *g += weight * pi[k] * d;
            }
        }
    }
    Ok(grad)
}

/// `∂ρ/∂φ^ℓ` as the arrival-occupancy-weighted termination step
/// `-gate · β(1-β) · A_Ω` with unit learning rate and no regularizer.
pub fn analytic_termination_gradient(
    chain: &AugmentedChain,
    values: &ExactValues,
    level: usize,
) -> Result<Vec<f64>> {
    let config = chain.config();
    let params = chain.params();
    check_level(config, level, 1, config.depth() - 1)?;
    let mut unit = config.clone();
    unit.lr_termination = 1.0;
    unit.eta = 0.0;
    let critics = values.critics(config);
    let layout = chain.layout();
    let stacks = chain.stack_count();
    let mu = occupancy(chain)?;
    let arrive = arrival_occupancy(chain, &mu);
    let mut grad = vec![0.0; params.termination_logits[level - 1].len()];
    for (y, &m) in arrive.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let (s2, o) = (y / stacks, y % stacks);
        let opts = layout.stack_from_index(o);
        let gate = termination_gate(params, s2, &opts, level)?;
        let stack = OptionStack::from_options(opts.clone());
        let adv = advantage(config, params, &critics, s2, &stack, level)?;
        let step = termination_grad_step(&unit, params, s2, &opts[..level], gate, adv)?;
        grad[layout.entry_index(s2, &opts[..level])?] += m * step;
    }
    Ok(grad)
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(OracleError::Step(h));
    }
    Ok(())
}

fn central_differences(
    params: &ParameterSet,
    h: f64,
    table: impl Fn(&mut ParameterSet) -> &mut Vec<f64>,
    rho: impl Fn(&ParameterSet) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut p = params.clone();
    let len = table(&mut p).len();
    let mut grad = vec![0.0; len];
    for (i, g) in grad.iter_mut().enumerate() {
        let orig = table(&mut p)[i];
        table(&mut p)[i] = orig + h;
        let up = rho(&p)?;
        table(&mut p)[i] = orig - h;
        let down = rho(&p)?;
        table(&mut p)[i] = orig;
        *g = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Central differences of the exact return with respect to every `θ^ℓ` logit.
pub fn fd_policy_gradient(
    model: &TabularModel,
    config: &HierarchyConfig,
    params: &ParameterSet,
    start_options: &[usize],
    level: usize,
    h: f64,
) -> Result<Vec<f64>> {
    check_step(h)?;
    check_level(config, level, 1, config.depth())?;
    central_differences(
        params,
        h,
        |p| &mut p.policy_logits[level - 1],
        |p| expected_return(model, config, p, start_options),
    )
}

/// Central differences of the exact return with respect to every `φ^ℓ` logit.
pub fn fd_termination_gradient(
    model: &TabularModel,
    config: &HierarchyConfig,
    params: &ParameterSet,
    start_options: &[usize],
    level: usize,
    h: f64,
) -> Result<Vec<f64>> {
    check_step(h)?;
    check_level(config, level, 1, config.depth() - 1)?;
    central_differences(
        params,
        h,
        |p| &mut p.termination_logits[level - 1],
        |p| expected_return(model, config, p, start_options),
    )
}

/// Whether an analytic and a finite-difference value agree:
/// `|a - f| <= max(rel * max(|a|, |f|), abs_floor)`.
pub fn agrees(analytic: f64, fd: f64, rel: f64, abs_floor: f64) -> bool {
    (analytic - fd).abs() <= (rel * analytic.abs().max(fd.abs())).max(abs_floor)
}

/// Largest `|a - f| / max(|a|, |f|, floor / rel)`, i.e. the relative error with
/// the absolute floor folded in, so that agreement is `error <= rel`.
pub fn relative_error(analytic: &[f64], fd: &[f64], rel: f64, abs_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(abs_floor / rel))
        .fold(0.0, f64::max)
}
