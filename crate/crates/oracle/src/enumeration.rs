//! Arrival values by brute-force enumeration of joint termination outcomes.

use hoc_core::{
    eval_q_omega, eval_u, sigmoid, CriticSet, HierarchyConfig, HocRng, OptionStack, ParameterSet,
    TopPolicyMode,
};

use crate::Result;

/// `U(s', o^{1:ℓ})` from all `2^{N-1}` independent termination draws.
///
/// Each draw pattern is resolved by the bottom-up rule: walking up from level
/// `N-1`, the first level that does not fire survives and everything above it
/// is never consulted. Patterns where a level above the survivor fired are
/// unreachable and skipped. Each reachable outcome is valued at `Q_Ω` of the
/// prefix it keeps, capped at `o^{1:ℓ}` unless nothing terminated.
pub fn enumerate_arrival(
    config: &HierarchyConfig,
    params: &ParameterSet,
    critics: &CriticSet,
    state: usize,
    options: &[usize],
    level: usize,
) -> Result<f64> {
    let top = options.len();
    let mut betas = Vec::with_capacity(top);
    for j in 1..=top {
        betas.push(sigmoid(params.termination_logit(state, &options[..j])?));
    }
    let mut total = 0.0;
    for mask in 0u32..(1 << top) {
        let fired = |j: usize| mask & (1 << (j - 1)) != 0;
        let mut prob = 1.0;
        let mut surviving = 0;
        let mut reachable = true;
        let mut walking = true;
        for j in (1..=top).rev() {
            if walking {
                prob *= if fired(j) { betas[j - 1] } else { 1.0 - betas[j - 1] };
                if !fired(j) {
                    walking = false;
                    surviving = j;
                }
            } else if fired(j) {
                reachable = false;
            }
        }
        if !reachable {
            continue;
        }
        let keep = if surviving == top { top } else { surviving.min(level) };
        total += prob * eval_q_omega(config, params, critics, state, &options[..keep])?;
    }
    Ok(total)
}

/// Random hierarchy, parameters and critics with at most `max_depth` levels.
pub fn random_valued_instance(rng: &mut HocRng, max_depth: usize) -> (HierarchyConfig, ParameterSet, CriticSet) {
    let depth = 1 + rng.below(max_depth);
    let options: Vec<usize> = (1..depth).map(|_| 1 + rng.below(3)).collect();
    let mut c = HierarchyConfig::new(1 + rng.below(3), 1 + rng.below(3), options);
    if rng.bernoulli(0.5) {
        c.top_policy_mode = TopPolicyMode::PolicyGradient;
    }
    c.temperature_per_level = (0..depth).map(|_| rng.range(0.3, 2.0)).collect();
    let mut p = ParameterSet::zeros(&c);
    let mut q = CriticSet::zeros(&c);
    for t in p.policy_logits.iter_mut().chain(p.termination_logits.iter_mut()) {
        t.iter_mut().for_each(|x| *x = rng.range(-3.0, 3.0));
    }
    for t in q.q_u.iter_mut() {
        t.iter_mut().for_each(|x| *x = rng.range(-5.0, 5.0));
    }
    (c, p, q)
}

/// Largest `|eval_u - enumeration| / max(1, |enumeration|)` over `cases` random
/// instances with up to `max_depth` levels, at a random state, stack and level.
pub fn enumeration_error(rng: &mut HocRng, cases: usize, max_depth: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (c, p, q) = random_valued_instance(rng, max_depth);
        let s = rng.below(c.num_states);
        let opts: Vec<usize> = c.options_per_level.iter().map(|&n| rng.below(n)).collect();
        let level = rng.below(c.depth());
        let got = eval_u(&c, &p, &q, s, &OptionStack::from_options(opts.clone()), level)?;
        let want = enumerate_arrival(&c, &p, &q, s, &opts, level)?;
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    Ok(worst)
}
