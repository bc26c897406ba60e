//! Random micro-MDPs and hierarchies for property checks.

use hoc_core::{HierarchyConfig, HocRng, ParameterSet, TopPolicyMode};
use hoc_envs::TabularModel;

/// A model, a policy-gradient hierarchy over it, frozen parameters and a start stack.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: TabularModel,
    pub config: HierarchyConfig,
    pub params: ParameterSet,
    pub start_options: Vec<usize>,
}

/// A non-terminating model with random dense transitions and rewards in `[-1, 1]`.
pub fn random_model(rng: &mut HocRng, num_states: usize, num_actions: usize) -> TabularModel {
    let n = num_states;
    let mut p = vec![0.0; n * num_actions * n];
    for row in p.chunks_mut(n) {
        let w: Vec<f64> = (0..n).map(|_| rng.uniform().powi(2) + 0.01).collect();
        let z: f64 = w.iter().sum();
        row.iter_mut().zip(&w).for_each(|(x, y)| *x = y / z);
        let fix = row.iter().sum::<f64>() - 1.0;
        let big = row
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
        row[big] -= fix;
    }
    let r = (0..n * num_actions).map(|_| rng.range(-1.0, 1.0)).collect();
    TabularModel::new(n, num_actions, p, r, vec![false; n], 0).expect("rows normalized above")
}

/// As [`random_model`] but the last state is terminal, so episodes end.
pub fn random_episodic_model(rng: &mut HocRng, num_states: usize, num_actions: usize) -> TabularModel {
    let open = random_model(rng, num_states, num_actions);
    let n = num_states;
    let last = n - 1;
    let mut p = Vec::with_capacity(n * num_actions * n);
    let mut r = Vec::with_capacity(n * num_actions);
    for s in 0..n {
        for a in 0..num_actions {
            if s == last {
                p.extend((0..n).map(|t| if t == last { 1.0 } else { 0.0 }));
                r.push(0.0);
            } else {
                p.extend_from_slice(open.row(s, a));
                r.push(open.reward(s, a));
            }
        }
    }
    let mut terminal = vec![false; n];
    terminal[last] = true;
    TabularModel::new(n, num_actions, p, r, terminal, 0).expect("rows copied from a valid model")
}

/// A random instance with `depth` levels, up to `max_states` states and `max_actions` actions.
///
/// Option counts are 2 or 3 per level (2 from depth 4 on), temperatures lie in
/// `[0.5, 1.5]`, logits in `[-2, 2]` and `γ` in `[0.5, 0.95]`.
pub fn random_instance(rng: &mut HocRng, depth: usize, max_states: usize, max_actions: usize) -> Instance {
    let n_s = 2 + rng.below(max_states.max(2) - 1);
    let n_a = 2 + rng.below(max_actions.max(2) - 1);
    let widest = if depth >= 4 { 2 } else { 3 };
    let options: Vec<usize> = (1..depth).map(|_| 2 + rng.below(widest - 1)).collect();
    let mut config = HierarchyConfig::new(n_s, n_a, options);
    config.top_policy_mode = TopPolicyMode::PolicyGradient;
    config.gamma = rng.range(0.5, 0.95);
    config.temperature_per_level = (0..depth).map(|_| rng.range(0.5, 1.5)).collect();
    let mut params = ParameterSet::zeros(&config);
    for t in params.policy_logits.iter_mut().chain(params.termination_logits.iter_mut()) {
        t.iter_mut().for_each(|x| *x = rng.range(-2.0, 2.0));
    }
    let model = random_model(rng, n_s, n_a);
    let start_options = config.options_per_level.iter().map(|&n| rng.below(n)).collect();
    Instance {
        model,
        config,
        params,
        start_options,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_bounds() {
        let mut rng = HocRng::new(1, 0);
        for depth in 1..=4 {
            for _ in 0..50 {
                let i = random_instance(&mut rng, depth, 4, 3);
                assert!((2..=4).contains(&i.config.num_states));
                assert!((2..=3).contains(&i.config.num_actions));
                assert_eq!(i.config.depth(), depth);
                i.config.validate().unwrap();
            }
        }
    }
}
