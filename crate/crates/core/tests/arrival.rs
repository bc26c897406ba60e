use hoc_core::{
    eval_q_omega, eval_u, eval_v_omega, sigmoid, termination_partition, CriticSet, HierarchyConfig,
    HocRng, OptionStack, ParameterSet, TopPolicyMode,
};

fn random_instance(rng: &mut HocRng, depth: usize) -> (HierarchyConfig, ParameterSet, CriticSet) {
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

/// Walks all 2^(N-1) joint Bernoulli outcomes, applying the bottom-up rule by
/// hand, and values each outcome at the prefix that survives it.
fn enumerate_u(
    c: &HierarchyConfig,
    p: &ParameterSet,
    q: &CriticSet,
    s: usize,
    opts: &[usize],
    level: usize,
) -> f64 {
    let top = opts.len();
    let betas: Vec<f64> = (1..=top)
        .map(|j| sigmoid(p.termination_logit(s, &opts[..j]).unwrap()))
        .collect();
    let mut total = 0.0;
    for mask in 0u32..(1 << top) {
        let fired = |j: usize| mask & (1 << (j - 1)) != 0;
        // a level may only fire if every level below it fired
        let mut consistent = true;
        let mut surviving = 0;
        let mut checking = true;
        let mut prob = 1.0;
        for j in (1..=top).rev() {
            if checking {
                prob *= if fired(j) { betas[j - 1] } else { 1.0 - betas[j - 1] };
                if !fired(j) {
                    checking = false;
                    surviving = j;
                }
            } else if fired(j) {
                consistent = false;
            }
        }
        if !consistent {
            continue;
        }
        let keep = if surviving == top {
            top
        } else if surviving >= level {
            level
        } else {
            surviving
        };
        let value = if keep == 0 {
            eval_v_omega(c, p, q, s).unwrap()
        } else {
            eval_q_omega(c, p, q, s, &opts[..keep]).unwrap()
        };
        total += prob * value;
    }
    total
}

#[test]
fn arrival_value_matches_enumeration() {
    let mut rng = HocRng::new(2024, 0);
    for _ in 0..1000 {
        let depth = 1 + rng.below(5);
        let (c, p, q) = random_instance(&mut rng, depth);
        let s = rng.below(c.num_states);
        let opts: Vec<usize> = c.options_per_level.iter().map(|&n| rng.below(n)).collect();
        let level = rng.below(depth);
        let stack = OptionStack::from_options(opts.clone());
        let got = eval_u(&c, &p, &q, s, &stack, level).unwrap();
        let want = enumerate_u(&c, &p, &q, s, &opts, level);
        assert!(
            (got - want).abs() <= 1e-12 * want.abs().max(1.0),
            "N={depth} level={level}: {got} vs {want}"
        );
    }
}

#[test]
fn partition_weights_sum_to_one() {
    let mut rng = HocRng::new(99, 0);
    for depth in 2..=5 {
        for level in 0..depth {
            for _ in 0..1000 {
                let betas: Vec<f64> = (1..depth).map(|_| rng.uniform()).collect();
                let ev = termination_partition(&betas, level).unwrap();
                let total: f64 = ev.iter().map(|e| e.weight).sum();
                assert!((total - 1.0).abs() <= 1e-12);
                assert!(ev.iter().all(|e| (0.0..=1.0).contains(&e.weight)));
            }
        }
    }
}
