use hoc_core::{
    advantage, eval_q_omega, eval_u, policy_grad_step, termination_gate, termination_grad_step,
    HierarchyConfig, HocRng, OptionStack, TopPolicyMode,
};
use hoc_envs::{EnvError, Environment, FourRooms, ModelEnv, TabularModel, Transition};
use hoc_learn::{LearnError, Learner, DEFAULT_STEP_CAP};
use proptest::prelude::*;

fn pg_config(n_s: usize, n_a: usize, options: Vec<usize>) -> HierarchyConfig {
    let mut c = HierarchyConfig::new(n_s, n_a, options);
    c.top_policy_mode = TopPolicyMode::PolicyGradient;
    c
}

fn randomize(l: &mut Learner, seed: u64) {
    let mut rng = HocRng::new(seed, 5);
    for t in l.params.policy_logits.iter_mut().chain(l.params.termination_logits.iter_mut()) {
        t.iter_mut().for_each(|x| *x = rng.range(-2.0, 2.0));
    }
    for t in l.critics.q_u.iter_mut() {
        t.iter_mut().for_each(|x| *x = rng.range(-1.0, 2.0));
    }
}

fn within_sigmas(count: usize, trials: usize, p: f64, k: f64) -> bool {
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - trials as f64 * p).abs() <= k * sd
}

#[test]
fn flat_agent_has_empty_stack() {
    let mut l = Learner::new(HierarchyConfig::new(3, 2, vec![]), 0).unwrap();
    assert!(l.select_initial_stack(1).unwrap().is_empty());
}

#[test]
fn one_hot_policies_give_the_greedy_stack() {
    let mut l = Learner::new(pg_config(2, 2, vec![3, 2]), 0).unwrap();
    l.params.policy_row_mut(1, 1, &[]).unwrap().copy_from_slice(&[-50.0, 50.0, -50.0]);
    l.params.policy_row_mut(2, 1, &[1]).unwrap().copy_from_slice(&[50.0, -50.0]);
    for _ in 0..100 {
        assert_eq!(l.select_initial_stack(1).unwrap().options(), &[1, 0]);
    }
}

#[test]
fn uniform_policies_select_stacks_uniformly() {
    for mode in [TopPolicyMode::PolicyGradient, TopPolicyMode::EpsilonGreedyOverCritic] {
        let mut c = HierarchyConfig::new(2, 2, vec![2, 3]);
        c.top_policy_mode = mode;
        let mut l = Learner::new(c, 42).unwrap();
        let trials = 100_000;
        let mut counts = [0usize; 6];
        for _ in 0..trials {
            let s = l.select_initial_stack(0).unwrap();
            counts[s.options()[0] * 3 + s.options()[1]] += 1;
        }
        let expected = trials as f64 / 6.0;
        let chi2: f64 = counts.iter().map(|&k| (k as f64 - expected).powi(2) / expected).sum();
        // Pearson statistic within 3σ of its chi-square law (5 degrees of freedom)
        assert!(chi2 <= 5.0 + 3.0 * 10f64.sqrt(), "{mode:?}: {counts:?}");
    }
}

#[test]
fn termination_extremes() {
    let mut l = Learner::new(pg_config(2, 2, vec![2, 2, 2]), 1).unwrap();
    l.params.termination_logits.iter_mut().for_each(|t| t.fill(-1e3));
    l.select_initial_stack(0).unwrap();
    let before = l.stack.clone();
    for _ in 0..1000 {
        assert!(l.choose_terminated_options(1, 3).unwrap().is_empty());
        assert_eq!(l.stack, before);
    }
    l.params.termination_logits.iter_mut().for_each(|t| t.fill(1e3));
    let mut seen = std::collections::HashSet::new();
    for _ in 0..1000 {
        assert_eq!(l.choose_terminated_options(1, 3).unwrap(), vec![1, 2, 3]);
        seen.insert(l.stack.options().to_vec());
    }
    assert_eq!(seen.len(), 8);
}

#[test]
fn lowest_level_alone_terminates() {
    // β² = 1 and β¹ = 0: only o² is redrawn, from π²(· | s', o¹)
    let mut l = Learner::new(pg_config(2, 2, vec![2, 3]), 7).unwrap();
    l.params.termination_logits[0].fill(-1e3);
    l.params.termination_logits[1].fill(1e3);
    l.params.policy_row_mut(2, 1, &[1]).unwrap().copy_from_slice(&[0.0, 2f64.ln(), -1e3]);
    l.stack = OptionStack::from_options(vec![1, 2]);
    let trials = 100_000;
    let mut ones = 0;
    for _ in 0..trials {
        l.stack.set(2, 2).unwrap();
        assert_eq!(l.choose_terminated_options(1, 2).unwrap(), vec![2]);
        assert_eq!(l.stack.get(1), Some(1));
        let o2 = l.stack.get(2).unwrap();
        assert!(o2 < 2);
        ones += o2;
    }
    assert!(within_sigmas(ones, trials, 2.0 / 3.0, 3.0), "{ones}");
}

#[test]
fn terminal_step_moves_critics_halfway_to_reward() {
    let mut c = HierarchyConfig::new(2, 2, vec![2, 2]);
    c.lr_critic = 0.5;
    let mut l = Learner::new(c, 0).unwrap();
    l.select_initial_stack(0).unwrap();
    let a = l.choose_action(0).unwrap();
    let path: Vec<usize> = l.stack.options().iter().copied().chain([a]).collect();
    let rec = l.learn_step(0, a, 1.0, 1, true).unwrap();
    assert!(rec.terminated_levels.is_empty());
    for j in 1..=3 {
        assert_eq!(l.critics.get(0, &path[..j]).unwrap(), 0.5);
    }
    let touched: usize = l.critics.q_u.iter().flatten().filter(|&&q| q != 0.0).count();
    assert_eq!(touched, 3);
}

#[test]
fn zero_learning_rates_change_only_the_stack() {
    let mut c = pg_config(3, 2, vec![2, 2]);
    c.lr_critic = 0.0;
    c.lr_policy = 0.0;
    c.lr_termination = 0.0;
    let mut l = Learner::new(c, 3).unwrap();
    randomize(&mut l, 3);
    let (params, critics) = (l.params.clone(), l.critics.clone());
    l.select_initial_stack(0).unwrap();
    for s in [0, 1, 2, 1, 0] {
        let a = l.choose_action(s).unwrap();
        l.learn_step(s, a, 1.0, (s + 1) % 3, false).unwrap();
    }
    assert_eq!(l.params, params);
    assert_eq!(l.critics, critics);
}

#[test]
fn rejects_steps_without_a_full_stack() {
    let mut l = Learner::new(HierarchyConfig::new(2, 2, vec![2]), 0).unwrap();
    assert!(matches!(l.learn_step(0, 0, 0.0, 1, false), Err(LearnError::State(_))));
}

/// Deltas from one learn_step equal the closed forms at pre-step parameters,
/// with policy scales read from the post-update critics.
fn check_update(mut c: HierarchyConfig, seed: u64, state: usize, next: usize, done: bool) {
    c.eta = 0.15;
    c.lr_critic = 0.3;
    c.lr_policy = 0.7;
    c.lr_termination = 0.4;
    c.temperature_per_level = (0..c.depth()).map(|l| 0.5 + 0.25 * l as f64).collect();
    let mut l = Learner::new(c.clone(), seed).unwrap();
    randomize(&mut l, seed);
    l.select_initial_stack(state).unwrap();
    let a = l.choose_action(state).unwrap();
    let stack = l.stack.clone();
    let opts = stack.options().to_vec();
    let path: Vec<usize> = opts.iter().copied().chain([a]).collect();
    let (p0, q0) = (l.params.clone(), l.critics.clone());
    let reward = 0.7;
    l.learn_step(state, a, reward, next, done).unwrap();

    let depth = c.depth();
    let target = if done {
        reward
    } else {
        reward + c.gamma * eval_u(&c, &p0, &q0, next, &stack, depth - 1).unwrap()
    };
    let mut q1 = q0.clone();
    for j in 1..=depth {
        let q = q1.get_mut(state, &path[..j]).unwrap();
        *q += c.lr_critic * (target - *q);
    }
    assert_eq!(l.critics, q1);

    let mut p1 = p0.clone();
    for j in 1..=depth {
        if j == 1 && c.top_is_greedy() {
            continue;
        }
        let mut scale = q1.get(state, &path[..j]).unwrap();
        if c.policy_baseline {
            scale -= eval_q_omega(&c, &p0, &q1, state, &path[..j - 1]).unwrap();
        }
        let d = policy_grad_step(&c, &p0, j, state, &path[..j - 1], path[j - 1], scale).unwrap();
        for (x, dx) in p1.policy_row_mut(j, state, &path[..j - 1]).unwrap().iter_mut().zip(d) {
            *x += dx;
        }
    }
    for j in 1..depth {
        let gate = termination_gate(&p0, next, &opts, j).unwrap();
        let adv = advantage(&c, &p0, &q1, next, &stack, j).unwrap();
        let d = termination_grad_step(&c, &p0, next, &opts[..j], gate, adv).unwrap();
        *p1.termination_logit_mut(next, &opts[..j]).unwrap() += d;
    }
    assert_eq!(l.params, p1);
}

#[test]
fn learn_step_applies_closed_form_updates() {
    for depth_opts in [vec![], vec![3], vec![2, 2], vec![2, 3, 2]] {
        for (mode, baseline) in [
            (TopPolicyMode::PolicyGradient, false),
            (TopPolicyMode::PolicyGradient, true),
            (TopPolicyMode::EpsilonGreedyOverCritic, false),
        ] {
            for (s, s2, done) in [(0, 1, false), (1, 1, false), (2, 0, true)] {
                let mut c = HierarchyConfig::new(3, 2, depth_opts.clone());
                c.top_policy_mode = mode;
                c.policy_baseline = baseline;
                check_update(c, 11 + s as u64, s, s2, done);
            }
        }
    }
}

#[test]
fn larger_eta_pushes_every_termination_logit_down() {
    let mut c = pg_config(3, 2, vec![2, 2, 2]);
    c.lr_termination = 0.5;
    for seed in 0..50 {
        let mut deltas = Vec::new();
        for eta in [0.0, 0.1, 0.5] {
            c.eta = eta;
            let mut l = Learner::new(c.clone(), seed).unwrap();
            randomize(&mut l, seed);
            l.select_initial_stack(0).unwrap();
            let a = l.choose_action(0).unwrap();
            let before = l.params.termination_logits.clone();
            l.learn_step(0, a, 0.3, 1, false).unwrap();
            let d: Vec<f64> = l.params.termination_logits.iter().zip(&before)
                .flat_map(|(x, y)| x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>())
                .collect();
            deltas.push(d);
        }
        for w in deltas.windows(2) {
            for (hi, lo) in w[1].iter().zip(&w[0]) {
                assert!(hi <= lo);
            }
        }
    }
}

#[derive(Clone)]
struct OneStep;

impl Environment for OneStep {
    fn num_states(&self) -> usize {
        2
    }
    fn num_actions(&self) -> usize {
        2
    }
    fn reset(&mut self, _rng: &mut HocRng) -> usize {
        0
    }
    fn step(&mut self, _a: usize, _rng: &mut HocRng) -> Result<Transition, EnvError> {
        Ok(Transition { next_state: 1, reward: 2.0, done: true })
    }
    fn exact_model(&self) -> Result<TabularModel, EnvError> {
        Err(EnvError::Model("not needed".into()))
    }
}

#[test]
fn immediate_termination_gives_one_step_log() {
    let mut l = Learner::new(HierarchyConfig::new(2, 2, vec![2]), 0).unwrap();
    let log = l.run_episode(&mut OneStep, &mut HocRng::new(0, 1), DEFAULT_STEP_CAP).unwrap();
    assert_eq!(log.steps, 1);
    assert_eq!(log.total_reward, 2.0);
    assert!(!log.truncated);
    assert_eq!(log.terminations, vec![0]);
}

#[test]
fn step_cap_truncates() {
    // a two-state loop with no terminal state
    let model = TabularModel::new(2, 1, vec![0.0, 1.0, 1.0, 0.0], vec![0.0, 0.0], vec![false, false], 0).unwrap();
    let mut l = Learner::new(HierarchyConfig::new(2, 1, vec![2]), 0).unwrap();
    let log = l.run_episode(&mut ModelEnv::new(model), &mut HocRng::new(0, 1), 25).unwrap();
    assert_eq!(log.steps, 25);
    assert!(log.truncated);
}

#[test]
fn env_protocol_errors_surface() {
    let mut env = FourRooms::new();
    let mut rng = HocRng::new(0, 1);
    assert!(matches!(env.step(0, &mut rng), Err(EnvError::Protocol(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn terminations_are_bottom_up_and_options_call_and_return(seed in 0u64..10_000, greedy in any::<bool>()) {
        let mut c = HierarchyConfig::new(104, 4, vec![2, 2, 2]);
        c.top_policy_mode = if greedy { TopPolicyMode::EpsilonGreedyOverCritic } else { TopPolicyMode::PolicyGradient };
        let mut l = Learner::new(c, seed).unwrap();
        let mut env = FourRooms::new();
        let mut rng = HocRng::new(seed, 1);
        for _ in 0..3 {
            let mut records = Vec::new();
            let log = l.run_episode_observed(&mut env, &mut rng, 3_000, |r| records.push(r.clone())).unwrap();
            let mut counted = vec![0; 3];
            let mut switched = vec![0; 3];
            for (i, r) in records.iter().enumerate() {
                if let Some(&j) = r.terminated_levels.first() {
                    let expect: Vec<usize> = (j..=3).collect();
                    prop_assert_eq!(&r.terminated_levels, &expect);
                }
                for level in 1..=3 {
                    if !r.terminated_levels.contains(&level) {
                        prop_assert_eq!(r.options[level - 1], r.next_options[level - 1]);
                    } else {
                        counted[level - 1] += 1;
                        switched[level - 1] += (r.options[level - 1] != r.next_options[level - 1]) as usize;
                    }
                }
                if let Some(next) = records.get(i + 1) {
                    prop_assert_eq!(&r.next_options, &next.options);
                }
            }
            prop_assert_eq!(&log.terminations, &counted);
            prop_assert_eq!(&log.switches, &switched);
            prop_assert_eq!(log.steps, records.len());
        }
    }
}
