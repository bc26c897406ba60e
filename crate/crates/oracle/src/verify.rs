//! The full verification suite and its report.

use std::fmt::Write as _;

use hoc_core::rng::ENV_STREAM;
use hoc_core::{
    sigmoid, termination_partition, HierarchyConfig, HocRng, ParameterSet, TopPolicyMode,
};
use hoc_envs::{Environment, ModelEnv, StochasticDP};
use hoc_learn::reference::{ActorCriticReference, OptionCriticReference};
use hoc_learn::Learner;

use crate::chain::{build_chain, surviving_weights};
use crate::enumeration::enumeration_error;
use crate::exact::exact_values;
use crate::gradient::{
    analytic_policy_gradient, analytic_termination_gradient, arrival_occupancy, fd_policy_gradient,
    fd_termination_gradient, occupancy, relative_error,
};
use crate::instances::{random_episodic_model, random_instance, Instance};
use crate::simulate::{kernel_frequencies, monte_carlo_return};
use crate::Result;

pub const FD_STEP: f64 = 1e-5;
pub const FD_RELATIVE: f64 = 1e-4;
pub const FD_ABSOLUTE: f64 = 1e-7;

/// Sizes of the randomized checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub partition_cases: usize,
    pub enumeration_cases: usize,
    pub chain_cases: usize,
    pub gradient_cases: usize,
    pub monte_carlo_models: usize,
    pub monte_carlo_episodes: usize,
    pub frequency_steps: usize,
    pub reduction_episodes: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 20_190_101,
            partition_cases: 1000,
            enumeration_cases: 1000,
            chain_cases: 200,
            gradient_cases: 50,
            monte_carlo_models: 5,
            monte_carlo_episodes: 1_000_000,
            frequency_steps: 1_000_000,
            reduction_episodes: 200,
        }
    }
}

impl SuiteOptions {
    /// A reduced suite that finishes in a second or two.
    pub fn quick() -> Self {
        SuiteOptions {
            partition_cases: 200,
            enumeration_cases: 200,
            chain_cases: 20,
            gradient_cases: 6,
            monte_carlo_models: 2,
            monte_carlo_episodes: 20_000,
            frequency_steps: 50_000,
            reduction_episodes: 20,
            ..SuiteOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// The statistic compared against `tolerance` (an error, a z-score or a count).
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn from_error(name: &'static str, tolerance: f64, cases: usize, outcome: Result<(f64, String)>) -> Self {
        match outcome {
            Ok((err, detail)) => CheckResult {
                name,
                passed: err <= tolerance,
                cases,
                max_error: err,
                tolerance,
                detail,
            },
            Err(e) => CheckResult {
                name,
                passed: false,
                cases,
                max_error: f64::INFINITY,
                tolerance,
                detail: format!("error: {e}"),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("verification report\n\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "[{}] {:<24} cases={:<6} stat={:.3e} tol={:.1e}  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.cases,
                c.max_error,
                c.tolerance,
                c.detail
            );
        }
        if !self.notes.is_empty() {
            out.push_str("\nnotes\n");
            for n in &self.notes {
                let _ = writeln!(out, "- {n}");
            }
        }
        let _ = writeln!(
            out,
            "\n{}",
            if self.all_passed() {
                "all checks passed".to_string()
            } else {
                format!("failing: {}", self.failing().join(", "))
            }
        );
        out
    }

    /// `check,passed,cases,max_error,tolerance` with one row per check.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,passed,cases,max_error,tolerance\n");
        for c in &self.checks {
            let _ = writeln!(out, "{},{},{},{:e},{:e}", c.name, c.passed, c.cases, c.max_error, c.tolerance);
        }
        out
    }
}

/// Partition weights sum to 1 and agree with the surviving-level weights.
pub fn check_partition(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 10);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let depth = 1 + i % 5;
            let betas: Vec<f64> = (1..depth).map(|_| rng.uniform()).collect();
            let w = surviving_weights(&betas);
            for level in 0..depth {
                let ev = termination_partition(&betas, level)?;
                let total: f64 = ev.iter().map(|e| e.weight).sum();
                worst = worst.max((total - 1.0).abs());
                let mut by_level = vec![0.0; depth];
                for e in &ev {
                    by_level[e.kind.surviving_level(depth)] += e.weight;
                }
                for (a, b) in by_level.iter().zip(&w) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        Ok((worst, "weights sum to 1 and group by surviving level".into()))
    })();
    CheckResult::from_error("partition", 1e-12, cases, outcome)
}

/// `eval_u` against the `2^{N-1}` outcome enumeration, `N <= 5`.
pub fn check_enumeration(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 11);
    let outcome = enumeration_error(&mut rng, cases, 5).map(|e| (e, "eval_u vs enumeration, N <= 5".into()));
    CheckResult::from_error("enumeration", 1e-12, cases, outcome)
}

fn depth_for(i: usize, lowest: usize, highest: usize) -> usize {
    lowest + i % (highest - lowest + 1)
}

/// Kernel rows sum to 1 on random instances with `N <= 4`.
pub fn check_chain_rows(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 12);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let inst = random_instance(&mut rng, depth_for(i, 1, 4), 4, 3);
            let chain = build_chain(&inst.model, &inst.config, &inst.params)?;
            worst = worst.max(chain.max_row_defect());
        }
        Ok((worst, "max |row sum - 1|".into()))
    })();
    CheckResult::from_error("chain-rows", 1e-12, cases, outcome)
}

/// The term-by-term transition to `(s', o^{1:ℓ-1})`, with the some-higher sum
/// over `i = 1..ℓ-2`, equals the marginal of the full kernel at every `ℓ`.
pub fn check_prefix_kernels(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 13);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let inst = random_instance(&mut rng, depth_for(i, 1, 4), 4, 3);
            let chain = build_chain(&inst.model, &inst.config, &inst.params)?;
            for level in 1..=inst.config.depth() {
                let diff = chain.prefix_kernel(level)? - chain.marginal_kernel(level);
                worst = worst.max(diff.amax());
            }
        }
        Ok((worst, "prefix kernel vs marginal of the full kernel".into()))
    })();
    CheckResult::from_error("prefix-kernel", 1e-12, cases, outcome)
}

/// `k`-step recursion against matrix powers for `k <= 5`.
pub fn check_k_step(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 14);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let inst = random_instance(&mut rng, depth_for(i, 1, 4), 4, 3);
            let chain = build_chain(&inst.model, &inst.config, &inst.params)?;
            let mut power = nalgebra::DMatrix::identity(chain.len(), chain.len());
            for k in 1..=5 {
                power = &power * &chain.discounted_kernel;
                worst = worst.max((chain.k_step_recursive(k) - &power).amax());
            }
        }
        Ok((worst, "recursive k-step vs kernel^k, k <= 5".into()))
    })();
    CheckResult::from_error("k-step", 1e-12, cases, outcome)
}

/// Exact arrival values from the chain against `eval_u` with exact critics, at every level.
pub fn check_value_consistency(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 15);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        let mut residual: f64 = 0.0;
        for i in 0..cases {
            let inst = random_instance(&mut rng, depth_for(i, 1, 4), 4, 3);
            let chain = build_chain(&inst.model, &inst.config, &inst.params)?;
            let ev = exact_values(&chain)?;
            residual = residual.max(ev.residual);
            let critics = ev.critics(&inst.config);
            for x in 0..chain.len() {
                let (s, o) = chain.decode(x);
                let stack = hoc_core::OptionStack::from_options(o.clone());
                let top = inst.config.depth() - 1;
                for level in 0..=top {
                    let core = hoc_core::eval_u(&inst.config, &inst.params, &critics, s, &stack, level)?;
                    let exact = if level == top { ev.u[x] } else { ev.arrival(&chain, s, &o, level) };
                    worst = worst.max((core - exact).abs());
                }
            }
        }
        Ok((worst.max(residual), format!("max fixed-point residual {residual:.2e}")))
    })();
    CheckResult::from_error("value-consistency", 1e-10, cases, outcome)
}

fn gradient_check(
    name: &'static str,
    seed: u64,
    stream: u64,
    cases: usize,
    termination: bool,
) -> CheckResult {
    let mut rng = HocRng::new(seed, stream);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        let mut coords = 0;
        for i in 0..cases {
            let inst = random_instance(&mut rng, depth_for(i, 2, 4), 4, 3);
            let Instance {
                model,
                config,
                params,
                start_options,
            } = &inst;
            let mut chain = build_chain(model, config, params)?;
            chain.set_start(start_options)?;
            let ev = exact_values(&chain)?;
            let levels = if termination { 1..config.depth() } else { 1..config.depth() + 1 };
            for level in levels {
                let (a, f) = if termination {
                    (
                        analytic_termination_gradient(&chain, &ev, level)?,
                        fd_termination_gradient(model, config, params, start_options, level, FD_STEP)?,
                    )
                } else {
                    (
                        analytic_policy_gradient(&chain, &ev, level)?,
                        fd_policy_gradient(model, config, params, start_options, level, FD_STEP)?,
                    )
                };
                coords += a.len();
                worst = worst.max(relative_error(&a, &f, FD_RELATIVE, FD_ABSOLUTE));
            }
        }
        Ok((worst, format!("{coords} coordinates, N in 2..=4, central differences h = {FD_STEP:e}")))
    })();
    CheckResult::from_error(name, FD_RELATIVE, cases, outcome)
}

/// Intra-option policy gradient at every level against finite differences.
pub fn check_policy_gradient(seed: u64, cases: usize) -> CheckResult {
    gradient_check("policy-gradient", seed, 16, cases, false)
}

/// Termination gradient at every option level against finite differences.
pub fn check_termination_gradient(seed: u64, cases: usize) -> CheckResult {
    gradient_check("termination-gradient", seed, 17, cases, true)
}

/// With `γ = 0` no parameter acting after the first step can matter.
pub fn check_zero_discount(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 18);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let mut inst = random_instance(&mut rng, depth_for(i, 2, 4), 4, 3);
            inst.config.gamma = 0.0;
            let Instance {
                model,
                config,
                params,
                start_options,
            } = &inst;
            let mut chain = build_chain(model, config, params)?;
            chain.set_start(start_options)?;
            let ev = exact_values(&chain)?;
            for level in 1..config.depth() {
                for g in analytic_termination_gradient(&chain, &ev, level)?
                    .into_iter()
                    .chain(fd_termination_gradient(model, config, params, start_options, level, FD_STEP)?)
                    .chain(analytic_policy_gradient(&chain, &ev, level)?)
                    .chain(fd_policy_gradient(model, config, params, start_options, level, FD_STEP)?)
                {
                    worst = worst.max(g.abs());
                }
            }
        }
        Ok((worst, "option-level gradients vanish".into()))
    })();
    CheckResult::from_error("zero-discount", 1e-12, cases, outcome)
}

/// Two-level termination gradient against the option-critic formula
/// `-Σ μ_arr(s', o) β(1-β) (Q_Ω(s', o) - V_Ω(s'))`, coded without the hierarchy.
pub fn check_option_critic_gradient(seed: u64, cases: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 19);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let inst = random_instance(&mut rng, 2, 4, 3);
            let mut chain = build_chain(&inst.model, &inst.config, &inst.params)?;
            chain.set_start(&inst.start_options)?;
            let ev = exact_values(&chain)?;
            let mu = occupancy(&chain)?;
            let arrive = arrival_occupancy(&chain, &mu);
            let n_o = inst.config.options_per_level[0];
            let analytic = analytic_termination_gradient(&chain, &ev, 1)?;
            for s in 0..inst.config.num_states {
                for o in 0..n_o {
                    let i = s * n_o + o;
                    let b = sigmoid(inst.params.termination_logits[0][i]);
                    let oc = -arrive[i] * b * (1.0 - b) * (ev.q_u[0][i] - ev.v[s]);
                    worst = worst.max((oc - analytic[i]).abs() / oc.abs().max(1.0));
                }
            }
        }
        Ok((worst, "N = 2 termination gradient vs option-critic formula".into()))
    })();
    CheckResult::from_error("option-critic-gradient", 1e-12, cases, outcome)
}

fn table_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if x.to_bits() == y.to_bits() { 0.0 } else { (x - y).abs().max(f64::MIN_POSITIVE) })
        .fold(0.0, f64::max)
}

fn lockstep_option_critic<E: Environment>(env: &mut E, config: &HierarchyConfig, seed: u64, episodes: usize) -> Result<(f64, usize)> {
    let mut hoc = Learner::new(config.clone(), seed)?;
    let mut oc = OptionCriticReference::new(config, seed);
    let mut rng = HocRng::new(seed, ENV_STREAM);
    let mut gap: f64 = 0.0;
    let mut steps = 0;
    for _ in 0..episodes {
        let mut s = env.reset(&mut rng);
        let stack = hoc.select_initial_stack(s)?;
        if stack.options() != [oc.start_episode(s)] {
            gap = f64::INFINITY;
        }
        for _ in 0..1000 {
            let a = hoc.choose_action(s)?;
            if a != oc.act(s) {
                return Ok((f64::INFINITY, steps));
            }
            let t = env.step(a, &mut rng)?;
            hoc.learn_step(s, a, t.reward, t.next_state, t.done)?;
            oc.learn(s, a, t.reward, t.next_state, t.done);
            steps += 1;
            if hoc.stack.options() != [oc.option] {
                return Ok((f64::INFINITY, steps));
            }
            gap = gap
                .max(table_gap(&hoc.critics.q_u[0], &oc.q_option))
                .max(table_gap(&hoc.critics.q_u[1], &oc.q_action))
                .max(table_gap(&hoc.params.policy_logits[1], &oc.theta_action))
                .max(table_gap(&hoc.params.termination_logits[0], &oc.phi));
            if !config.top_is_greedy() {
                gap = gap.max(table_gap(&hoc.params.policy_logits[0], &oc.theta_option));
            }
            if t.done {
                break;
            }
            s = t.next_state;
        }
    }
    Ok((gap, steps))
}

fn lockstep_actor_critic<E: Environment>(env: &mut E, config: &HierarchyConfig, seed: u64, episodes: usize) -> Result<(f64, usize)> {
    let mut hoc = Learner::new(config.clone(), seed)?;
    let mut ac = ActorCriticReference::new(config, seed);
    let mut rng = HocRng::new(seed, ENV_STREAM);
    let mut gap: f64 = 0.0;
    let mut steps = 0;
    for _ in 0..episodes {
        let mut s = env.reset(&mut rng);
        hoc.select_initial_stack(s)?;
        for _ in 0..1000 {
            let a = hoc.choose_action(s)?;
            if a != ac.act(s) {
                return Ok((f64::INFINITY, steps));
            }
            let t = env.step(a, &mut rng)?;
            hoc.learn_step(s, a, t.reward, t.next_state, t.done)?;
            ac.learn(s, a, t.reward, t.next_state, t.done);
            steps += 1;
            gap = gap
                .max(table_gap(&hoc.critics.q_u[0], &ac.q))
                .max(table_gap(&hoc.params.policy_logits[0], &ac.theta));
            if t.done {
                break;
            }
            s = t.next_state;
        }
    }
    Ok((gap, steps))
}

/// `N = 2` against option-critic and `N = 1` against actor-critic, bit for bit.
pub fn check_reductions(seed: u64, episodes: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 20);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        let mut steps = 0;
        let mut dp = HierarchyConfig::new(12, 2, vec![4]);
        dp.lr_policy = 0.1;
        dp.lr_termination = 0.01;
        dp.temperature_per_level = vec![0.1, 0.1];
        let (g, n) = lockstep_option_critic(&mut StochasticDP::new(), &dp, seed, episodes)?;
        worst = worst.max(g);
        steps += n;
        for case in 0..8 {
            let n_s = 2 + rng.below(4);
            let n_a = 1 + rng.below(3);
            let model = random_episodic_model(&mut rng, n_s.max(2), n_a);
            let mut c = HierarchyConfig::new(n_s.max(2), n_a, vec![1 + rng.below(3)]);
            c.gamma = 0.9;
            c.lr_critic = rng.range(0.05, 1.0);
            c.lr_policy = rng.range(0.05, 1.0);
            c.lr_termination = rng.range(0.05, 1.0);
            c.temperature_per_level = vec![rng.range(0.2, 2.0), rng.range(0.2, 2.0)];
            c.eta = rng.range(0.0, 0.2);
            c.policy_baseline = case % 2 == 1;
            if case % 4 >= 2 {
                c.top_policy_mode = TopPolicyMode::PolicyGradient;
            }
            let (g, n) = lockstep_option_critic(&mut ModelEnv::new(model.clone()), &c, seed + case as u64, episodes)?;
            worst = worst.max(g);
            steps += n;
            let mut flat = HierarchyConfig::new(c.num_states, n_a, vec![]);
            flat.gamma = c.gamma;
            flat.lr_critic = c.lr_critic;
            flat.lr_policy = c.lr_policy;
            flat.temperature_per_level = vec![c.temperature_per_level[1]];
            flat.policy_baseline = c.policy_baseline;
            let (g, n) = lockstep_actor_critic(&mut ModelEnv::new(model), &flat, seed + case as u64, episodes)?;
            worst = worst.max(g);
            steps += n;
        }
        Ok((worst, format!("{steps} lockstep updates, largest table difference")))
    })();
    CheckResult::from_error("reductions", 0.0, episodes, outcome)
}

/// Exact start values against Monte Carlo returns of the frozen learner, within 3 standard errors.
pub fn check_monte_carlo(seed: u64, models: usize, episodes: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 21);
    let outcome = (|| {
        let mut worst: f64 = 0.0;
        let mut detail = Vec::new();
        for i in 0..models {
            let mut inst = random_instance(&mut rng, 1 + i % 4, 3, 3);
            inst.config.gamma = 0.9;
            let mut chain = build_chain(&inst.model, &inst.config, &inst.params)?;
            chain.set_start(&inst.start_options)?;
            let rho = exact_values(&chain)?.rho;
            let est = monte_carlo_return(&chain, episodes, seed + i as u64)?;
            let z = est.z_score(rho);
            detail.push(format!("N={} z={z:.2}", inst.config.depth()));
            worst = worst.max(z);
        }
        Ok((worst, detail.join(" ")))
    })();
    CheckResult::from_error("monte-carlo", 3.0, models, outcome)
}

/// Kernel entries against transition frequencies of the frozen learner, within 4σ.
pub fn check_kernel_frequencies(seed: u64, steps: usize) -> CheckResult {
    let mut rng = HocRng::new(seed, 22);
    let outcome = (|| {
        let model = crate::instances::random_model(&mut rng, 3, 2);
        let mut config = HierarchyConfig::new(3, 2, vec![2, 2]);
        config.top_policy_mode = TopPolicyMode::PolicyGradient;
        let mut params = ParameterSet::zeros(&config);
        for t in params.policy_logits.iter_mut().chain(params.termination_logits.iter_mut()) {
            t.iter_mut().for_each(|x| *x = rng.range(-1.5, 1.5));
        }
        let chain = build_chain(&model, &config, &params)?;
        let f = kernel_frequencies(&chain, steps, 4.0, seed)?;
        Ok((f.max_z, format!("{} entries beyond 4σ", f.violations)))
    })();
    CheckResult::from_error("kernel-frequencies", 4.0, steps, outcome)
}

const HIGHER_BOUND_NOTE: &str = "the some-higher term of the prefix transition sums i = 1..l-2 over a prefix of \
length l-1, the arrival value sums i = 1..l-1 over a prefix of length l; both are the same range once the \
prefix length is matched, and the prefix-kernel check confirms the term-by-term kernel is the marginal of the \
full kernel at every l";

/// Runs every check.
pub fn run_suite(opts: &SuiteOptions) -> VerificationReport {
    let seed = opts.seed;
    let checks = vec![
        check_partition(seed, opts.partition_cases),
        check_enumeration(seed, opts.enumeration_cases),
        check_chain_rows(seed, opts.chain_cases),
        check_prefix_kernels(seed, opts.chain_cases.min(50)),
        check_k_step(seed, opts.chain_cases.min(20)),
        check_value_consistency(seed, opts.chain_cases.min(50)),
        check_policy_gradient(seed, opts.gradient_cases),
        check_termination_gradient(seed, opts.gradient_cases),
        check_zero_discount(seed, opts.gradient_cases.min(10)),
        check_option_critic_gradient(seed, opts.gradient_cases.min(20)),
        check_reductions(seed, opts.reduction_episodes),
        check_monte_carlo(seed, opts.monte_carlo_models, opts.monte_carlo_episodes),
        check_kernel_frequencies(seed, opts.frequency_steps),
    ];
    VerificationReport {
        checks,
        notes: vec![HIGHER_BOUND_NOTE.to_string()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let report = run_suite(&SuiteOptions::quick());
        assert!(report.all_passed(), "{}", report.to_text());
        assert_eq!(report.to_csv().lines().count(), report.checks.len() + 1);
        assert!(report.to_text().contains("all checks passed"));
    }

    #[test]
    fn failures_are_named() {
        let mut report = run_suite(&SuiteOptions {
            gradient_cases: 1,
            ..SuiteOptions::quick()
        });
        report.checks[0].passed = false;
        assert_eq!(report.failing(), vec!["partition"]);
        assert!(report.to_text().contains("failing: partition"));
    }
}
