//! The augmented Markov chain over `(s, o^{1:N-1})`.
//!
//! One step of the chain takes an action from `π^N`, moves the environment,
//! and then resolves terminations bottom-up in the arrival state, re-choosing
//! every option below the highest survivor. Nothing here calls into the
//! learner's value code: the arrival distribution is built from its own
//! surviving-level weights and explicit top-down option draws.

use hoc_core::{sigmoid, softmax, HierarchyConfig, Layout, ParameterSet, TopPolicyMode};
use hoc_envs::TabularModel;
use nalgebra::{DMatrix, DVector};

use crate::{OracleError, Result};

const ROW_TOL: f64 = 1e-12;

/// Exact transition structure of a frozen hierarchical policy on a finite MDP.
#[derive(Debug, Clone)]
pub struct AugmentedChain {
    config: HierarchyConfig,
    params: ParameterSet,
    model: TabularModel,
    layout: Layout,
    stacks: usize,
    /// `K[x, x']` with `x = s * stacks + stack_index(o)`.
    pub kernel: DMatrix<f64>,
    /// `γ K`.
    pub discounted_kernel: DMatrix<f64>,
    /// `Σ_a π^N(a | x) R(s, a)`.
    pub reward: DVector<f64>,
    /// `π^N(a | x)` at `x * A + a`.
    action_probs: Vec<f64>,
    /// `T(o' | s', o)` at `(s' * stacks + o) * stacks + o'`.
    arrival: Vec<f64>,
    /// Surviving-level weights `w_h(s', o)` at `(s' * stacks + o) * N + h`, `h = 0..N-1`.
    survival: Vec<f64>,
    start: usize,
}

/// Probability that `h` is the highest option level left standing, `h = 0..=N-1`.
///
/// `betas[j-1] = β^j`. Level `N-1` survives with `1 - β^{N-1}`; level `h`
/// survives when everything below it fired and it did not.
pub fn surviving_weights(betas: &[f64]) -> Vec<f64> {
    let top = betas.len();
    let mut w = vec![0.0; top + 1];
    let mut fired_above = 1.0;
    for h in (1..=top).rev() {
        w[h] = (1.0 - betas[h - 1]) * fired_above;
        fired_above *= betas[h - 1];
    }
    w[0] = fired_above;
    w
}

/// Calls `visit(prefix, p)` for every extension of `prefix` down to `upto`
/// options, where `p` multiplies the draw probabilities `π^j(c^j | s, c^{1:j-1})`.
pub(crate) fn for_each_extension(
    config: &HierarchyConfig,
    params: &ParameterSet,
    state: usize,
    prefix: &mut Vec<usize>,
    upto: usize,
    prob: f64,
    visit: &mut dyn FnMut(&[usize], f64),
) {
    let level = prefix.len() + 1;
    if level > upto {
        visit(prefix, prob);
        return;
    }
    let logits = params
        .policy_row(level, state, prefix)
        .expect("prefix built within the layout");
    let pi = softmax(logits, config.temperature(level));
    for (k, p) in pi.into_iter().enumerate() {
        prefix.push(k);
        for_each_extension(config, params, state, prefix, upto, prob * p, visit);
        prefix.pop();
    }
}

fn prefix_index(layout: &Layout, prefix: &[usize]) -> usize {
    prefix
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &o)| acc * layout.choices(j + 1) + o)
}

fn prefix_count(layout: &Layout, len: usize) -> usize {
    (1..=len).map(|j| layout.choices(j)).product()
}

pub(crate) fn check_compatible(model: &TabularModel, config: &HierarchyConfig) -> Result<()> {
    // the kernel itself is defined for any discount; exact_values rejects γ >= 1
    let mut shape = config.clone();
    if shape.gamma >= 1.0 && shape.gamma.is_finite() {
        shape.gamma = 0.0;
    }
    shape.validate()?;
    if model.num_states() != config.num_states || model.num_actions() != config.num_actions {
        return Err(OracleError::Model(format!(
            "model has {} states and {} actions but the hierarchy expects {} and {}",
            model.num_states(),
            model.num_actions(),
            config.num_states,
            config.num_actions
        )));
    }
    if config.depth() >= 2 && config.top_policy_mode != TopPolicyMode::PolicyGradient {
        return Err(OracleError::Unsupported(
            "an ε-greedy top level depends on the critics; use the policy-gradient top level".into(),
        ));
    }
    for s in 0..model.num_states() {
        for a in 0..model.num_actions() {
            let total: f64 = model.row(s, a).iter().sum();
            if (total - 1.0).abs() > ROW_TOL {
                return Err(OracleError::Model(format!("row ({s}, {a}) sums to {total}")));
            }
        }
    }
    Ok(())
}

/// Builds the one-step kernel of the augmented chain. The start is `(model.start(), o = 0..0)`
/// until [`AugmentedChain::set_start`] says otherwise.
pub fn build_chain(
    model: &TabularModel,
    config: &HierarchyConfig,
    params: &ParameterSet,
) -> Result<AugmentedChain> {
    check_compatible(model, config)?;
    let layout = config.layout();
    let depth = config.depth();
    let top = depth - 1;
    let (n_s, n_a) = (config.num_states, config.num_actions);
    let stacks = layout.stack_count();
    let m = n_s * stacks;

    let mut survival = vec![0.0; m * depth];
    let mut arrival = vec![0.0; m * stacks];
    for s in 0..n_s {
        for o in 0..stacks {
            let opts = layout.stack_from_index(o);
            let betas: Vec<f64> = (1..=top)
                .map(|j| sigmoid(params.termination_logit(s, &opts[..j]).expect("valid path")))
                .collect();
            let w = surviving_weights(&betas);
            let x = s * stacks + o;
            survival[x * depth..(x + 1) * depth].copy_from_slice(&w);
            let row = &mut arrival[x * stacks..(x + 1) * stacks];
            for (h, &wh) in w.iter().enumerate() {
                if wh == 0.0 {
                    continue;
                }
                let mut prefix = opts[..h].to_vec();
                for_each_extension(config, params, s, &mut prefix, top, wh, &mut |full, p| {
                    row[layout.stack_index(full)] += p;
                });
            }
        }
    }

    let mut action_probs = vec![0.0; m * n_a];
    let mut kernel = DMatrix::zeros(m, m);
    let mut reward = DVector::zeros(m);
    let mut land = vec![0.0; n_s];
    for s in 0..n_s {
        for o in 0..stacks {
            let x = s * stacks + o;
            let opts = layout.stack_from_index(o);
            let pi = softmax(params.policy_row(depth, s, &opts)?, config.temperature(depth));
            action_probs[x * n_a..(x + 1) * n_a].copy_from_slice(&pi);
            land.iter_mut().for_each(|v| *v = 0.0);
            for (a, &pa) in pi.iter().enumerate() {
                reward[x] += pa * model.reward(s, a);
                for (s2, &p) in model.row(s, a).iter().enumerate() {
                    land[s2] += pa * p;
                }
            }
            for (s2, &ps) in land.iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                let t = &arrival[(s2 * stacks + o) * stacks..(s2 * stacks + o + 1) * stacks];
                for (o2, &q) in t.iter().enumerate() {
                    kernel[(x, s2 * stacks + o2)] += ps * q;
                }
            }
        }
    }

    let discounted_kernel = &kernel * config.gamma;
    let chain = AugmentedChain {
        config: config.clone(),
        params: params.clone(),
        model: model.clone(),
        layout,
        stacks,
        kernel,
        discounted_kernel,
        reward,
        action_probs,
        arrival,
        survival,
        start: model.start() * stacks,
    };
    let worst = chain.max_row_defect();
    if worst > ROW_TOL {
        return Err(OracleError::Model(format!("kernel row deviates from 1 by {worst}")));
    }
    Ok(chain)
}

impl AugmentedChain {
    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn model(&self) -> &TabularModel {
        &self.model
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Number of augmented states.
    pub fn len(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stack_count(&self) -> usize {
        self.stacks
    }

    pub fn index(&self, state: usize, options: &[usize]) -> usize {
        state * self.stacks + self.layout.stack_index(options)
    }

    pub fn decode(&self, x: usize) -> (usize, Vec<usize>) {
        (x / self.stacks, self.layout.stack_from_index(x % self.stacks))
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Fixes the initial option stack at the model's start state.
    pub fn set_start(&mut self, options: &[usize]) -> Result<()> {
        if options.len() != self.config.depth() - 1 {
            return Err(OracleError::Model(format!(
                "start stack has {} options, expected {}",
                options.len(),
                self.config.depth() - 1
            )));
        }
        for (j, &o) in options.iter().enumerate() {
            if o >= self.layout.choices(j + 1) {
                return Err(OracleError::Model(format!("start option {o} out of range at level {}", j + 1)));
            }
        }
        self.start = self.index(self.model.start(), options);
        Ok(())
    }

    pub fn action_prob(&self, x: usize, action: usize) -> f64 {
        self.action_probs[x * self.config.num_actions + action]
    }

    /// `T(· | s', o)` over full stacks after arriving in `next_state` with stack `o`.
    pub fn arrival_row(&self, next_state: usize, stack: usize) -> &[f64] {
        let x = next_state * self.stacks + stack;
        &self.arrival[x * self.stacks..(x + 1) * self.stacks]
    }

    /// `w_h(s', o)` for `h = 0..=N-1`.
    pub fn survival(&self, next_state: usize, stack: usize) -> &[f64] {
        let d = self.config.depth();
        let x = next_state * self.stacks + stack;
        &self.survival[x * d..(x + 1) * d]
    }

    /// Largest `|Σ_x' K[x, x'] - 1|` over all rows.
    pub fn max_row_defect(&self) -> f64 {
        self.kernel
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Arrival mass `Σ_a π^N(a | x) P(s' | s, a)` for every `s'`.
    pub fn landing(&self, x: usize) -> Vec<f64> {
        let s = x / self.stacks;
        let n_s = self.config.num_states;
        let mut land = vec![0.0; n_s];
        for a in 0..self.config.num_actions {
            let pa = self.action_prob(x, a);
            for (s2, &p) in self.model.row(s, a).iter().enumerate() {
                land[s2] += pa * p;
            }
        }
        land
    }

    /// The transition to `(s', o'^{1:ℓ-1})` written term by term: none,
    /// lower-only for `q = N-1` down to `ℓ` (with `β^0 = 1`), all, and
    /// some-higher for `i = 1..ℓ-2`. Rows are augmented states, columns are
    /// `s' * Π_{j<ℓ} |Ω^j| + index(o'^{1:ℓ-1})`.
    pub fn prefix_kernel(&self, level: usize) -> Result<DMatrix<f64>> {
        let depth = self.config.depth();
        if level == 0 || level > depth {
            return Err(OracleError::Model(format!("prefix kernel level {level} outside 1..={depth}")));
        }
        let len = level - 1;
        let width = prefix_count(&self.layout, len);
        let n_s = self.config.num_states;
        let mut out = DMatrix::zeros(self.len(), n_s * width);
        let top = depth - 1;
        for x in 0..self.len() {
            let (_, opts) = self.decode(x);
            let land = self.landing(x);
            for (s2, &ps) in land.iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                if top == 0 {
                    out[(x, s2)] += ps;
                    continue;
                }
                let params = &self.params;
                let beta = |j: usize| -> f64 {
                    if j == 0 {
                        1.0
                    } else {
                        sigmoid(params.termination_logit(s2, &opts[..j]).expect("valid path"))
                    }
                };
                let fired = |from: usize| -> f64 { (from..=top).rev().map(beta).product() };
                let keep_col = s2 * width + prefix_index(&self.layout, &opts[..len]);

                let mut stay = 1.0 - beta(top);
                for q in (level.max(1)..=top).rev() {
                    stay += (1.0 - beta(q - 1)) * fired(q);
                }
                out[(x, keep_col)] += ps * stay;

                let add_draws = |keep: usize, weight: f64, out: &mut DMatrix<f64>| {
                    let mut prefix = opts[..keep].to_vec();
                    for_each_extension(&self.config, params, s2, &mut prefix, len, weight, &mut |c, p| {
                        out[(x, s2 * width + prefix_index(&self.layout, c))] += ps * p;
                    });
                };
                add_draws(0, fired(1), &mut out);
                for i in 1..level.saturating_sub(1) {
                    add_draws(i, (1.0 - beta(i)) * fired(i + 1), &mut out);
                }
            }
        }
        Ok(out)
    }

    /// Sums the columns of `K` down to `(s', o'^{1:ℓ-1})`.
    pub fn marginal_kernel(&self, level: usize) -> DMatrix<f64> {
        let len = level - 1;
        let width = prefix_count(&self.layout, len);
        let n_s = self.config.num_states;
        let mut out = DMatrix::zeros(self.len(), n_s * width);
        for x2 in 0..self.len() {
            let (s2, opts) = self.decode(x2);
            let col = s2 * width + prefix_index(&self.layout, &opts[..len]);
            for x in 0..self.len() {
                out[(x, col)] += self.kernel[(x, x2)];
            }
        }
        out
    }

    /// `k`-step discounted transition probabilities built by the recursion
    /// `P^(k)(x' | x) = Σ_y P^(1)(y | x) P^(k-1)(x' | y)` with explicit sums.
    pub fn k_step_recursive(&self, k: usize) -> DMatrix<f64> {
        let m = self.len();
        let one = &self.discounted_kernel;
        if k == 0 {
            return DMatrix::identity(m, m);
        }
        let mut cur = one.clone();
        for _ in 1..k {
            let mut next = DMatrix::zeros(m, m);
            for x in 0..m {
                for y in 0..m {
                    let p = one[(x, y)];
                    if p == 0.0 {
                        continue;
                    }
                    for x2 in 0..m {
                        next[(x, x2)] += p * cur[(y, x2)];
                    }
                }
            }
            cur = next;
        }
        cur
    }
}
