//! Exact values of a frozen hierarchical policy from the augmented chain.

use hoc_core::{softmax, CriticSet, HierarchyConfig, ParameterSet, TopPolicyMode};
use hoc_envs::TabularModel;
use nalgebra::{DMatrix, DVector};

use crate::chain::{build_chain, AugmentedChain};
use crate::{OracleError, Result};

/// Augmented chains at least this large are solved by fixed-point sweeps.
pub const DENSE_LIMIT: usize = 1000;
const SWEEP_CAP: usize = 1_000_000;

/// Every value table of the hierarchy under frozen parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactValues {
    /// `Q_U` per level `1..N` in the critic layout.
    pub q_u: Vec<Vec<f64>>,
    /// `V_Ω(s)`.
    pub v: Vec<f64>,
    /// `Q_Ω(s, o^{1:N-1})` per augmented state (before the action is drawn).
    pub q_full: Vec<f64>,
    /// `U(s', o^{1:N-1})` per augmented state: the value of arriving with `o` active.
    pub u: Vec<f64>,
    /// Expected discounted return from the chain's start.
    pub rho: f64,
    /// `max |q_full - (r + γ K q_full)|`.
    pub residual: f64,
}

impl ExactValues {
    /// The `Q_U` tables as a critic set, so learner-side code can evaluate with them.
    pub fn critics(&self, config: &HierarchyConfig) -> CriticSet {
        let mut c = CriticSet::zeros(config);
        c.q_u = self.q_u.clone();
        c
    }

    /// `Q_Ω(s, o^{1:m})` for `m = 0..=N-1` (`m = 0` is `V_Ω(s)`).
    pub fn q_omega(&self, chain: &AugmentedChain, state: usize, prefix: &[usize]) -> f64 {
        if prefix.is_empty() {
            return self.v[state];
        }
        let i = chain.layout().entry_index(state, prefix).expect("prefix within layout");
        self.q_u[prefix.len() - 1][i]
    }

    /// `U(s', o^{1:ℓ})` for reference level `ℓ`: every outcome that keeps
    /// `o^{1:ℓ}` is valued at `Q_Ω(s', o^{1:ℓ})` and the rest at the prefix
    /// that survives, except that no outcome is ever valued below `N-1`.
    pub fn arrival(&self, chain: &AugmentedChain, next_state: usize, options: &[usize], level: usize) -> f64 {
        let top = options.len();
        let stack = chain.layout().stack_index(options);
        let w = chain.survival(next_state, stack);
        let mut total = 0.0;
        for (h, &wh) in w.iter().enumerate() {
            let keep = if h == top { top } else { h.min(level) };
            total += wh * self.q_omega(chain, next_state, &options[..keep]);
        }
        total
    }
}

/// Solves `(I - γK) v = b`, or its transpose, exactly when small and by sweeps otherwise.
pub(crate) fn solve_discounted(chain: &AugmentedChain, b: &DVector<f64>, transpose: bool) -> Result<DVector<f64>> {
    let gamma = chain.config().gamma;
    if gamma.is_nan() || gamma >= 1.0 {
        return Err(OracleError::Contraction { gamma });
    }
    let gk = if transpose {
        chain.discounted_kernel.transpose()
    } else {
        chain.discounted_kernel.clone()
    };
    let m = chain.len();
    if m < DENSE_LIMIT {
        let a = DMatrix::identity(m, m) - &gk;
        return a
            .lu()
            .solve(b)
            .ok_or_else(|| OracleError::Solve("singular evaluation matrix".into()));
    }
    let mut v = b.clone();
    for _ in 0..SWEEP_CAP {
        let next = b + &gk * &v;
        let change = (&next - &v).amax();
        v = next;
        if change <= 1e-13 * (1.0 - gamma) {
            return Ok(v);
        }
    }
    Err(OracleError::Solve(format!("no convergence within {SWEEP_CAP} sweeps")))
}

/// Solves the evaluation equations of the chain and derives every value table.
pub fn exact_values(chain: &AugmentedChain) -> Result<ExactValues> {
    let config = chain.config();
    let params = chain.params();
    let model = chain.model();
    let layout = chain.layout();
    let depth = config.depth();
    let (n_s, n_a) = (config.num_states, config.num_actions);
    let stacks = chain.stack_count();
    let gamma = config.gamma;

    let q = solve_discounted(chain, &chain.reward, false)?;
    let residual = (&q - (&chain.reward + &chain.discounted_kernel * &q)).amax();

    let mut u = vec![0.0; chain.len()];
    for s2 in 0..n_s {
        for o in 0..stacks {
            let t = chain.arrival_row(s2, o);
            u[s2 * stacks + o] = t.iter().enumerate().map(|(o2, p)| p * q[s2 * stacks + o2]).sum();
        }
    }

    let mut q_u: Vec<Vec<f64>> = (1..=depth).map(|l| vec![0.0; layout.entry_count(l)]).collect();
    for x in 0..chain.len() {
        let (s, o) = (x / stacks, x % stacks);
        for a in 0..n_a {
            let future: f64 = model
                .row(s, a)
                .iter()
                .enumerate()
                .map(|(s2, p)| p * u[s2 * stacks + o])
                .sum();
            q_u[depth - 1][x * n_a + a] = model.reward(s, a) + gamma * future;
        }
    }
    for level in (1..depth).rev() {
        let n = layout.choices(level + 1);
        let tau = config.temperature(level + 1);
        for e in 0..layout.entry_count(level) {
            let pi = softmax(&params.policy_logits[level][e * n..(e + 1) * n], tau);
            q_u[level - 1][e] = pi
                .iter()
                .zip(&q_u[level][e * n..(e + 1) * n])
                .map(|(p, v)| p * v)
                .sum();
        }
    }
    let n1 = layout.choices(1);
    let v = (0..n_s)
        .map(|s| {
            let pi = softmax(&params.policy_logits[0][s * n1..(s + 1) * n1], config.temperature(1));
            pi.iter().zip(&q_u[0][s * n1..(s + 1) * n1]).map(|(p, v)| p * v).sum()
        })
        .collect();

    Ok(ExactValues {
        q_u,
        v,
        q_full: q.iter().copied().collect(),
        u,
        rho: q[chain.start()],
        residual,
    })
}

/// Expected discounted return of `params` from `(model.start(), start_options)`.
pub fn expected_return(
    model: &TabularModel,
    config: &HierarchyConfig,
    params: &ParameterSet,
    start_options: &[usize],
) -> Result<f64> {
    let mut chain = build_chain(model, config, params)?;
    chain.set_start(start_options)?;
    let q = solve_discounted(&chain, &chain.reward, false)?;
    Ok(q[chain.start()])
}

/// A config that the oracle accepts: same shape, softmax top level.
pub fn oracle_config(config: &HierarchyConfig) -> HierarchyConfig {
    let mut c = config.clone();
    c.top_policy_mode = TopPolicyMode::PolicyGradient;
    c
}
