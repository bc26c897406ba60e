//! Brute-force oracles for the hierarchical option-critic.
//!
//! Micro-MDPs are small enough to enumerate every augmented state
//! `(s, o^{1:N-1})`, so values of a frozen hierarchy can be computed exactly by
//! a linear solve and its gradients checked against finite differences. Value
//! iteration provides optima for the benchmark environments, and sampling
//! checks tie the exact chain to the learner's own behaviour.

pub mod chain;
pub mod enumeration;
mod error;
pub mod exact;
pub mod gradient;
pub mod instances;
pub mod optimal;
pub mod simulate;
pub mod verify;

pub use chain::{build_chain, surviving_weights, AugmentedChain};
pub use error::{OracleError, Result};
pub use exact::{exact_values, expected_return, oracle_config, ExactValues};
pub use gradient::{
    analytic_policy_gradient, analytic_termination_gradient, fd_policy_gradient, fd_termination_gradient,
    occupancy,
};
pub use optimal::{value_iteration, OptimalSolution};
pub use simulate::{kernel_frequencies, monte_carlo_return, FrequencyCheck, ReturnEstimate};
pub use verify::{run_suite, CheckResult, SuiteOptions, VerificationReport};
