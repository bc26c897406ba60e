//! Core mathematics of the N-level hierarchical option-critic.
//!
//! A hierarchy of depth `N` has option levels `1..N-1` and a primitive action
//! level `N`. Options are chosen top-down and terminate bottom-up: the option at
//! level `j` may only terminate in a step where every level below it terminated.
//!
//! Levels are 1-based throughout the public API so that level `ℓ` of a table
//! matches the usual `(s, o^{1:ℓ})` indexing of augmented states.
//!
//! This crate holds only pure functions of explicitly passed tables. The
//! learning loop lives in `hoc-learn`, the brute-force verification in
//! `hoc-oracle`.

pub mod config;
pub mod critics;
pub mod error;
pub mod gradients;
pub mod layout;
pub mod mutation;
pub mod params;
pub mod policy;
pub mod rng;
pub mod stack;
pub mod termination;
pub mod values;

pub use config::{HierarchyConfig, TopPolicyMode};
pub use critics::CriticSet;
pub use error::{HocError, Result};
pub use gradients::{
    log_policy_score, policy_grad_step, sigmoid_grad_step, softmax_grad_step, termination_gate,
    termination_grad_step,
};
pub use layout::Layout;
pub use params::ParameterSet;
pub use policy::{policy_distribution, sigmoid, softmax, softmax_policy, termination_prob};
pub use rng::HocRng;
pub use stack::OptionStack;
pub use termination::{termination_partition, TerminationEvent, TerminationKind};
pub use values::{advantage, eval_q_omega, eval_u, eval_v_omega, StackValues};
