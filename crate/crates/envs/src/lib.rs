//! Tabular environments with enumerable state and action spaces.
//!
//! Every environment exposes integer observations and can produce an exact
//! [`TabularModel`] of its dynamics for the dynamic-programming oracles.

mod error;
mod four_rooms;
mod model;
mod stochastic_dp;

pub use error::EnvError;
pub use four_rooms::{Direction, FourRooms, FOUR_ROOMS_LAYOUT, SLIP_PROB};
pub use model::{ModelEnv, TabularModel};
pub use stochastic_dp::{StochasticDP, DP_POSITIONS};

use hoc_core::HocRng;

pub type Result<T> = std::result::Result<T, EnvError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Starts a new episode and returns the initial observation.
    fn reset(&mut self, rng: &mut HocRng) -> usize;
    /// Advances one step. Fails if the episode has not started or is already over.
    fn step(&mut self, action: usize, rng: &mut HocRng) -> Result<Transition>;
    /// Exact transition and reward model for the current start configuration.
    fn exact_model(&self) -> Result<TabularModel>;
}
