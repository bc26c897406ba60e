use hoc_core::HocRng;
use hoc_envs::Environment;

use crate::{Learner, Result, StepRecord};

pub const DEFAULT_STEP_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub total_reward: f64,
    pub steps: usize,
    /// Terminations per option level (index `j-1` for level `j`).
    pub terminations: Vec<usize>,
    /// Terminations that picked a different option, per level.
    pub switches: Vec<usize>,
    /// The step cap ended the episode before a terminal state.
    pub truncated: bool,
}

impl Learner {
    /// Runs one episode from a fresh `env.reset`, learning online.
    pub fn run_episode<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        env_rng: &mut HocRng,
        step_cap: usize,
    ) -> Result<EpisodeLog> {
        self.run_episode_observed(env, env_rng, step_cap, |_| {})
    }

    /// As [`Learner::run_episode`], handing every [`StepRecord`] to `observe`.
    pub fn run_episode_observed<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        env_rng: &mut HocRng,
        step_cap: usize,
        mut observe: impl FnMut(&StepRecord),
    ) -> Result<EpisodeLog> {
        let top = self.depth() - 1;
        let mut log = EpisodeLog {
            total_reward: 0.0,
            steps: 0,
            terminations: vec![0; top],
            switches: vec![0; top],
            truncated: false,
        };
        let mut state = env.reset(env_rng);
        self.select_initial_stack(state)?;
        loop {
            let action = self.choose_action(state)?;
            let t = env.step(action, env_rng)?;
            let record = self.learn_step(state, action, t.reward, t.next_state, t.done)?;
            log.total_reward += t.reward;
            log.steps += 1;
            for &j in &record.terminated_levels {
                log.terminations[j - 1] += 1;
            }
            for j in record.switched_levels() {
                log.switches[j - 1] += 1;
            }
            observe(&record);
            if t.done {
                break;
            }
            if log.steps >= step_cap {
                log.truncated = true;
                break;
            }
            state = t.next_state;
        }
        Ok(log)
    }
}
