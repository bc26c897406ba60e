//! Optimal values of a finite MDP by value iteration.

use hoc_envs::TabularModel;

use crate::{OracleError, Result};

const TOLERANCE: f64 = 1e-10;
const SWEEP_CAP: usize = 10_000_000;
/// Actions within this much of the best are treated as ties and the lowest index wins.
const TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub values: Vec<f64>,
    /// Greedy action per state (0 for terminal states).
    pub policy: Vec<usize>,
    /// `V*(start)`.
    pub start_value: f64,
    pub sweeps: usize,
}

fn backup(model: &TabularModel, values: &[f64], gamma: f64, s: usize, a: usize) -> f64 {
    let future: f64 = model.row(s, a).iter().zip(values).map(|(p, v)| p * v).sum();
    model.reward(s, a) + gamma * future
}

/// Sweeps `V(s) = max_a R(s, a) + γ Σ P(s' | s, a) V(s')` in place until the
/// largest change is below 1e-10. Terminal states are fixed at 0. `γ = 1` is
/// allowed for models where every policy eventually terminates.
pub fn value_iteration(model: &TabularModel, gamma: f64) -> Result<OptimalSolution> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(OracleError::Model(format!("discount {gamma} outside [0, 1]")));
    }
    let n_s = model.num_states();
    let n_a = model.num_actions();
    let mut values = vec![0.0; n_s];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for s in 0..n_s {
            if model.is_terminal(s) {
                continue;
            }
            let best = (0..n_a)
                .map(|a| backup(model, &values, gamma, s, a))
                .fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best - values[s]).abs());
            values[s] = best;
        }
        if change < TOLERANCE {
            break;
        }
        if sweeps >= SWEEP_CAP {
            return Err(OracleError::Solve(format!(
                "value iteration still moving by {change} after {sweeps} sweeps"
            )));
        }
    }
    let policy = (0..n_s)
        .map(|s| {
            if model.is_terminal(s) {
                return 0;
            }
            let q: Vec<f64> = (0..n_a).map(|a| backup(model, &values, gamma, s, a)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            q.iter().position(|&v| v >= best - TIE).unwrap_or(0)
        })
        .collect();
    Ok(OptimalSolution {
        start_value: values[model.start()],
        values,
        policy,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hoc_envs::{Environment, FourRooms, StochasticDP};

    #[test]
    fn stochastic_dp_optimum_goes_right_then_left() {
        let model = StochasticDP::new().exact_model().unwrap();
        let opt = value_iteration(&model, 1.0).unwrap();
        // reach s6 before s1 from s2 with probability 1/5, then walk home for 1
        assert!((opt.start_value - (0.2 + 0.8 * 0.01)).abs() < 1e-8);
        let discounted = value_iteration(&model, 0.99).unwrap();
        for pos in 2..=5 {
            assert_eq!(discounted.policy[StochasticDP::encode(pos, false)], StochasticDP::RIGHT);
        }
        for pos in 2..=6 {
            assert_eq!(discounted.policy[StochasticDP::encode(pos, true)], StochasticDP::LEFT);
            assert_eq!(opt.policy[StochasticDP::encode(pos, true)], StochasticDP::LEFT);
        }
    }

    #[test]
    fn zero_reward_model_has_zero_values() {
        let m = TabularModel::new(2, 1, vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 0.0], vec![false; 2], 0).unwrap();
        let opt = value_iteration(&m, 0.9).unwrap();
        assert_eq!(opt.values, vec![0.0, 0.0]);
    }

    #[test]
    fn four_rooms_next_to_goal() {
        let env = FourRooms::new();
        // a room cell and the cell to its right
        let (start, goal) = (env.cell_at(1, 1).unwrap(), env.cell_at(1, 2).unwrap());
        let fixed = FourRooms::fixed(start, goal).unwrap();
        let model = fixed.exact_model().unwrap();
        let k = fixed.neighbours(start).len() as f64;
        // γ = 0: only the immediate chance of landing on the goal counts
        let myopic = value_iteration(&model, 0.0).unwrap();
        assert!((myopic.start_value - (2.0 / 3.0 + 1.0 / (3.0 * k))).abs() < 1e-12);
        // γ = 0.9: 2/3 · 1 plus the slip continuation over the neighbours
        let gamma = 0.9;
        let opt = value_iteration(&model, gamma).unwrap();
        let slip: f64 = fixed
            .neighbours(start)
            .iter()
            .map(|&n| if n == goal { 1.0 } else { gamma * opt.values[n] })
            .sum::<f64>()
            / k;
        assert!((opt.start_value - (2.0 / 3.0 + slip / 3.0)).abs() < 1e-9);
    }
}
