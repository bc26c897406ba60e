use hoc_core::HocRng;
use hoc_envs::{Environment, FourRooms, StochasticDP, TabularModel};
use proptest::prelude::*;

fn within_sigmas(count: usize, trials: usize, p: f64, k: f64) -> bool {
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= k * sd
}

#[test]
fn goal_is_uniform_over_open_cells() {
    let mut env = FourRooms::new();
    let mut rng = HocRng::new(11, 1);
    let n = env.num_cells();
    let trials = 100_000;
    let mut counts = vec![0usize; n];
    for _ in 0..trials {
        env.reset(&mut rng);
        let (r, c) = env.position(env.goal());
        assert!(!env.is_wall(r, c));
        let (r, c) = env.position(env.agent());
        assert!(!env.is_wall(r, c));
        counts[env.goal()] += 1;
    }
    // Pearson statistic over all cells against 3σ of its chi-square law
    let expected = trials as f64 / n as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&k| (k as f64 - expected).powi(2) / expected)
        .sum();
    let dof = (n - 1) as f64;
    assert!(chi2 <= dof + 3.0 * (2.0 * dof).sqrt(), "chi2 = {chi2}");
    assert!(counts.iter().all(|&k| k > 0));
}

#[test]
fn moves_follow_intended_direction_two_thirds_of_the_time() {
    let env = FourRooms::new();
    let mut rng = HocRng::new(5, 1);
    let trials = 1_000_000;
    let mut intended = 0;
    for i in 0..trials {
        let cell = i % env.num_cells();
        let (_, slipped) = env.sample_move(cell, i % 4, &mut rng);
        intended += !slipped as usize;
    }
    assert!(within_sigmas(intended, trials, 2.0 / 3.0, 3.0), "{intended}");
}

fn check_model_against_sampler(
    model: &TabularModel,
    mut sample: impl FnMut(usize, usize, &mut HocRng) -> usize,
    pairs: &[(usize, usize)],
) {
    let mut rng = HocRng::new(77, 1);
    let trials = 1_000_000 / pairs.len();
    for &(s, a) in pairs {
        let mut counts = vec![0usize; model.num_states()];
        for _ in 0..trials {
            counts[sample(s, a, &mut rng)] += 1;
        }
        for (next, &k) in counts.iter().enumerate() {
            let p = model.prob(s, a, next);
            if p == 0.0 {
                assert_eq!(k, 0, "({s}, {a}) -> {next} has zero probability");
            } else {
                assert!(within_sigmas(k, trials, p, 4.0), "({s}, {a}) -> {next}: {k} vs {p}");
            }
        }
    }
}

#[test]
fn four_rooms_model_matches_sampled_steps() {
    let env = FourRooms::fixed(0, 103).unwrap();
    let model = env.exact_model().unwrap();
    let corridor = env.cell_at(2, 2).unwrap();
    let hall = env.cell_at(6, 2).unwrap();
    let corner = env.cell_at(11, 1).unwrap();
    let pairs = [(corridor, 0), (hall, 3), (corner, 2), (corner, 1)];
    check_model_against_sampler(&model, |s, a, rng| env.sample_move(s, a, rng).0, &pairs);
}

#[test]
fn stochastic_dp_model_matches_sampled_steps() {
    let model = StochasticDP::new().exact_model().unwrap();
    let pairs: Vec<(usize, usize)> = (0..12)
        .filter(|&s| !model.is_terminal(s))
        .flat_map(|s| [(s, 0), (s, 1)])
        .collect();
    check_model_against_sampler(
        &model,
        |s, a, rng| {
            let (pos, visited) = StochasticDP::decode(s);
            StochasticDP::at(pos, visited).step(a, rng).unwrap().next_state
        },
        &pairs,
    );
}

#[test]
fn same_seed_same_trajectory() {
    let run = |seed| {
        let mut env = FourRooms::new();
        let mut rng = HocRng::new(seed, 1);
        let mut trace = vec![env.reset(&mut rng)];
        for i in 0..500 {
            let t = env.step(i % 4, &mut rng).unwrap();
            trace.push(t.next_state);
            if t.done {
                trace.push(env.reset(&mut rng));
            }
        }
        trace
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn four_rooms_rows_are_stochastic(start in 0usize..104, goal in 0usize..104) {
        prop_assume!(start != goal);
        let model = FourRooms::fixed(start, goal).unwrap().exact_model().unwrap();
        for s in 0..model.num_states() {
            for a in 0..4 {
                let total: f64 = model.row(s, a).iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&model.reward(s, a)));
            }
        }
    }
}
