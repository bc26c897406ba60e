use hoc_core::{HierarchyConfig, TopPolicyMode};
use hoc_learn::Learner;

fn numbers(v: &str) -> Vec<f64> {
    v.split_whitespace().map(|x| x.parse().unwrap()).collect()
}

fn assert_close(name: &str, got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len(), "{name}");
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 1e-15 * w.abs().max(1.0), "{name}: {got:?} vs {want:?}");
    }
}

#[test]
fn scripted_episode_matches_hand_trace() {
    let golden = include_str!("golden/hand_trace.txt");
    let mut c = HierarchyConfig::new(2, 2, vec![2]);
    c.top_policy_mode = TopPolicyMode::PolicyGradient;
    c.gamma = 0.9;
    c.lr_critic = 0.5;
    c.lr_policy = 0.5;
    c.lr_termination = 0.25;
    let mut l = Learner::new(c, 2024).unwrap();

    for line in golden.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let (key, value) = line.split_once(" = ").unwrap();
        match key {
            "initial_options" => {
                let want: usize = value.parse().unwrap();
                assert_eq!(l.select_initial_stack(0).unwrap().options(), &[want]);
            }
            "step" => {
                let (t, after) = value.split_once(" -> ").unwrap();
                let f: Vec<&str> = t.split_whitespace().collect();
                let rec = l
                    .learn_step(
                        f[0].parse().unwrap(),
                        f[1].parse().unwrap(),
                        f[2].parse().unwrap(),
                        f[3].parse().unwrap(),
                        f[4].parse().unwrap(),
                    )
                    .unwrap();
                assert_eq!(rec.next_options, vec![after.parse::<usize>().unwrap()]);
            }
            "q_u_1" => assert_close(key, &l.critics.q_u[0], &numbers(value)),
            "q_u_2" => assert_close(key, &l.critics.q_u[1], &numbers(value)),
            "policy_1" => assert_close(key, &l.params.policy_logits[0], &numbers(value)),
            "policy_2" => assert_close(key, &l.params.policy_logits[1], &numbers(value)),
            "termination_1" => assert_close(key, &l.params.termination_logits[0], &numbers(value)),
            other => panic!("unknown golden key {other}"),
        }
    }
}
