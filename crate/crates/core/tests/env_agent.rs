mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use srla_core::agent::{train, OptimizerKind};
use srla_core::env::{reward, EpisodeUnit};
use srla_core::{Action, CostSpec, MaintenanceEnv, QFunction, TrainConfig};

fn unit(id: u32, life: usize, start: usize) -> EpisodeUnit {
    EpisodeUnit {
        unit_id: id,
        start,
        observations: Array2::from_shape_fn((life, 2), |(t, k)| (t + k) as f64 / life as f64),
    }
}

proptest! {
    #[test]
    fn reward_is_bounded_by_the_cost_spec(
        replace in 0.1f64..500.0,
        extra in 0.1f64..5000.0,
        life in 2usize..300,
        t_frac in 0.0f64..1.0,
    ) {
        let costs = CostSpec::new(replace, extra).unwrap();
        let t = 1 + ((life - 1) as f64 * t_frac) as usize;
        let hold = reward(t, life, Action::Hold, &costs);
        let repl = reward(t, life, Action::Replace, &costs);
        if t < life {
            prop_assert_eq!(hold, 0.0);
            prop_assert!(repl <= -replace / (life - 1) as f64 && repl >= -replace);
            // replacing later is never more expensive per cycle
            if t + 1 < life {
                prop_assert!(reward(t + 1, life, Action::Replace, &costs) >= repl);
            }
        } else {
            prop_assert_eq!(hold, repl);
            prop_assert_eq!(hold, -(replace + extra) / life as f64);
        }
    }

    #[test]
    fn holding_runs_to_failure(life in 1usize..60, start_frac in 0.0f64..1.0) {
        let start = 1 + ((life - 1) as f64 * start_frac) as usize;
        let mut env = MaintenanceEnv::new(vec![unit(3, life, start)], CostSpec::default(), 0).unwrap();
        let first = env.reset();
        prop_assert_eq!(first.t, start);
        let mut steps = 0;
        loop {
            let r = env.step(Action::Hold).unwrap();
            steps += 1;
            if r.episode_ended {
                prop_assert!(r.info.failed);
                prop_assert_eq!(r.info.t, life);
                break;
            }
            prop_assert_eq!(r.reward, 0.0);
        }
        prop_assert_eq!(steps, life - start + 1);
        prop_assert!(env.step(Action::Hold).is_err());
    }
}

#[test]
fn resets_pick_units_uniformly() {
    let units: Vec<EpisodeUnit> = (0..10).map(|j| unit(j + 1, 5 + j as usize, 1)).collect();
    let mut env = MaintenanceEnv::new(units, CostSpec::default(), 42).unwrap();
    let mut counts = [0usize; 10];
    let draws = 10_000;
    for _ in 0..draws {
        counts[(env.reset().unit_id - 1) as usize] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        let f = c as f64 / draws as f64;
        assert!((f - 0.1).abs() <= 0.02, "unit {} drawn {f}", j + 1);
    }
}

#[test]
fn full_exploration_picks_each_action_half_the_time() {
    let q = QFunction::new(2, &[8], 0).unwrap();
    let mut r = rng(9);
    let draws = 10_000;
    let replaces = (0..draws)
        .filter(|_| q.select_action(&[0.2, 0.4], 1.0, &mut r).unwrap() == Action::Replace)
        .count();
    let f = replaces as f64 / draws as f64;
    assert!((f - 0.5).abs() <= 0.02, "{f}");
}

#[test]
fn no_exploration_is_greedy() {
    let q = QFunction::new(2, &[8], 1).unwrap();
    let mut r = rng(10);
    let greedy = q.greedy(&[0.3, -0.1]).unwrap();
    for _ in 0..100 {
        assert_eq!(q.select_action(&[0.3, -0.1], 0.0, &mut r).unwrap(), greedy);
    }
}

#[test]
fn learned_values_approach_value_iteration() {
    let life = 4;
    let unit = EpisodeUnit {
        unit_id: 1,
        start: 1,
        observations: Array2::eye(life),
    };
    let mut env = MaintenanceEnv::new(vec![unit], CostSpec::new(1.0, 4.0).unwrap(), 0).unwrap();
    let cfg = TrainConfig {
        episodes: 8000,
        learning_rate: 3e-4,
        epsilon0: 1.0,
        epsilon_decay: 1.0,
        hidden: vec![32, 32],
        optimizer: OptimizerKind::Adam,
        seed: 3,
        ..TrainConfig::default()
    };
    let (q, log) = train(&mut env, &cfg).unwrap();
    assert_eq!(log.len(), 8000);
    let optimal = replacement_values(life, 1.0, 4.0, cfg.gamma);
    for t in 1..=life {
        let s = Array2::<f64>::eye(life).row(t - 1).to_vec();
        let got = q.q_values(&s).unwrap();
        for a in 0..2 {
            assert!((got[a] - optimal[t - 1][a]).abs() < 0.05, "t={t} a={a}: {} vs {}", got[a], optimal[t - 1][a]);
        }
    }
}
