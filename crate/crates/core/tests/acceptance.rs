//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any required criterion fails.
//!
//! Criterion 11 runs only when `SRLA_FD001` names a `train_FD001.txt` file;
//! it is informational and never fails the suite. `SRLA_ACCEPTANCE=3,9`
//! restricts the run to the listed criteria.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{Array2, Axis};
use rand::Rng;
use srla_core::agent::{train, OptimizerKind};
use srla_core::dataio::{load_cmapss, split_fleet, CycleRecord};
use srla_core::env::{reward, EpisodeUnit};
use srla_core::interpret::{
    decode_all, feature_importance, identify_failure_states, rul_curve, estimate_rul, ImportanceOptions,
    RulOptions,
};
use srla_core::markov::{fit_hmm, smooth, decode, FitOptions};
use srla_core::iomarkov::fit_iohmm;
use srla_core::numeric::spearman;
use srla_core::pipeline::{fit_latent, train_pipeline, Encoder, Features, PipelineConfig, System};
use srla_core::srla::{cmc, evaluate_policy, imc, HoldPolicy, OraclePolicy};
use srla_core::{
    Action, CostSpec, Fleet, HmmModel, MaintenanceEnv, NormalizeKind, SyntheticSpec, TrainConfig, UnitRun,
};

use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, start: Instant) -> Result<(), String> {
    ensure(start.elapsed() < budget, || {
        format!("took {:.1?}, budget {:?}", start.elapsed(), budget)
    })
}

fn c1_reward_law() -> Outcome {
    let start = Instant::now();
    let costs = CostSpec::default();
    let (cr, cf) = (100.0, 1000.0);
    let mut checked = 0;
    for life in 2..=50usize {
        for t in 1..=life {
            for action in Action::ALL {
                let expected = match (t == life, action) {
                    (true, _) => -(cr + cf) / life as f64,
                    (false, Action::Hold) => 0.0,
                    (false, Action::Replace) => -cr / t as f64,
                };
                let got = reward(t, life, action, &costs);
                ensure(got == expected, || format!("T={life} t={t} {action:?}: {got} != {expected}"))?;
                checked += 1;
            }
        }
        // the environment must hand out the same numbers
        let unit = EpisodeUnit {
            unit_id: 1,
            start: 1,
            observations: Array2::zeros((life, 1)),
        };
        for stop in 1..=life {
            let mut env = MaintenanceEnv::new(vec![unit.clone()], costs, 0).map_err(|e| e.to_string())?;
            env.reset();
            for t in 1..=stop {
                let action = if t == stop { Action::Replace } else { Action::Hold };
                let r = env.step(action).map_err(|e| e.to_string())?.reward;
                ensure(r == reward(t, life, action, &costs), || format!("env T={life} t={t}"))?;
            }
        }
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!("{checked} (t, T, action) cases exact, env agrees"))
}

fn fleet_from_lifetimes(lifetimes: &[usize]) -> Fleet {
    let units = lifetimes
        .iter()
        .enumerate()
        .map(|(j, &life)| UnitRun {
            unit_id: j as u32 + 1,
            cycles: (1..=life)
                .map(|c| CycleRecord {
                    cycle: c as u32,
                    op_settings: vec![0.0],
                    sensors: vec![c as f64],
                    health: None,
                    rul_truth: None,
                    phase: None,
                })
                .collect(),
        })
        .collect();
    Fleet::new(units, 1, 1)
}

fn c2_cost_metrics() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let costs = CostSpec::new(r.random_range(1.0..200.0), r.random_range(1.0..2000.0)).unwrap();
        let n = r.random_range(1..=40);
        let lifetimes: Vec<usize> = (0..n).map(|_| r.random_range(2..=400)).collect();
        let n = n as f64;
        let sum_t: usize = lifetimes.iter().sum();
        let direct_imc = n * costs.replace / (sum_t - lifetimes.len()) as f64;
        let direct_cmc = n * (costs.replace + costs.failure) / sum_t as f64;
        let (got_imc, got_cmc) = (imc(&lifetimes, &costs), cmc(&lifetimes, &costs));
        ensure((got_imc - direct_imc).abs() <= 1e-12 && (got_cmc - direct_cmc).abs() <= 1e-12, || {
            format!("IMC {got_imc} vs {direct_imc}, CMC {got_cmc} vs {direct_cmc}")
        })?;
        let fleet = fleet_from_lifetimes(&lifetimes);
        let (hold, _) = evaluate_policy(&HoldPolicy, &fleet, &costs).map_err(|e| e.to_string())?;
        let oracle = OraclePolicy {
            lifetimes: lifetimes.clone(),
        };
        let (best, _) = evaluate_policy(&oracle, &fleet, &costs).map_err(|e| e.to_string())?;
        ensure((hold.avg_q_star - hold.cmc).abs() <= 1e-9, || format!("hold Q* {} vs CMC {}", hold.avg_q_star, hold.cmc))?;
        ensure((best.avg_q_star - best.imc).abs() <= 1e-9, || format!("oracle Q* {} vs IMC {}", best.avg_q_star, best.imc))?;
        ensure(hold.failed_fraction == 1.0 && best.failed_fraction == 0.0, || "failure fractions".into())?;
        worst = worst
            .max((hold.avg_q_star - hold.cmc).abs())
            .max((best.avg_q_star - best.imc).abs());
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!("100 fleets, max |Q* - bound| {worst:.1e}"))
}

fn c3_viterbi() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = r.random_range(1..=5);
        let t_len = r.random_range(1..=8);
        let hmm = random_hmm(n, 2, &mut r);
        let y = random_matrix(t_len, 2, 3.0, &mut r);
        let u = Array2::zeros((t_len, 0));
        let (path, lp) = decode(&hmm, u.view(), y.view()).map_err(|e| e.to_string())?;
        let truth = enumerate(n, t_len, |p| hmm_log_joint(&hmm, y.view(), p));
        ensure(path == truth.best_path, || format!("HMM case {case}: {path:?} vs {:?}", truth.best_path))?;
        ensure((lp - truth.best_log_prob).abs() <= 1e-9, || format!("HMM case {case}: log prob {lp} vs {}", truth.best_log_prob))?;
        worst = worst.max((lp - truth.best_log_prob).abs());
    }
    for case in 0..100 {
        let n = r.random_range(1..=4);
        let t_len = r.random_range(1..=7);
        let model = random_iohmm(n, 2, 2, &mut r);
        let u = random_matrix(t_len, 2, 2.0, &mut r);
        let y = random_matrix(t_len, 2, 3.0, &mut r);
        let (path, lp) = decode(&model, u.view(), y.view()).map_err(|e| e.to_string())?;
        let truth = enumerate(n, t_len, |p| iohmm_log_joint(&model, u.view(), y.view(), p));
        ensure(path == truth.best_path, || format!("IOHMM case {case}: {path:?} vs {:?}", truth.best_path))?;
        ensure((lp - truth.best_log_prob).abs() <= 1e-9, || format!("IOHMM case {case}: log prob"))?;
        worst = worst.max((lp - truth.best_log_prob).abs());
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("200 models, paths identical, max log-prob gap {worst:.1e}"))
}

fn c4_forward_backward() -> Outcome {
    let mut r = rng(4);
    let (mut row_err, mut post_err, mut ll_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for case in 0..100 {
        let iohmm = case % 2 == 1;
        let n = r.random_range(1..=4);
        let t_len = r.random_range(1..=7);
        let y = random_matrix(t_len, 2, 3.0, &mut r);
        let (track, truth) = if iohmm {
            let model = random_iohmm(n, 2, 2, &mut r);
            let u = random_matrix(t_len, 2, 2.0, &mut r);
            let track = smooth(&model, u.view(), y.view()).map_err(|e| e.to_string())?;
            (track, enumerate(n, t_len, |p| iohmm_log_joint(&model, u.view(), y.view(), p)))
        } else {
            let model = random_hmm(n, 2, &mut r);
            let u = Array2::zeros((t_len, 0));
            let track = smooth(&model, u.view(), y.view()).map_err(|e| e.to_string())?;
            (track, enumerate(n, t_len, |p| hmm_log_joint(&model, y.view(), p)))
        };
        for row in track.gamma.axis_iter(Axis(0)) {
            row_err = row_err.max((row.sum() - 1.0).abs());
        }
        post_err = post_err.max((&track.gamma - &truth.posteriors).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b)));
        ll_err = ll_err.max((track.log_likelihood - truth.log_evidence).abs());
    }
    ensure(row_err <= 1e-9, || format!("row sum error {row_err:.1e}"))?;
    ensure(post_err <= 1e-9, || format!("posterior error {post_err:.1e}"))?;
    ensure(ll_err <= 1e-9, || format!("log-likelihood error {ll_err:.1e}"))?;
    Ok(format!(
        "100 models, row sums within {row_err:.1e}, posteriors within {post_err:.1e}, evidence within {ll_err:.1e}"
    ))
}

fn c5_em_monotone() -> Outcome {
    let fleet = SyntheticSpec::multi_regime(4).generate(5).map_err(|e| e.to_string())?;
    let enc = Encoder::fit(&fleet, NormalizeKind::Standard).map_err(|e| e.to_string())?;
    let encoded: Vec<(Array2<f64>, Array2<f64>)> = fleet
        .units
        .iter()
        .map(|u| enc.encode(u).map(|(s, y)| (s, y.select(Axis(1), &[0, 1, 2, 3, 4]))))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ys: Vec<_> = encoded.iter().map(|(_, y)| y.view()).collect();
    let us: Vec<_> = encoded.iter().map(|(u, _)| u.view()).collect();
    let mut worst: f64 = 0.0;
    let mut check = |lls: &[f64], what: &str, seed: u64| -> Result<(), String> {
        ensure(lls.len() == 20, || format!("{what} seed {seed}: {} iterations", lls.len()))?;
        for w in lls.windows(2) {
            worst = worst.max(w[0] - w[1]);
            ensure(w[1] >= w[0] - 1e-6, || format!("{what} seed {seed}: {} -> {}", w[0], w[1]))?;
        }
        Ok(())
    };
    for seed in 0..50 {
        let opts = FitOptions {
            seed,
            max_iter: 20,
            tol: f64::NEG_INFINITY,
            restarts: 1,
        };
        let fit = fit_hmm(&ys, 3, &opts).map_err(|e| e.to_string())?;
        check(&fit.log_likelihoods, "HMM", seed)?;
        if seed < 10 {
            let fit = fit_iohmm(&us, &ys, 3, &opts).map_err(|e| e.to_string())?;
            check(&fit.log_likelihoods, "IOHMM", seed)?;
        }
    }
    Ok(format!("50 HMM + 10 IOHMM initialisations x 20 iterations, largest decrease {worst:.1e}"))
}

fn c6_gradient_check() -> Outcome {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let input = r.random_range(1..=6);
        let depth = r.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| r.random_range(1..=8)).collect();
        let q = srla_core::QFunction::new(input, &hidden, case).map_err(|e| e.to_string())?;
        let state: Vec<f64> = (0..input).map(|_| r.random_range(-2.0..2.0)).collect();
        let action = Action::from_index(r.random_range(0..2));
        let target = r.random_range(-3.0..3.0);
        let (_, grad) = q.gradient(&state, action, target).map_err(|e| e.to_string())?;
        let analytic = grad.flatten();
        let params = q.parameters();
        let loss = |p: &[f64]| {
            let mut net = q.clone();
            net.set_parameters(p).unwrap();
            0.5 * (net.q_values(&state).unwrap()[action.index()] - target).powi(2)
        };
        let h = 1e-6;
        let mut numeric = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] = params[i] + h;
            let up = loss(&p);
            p[i] = params[i] - h;
            let down = loss(&p);
            numeric.push((up - down) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = if norm == 0.0 { 0.0 } else { diff / norm };
        worst = worst.max(rel);
        ensure(rel <= 1e-4, || format!("net {case} ({input}->{hidden:?}): relative error {rel:.2e}"))?;
    }
    Ok(format!("50 nets, worst relative error {worst:.1e}"))
}

/// One-hot cycle index as the observation, so the five environment states
/// are exactly the cycles of a single unit with lifetime 5.
fn toy_policy_matches(replace: f64, failure: f64) -> Result<String, String> {
    let life = 5;
    let unit = EpisodeUnit {
        unit_id: 1,
        start: 1,
        observations: Array2::eye(life),
    };
    let costs = CostSpec::new(replace, failure).map_err(|e| e.to_string())?;
    let mut env = MaintenanceEnv::new(vec![unit], costs, 0).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        episodes: 1500,
        learning_rate: 1e-3,
        epsilon0: 0.5,
        epsilon_decay: 0.998,
        optimizer: OptimizerKind::Adam,
        seed: 7,
        ..TrainConfig::default()
    };
    let (q, _) = train(&mut env, &cfg).map_err(|e| e.to_string())?;
    let optimal = replacement_values(life, replace, failure, cfg.gamma);
    let mut policy = String::new();
    for t in 1..=life {
        let values = optimal[t - 1];
        let state = Array2::<f64>::eye(life).row(t - 1).to_vec();
        let got = q.greedy(&state).map_err(|e| e.to_string())?;
        if t == life {
            ensure(values[0] == values[1], || "final cycle should be a tie".into())?;
            policy.push('*');
            continue;
        }
        let best = if values[1] > values[0] { Action::Replace } else { Action::Hold };
        ensure(got == best, || {
            format!("c_r={replace} c_f={failure} t={t}: greedy {got:?}, optimal {best:?} (q {:?}, q* {values:?})", q.q_values(&state).unwrap())
        })?;
        policy.push(if best == Action::Hold { 'H' } else { 'R' });
    }
    Ok(policy)
}

fn c7_toy_mdp() -> Outcome {
    let start = Instant::now();
    let a = toy_policy_matches(1.0, 10.0)?;
    let b = toy_policy_matches(1.0, 0.1)?;
    within(Duration::from_secs(60), start)?;
    Ok(format!("greedy = value iteration on both cost settings ({a}, {b}; * = tie)"))
}

fn c8_end_to_end() -> Outcome {
    let start = Instant::now();
    let fleet = SyntheticSpec::multi_regime(100).generate(1).map_err(|e| e.to_string())?;
    let (train_fleet, test_fleet) = split_fleet(&fleet, 0.8, 7).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        system: System::Srla,
        ..PipelineConfig::default()
    };
    let out = train_pipeline(&train_fleet, &cfg).map_err(|e| e.to_string())?;
    let (report, _) = out.pipeline.evaluate(&test_fleet, &cfg.costs).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} test units: failed {:.0}%, IMC/Q* {:.3}, avg remaining {:.1}, Q* {:.3}, IMC {:.3}, CMC {:.3}, {:.0?}",
        report.n_units,
        100.0 * report.failed_fraction,
        report.imc_ratio,
        report.avg_remaining_cycles,
        report.avg_q_star,
        report.imc,
        report.cmc,
        start.elapsed()
    );
    ensure(report.failed_fraction == 0.0, || detail.clone())?;
    ensure(report.imc_ratio >= 0.85, || detail.clone())?;
    ensure(report.avg_remaining_cycles <= 10.0, || detail.clone())?;
    within(Duration::from_secs(600), start).map_err(|e| format!("{detail}; {e}"))?;
    Ok(detail)
}

/// Most common generating phase at the failure cycle among units whose
/// decoded path ends in `state`.
fn terminal_phase(fleet: &Fleet, paths: &[Vec<usize>], state: usize) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for (u, path) in fleet.units.iter().zip(paths) {
        if path.last() == Some(&state) {
            *counts.entry(u.cycles.last()?.phase?).or_insert(0usize) += 1;
        }
    }
    counts.into_iter().max_by_key(|&(_, n)| n).map(|(p, _)| p)
}

fn c9_failure_modes() -> Outcome {
    let fleet = SyntheticSpec::two_mode(60).generate(1).map_err(|e| e.to_string())?;
    let encoder = Encoder::fit(&fleet, NormalizeKind::Standard).map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig {
        system: System::System3,
        n_states: 5,
        ..PipelineConfig::default()
    };
    cfg.fit.seed = 1;
    cfg.fit.restarts = 6;
    let (latent, _, _) = fit_latent(&encoder, &fleet, &cfg).map_err(|e| e.to_string())?.expect("latent system");
    let features = Features {
        system: System::System3,
        encoder: encoder.clone(),
        latent: Some(latent),
    };
    let model = features.latent.as_ref().unwrap().model();
    let seqs = features.sequences(&fleet).map_err(|e| e.to_string())?;
    let failure = identify_failure_states(model, &seqs, 0.05).map_err(|e| e.to_string())?;
    ensure(failure.states.len() == 2, || format!("failure states {:?}", failure.states))?;
    let paths = decode_all(model, &seqs).map_err(|e| e.to_string())?;
    let labels: Vec<usize> = paths.iter().flatten().copied().collect();
    let views: Vec<_> = seqs.iter().map(|s| s.outputs.view()).collect();
    let x = ndarray::concatenate(Axis(0), &views).map_err(|e| e.to_string())?;
    let report = feature_importance(&labels, x.view(), &ImportanceOptions::default()).map_err(|e| e.to_string())?;
    let mut found = Vec::new();
    for &s in &failure.states {
        let phase = terminal_phase(&fleet, &paths, s).ok_or("no phase truth")?;
        let planted: &[usize] = match phase {
            3 => &SyntheticSpec::MODE_A_SENSORS,
            4 => &SyntheticSpec::MODE_B_SENSORS,
            p => return Err(format!("failure state {s} ends mostly in phase {p}")),
        };
        let top2: Vec<usize> = report.ranking_abs(s).ok_or("state missing from report")?[..2]
            .iter()
            .map(|&f| encoder.sensors[f])
            .collect();
        ensure(planted.iter().all(|p| top2.contains(p)), || {
            format!("state {s} (phase {phase}): top-2 sensors {top2:?}, planted {planted:?}")
        })?;
        found.push(format!("state {s} -> phase {phase}, top-2 {top2:?}"));
    }
    ensure(found.len() == 2 && found[0] != found[1], || "modes not distinct".into())?;
    Ok(format!("{}; low confidence {}", found.join("; "), report.low_confidence))
}

fn chain(stay: &[f64]) -> HmmModel {
    let n = stay.len() + 1;
    let mut transition = Array2::zeros((n, n));
    for (k, &p) in stay.iter().enumerate() {
        transition[[k, k]] = p;
        transition[[k, k + 1]] = 1.0 - p;
    }
    transition[[n - 1, n - 1]] = 1.0;
    let mut initial = ndarray::Array1::zeros(n);
    initial[0] = 1.0;
    let means = Array2::from_shape_fn((n, 1), |(k, _)| 10.0 * k as f64);
    HmmModel::new(initial, transition, means, Array2::ones((n, 1))).unwrap()
}

fn c10_rul() -> Outcome {
    let mut notes = Vec::new();
    for (stay, expected) in [(vec![0.5], 2.0), (vec![0.5, 0.5], 4.0), (vec![0.9], 10.0), (vec![0.8, 0.6, 0.5], 9.5)] {
        let model = chain(&stay);
        let y = Array2::zeros((1, 1));
        let u = Array2::zeros((1, 0));
        let est = estimate_rul(
            &model,
            u.view(),
            y.view(),
            &[stay.len()],
            &RulOptions {
                rollouts: 100,
                seed: 10,
                ..RulOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        ensure((est.mean - expected).abs() <= 3.0 * est.std_error, || {
            format!("chain {stay:?}: {:.2} +- {:.2}, expected {expected}", est.mean, est.std_error)
        })?;
        notes.push(format!("{:.2}+-{:.2} vs {expected}", est.mean, est.std_error));
    }

    let fleet = SyntheticSpec::single_mode(20).generate(10).map_err(|e| e.to_string())?;
    let encoder = Encoder::fit(&fleet, NormalizeKind::Standard).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        system: System::System3,
        n_states: 5,
        ..PipelineConfig::default()
    };
    let (latent, _, _) = fit_latent(&encoder, &fleet, &cfg).map_err(|e| e.to_string())?.expect("latent system");
    let features = Features {
        system: System::System3,
        encoder,
        latent: Some(latent),
    };
    let model = features.latent.as_ref().unwrap().model();
    let seqs = features.sequences(&fleet).map_err(|e| e.to_string())?;
    let failure = identify_failure_states(model, &seqs, 0.05).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    for (i, seq) in seqs.iter().enumerate().take(8) {
        let curve = rul_curve(
            model,
            seq.inputs.view(),
            seq.outputs.view(),
            &failure.states,
            &RulOptions {
                seed: i as u64,
                ..RulOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let cycles: Vec<f64> = (1..=curve.len()).map(|t| t as f64).collect();
        let means: Vec<f64> = curve.iter().map(|e| e.mean).collect();
        let rho = spearman(&cycles, &means);
        worst = worst.max(rho);
        ensure(rho < 0.0, || format!("unit {}: Spearman {rho:.3}", fleet.units[i].unit_id))?;
    }
    Ok(format!(
        "analytic chains {}; 8 unit curves with Spearman <= {worst:.3}",
        notes.join(", ")
    ))
}

fn c11_fd001() -> Option<Outcome> {
    let path = std::env::var_os("SRLA_FD001")?;
    Some((|| {
        let fleet = load_cmapss(&path).map_err(|e| e.to_string())?;
        let (train_fleet, test_fleet) = split_fleet(&fleet, 0.8, 11).map_err(|e| e.to_string())?;
        let cfg = PipelineConfig {
            system: System::System3,
            n_states: 15,
            ..PipelineConfig::default()
        };
        let out = train_pipeline(&train_fleet, &cfg).map_err(|e| e.to_string())?;
        let (report, _) = out.pipeline.evaluate(&test_fleet, &cfg.costs).map_err(|e| e.to_string())?;
        let detail = format!(
            "failed {:.0}%, IMC/Q* {:.3}, avg remaining {:.1}",
            100.0 * report.failed_fraction,
            report.imc_ratio,
            report.avg_remaining_cycles
        );
        if report.failed_fraction == 0.0 && report.imc_ratio >= 0.8 {
            Ok(detail)
        } else {
            Err(detail)
        }
    })())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("reward law", c1_reward_law),
        ("cost metrics", c2_cost_metrics),
        ("Viterbi vs path enumeration", c3_viterbi),
        ("forward-backward vs path enumeration", c4_forward_backward),
        ("EM monotonicity", c5_em_monotone),
        ("agent gradient check", c6_gradient_check),
        ("toy MDP optimality", c7_toy_mdp),
        ("end-to-end synthetic fleet", c8_end_to_end),
        ("failure-mode interpretation", c9_failure_modes),
        ("RUL estimation", c10_rul),
    ];
    let only: Option<Vec<usize>> = std::env::var("SRLA_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}. {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    let fd001 = if only.as_ref().is_none_or(|o| o.contains(&11)) {
        c11_fd001()
    } else {
        None
    };
    match fd001 {
        None => println!("SKIP  11. FD001 System 3 (set SRLA_FD001 to a train_FD001.txt path)"),
        Some(Ok(detail)) => println!("PASS  11. FD001 System 3, informational: {detail}"),
        Some(Err(detail)) => println!("FAIL  11. FD001 System 3, informational, not counted: {detail}"),
    }
    println!("acceptance: {} of {ran} required criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
