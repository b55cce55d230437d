use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::Axis;
use srla_core::agent::{write_episode_log, TrainConfig};
use srla_core::dataio::{
    load_cmapss, load_model, load_truth, save_model, split_fleet, write_cmapss, write_truth, Fleet,
};
use srla_core::interpret::{
    decode_all, feature_importance, identify_failure_states, map_health_states, project_2d, rul_curve,
    ImportanceOptions, RulOptions,
};
use srla_core::markov::FitOptions;
use srla_core::numeric::{derive_seed, spearman};
use srla_core::pipeline::{train_pipeline, Pipeline, PipelineConfig, System};
use srla_core::srla::{
    evaluate_policy, outcomes_csv, report_table, reports_csv, EvalReport, HoldPolicy, OraclePolicy, UnitOutcome,
};
use srla_core::{CostSpec, SyntheticSpec};

use crate::config::{Command, CostArgs, EvalArgs, FleetKind, InterpretArgs, PolicyArg, RunConfig, SynthArgs, TrainArgs};

pub fn run(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    match &cfg.command {
        Command::Synth(a) => synth(a, cfg.seed, &cfg.out_dir)?,
        Command::Train(a) => train(a, cfg.seed, &cfg.out_dir)?,
        Command::Eval(a) => eval(a, &cfg.out_dir)?,
        Command::Interpret(a) => interpret(a, cfg.seed, &cfg.out_dir)?,
    }
    let path = cfg.save()?;
    tracing::info!(config = %path.display(), "run configuration written");
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn costs(a: &CostArgs) -> Result<CostSpec> {
    Ok(CostSpec::new(a.cr, a.cf)?)
}

fn truth_path(fleet_path: &Path) -> PathBuf {
    let stem = fleet_path.file_stem().and_then(|s| s.to_str()).unwrap_or("fleet");
    fleet_path.with_file_name(format!("{stem}.truth.csv"))
}

fn synth(a: &SynthArgs, seed: u64, out_dir: &Path) -> Result<()> {
    if a.units == 0 {
        bail!("--units must be at least 1");
    }
    let spec = match a.kind {
        FleetKind::SingleMode => SyntheticSpec::single_mode(a.units),
        FleetKind::MultiRegime => SyntheticSpec::multi_regime(a.units),
        FleetKind::TwoMode => SyntheticSpec::two_mode(a.units),
    };
    let fleet = spec.generate(seed)?;
    let path = out_dir.join(&a.output);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_cmapss(&fleet, &path)?;
    let truth = truth_path(&path);
    write_truth(&fleet, &truth)?;
    println!(
        "wrote {} units ({} cycles) to {} and truth to {}",
        fleet.len(),
        fleet.total_cycles(),
        path.display(),
        truth.display()
    );
    Ok(())
}

fn load_fleet(path: &Path) -> Result<Fleet> {
    let fleet = load_cmapss(path).with_context(|| format!("loading {}", path.display()))?;
    if fleet.is_empty() {
        bail!("{} holds no units", path.display());
    }
    Ok(fleet)
}

fn subset(fleet: &Fleet, ids: &HashSet<u32>) -> Fleet {
    let mut out = fleet.clone();
    out.units.retain(|u| ids.contains(&u.unit_id));
    out
}

fn split_csv(train: &Fleet, test: &Fleet) -> String {
    let mut out = String::from("unit,set\n");
    for (set, fleet) in [("train", train), ("test", test)] {
        for u in &fleet.units {
            writeln!(out, "{},{set}", u.unit_id).unwrap();
        }
    }
    out
}

fn test_ids(split: &Path) -> Result<HashSet<u32>> {
    let text = fs::read_to_string(split).with_context(|| format!("reading {}", split.display()))?;
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let (id, set) = line
            .split_once(',')
            .with_context(|| format!("{}:{}: expected 'unit,set'", split.display(), i + 1))?;
        if set.trim() == "test" {
            ids.insert(id.trim().parse().with_context(|| format!("{}:{}", split.display(), i + 1))?);
        }
    }
    Ok(ids)
}

fn train(a: &TrainArgs, seed: u64, out_dir: &Path) -> Result<()> {
    let fleet = load_fleet(&a.data)?;
    let split_seed = a.split_seed.unwrap_or_else(|| derive_seed(seed, "split"));
    let (train_fleet, test_fleet) = split_fleet(&fleet, a.train_fraction, split_seed)?;
    write(&out_dir.join("split.csv"), &split_csv(&train_fleet, &test_fleet))?;
    let costs = costs(&a.costs)?;
    let system: System = a.system.into();
    let grid: Vec<usize> = if system.uses_latent() { a.states.clone() } else { vec![0] };
    if grid.is_empty() {
        bail!("--states needs at least one value");
    }
    let mut rows = Vec::new();
    for &n_states in &grid {
        let name = if system.uses_latent() {
            format!("{system}_states_{n_states}")
        } else {
            system.to_string()
        };
        let dir = out_dir.join(&name);
        fs::create_dir_all(&dir)?;
        let cfg = PipelineConfig {
            system,
            n_states,
            fit: FitOptions {
                seed: derive_seed(seed, "em"),
                max_iter: a.max_iter,
                tol: a.tol,
                restarts: a.restarts,
            },
            agent: TrainConfig {
                episodes: a.episodes,
                gamma: a.gamma,
                learning_rate: a.lr,
                epsilon0: a.epsilon0,
                epsilon_decay: a.epsilon_decay,
                hidden: a.hidden.clone(),
                optimizer: a.optimizer.into(),
                seed: derive_seed(seed, "agent"),
            },
            costs,
            expansion_depth: a.depth,
        };
        tracing::info!(%name, "training");
        let out = train_pipeline(&train_fleet, &cfg)?;
        if !out.excluded_units.is_empty() {
            println!("{name}: units never gated, left out of training: {:?}", out.excluded_units);
        }
        save_model(&out.pipeline, dir.join("pipeline.json"))?;
        write_episode_log(&out.episode_log, dir.join("training_log.csv"))?;
        if !out.em_log_likelihoods.is_empty() {
            let mut em = String::from("iteration,log_likelihood\n");
            for (i, ll) in out.em_log_likelihoods.iter().enumerate() {
                writeln!(em, "{},{ll:?}", i + 1).unwrap();
            }
            write(&dir.join("em_log.csv"), &em)?;
        }
        let (report, outcomes) = out.pipeline.evaluate(&test_fleet, &costs)?;
        write(&dir.join("outcomes.csv"), &outcomes_csv(&outcomes))?;
        write(&dir.join("report.csv"), &reports_csv(&[(name.clone(), report)]))?;
        rows.push((name, report));
    }
    write(&out_dir.join("summary.csv"), &reports_csv(&rows))?;
    let table = report_table(&rows);
    write(&out_dir.join("summary.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn eval(a: &EvalArgs, out_dir: &Path) -> Result<()> {
    let mut fleet = load_fleet(&a.data)?;
    if let Some(split) = &a.split {
        fleet = subset(&fleet, &test_ids(split)?);
        if fleet.is_empty() {
            bail!("no test units of {} found in {}", split.display(), a.data.display());
        }
    }
    let costs = costs(&a.costs)?;
    let (name, (report, outcomes)): (String, (EvalReport, Vec<UnitOutcome>)) = match a.policy {
        PolicyArg::Hold => ("hold".into(), evaluate_policy(&HoldPolicy, &fleet, &costs)?),
        PolicyArg::Oracle => (
            "oracle".into(),
            evaluate_policy(
                &OraclePolicy {
                    lifetimes: fleet.lifetimes(),
                },
                &fleet,
                &costs,
            )?,
        ),
        PolicyArg::Model => {
            let path = a.model.as_ref().context("--policy model needs --model")?;
            let pipeline: Pipeline = load_model(path)?;
            (pipeline.system().to_string(), pipeline.evaluate(&fleet, &costs)?)
        }
    };
    let rows = [(name, report)];
    write(&out_dir.join("report.csv"), &reports_csv(&rows))?;
    write(&out_dir.join("outcomes.csv"), &outcomes_csv(&outcomes))?;
    let table = report_table(&rows);
    write(&out_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn interpret(a: &InterpretArgs, seed: u64, out_dir: &Path) -> Result<()> {
    let mut fleet = load_fleet(&a.data)?;
    if let Some(truth) = &a.truth {
        load_truth(&mut fleet, truth)?;
    }
    let pipeline: Pipeline = load_model(&a.model)?;
    let latent = pipeline
        .features
        .latent
        .as_ref()
        .context("interpretation needs a pipeline with a hidden-state model (system3, system4 or srla)")?;
    let model = latent.model();
    let seqs = pipeline.features.sequences(&fleet)?;

    let failure = identify_failure_states(model, &seqs, a.threshold)?;
    let mut csv = String::from("state,units_ending_here,failure_state\n");
    for (k, &n) in failure.support.iter().enumerate() {
        writeln!(csv, "{k},{n},{}", failure.contains(k)).unwrap();
    }
    write(&out_dir.join("failure_states.csv"), &csv)?;
    println!("failure states: {:?} over {} units", failure.states, failure.n_units);

    let paths = decode_all(model, &seqs)?;
    let labels: Vec<usize> = paths.iter().flatten().copied().collect();
    let views: Vec<_> = seqs.iter().map(|s| s.outputs.view()).collect();
    let features = ndarray::concatenate(Axis(0), &views)?;
    let names = pipeline.features.encoder.sensor_names(&fleet);
    let importance = feature_importance(
        &labels,
        features.view(),
        &ImportanceOptions {
            l2: a.l2,
            seed: derive_seed(seed, "importance"),
            ..ImportanceOptions::default()
        },
    );
    match importance {
        Ok(report) => {
            write(&out_dir.join("importance.csv"), &report.to_csv(&names))?;
            for &s in &failure.states {
                if let Some(r) = report.ranking_abs(s) {
                    let top: Vec<&str> = r.iter().take(3).map(|&f| names[f].as_str()).collect();
                    println!("state {s}: top features by |score| {top:?}");
                }
            }
            if report.low_confidence {
                println!("feature importance is low-confidence (comparable to shuffled labels)");
            }
        }
        Err(e) => println!("feature importance skipped: {e}"),
    }

    let unit_pos = match a.unit {
        Some(id) => fleet
            .units
            .iter()
            .position(|u| u.unit_id == id)
            .with_context(|| format!("unit {id} not in {}", a.data.display()))?,
        None => 0,
    };
    let unit = &fleet.units[unit_pos];
    let seq = &seqs[unit_pos];
    let curve = rul_curve(
        model,
        seq.inputs.view(),
        seq.outputs.view(),
        &failure.states,
        &RulOptions {
            rollouts: a.rollouts,
            horizon_cap: a.horizon_cap,
            seed: derive_seed(seed, "rul"),
            resample_observations: a.resample,
        },
    )?;
    let mut csv = String::from("cycle,decoded_state,rul_estimate,std_error,capped,true_rul\n");
    for (t, (r, c)) in curve.iter().zip(&unit.cycles).enumerate() {
        let truth = c.rul_truth.map_or(String::new(), |v| v.to_string());
        writeln!(
            csv,
            "{},{},{:?},{:?},{},{truth}",
            t + 1,
            r.start_state,
            r.mean,
            r.std_error,
            r.capped
        )
        .unwrap();
    }
    write(&out_dir.join(format!("rul_unit_{}.csv", unit.unit_id)), &csv)?;
    let cycles: Vec<f64> = (1..=curve.len()).map(|t| t as f64).collect();
    let estimates: Vec<f64> = curve.iter().map(|r| r.mean).collect();
    let rho = spearman(&cycles, &estimates);
    println!("unit {} RUL curve: Spearman correlation with cycle {rho:.3}", unit.unit_id);

    if fleet.is_annotated() {
        let map = map_health_states(model, &seqs, &fleet)?;
        write(&out_dir.join("health_map.csv"), &map.to_csv())?;
        for (cond, states) in map.bands() {
            println!("{:<20} {:?}", cond.label(), states);
        }
    }

    let projection = project_2d(features.view())?;
    if projection.rank_deficient {
        println!("projection: features span fewer than two directions; second component zeroed");
    }
    write(&out_dir.join("projection.csv"), &projection.to_csv(Some(&labels)))?;
    write(&out_dir.join("projection.svg"), &projection.to_svg(Some(&labels)))?;
    Ok(())
}
