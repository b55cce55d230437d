//! Decoded states against ground-truth health annotations.

use std::fmt::Write as _;

use serde::Serialize;

use super::failure::decode_all;
use crate::dataio::Fleet;
use crate::error::{Error, Result};
use crate::markov::{LatentModel, Sequence};

/// Degradation quantiles separating the five condition bands.
pub const HEALTH_QUANTILES: [f64; 4] = [0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Normal,
    PotentialFault,
    FailureProgression,
    FaultPoint,
    Failure,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Normal,
        Condition::PotentialFault,
        Condition::FailureProgression,
        Condition::FaultPoint,
        Condition::Failure,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::PotentialFault => "potential fault",
            Condition::FailureProgression => "failure progression",
            Condition::FaultPoint => "fault point",
            Condition::Failure => "failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateHealth {
    pub state: usize,
    pub cycles: usize,
    pub mean_health: f64,
    pub mean_rul: f64,
    /// Quartiles of `t / T_j` over the cycles decoded to this state.
    pub life_quartiles: [f64; 3],
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HealthMap {
    /// Visited states, healthiest first.
    pub rows: Vec<StateHealth>,
    /// Degradation (`1 - health`) at [`HEALTH_QUANTILES`].
    pub thresholds: [f64; 4],
}

impl HealthMap {
    /// States of each condition, in table order.
    pub fn bands(&self) -> Vec<(Condition, Vec<usize>)> {
        Condition::ALL
            .iter()
            .map(|&c| {
                let states = self.rows.iter().filter(|r| r.condition == c).map(|r| r.state).collect();
                (c, states)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,cycles,mean_health,mean_rul,life_q25,life_q50,life_q75,condition\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.6},{:.3},{:.4},{:.4},{:.4},{}",
                r.state,
                r.cycles,
                r.mean_health,
                r.mean_rul,
                r.life_quartiles[0],
                r.life_quartiles[1],
                r.life_quartiles[2],
                r.condition.label()
            )
            .unwrap();
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Viterbi-decodes `seqs` (aligned with `fleet.units`) and summarizes the
/// annotated health of the cycles in each state.
pub fn map_health_states<M: LatentModel + Sync + ?Sized>(
    model: &M,
    seqs: &[Sequence],
    fleet: &Fleet,
) -> Result<HealthMap> {
    if fleet.is_empty() {
        return Err(Error::Empty("fleet"));
    }
    if seqs.len() != fleet.len() {
        return Err(Error::dim("sequence count", fleet.len(), seqs.len()));
    }
    if !fleet.is_annotated() {
        return Err(Error::InvalidArgument("fleet has no health annotations".into()));
    }
    let paths = decode_all(model, seqs)?;
    let n = model.n_states();
    let mut health = vec![Vec::new(); n];
    let mut rul = vec![0.0; n];
    let mut life = vec![Vec::new(); n];
    let mut degradation = Vec::with_capacity(fleet.total_cycles());
    for (unit, path) in fleet.units.iter().zip(&paths) {
        if path.len() != unit.lifetime() {
            return Err(Error::dim("sequence length", unit.lifetime(), path.len()));
        }
        let t_max = unit.lifetime() as f64;
        for (c, &k) in unit.cycles.iter().zip(path) {
            let h = c.health.expect("annotated");
            health[k].push(h);
            rul[k] += c.rul_truth.expect("annotated") as f64;
            life[k].push(c.cycle as f64 / t_max);
            degradation.push(1.0 - h);
        }
    }
    degradation.sort_by(f64::total_cmp);
    let thresholds = HEALTH_QUANTILES.map(|q| quantile(&degradation, q));
    let mut rows: Vec<StateHealth> = (0..n)
        .filter(|&k| !health[k].is_empty())
        .map(|k| {
            let count = health[k].len();
            let mean_health = health[k].iter().sum::<f64>() / count as f64;
            life[k].sort_by(f64::total_cmp);
            let d = 1.0 - mean_health;
            let band = thresholds.iter().position(|&q| d <= q + 1e-12).unwrap_or(4);
            StateHealth {
                state: k,
                cycles: count,
                mean_health,
                mean_rul: rul[k] / count as f64,
                life_quartiles: [0.25, 0.5, 0.75].map(|q| quantile(&life[k], q)),
                condition: Condition::ALL[band],
            }
        })
        .collect();
    rows.sort_by(|a, b| b.mean_health.total_cmp(&a.mean_health).then(a.state.cmp(&b.state)));
    Ok(HealthMap { rows, thresholds })
}
