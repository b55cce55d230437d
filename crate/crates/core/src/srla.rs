//! Gated replacement: the hidden-state model decides when the learned
//! agent is consulted, and the fleet cost metrics score the result.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::agent::QFunction;
use crate::dataio::{Fleet, Persist};
use crate::env::{reward, Action, CostSpec, EpisodeUnit, MaintenanceEnv};
use crate::error::{Error, Result};
use crate::interpret::{decode_all, identify_failure_states, FailureStateSet, DEFAULT_SUPPORT_THRESHOLD};
use crate::markov::{LatentModel, Sequence};

pub const DEFAULT_EXPANSION_DEPTH: usize = 30;

/// Hidden states in which the agent is allowed to act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializedStateSet {
    /// Ascending.
    pub states: Vec<usize>,
    pub failure_states: Vec<usize>,
    pub expansion_depth: usize,
}

impl Persist for SpecializedStateSet {
    const KIND: &'static str = "specialized-states";
}

impl SpecializedStateSet {
    pub fn contains(&self, state: usize) -> bool {
        self.states.binary_search(&state).is_ok()
    }

    pub fn from_states(mut states: Vec<usize>) -> SpecializedStateSet {
        states.sort_unstable();
        states.dedup();
        SpecializedStateSet {
            failure_states: states.clone(),
            states,
            expansion_depth: 0,
        }
    }
}

/// Failure states plus every state decoded fewer than `depth` cycles
/// before some unit's final cycle.
pub fn derive_specialized_states<M: LatentModel + Sync + ?Sized>(
    model: &M,
    seqs: &[Sequence],
    depth: usize,
) -> Result<SpecializedStateSet> {
    let failure: FailureStateSet = identify_failure_states(model, seqs, DEFAULT_SUPPORT_THRESHOLD)?;
    let mut states = failure.states.clone();
    for path in decode_all(model, seqs)? {
        let t_len = path.len();
        let from = t_len.saturating_sub(depth);
        states.extend_from_slice(&path[from..]);
    }
    states.sort_unstable();
    states.dedup();
    Ok(SpecializedStateSet {
        states,
        failure_states: failure.states,
        expansion_depth: depth,
    })
}

/// Causal per-cycle view of one unit: filtered posteriors and the
/// prefix-Viterbi state at each cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedUnit {
    pub posteriors: Array2<f64>,
    pub states: Vec<usize>,
}

pub fn decode_causal<M: LatentModel + ?Sized>(model: &M, seq: &Sequence) -> Result<DecodedUnit> {
    let lattice = model.lattice(seq.inputs.view(), seq.outputs.view())?;
    Ok(DecodedUnit {
        posteriors: lattice.filter(),
        states: lattice.online_decode(),
    })
}

/// Training environment whose episodes open at each unit's first cycle
/// decoded into `specialized`. Returns the ids of units that never get
/// there; they are left out.
pub fn build_specialized_env<M: LatentModel + Sync + ?Sized>(
    model: &M,
    unit_ids: &[u32],
    seqs: &[Sequence],
    specialized: &SpecializedStateSet,
    costs: CostSpec,
    seed: u64,
) -> Result<(MaintenanceEnv, Vec<u32>)> {
    if unit_ids.len() != seqs.len() {
        return Err(Error::dim("unit id count", seqs.len(), unit_ids.len()));
    }
    let mut units = Vec::new();
    let mut excluded = Vec::new();
    for (&id, seq) in unit_ids.iter().zip(seqs) {
        let d = decode_causal(model, seq)?;
        match d.states.iter().position(|&s| specialized.contains(s)) {
            Some(i) => units.push(EpisodeUnit {
                unit_id: id,
                start: i + 1,
                observations: d.posteriors,
            }),
            None => {
                tracing::warn!(unit = id, "unit never enters a specialized state; excluded");
                excluded.push(id);
            }
        }
    }
    if units.is_empty() {
        return Err(Error::InvalidArgument(
            "no unit enters a specialized state".into(),
        ));
    }
    Ok((MaintenanceEnv::new(units, costs, seed)?, excluded))
}

/// Decision after observing `inputs`/`outputs` up to now: the agent's
/// greedy action if the current decoded state is specialized, else hold.
pub fn srla_act<M: LatentModel + ?Sized>(
    model: &M,
    q: &QFunction,
    specialized: &SpecializedStateSet,
    inputs: ndarray::ArrayView2<f64>,
    outputs: ndarray::ArrayView2<f64>,
) -> Result<Action> {
    if outputs.nrows() == 0 {
        return Err(Error::Empty("history"));
    }
    let lattice = model.lattice(inputs, outputs)?;
    let (path, _) = lattice.viterbi();
    if !specialized.contains(*path.last().expect("non-empty")) {
        return Ok(Action::Hold);
    }
    let post = lattice.filter();
    greedy_row(q, post.row(post.nrows() - 1))
}

fn greedy_row(q: &QFunction, row: ndarray::ArrayView1<f64>) -> Result<Action> {
    match row.as_slice() {
        Some(x) => q.greedy(x),
        None => q.greedy(&row.to_vec()),
    }
}

/// A replacement rule evaluated causally over a fixed fleet.
pub trait Policy: Sync {
    /// Action for the unit at position `unit` at cycle `t` (1-based). May
    /// only use that unit's cycles `1..=t`.
    fn act(&self, unit: usize, t: usize) -> Result<Action>;
}

pub struct HoldPolicy;

impl Policy for HoldPolicy {
    fn act(&self, _unit: usize, _t: usize) -> Result<Action> {
        Ok(Action::Hold)
    }
}

/// Replaces one cycle before failure. Needs the true lifetimes.
pub struct OraclePolicy {
    pub lifetimes: Vec<usize>,
}

impl Policy for OraclePolicy {
    fn act(&self, unit: usize, t: usize) -> Result<Action> {
        Ok(if t + 1 >= self.lifetimes[unit] {
            Action::Replace
        } else {
            Action::Hold
        })
    }
}

/// Greedy agent on precomputed per-cycle observations.
pub struct GreedyPolicy<'a> {
    pub q: &'a QFunction,
    pub observations: Vec<Array2<f64>>,
}

impl Policy for GreedyPolicy<'_> {
    fn act(&self, unit: usize, t: usize) -> Result<Action> {
        let row = self.observations[unit].row(t - 1);
        greedy_row(self.q, row)
    }
}

/// Greedy agent consulted only in specialized states.
pub struct GatedPolicy<'a> {
    pub q: &'a QFunction,
    pub specialized: &'a SpecializedStateSet,
    pub units: Vec<DecodedUnit>,
}

impl<'a> GatedPolicy<'a> {
    pub fn new<M: LatentModel + Sync + ?Sized>(
        model: &M,
        q: &'a QFunction,
        specialized: &'a SpecializedStateSet,
        seqs: &[Sequence],
    ) -> Result<GatedPolicy<'a>> {
        use rayon::prelude::*;
        let units = seqs
            .par_iter()
            .map(|s| decode_causal(model, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(GatedPolicy { q, specialized, units })
    }

    pub fn decoded_state(&self, unit: usize, t: usize) -> usize {
        self.units[unit].states[t - 1]
    }
}

impl Policy for GatedPolicy<'_> {
    fn act(&self, unit: usize, t: usize) -> Result<Action> {
        let u = &self.units[unit];
        if !self.specialized.contains(u.states[t - 1]) {
            return Ok(Action::Hold);
        }
        let row = u.posteriors.row(t - 1);
        greedy_row(self.q, row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitOutcome {
    pub unit_id: u32,
    pub lifetime: usize,
    /// Cycle of the ending action.
    pub stop_cycle: usize,
    pub failed: bool,
    /// Positive episode cost.
    pub cost: f64,
}

impl UnitOutcome {
    pub fn remaining_cycles(&self) -> usize {
        self.lifetime - self.stop_cycle
    }
}

/// `N c_r / sum(T_j - 1)`.
pub fn imc(lifetimes: &[usize], costs: &CostSpec) -> f64 {
    let denom: usize = lifetimes.iter().map(|&t| t.saturating_sub(1)).sum();
    lifetimes.len() as f64 * costs.replace / denom as f64
}

/// `N (c_r + c_f) / sum(T_j)`.
pub fn cmc(lifetimes: &[usize], costs: &CostSpec) -> f64 {
    let denom: usize = lifetimes.iter().sum();
    lifetimes.len() as f64 * (costs.replace + costs.failure) / denom as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fleet cost rate: summed event costs (`c_r`, or `c_r + c_f` on
    /// failure) over summed cycles used. Equals `imc` under the
    /// one-cycle-early oracle and `cmc` under pure hold.
    pub avg_q_star: f64,
    /// Unweighted mean of per-unit episode cost magnitudes.
    pub mean_episode_cost: f64,
    pub imc: f64,
    pub cmc: f64,
    /// `imc / avg_q_star`, both as cost magnitudes.
    pub imc_ratio: f64,
    pub failed_fraction: f64,
    /// Mean `T_j - t` over units replaced before failing; 0 if none was.
    pub avg_remaining_cycles: f64,
    pub n_units: usize,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[UnitOutcome], costs: &CostSpec) -> Result<EvalReport> {
        if outcomes.is_empty() {
            return Err(Error::Empty("test fleet"));
        }
        let n = outcomes.len() as f64;
        let lifetimes: Vec<usize> = outcomes.iter().map(|o| o.lifetime).collect();
        let event_cost: f64 = outcomes
            .iter()
            .map(|o| if o.failed { costs.replace + costs.failure } else { costs.replace })
            .sum();
        let cycles: usize = outcomes.iter().map(|o| o.stop_cycle).sum();
        let avg_q_star = event_cost / cycles as f64;
        let mean_episode_cost = outcomes.iter().map(|o| o.cost).sum::<f64>() / n;
        let imc = imc(&lifetimes, costs);
        let survivors: Vec<&UnitOutcome> = outcomes.iter().filter(|o| !o.failed).collect();
        let avg_remaining_cycles = if survivors.is_empty() {
            0.0
        } else {
            survivors.iter().map(|o| o.remaining_cycles() as f64).sum::<f64>() / survivors.len() as f64
        };
        Ok(EvalReport {
            avg_q_star,
            mean_episode_cost,
            imc,
            cmc: cmc(&lifetimes, costs),
            imc_ratio: imc / avg_q_star,
            failed_fraction: (outcomes.len() - survivors.len()) as f64 / n,
            avg_remaining_cycles,
            n_units: outcomes.len(),
        })
    }

    pub const CSV_HEADER: &'static str =
        "method,avg_q_star,imc,cmc,imc_ratio,failed_fraction,avg_remaining_cycles,mean_episode_cost,units";

    pub fn csv_row(&self, method: &str) -> String {
        format!(
            "{method},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            self.avg_q_star,
            self.imc,
            self.cmc,
            self.imc_ratio,
            self.failed_fraction,
            self.avg_remaining_cycles,
            self.mean_episode_cost,
            self.n_units
        )
    }
}

/// Runs every unit of `fleet` once under `policy`.
pub fn evaluate_policy(
    policy: &dyn Policy,
    fleet: &Fleet,
    costs: &CostSpec,
) -> Result<(EvalReport, Vec<UnitOutcome>)> {
    use rayon::prelude::*;
    if fleet.is_empty() {
        return Err(Error::Empty("test fleet"));
    }
    let outcomes = fleet
        .units
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let lifetime = u.lifetime();
            for t in 1..=lifetime {
                let action = policy.act(i, t)?;
                if action == Action::Replace || t == lifetime {
                    return Ok(UnitOutcome {
                        unit_id: u.unit_id,
                        lifetime,
                        stop_cycle: t,
                        failed: t == lifetime,
                        cost: -reward(t, lifetime, action, costs),
                    });
                }
            }
            Err(Error::Empty("unit cycles"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((EvalReport::from_outcomes(&outcomes, costs)?, outcomes))
}

pub fn outcomes_csv(outcomes: &[UnitOutcome]) -> String {
    let mut out = String::from("unit,lifetime,stop_cycle,remaining,failed,cost\n");
    for o in outcomes {
        writeln!(
            out,
            "{},{},{},{},{},{:?}",
            o.unit_id,
            o.lifetime,
            o.stop_cycle,
            o.remaining_cycles(),
            o.failed,
            o.cost
        )
        .unwrap();
    }
    out
}

pub fn reports_csv(rows: &[(String, EvalReport)]) -> String {
    let mut out = format!("{}\n", EvalReport::CSV_HEADER);
    for (name, r) in rows {
        out.push_str(&r.csv_row(name));
        out.push('\n');
    }
    out
}

pub fn write_reports_csv(rows: &[(String, EvalReport)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, reports_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Fixed-width comparison table, one row per method.
pub fn report_table(rows: &[(String, EvalReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>7}  {:>7}  {:>13}\n",
        "Method", "Q*", "IMC", "CMC", "IMC/Q*", "Failed", "Avg remaining"
    );
    for (name, r) in rows {
        writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>8.2}  {:>8.2}  {:>7.2}  {:>6.0}%  {:>13.1}",
            name,
            r.avg_q_star,
            r.imc,
            r.cmc,
            r.imc_ratio,
            100.0 * r.failed_fraction,
            r.avg_remaining_cycles
        )
        .unwrap();
    }
    out
}
