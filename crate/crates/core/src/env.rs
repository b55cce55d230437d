//! Episodic hold/replace environment over a fleet of run-to-failure units.
//!
//! An episode follows one unit from its first (or first eligible) cycle.
//! Holding before the failure cycle advances one cycle at no cost; replacing
//! ends the episode at cost `c_r / t`; reaching the failure cycle `T_j` ends
//! it at cost `(c_r + c_f) / T_j` whatever the action. A repair action is
//! not modelled.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{Fleet, UnitRun};
use crate::error::{Error, Result};
use crate::numeric::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Hold = 0,
    Replace = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Hold, Action::Replace];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        match i {
            0 => Action::Hold,
            1 => Action::Replace,
            _ => panic!("action index {i} out of range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    /// `c_r`
    pub replace: f64,
    /// `c_f`
    pub failure: f64,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec {
            replace: 100.0,
            failure: 1000.0,
        }
    }
}

impl CostSpec {
    pub fn new(replace: f64, failure: f64) -> Result<CostSpec> {
        if !(replace > 0.0 && failure > 0.0 && replace.is_finite() && failure.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "costs must be positive, got c_r={replace} c_f={failure}"
            )));
        }
        Ok(CostSpec { replace, failure })
    }
}

/// Reward for taking `action` at cycle `t` (1-based) of a unit failing at
/// `lifetime`.
pub fn reward(t: usize, lifetime: usize, action: Action, costs: &CostSpec) -> f64 {
    debug_assert!(t >= 1 && t <= lifetime);
    if t == lifetime {
        -(costs.replace + costs.failure) / lifetime as f64
    } else {
        match action {
            Action::Hold => 0.0,
            Action::Replace => -costs.replace / t as f64,
        }
    }
}

/// Turns a unit's raw cycles into per-cycle agent observations.
pub trait FeatureExtractor {
    fn dim(&self) -> usize;

    /// `T x dim`, row `t - 1` observed at cycle `t`. Row `t - 1` may only
    /// depend on cycles `1..=t`.
    fn observe(&self, unit: &UnitRun) -> Result<Array2<f64>>;
}

/// One unit as the environment sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeUnit {
    pub unit_id: u32,
    /// First cycle of an episode (1 for the unrestricted environment).
    pub start: usize,
    pub observations: Array2<f64>,
}

impl EpisodeUnit {
    pub fn lifetime(&self) -> usize {
        self.observations.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub unit_id: u32,
    pub t: usize,
    pub observation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Cycle the action was taken at.
    pub t: usize,
    pub remaining_cycles_at_action: usize,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Observation at the next cycle; on the final step, the observation
    /// the action was taken on.
    pub next_observation: Vec<f64>,
    pub reward: f64,
    pub episode_ended: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub unit_id: u32,
    pub cycle: usize,
    pub action: Action,
    pub reward: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Copy)]
struct Cursor {
    unit: usize,
    t: usize,
}

pub struct MaintenanceEnv {
    units: Vec<EpisodeUnit>,
    costs: CostSpec,
    rng: ChaCha8Rng,
    cursor: Option<Cursor>,
    trace: Vec<TraceRow>,
    dim: usize,
}

impl MaintenanceEnv {
    pub fn new(units: Vec<EpisodeUnit>, costs: CostSpec, seed: u64) -> Result<MaintenanceEnv> {
        let first = units.first().ok_or(Error::Empty("environment units"))?;
        let dim = first.observations.ncols();
        for u in &units {
            if u.observations.ncols() != dim {
                return Err(Error::dim("observation width", dim, u.observations.ncols()));
            }
            if u.start < 1 || u.start > u.lifetime() {
                return Err(Error::InvalidArgument(format!(
                    "unit {} starts at cycle {} outside 1..={}",
                    u.unit_id,
                    u.start,
                    u.lifetime()
                )));
            }
        }
        Ok(MaintenanceEnv {
            units,
            costs,
            rng: substream(seed, "env-reset"),
            cursor: None,
            trace: Vec::new(),
            dim,
        })
    }

    /// Environment over whole units, observations from `extractor`.
    pub fn from_fleet(
        fleet: &Fleet,
        extractor: &dyn FeatureExtractor,
        costs: CostSpec,
        seed: u64,
    ) -> Result<MaintenanceEnv> {
        let units = fleet
            .units
            .iter()
            .map(|u| {
                Ok(EpisodeUnit {
                    unit_id: u.unit_id,
                    start: 1,
                    observations: extractor.observe(u)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MaintenanceEnv::new(units, costs, seed)
    }

    pub fn units(&self) -> &[EpisodeUnit] {
        &self.units
    }

    pub fn costs(&self) -> &CostSpec {
        &self.costs
    }

    pub fn observation_dim(&self) -> usize {
        self.dim
    }

    /// Restarts the reset stream.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = substream(seed, "env-reset");
    }

    /// Starts an episode on a unit drawn uniformly (with replacement).
    pub fn reset(&mut self) -> EnvState {
        let idx = self.rng.random_range(0..self.units.len());
        self.start(idx)
    }

    /// Starts an episode on the unit at position `idx`.
    pub fn reset_to(&mut self, idx: usize) -> Result<EnvState> {
        if idx >= self.units.len() {
            return Err(Error::InvalidArgument(format!("no unit at position {idx}")));
        }
        Ok(self.start(idx))
    }

    fn start(&mut self, idx: usize) -> EnvState {
        let unit = &self.units[idx];
        let t = unit.start;
        self.cursor = Some(Cursor { unit: idx, t });
        self.trace.clear();
        EnvState {
            unit_id: unit.unit_id,
            t,
            observation: unit.observations.row(t - 1).to_vec(),
        }
    }

    pub fn state(&self) -> Option<EnvState> {
        self.cursor.map(|c| {
            let unit = &self.units[c.unit];
            EnvState {
                unit_id: unit.unit_id,
                t: c.t,
                observation: unit.observations.row(c.t - 1).to_vec(),
            }
        })
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        let Cursor { unit, t } = self.cursor.ok_or(Error::EpisodeEnded)?;
        let u = &self.units[unit];
        let lifetime = u.lifetime();
        let r = reward(t, lifetime, action, &self.costs);
        let failed = t == lifetime;
        let ended = failed || action == Action::Replace;
        let next_t = if ended { t } else { t + 1 };
        self.cursor = if ended {
            None
        } else {
            Some(Cursor { unit, t: next_t })
        };
        self.trace.push(TraceRow {
            unit_id: u.unit_id,
            cycle: t,
            action,
            reward: r,
            failed,
        });
        Ok(StepResult {
            next_observation: u.observations.row(next_t - 1).to_vec(),
            reward: r,
            episode_ended: ended,
            info: StepInfo {
                t,
                remaining_cycles_at_action: lifetime - t,
                failed,
            },
        })
    }

    /// Steps of the current (or just finished) episode.
    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("unit,cycle,action,reward,failed\n");
    for r in rows {
        let action = match r.action {
            Action::Hold => "hold",
            Action::Replace => "replace",
        };
        writeln!(out, "{},{},{},{:?},{}", r.unit_id, r.cycle, action, r.reward, r.failed).unwrap();
    }
    out
}

pub fn write_trace_csv(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_csv(rows)).map_err(|e| Error::io(path, e))
}
