//! Fleet ingestion, normalization, synthetic run-to-failure generation and
//! model persistence.

mod cmapss;
mod normalize;
mod persist;
mod synth;

pub use cmapss::{
    load_cmapss, load_cmapss_with, load_truth, parse_cmapss, write_cmapss, write_truth,
    CmapssLayout,
};
pub use normalize::{NormalizeKind, Normalizer};
pub use persist::{from_text, load_model, save_model, to_text, Persist, FORMAT_TAG, FORMAT_VERSION};
pub use synth::{PhaseSpec, Regime, SyntheticSpec};

use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::substream;

/// One cycle of one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// 1-based cycle index.
    pub cycle: u32,
    pub op_settings: Vec<f64>,
    pub sensors: Vec<f64>,
    /// Ground-truth health in `[0, 1]`, 1 being new.
    pub health: Option<f64>,
    pub rul_truth: Option<u32>,
    /// Generating phase, only known for synthetic data.
    pub phase: Option<usize>,
}

/// A single engine's run-to-failure record. The last cycle is the failure cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRun {
    pub unit_id: u32,
    pub cycles: Vec<CycleRecord>,
}

impl UnitRun {
    /// Final (failure) cycle, `T_j`.
    pub fn lifetime(&self) -> usize {
        self.cycles.len()
    }

    pub fn n_settings(&self) -> usize {
        self.cycles.first().map_or(0, |c| c.op_settings.len())
    }

    pub fn n_sensors(&self) -> usize {
        self.cycles.first().map_or(0, |c| c.sensors.len())
    }

    /// Operating settings as a `T x S` matrix.
    pub fn inputs(&self) -> Array2<f64> {
        stack_rows(self.cycles.iter().map(|c| c.op_settings.as_slice()), self.n_settings())
    }

    /// Sensor readings as a `T x M` matrix.
    pub fn outputs(&self) -> Array2<f64> {
        stack_rows(self.cycles.iter().map(|c| c.sensors.as_slice()), self.n_sensors())
    }

    pub fn is_annotated(&self) -> bool {
        self.cycles
            .iter()
            .all(|c| c.health.is_some() && c.rul_truth.is_some())
    }

    /// Checks cycle contiguity and a constant column layout.
    pub fn validate(&self) -> Result<()> {
        let (s, m) = (self.n_settings(), self.n_sensors());
        for (i, c) in self.cycles.iter().enumerate() {
            if c.cycle as usize != i + 1 {
                return Err(Error::Integrity {
                    unit: self.unit_id,
                    message: format!("expected cycle {}, found {}", i + 1, c.cycle),
                });
            }
            if c.op_settings.len() != s || c.sensors.len() != m {
                return Err(Error::Integrity {
                    unit: self.unit_id,
                    message: format!("cycle {} has a different column layout", c.cycle),
                });
            }
        }
        Ok(())
    }
}

fn stack_rows<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Array2<f64> {
    let data: Vec<f64> = rows.flat_map(|r| r.iter().copied()).collect();
    let n = data.len().checked_div(width).unwrap_or(0);
    Array2::from_shape_vec((n, width), data).expect("rows share a width")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub units: Vec<UnitRun>,
    /// Names of the op-setting columns followed by the sensor columns.
    pub feature_names: Vec<String>,
    pub split_seed: u64,
}

impl Fleet {
    pub fn new(units: Vec<UnitRun>, n_settings: usize, n_sensors: usize) -> Self {
        Fleet {
            units,
            feature_names: default_feature_names(n_settings, n_sensors),
            split_seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn n_settings(&self) -> usize {
        self.units.first().map_or(0, UnitRun::n_settings)
    }

    pub fn n_sensors(&self) -> usize {
        self.units.first().map_or(0, UnitRun::n_sensors)
    }

    pub fn unit(&self, unit_id: u32) -> Option<&UnitRun> {
        self.units.iter().find(|u| u.unit_id == unit_id)
    }

    pub fn lifetimes(&self) -> Vec<usize> {
        self.units.iter().map(UnitRun::lifetime).collect()
    }

    pub fn is_annotated(&self) -> bool {
        !self.units.is_empty() && self.units.iter().all(UnitRun::is_annotated)
    }

    pub fn total_cycles(&self) -> usize {
        self.units.iter().map(UnitRun::lifetime).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let (s, m) = (self.n_settings(), self.n_sensors());
        for u in &self.units {
            if !seen.insert(u.unit_id) {
                return Err(Error::Integrity {
                    unit: u.unit_id,
                    message: "duplicate unit id".into(),
                });
            }
            if u.n_settings() != s || u.n_sensors() != m {
                return Err(Error::Integrity {
                    unit: u.unit_id,
                    message: "column layout differs from the rest of the fleet".into(),
                });
            }
            u.validate()?;
        }
        Ok(())
    }

    fn with_units(&self, units: Vec<UnitRun>) -> Fleet {
        Fleet {
            units,
            feature_names: self.feature_names.clone(),
            split_seed: self.split_seed,
        }
    }
}

pub fn default_feature_names(n_settings: usize, n_sensors: usize) -> Vec<String> {
    (1..=n_settings)
        .map(|i| format!("setting_{i}"))
        .chain((1..=n_sensors).map(|i| format!("sensor_{i}")))
        .collect()
}

/// Unit-level shuffle split. The train side gets `round(train_fraction * N)`
/// units; both sides keep the input's unit order.
pub fn split_fleet(fleet: &Fleet, train_fraction: f64, seed: u64) -> Result<(Fleet, Fleet)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = fleet.len();
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 units, have {n}")));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, "split"));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (u, t) in fleet.units.iter().zip(is_train) {
        if t {
            train.push(u.clone());
        } else {
            test.push(u.clone());
        }
    }
    let mut train = fleet.with_units(train);
    let mut test = fleet.with_units(test);
    train.split_seed = seed;
    test.split_seed = seed;
    Ok((train, test))
}
