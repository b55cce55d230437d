use serde::{Deserialize, Serialize};

use super::{CycleRecord, Fleet, UnitRun};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizeKind {
    /// Zero mean, unit population standard deviation.
    Standard,
    /// Training range mapped onto `[0, 1]`.
    MinMax,
}

/// Per-feature affine scaling over `[op settings.., sensors..]`, fitted on a
/// training fleet.
///
/// Features with no spread in the training data are left untouched and listed
/// in [`Normalizer::flagged`], so feature indices stay stable downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub kind: NormalizeKind,
    pub n_settings: usize,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    pub passthrough: Vec<bool>,
}

impl Normalizer {
    pub fn fit(fleet: &Fleet, kind: NormalizeKind) -> Result<Normalizer> {
        if fleet.is_empty() || fleet.total_cycles() == 0 {
            return Err(Error::Empty("normalizer training fleet"));
        }
        let n_settings = fleet.n_settings();
        let width = n_settings + fleet.n_sensors();
        let rows = || {
            fleet
                .units
                .iter()
                .flat_map(|u| u.cycles.iter())
                .map(|c| c.op_settings.iter().chain(&c.sensors))
        };
        let n = fleet.total_cycles() as f64;

        let (offset, spread): (Vec<f64>, Vec<f64>) = match kind {
            NormalizeKind::Standard => {
                let mut mean = vec![0.0; width];
                for row in rows() {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; width];
                for row in rows() {
                    for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                (mean, var.into_iter().map(|s| (s / n).sqrt()).collect())
            }
            NormalizeKind::MinMax => {
                let mut lo = vec![f64::INFINITY; width];
                let mut hi = vec![f64::NEG_INFINITY; width];
                for row in rows() {
                    for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
                        *l = l.min(v);
                        *h = h.max(v);
                    }
                }
                let range = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
                (lo, range)
            }
        };

        let passthrough: Vec<bool> = offset
            .iter()
            .zip(&spread)
            .map(|(o, s)| *s <= 1e-12 * o.abs().max(1.0))
            .collect();
        let offset = offset
            .iter()
            .zip(&passthrough)
            .map(|(&o, &p)| if p { 0.0 } else { o })
            .collect();
        let scale = spread
            .iter()
            .zip(&passthrough)
            .map(|(&s, &p)| if p { 1.0 } else { s })
            .collect();
        Ok(Normalizer {
            kind,
            n_settings,
            offset,
            scale,
            passthrough,
        })
    }

    pub fn width(&self) -> usize {
        self.offset.len()
    }

    /// Indices (into `[settings.., sensors..]`) of zero-variance features.
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.width()).filter(|&i| self.passthrough[i]).collect()
    }

    pub fn apply(&self, fleet: &Fleet) -> Result<Fleet> {
        let got = fleet.n_settings() + fleet.n_sensors();
        if !fleet.is_empty() && (got != self.width() || fleet.n_settings() != self.n_settings) {
            return Err(Error::dim("normalizer", self.width(), got));
        }
        let mut out = fleet.clone();
        for c in out.units.iter_mut().flat_map(|u| u.cycles.iter_mut()) {
            self.apply_record(c);
        }
        Ok(out)
    }

    pub fn apply_unit(&self, unit: &UnitRun) -> Result<UnitRun> {
        let got = unit.n_settings() + unit.n_sensors();
        if got != self.width() || unit.n_settings() != self.n_settings {
            return Err(Error::dim("normalizer", self.width(), got));
        }
        let mut out = unit.clone();
        for c in &mut out.cycles {
            self.apply_record(c);
        }
        Ok(out)
    }

    fn apply_record(&self, c: &mut CycleRecord) {
        let s = self.n_settings;
        for (i, v) in c.op_settings.iter_mut().enumerate() {
            *v = (*v - self.offset[i]) / self.scale[i];
        }
        for (i, v) in c.sensors.iter_mut().enumerate() {
            *v = (*v - self.offset[s + i]) / self.scale[s + i];
        }
    }
}
