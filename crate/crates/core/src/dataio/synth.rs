//! Synthetic run-to-failure fleets with known phase paths.
//!
//! Each unit walks a phase chain from phase 0 until it enters a terminal
//! (absorbing) phase, stays there for a sampled number of cycles and fails
//! on the last one. Sensor readings are Gaussian around a per-phase mean,
//! shifted by the operating regime active in that cycle.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CycleRecord, Fleet, UnitRun};
use crate::error::{Error, Result};
use crate::numeric::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub terminal: bool,
}

/// An operating condition: the settings it reports and the additive shift
/// it applies to every sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub settings: Vec<f64>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_units: usize,
    pub n_settings: usize,
    pub n_sensors: usize,
    /// Accepted lifetimes, inclusive. Units outside are resampled.
    pub lifetime_range: (u32, u32),
    pub phases: Vec<PhaseSpec>,
    /// Phase transition matrix; rows of terminal phases are ignored.
    pub transition: Vec<Vec<f64>>,
    /// Cycles spent in the terminal phase, inclusive range.
    pub failure_dwell: (u32, u32),
    /// Drawn uniformly and independently every cycle.
    pub regimes: Vec<Regime>,
    /// Curvature of the exponential health decay.
    pub health_curvature: f64,
}

const MAX_ATTEMPTS: usize = 10_000;

/// 0-based sensor columns that never move, as in the public turbofan sets.
pub(crate) const FLAT_SENSORS: [usize; 7] = [0, 4, 5, 9, 15, 17, 18];
const FALLING_SENSORS: [usize; 4] = [6, 11, 19, 20];

fn sensor_base(m: usize) -> f64 {
    100.0 + 25.0 * m as f64
}

fn sensor_std(m: usize) -> f64 {
    if FLAT_SENSORS.contains(&m) {
        0.0
    } else {
        0.5 + 0.05 * m as f64
    }
}

fn sensor_direction(m: usize) -> f64 {
    if FLAT_SENSORS.contains(&m) {
        0.0
    } else if FALLING_SENSORS.contains(&m) {
        -1.0
    } else {
        1.0
    }
}

/// Phase whose mean sits `level` standard deviations along each sensor's
/// degradation direction, plus `planted` extra deviations on chosen sensors.
fn phase_at(level: f64, planted: &[(usize, f64)], terminal: bool) -> PhaseSpec {
    let n = 21;
    let mut mean: Vec<f64> = (0..n)
        .map(|m| sensor_base(m) + level * sensor_direction(m) * sensor_std(m))
        .collect();
    for &(m, extra) in planted {
        mean[m] += extra * sensor_direction(m) * sensor_std(m);
    }
    PhaseSpec {
        mean,
        std: (0..n).map(sensor_std).collect(),
        terminal,
    }
}

fn single_regime() -> Vec<Regime> {
    vec![Regime {
        settings: vec![0.0, 0.0, 100.0],
        offset: vec![0.0; 21],
    }]
}

impl SyntheticSpec {
    /// Left-to-right chain with the last phase terminal: phase `k` has mean
    /// `levels[k]` deviations from new and self-transition `stay[k]`.
    pub fn left_to_right(n_units: usize, levels: &[f64], stay: &[f64]) -> SyntheticSpec {
        let n = levels.len();
        assert_eq!(stay.len() + 1, n, "one stay probability per non-terminal phase");
        let phases = levels
            .iter()
            .enumerate()
            .map(|(k, &l)| phase_at(l, &[], k + 1 == n))
            .collect();
        let mut transition = vec![vec![0.0; n]; n];
        for (k, &p) in stay.iter().enumerate() {
            transition[k][k] = p;
            transition[k][k + 1] = 1.0 - p;
        }
        transition[n - 1][n - 1] = 1.0;
        SyntheticSpec {
            n_units,
            n_settings: 3,
            n_sensors: 21,
            lifetime_range: (1, 2_000),
            phases,
            transition,
            failure_dwell: (4, 8),
            regimes: single_regime(),
            health_curvature: 3.0,
        }
    }

    /// One operating condition, one failure mode, five phases.
    pub fn single_mode(n_units: usize) -> SyntheticSpec {
        SyntheticSpec::left_to_right(
            n_units,
            &[0.0, 0.8, 1.8, 3.0, 4.5],
            &[0.985, 0.97, 0.95, 0.9],
        )
    }

    /// [`SyntheticSpec::single_mode`] under six operating regimes whose
    /// sensor offsets are linear in the (range-scaled) settings.
    pub fn multi_regime(n_units: usize) -> SyntheticSpec {
        let mut spec = SyntheticSpec::single_mode(n_units);
        let settings = [
            [0.0, 0.0, 100.0],
            [10.0, 0.25, 100.0],
            [20.0, 0.7, 100.0],
            [25.0, 0.62, 60.0],
            [35.0, 0.84, 100.0],
            [42.0, 0.84, 100.0],
        ];
        let lo = [0.0, 0.0, 60.0];
        let hi = [42.0, 0.84, 100.0];
        spec.regimes = settings
            .iter()
            .map(|s| {
                let z: Vec<f64> = (0..3).map(|i| (s[i] - lo[i]) / (hi[i] - lo[i])).collect();
                let offset = (0..21)
                    .map(|m| {
                        let scale = 6.0 * (0.5 + 0.05 * m as f64);
                        (0..3)
                            .map(|i| scale * (1.3 * m as f64 + 2.1 * i as f64 + 0.7).sin() * z[i])
                            .sum()
                    })
                    .collect();
                Regime {
                    settings: s.to_vec(),
                    offset,
                }
            })
            .collect();
        spec
    }

    /// Sensors planted by the first failure mode of [`SyntheticSpec::two_mode`].
    pub const MODE_A_SENSORS: [usize; 2] = [3, 10];
    /// Sensor planted by the second failure mode.
    pub const MODE_B_SENSORS: [usize; 1] = [13];

    /// Two terminal phases reached from a shared wear phase. Mode A pushes
    /// [`Self::MODE_A_SENSORS`] far off-trend, mode B pushes
    /// [`Self::MODE_B_SENSORS`]. Units dwell 8 to 16 cycles in the terminal
    /// phase.
    pub fn two_mode(n_units: usize) -> SyntheticSpec {
        let a: Vec<(usize, f64)> = Self::MODE_A_SENSORS.iter().map(|&m| (m, 5.0)).collect();
        let b: Vec<(usize, f64)> = Self::MODE_B_SENSORS.iter().map(|&m| (m, 5.0)).collect();
        let phases = vec![
            phase_at(0.0, &[], false),
            phase_at(0.8, &[], false),
            phase_at(1.8, &[], false),
            phase_at(2.3, &a, true),
            phase_at(2.3, &b, true),
        ];
        let transition = vec![
            vec![0.985, 0.015, 0.0, 0.0, 0.0],
            vec![0.0, 0.97, 0.03, 0.0, 0.0],
            vec![0.0, 0.0, 0.94, 0.03, 0.03],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ];
        SyntheticSpec {
            n_units,
            n_settings: 3,
            n_sensors: 21,
            lifetime_range: (1, 2_000),
            phases,
            transition,
            failure_dwell: (8, 16),
            regimes: single_regime(),
            health_curvature: 3.0,
        }
    }

    pub fn terminal_phases(&self) -> Vec<usize> {
        (0..self.phases.len())
            .filter(|&k| self.phases[k].terminal)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.n_units == 0 {
            return bad("unit count must be positive".into());
        }
        let (lo, hi) = self.lifetime_range;
        if lo == 0 || hi < lo {
            return bad(format!("lifetime range {lo}..={hi} must be positive and ordered"));
        }
        let (dlo, dhi) = self.failure_dwell;
        if dlo == 0 || dhi < dlo {
            return bad(format!("failure dwell {dlo}..={dhi} must be positive and ordered"));
        }
        let n = self.phases.len();
        if n == 0 || !self.phases.iter().any(|p| p.terminal) {
            return bad("need at least one terminal phase".into());
        }
        for (k, p) in self.phases.iter().enumerate() {
            if p.mean.len() != self.n_sensors || p.std.len() != self.n_sensors {
                return bad(format!("phase {k} emission length differs from sensor count"));
            }
            if p.std.iter().any(|s| !(*s >= 0.0)) {
                return bad(format!("phase {k} has a negative std"));
            }
        }
        if self.transition.len() != n {
            return bad("transition matrix must be square over phases".into());
        }
        for (k, row) in self.transition.iter().enumerate() {
            if row.len() != n {
                return bad("transition matrix must be square over phases".into());
            }
            if self.phases[k].terminal {
                continue;
            }
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("transition row {k} is not a distribution"));
            }
        }
        if self.regimes.is_empty() {
            return bad("need at least one regime".into());
        }
        for r in &self.regimes {
            if r.settings.len() != self.n_settings || r.offset.len() != self.n_sensors {
                return bad("regime settings/offset length mismatch".into());
            }
        }
        Ok(())
    }

    /// Samples a fleet. Identical `(spec, seed)` pairs give identical fleets.
    pub fn generate(&self, seed: u64) -> Result<Fleet> {
        self.validate()?;
        let mut rng = substream(seed, "synthetic-fleet");
        let units = (1..=self.n_units as u32)
            .map(|id| self.sample_unit(id, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut fleet = Fleet::new(units, self.n_settings, self.n_sensors);
        fleet.split_seed = seed;
        Ok(fleet)
    }

    fn sample_path<R: Rng>(&self, rng: &mut R) -> Option<Vec<usize>> {
        let max_len = self.lifetime_range.1 as usize;
        let mut path = vec![0usize];
        let mut cur = 0;
        while !self.phases[cur].terminal {
            if path.len() >= max_len {
                return None;
            }
            let u: f64 = rng.random();
            let row = &self.transition[cur];
            let mut acc = 0.0;
            let mut next = row.len() - 1;
            for (j, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    next = j;
                    break;
                }
            }
            cur = next;
            path.push(cur);
        }
        let dwell = rng.random_range(self.failure_dwell.0..=self.failure_dwell.1);
        path.extend(std::iter::repeat_n(cur, dwell as usize - 1));
        Some(path)
    }

    fn sample_unit<R: Rng>(&self, unit_id: u32, rng: &mut R) -> Result<UnitRun> {
        let (lo, hi) = self.lifetime_range;
        for _ in 0..MAX_ATTEMPTS {
            let Some(path) = self.sample_path(rng) else {
                continue;
            };
            let t_fail = path.len();
            if t_fail < lo as usize || t_fail > hi as usize {
                continue;
            }
            let cycles = path
                .iter()
                .enumerate()
                .map(|(i, &phase)| {
                    let regime = &self.regimes[rng.random_range(0..self.regimes.len())];
                    let p = &self.phases[phase];
                    let sensors = (0..self.n_sensors)
                        .map(|m| {
                            let z: f64 = StandardNormal.sample(rng);
                            p.mean[m] + regime.offset[m] + p.std[m] * z
                        })
                        .collect();
                    CycleRecord {
                        cycle: i as u32 + 1,
                        op_settings: regime.settings.clone(),
                        sensors,
                        health: Some(self.health(i + 1, t_fail)),
                        rul_truth: Some((t_fail - i - 1) as u32),
                        phase: Some(phase),
                    }
                })
                .collect();
            return Ok(UnitRun { unit_id, cycles });
        }
        Err(Error::Spec(format!(
            "no lifetime in {lo}..={hi} after {MAX_ATTEMPTS} attempts"
        )))
    }

    fn health(&self, t: usize, t_fail: usize) -> f64 {
        if t_fail <= 1 {
            return 0.0;
        }
        let x = (t - 1) as f64 / (t_fail - 1) as f64;
        let a = self.health_curvature;
        if a.abs() < 1e-12 {
            1.0 - x
        } else {
            1.0 - (a * x).exp_m1() / a.exp_m1()
        }
    }
}
