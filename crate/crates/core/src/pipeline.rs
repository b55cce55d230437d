//! End-to-end configurations: feature extraction, optional hidden-state
//! model, agent training and fleet evaluation for each system variant.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::agent::{self, EpisodeLog, QFunction, TrainConfig};
use crate::dataio::{Fleet, NormalizeKind, Normalizer, Persist, UnitRun};
use crate::env::{CostSpec, FeatureExtractor, MaintenanceEnv};
use crate::error::{Error, Result};
use crate::iomarkov::{fit_iohmm, IohmmModel};
use crate::markov::{fit_hmm, FitOptions, HmmModel, LatentModel, Sequence};
use crate::srla::{
    build_specialized_env, decode_causal, derive_specialized_states, evaluate_policy, EvalReport,
    GatedPolicy, GreedyPolicy, SpecializedStateSet, UnitOutcome, DEFAULT_EXPANSION_DEPTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// Standardized sensors.
    System1,
    /// Standardized settings and sensors.
    System2,
    /// HMM posteriors over min-max scaled sensors.
    System3,
    /// IOHMM posteriors, settings as inputs and sensors as outputs.
    System4,
    /// System 4 features with the agent gated by specialized states.
    Srla,
}

impl System {
    pub const ALL: [System; 5] = [
        System::System1,
        System::System2,
        System::System3,
        System::System4,
        System::Srla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::System1 => "system1",
            System::System2 => "system2",
            System::System3 => "system3",
            System::System4 => "system4",
            System::Srla => "srla",
        }
    }

    pub fn normalize_kind(self) -> NormalizeKind {
        match self {
            System::System1 | System::System2 => NormalizeKind::Standard,
            _ => NormalizeKind::MinMax,
        }
    }

    pub fn uses_latent(self) -> bool {
        matches!(self, System::System3 | System::System4 | System::Srla)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<System> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown system '{s}'")))
    }
}

/// Normalization plus the columns that carry information in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub normalizer: Normalizer,
    /// Kept op-setting columns.
    pub settings: Vec<usize>,
    /// Kept sensor columns.
    pub sensors: Vec<usize>,
}

impl Encoder {
    /// Drops columns that are constant over `train`.
    pub fn fit(train: &Fleet, kind: NormalizeKind) -> Result<Encoder> {
        let normalizer = Normalizer::fit(train, kind)?;
        let s = train.n_settings();
        let keep = |range: std::ops::Range<usize>| {
            range
                .filter(|&i| !normalizer.passthrough[i])
                .collect::<Vec<_>>()
        };
        let settings = keep(0..s);
        let sensors: Vec<usize> = keep(s..normalizer.width()).into_iter().map(|i| i - s).collect();
        if sensors.is_empty() {
            return Err(Error::InvalidArgument("every sensor is constant in training".into()));
        }
        Ok(Encoder {
            normalizer,
            settings,
            sensors,
        })
    }

    /// Normalized kept settings and sensors.
    pub fn encode(&self, unit: &UnitRun) -> Result<(Array2<f64>, Array2<f64>)> {
        let u = self.normalizer.apply_unit(unit)?;
        Ok((
            u.inputs().select(Axis(1), &self.settings),
            u.outputs().select(Axis(1), &self.sensors),
        ))
    }

    pub fn sensor_names(&self, fleet: &Fleet) -> Vec<String> {
        let s = fleet.n_settings();
        self.sensors
            .iter()
            .map(|&i| fleet.feature_names.get(s + i).cloned().unwrap_or_else(|| format!("sensor_{}", i + 1)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "model", rename_all = "lowercase")]
pub enum Latent {
    Hmm(HmmModel),
    Iohmm(IohmmModel),
}

impl Latent {
    pub fn model(&self) -> &(dyn LatentModel + Sync) {
        match self {
            Latent::Hmm(m) => m,
            Latent::Iohmm(m) => m,
        }
    }

    pub fn n_states(&self) -> usize {
        self.model().n_states()
    }
}

/// Feature extraction of a system: what the agent observes and what the
/// hidden-state model is fed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub system: System,
    pub encoder: Encoder,
    pub latent: Option<Latent>,
}

impl Features {
    /// Model inputs/outputs of one unit.
    pub fn sequence(&self, unit: &UnitRun) -> Result<Sequence> {
        let (settings, sensors) = self.encoder.encode(unit)?;
        match &self.latent {
            Some(Latent::Iohmm(_)) => Sequence::new(settings, sensors),
            _ => Ok(Sequence::outputs_only(sensors)),
        }
    }

    pub fn sequences(&self, fleet: &Fleet) -> Result<Vec<Sequence>> {
        use rayon::prelude::*;
        fleet.units.par_iter().map(|u| self.sequence(u)).collect()
    }
}

impl FeatureExtractor for Features {
    fn dim(&self) -> usize {
        match (&self.latent, self.system) {
            (Some(l), _) => l.n_states(),
            (None, System::System2) => self.encoder.settings.len() + self.encoder.sensors.len(),
            (None, _) => self.encoder.sensors.len(),
        }
    }

    fn observe(&self, unit: &UnitRun) -> Result<Array2<f64>> {
        if let Some(l) = &self.latent {
            return Ok(decode_causal(l.model(), &self.sequence(unit)?)?.posteriors);
        }
        let (settings, sensors) = self.encoder.encode(unit)?;
        Ok(match self.system {
            System::System2 => ndarray::concatenate(Axis(1), &[settings.view(), sensors.view()])
                .expect("equal row counts"),
            _ => sensors,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub system: System,
    pub n_states: usize,
    pub fit: FitOptions,
    pub agent: TrainConfig,
    pub costs: CostSpec,
    pub expansion_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            system: System::Srla,
            n_states: 6,
            fit: FitOptions::default(),
            agent: TrainConfig::default(),
            costs: CostSpec::default(),
            expansion_depth: DEFAULT_EXPANSION_DEPTH,
        }
    }
}

/// Everything needed to act on new units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub features: Features,
    pub specialized: Option<SpecializedStateSet>,
    pub q: QFunction,
}

impl Persist for Pipeline {
    const KIND: &'static str = "pipeline";
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub pipeline: Pipeline,
    pub episode_log: Vec<EpisodeLog>,
    /// Per-iteration EM log-likelihoods, empty without a hidden-state model.
    pub em_log_likelihoods: Vec<f64>,
    pub em_converged: bool,
    /// Units left out of gated training because they never reach a
    /// specialized state.
    pub excluded_units: Vec<u32>,
}

/// Hidden-state model on `train` for `cfg.system`, or `None`.
pub fn fit_latent(encoder: &Encoder, train: &Fleet, cfg: &PipelineConfig) -> Result<Option<(Latent, Vec<f64>, bool)>> {
    if !cfg.system.uses_latent() {
        return Ok(None);
    }
    let encoded = train
        .units
        .iter()
        .map(|u| encoder.encode(u))
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<_> = encoded.iter().map(|(_, y)| y.view()).collect();
    Ok(Some(match cfg.system {
        System::System3 => {
            let f = fit_hmm(&outputs, cfg.n_states, &cfg.fit)?;
            (Latent::Hmm(f.model), f.log_likelihoods, f.converged)
        }
        _ => {
            let inputs: Vec<_> = encoded.iter().map(|(u, _)| u.view()).collect();
            let f = fit_iohmm(&inputs, &outputs, cfg.n_states, &cfg.fit)?;
            (Latent::Iohmm(f.model), f.log_likelihoods, f.converged)
        }
    }))
}

pub fn train_pipeline(train: &Fleet, cfg: &PipelineConfig) -> Result<TrainOutcome> {
    cfg.agent.validate()?;
    let encoder = Encoder::fit(train, cfg.system.normalize_kind())?;
    let (latent, em_log_likelihoods, em_converged) = match fit_latent(&encoder, train, cfg)? {
        Some((l, ll, c)) => (Some(l), ll, c),
        None => (None, Vec::new(), false),
    };
    let features = Features {
        system: cfg.system,
        encoder,
        latent,
    };
    let env_seed = cfg.agent.seed;
    let (mut env, specialized, excluded_units) = if cfg.system == System::Srla {
        let model = features.latent.as_ref().expect("fitted").model();
        let seqs = features.sequences(train)?;
        let specialized = derive_specialized_states(model, &seqs, cfg.expansion_depth)?;
        let ids: Vec<u32> = train.units.iter().map(|u| u.unit_id).collect();
        let (env, excluded) = build_specialized_env(model, &ids, &seqs, &specialized, cfg.costs, env_seed)?;
        (env, Some(specialized), excluded)
    } else {
        (MaintenanceEnv::from_fleet(train, &features, cfg.costs, env_seed)?, None, Vec::new())
    };
    let (q, episode_log) = agent::train(&mut env, &cfg.agent)?;
    Ok(TrainOutcome {
        pipeline: Pipeline {
            features,
            specialized,
            q,
        },
        episode_log,
        em_log_likelihoods,
        em_converged,
        excluded_units,
    })
}

impl Pipeline {
    pub fn system(&self) -> System {
        self.features.system
    }

    /// Greedy (gated for SRLA) evaluation on `test`.
    pub fn evaluate(&self, test: &Fleet, costs: &CostSpec) -> Result<(EvalReport, Vec<UnitOutcome>)> {
        match (&self.specialized, &self.features.latent) {
            (Some(spec), Some(latent)) => {
                let seqs = self.features.sequences(test)?;
                let policy = GatedPolicy::new(latent.model(), &self.q, spec, &seqs)?;
                evaluate_policy(&policy, test, costs)
            }
            _ => {
                use rayon::prelude::*;
                let observations = test
                    .units
                    .par_iter()
                    .map(|u| self.features.observe(u))
                    .collect::<Result<Vec<_>>>()?;
                let policy = GreedyPolicy {
                    q: &self.q,
                    observations,
                };
                evaluate_policy(&policy, test, costs)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_names_round_trip() {
        for s in System::ALL {
            assert_eq!(s.name().parse::<System>().unwrap(), s);
        }
        assert!("system5".parse::<System>().is_err());
    }
}
