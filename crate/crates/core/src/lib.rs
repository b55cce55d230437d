//! Hidden-state health decoding and gated Q-learning for run-to-failure
//! replacement decisions.
//!
//! A Gaussian HMM (or its input-output variant, conditioned on operating
//! settings) decodes latent health states from multivariate sensor series.
//! A feedforward Q-function learns when to replace equipment, acting only
//! while the decoded state is flagged as close to failure. The crate also
//! covers the interpretation tools built on the decoded states (failure
//! states, feature importance, Monte-Carlo RUL, health mapping, PCA) and the
//! fleet cost metrics used to score replacement policies.

// `!(x >= 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod dataio;
pub mod env;
pub mod error;
pub mod interpret;
pub mod iomarkov;
pub mod markov;
pub mod numeric;
pub mod pipeline;
pub mod srla;

pub use agent::{QFunction, TrainConfig};
pub use dataio::{Fleet, NormalizeKind, Normalizer, SyntheticSpec, UnitRun};
pub use env::{Action, CostSpec, MaintenanceEnv};
pub use error::{Error, Result};
pub use iomarkov::IohmmModel;
pub use markov::{HmmModel, LatentModel, PosteriorTrack, Sequence};
pub use srla::{EvalReport, SpecializedStateSet};

