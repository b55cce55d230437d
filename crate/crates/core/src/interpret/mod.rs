//! Reading the decoded hidden states back in terms of failures, sensors,
//! remaining life and ground-truth health.

mod failure;
mod health;
mod importance;
mod pca;
mod rul;

pub use failure::{decode_all, identify_failure_states, FailureStateSet, DEFAULT_SUPPORT_THRESHOLD};
pub use health::{map_health_states, Condition, HealthMap, StateHealth, HEALTH_QUANTILES};
pub use importance::{feature_importance, ImportanceOptions, ImportanceReport};
pub use pca::{project_2d, Projection};
pub use rul::{estimate_rul, rollout_from_state, rul_curve, RulEstimate, RulOptions};
