//! Synthetic cohorts with a known selection mechanism and retained truth.

mod config;
mod generate;
mod truth;

use thiserror::Error;

use crate::data::DataError;

pub use config::{
    default_strata, largest_remainder, make_assumption3_config, reference_hosp_model,
    AlcoholAmounts, CovariateModels, EffectSizes, HospCount, HospHorizon, HospModel, HospZero,
    LogitModel, StratumTarget, SynthConfig, REFERENCE_GROUP_SIZES, REFERENCE_N,
    REFERENCE_PER_1000, SCHEMA_VERSION,
};
pub use generate::{generate_cohort, hosp_count_shifts};
pub use truth::{population_prevalence, smoking_shift_for_gap, truth_prevalence};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("config has no seed; generation is never auto-seeded")]
    MissingSeed,
    #[error("non-finite linear predictor in `{model}` for invitee {id}")]
    Probability { model: String, id: u64 },
    #[error("truth unavailable: {0}")]
    UnavailableTruth(String),
    #[error(transparent)]
    Data(#[from] DataError),
}
