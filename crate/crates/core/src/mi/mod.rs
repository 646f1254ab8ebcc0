//! Chained-equation multiple imputation under three strategies for using
//! re-contact data, with pooled prevalence and hospitalization estimates.

mod estimate;
mod fcs;
mod hosp;
mod pool;
mod spec;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::glm::GlmError;

pub use estimate::{complete_case_prevalence, estimate_prevalence, observed_prevalence};
pub use fcs::{fcs_impute, MultipleImputations, VariableTrace};
pub use hosp::{predict_hospitalizations, HospPrediction};
pub use pool::{pool, t_quantile_975, PooledEstimate};
pub use spec::{Covariate, ImputationModelSpec, TargetSpec, Variable, VariableFamily};

/// How re-contact data enter the imputation models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Separate fits for participants and re-contact respondents; the
    /// re-contact fit imputes non-participants.
    MiMnar,
    /// One fit shared by participants and re-contact respondents.
    MiMar,
    /// Participants only; re-contact answers are discarded first.
    MiMarNr,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::MiMnar, Strategy::MiMar, Strategy::MiMarNr];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::MiMnar => "mi-mnar",
            Strategy::MiMar => "mi-mar",
            Strategy::MiMarNr => "mi-mar-nr",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum MiError {
    #[error(
        "small stratum: `{variable}` has {rows} fitting rows in {group} for {columns} columns; \
         set a ridge penalty (--ridge) to fit it anyway"
    )]
    SmallStratum {
        variable: String,
        group: String,
        rows: usize,
        columns: usize,
    },
    #[error("fit of `{variable}` in {group} failed at cycle {cycle}: {source}")]
    Fit {
        variable: String,
        group: String,
        cycle: usize,
        #[source]
        source: GlmError,
    },
    #[error("no observed values of `{variable}` in {group} to start from")]
    NoDonors { variable: String, group: String },
    #[error("`{variable}` has missing values but is not an imputation target")]
    UnmodeledMissing { variable: String },
    #[error("hospitalization model for {horizon} failed on imputation {imputation}: {source}")]
    HospFit {
        horizon: crate::data::Horizon,
        imputation: usize,
        #[source]
        source: GlmError,
    },
    #[error("invalid imputation spec: {0}")]
    Spec(String),
    #[error("pooling needs at least 2 imputations, got {0}")]
    InsufficientImputations(usize),
    #[error("variance must be nonnegative, got {0}")]
    InvalidVariance(f64),
    #[error("subgroup `{0}` is empty")]
    EmptySubgroup(String),
    #[error("no observed values for `{0}`")]
    NoObserved(String),
    #[error(transparent)]
    Data(#[from] DataError),
}
