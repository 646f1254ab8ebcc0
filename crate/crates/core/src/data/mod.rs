//! Cohort schema: invitees, their group label, questionnaire answers and
//! register-linked hospitalization counts.

mod classify;
mod csv_io;
mod summary;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{classify_group, classify_heavy_alcohol, HEAVY_ALCOHOL_MEN, HEAVY_ALCOHOL_WOMEN};
pub use csv_io::{
    load_cohort, load_truth, read_cohort, read_truth, write_cohort, write_completed, write_truth,
    COHORT_HEADER, TRUTH_HEADER,
};
pub use summary::{summarize_cohort, CohortSummary, Estimate, RowKind, SummaryRow};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid record (id {id}): {message}")]
    InvalidRecord { id: u64, message: String },
    #[error("line {line}, column `{column}`: {message}")]
    Load {
        line: usize,
        column: String,
        message: String,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cohort has no rows")]
    Empty,
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Categorical variable with a fixed, ordered level set. The first level is
/// the reference category in design matrices.
pub trait Level: Copy + Eq + Sized + 'static {
    const ALL: &'static [Self];
    fn name(self) -> &'static str;

    fn index(self) -> usize {
        Self::ALL.iter().position(|&l| l == self).expect("level in ALL")
    }

    fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.name() == s)
    }
}

macro_rules! levels {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl Level for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];
            fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

levels!(
    /// Three-way partition of invitees by how they responded.
    GroupLabel {
        Participant => "Participant",
        RecontactRespondent => "RecontactRespondent",
        NonParticipant => "NonParticipant",
    }
);

levels!(Sex { Male => "Male", Female => "Female" });

levels!(
    /// Ten-year age band of the sampling design.
    AgeBand {
        Age25To34 => "25-34",
        Age35To44 => "35-44",
        Age45To54 => "45-54",
        Age55To64 => "55-64",
        Age65To74 => "65-74",
    }
);

levels!(
    /// Survey regions; North Karelia is the reference level.
    Region {
        NorthKarelia => "NorthKarelia",
        NorthernSavonia => "NorthernSavonia",
        TurkuLoimaa => "TurkuLoimaa",
        HelsinkiVantaa => "HelsinkiVantaa",
        Oulu => "Oulu",
    }
);

levels!(Education { Low => "Low", Mid => "Mid", High => "High" });

levels!(CivilStatus {
    Married => "Married",
    Cohabiting => "Cohabiting",
    Single => "Single",
    Divorced => "Divorced",
    Widow => "Widow",
});

levels!(
    /// Length of the hospitalization history window.
    Horizon {
        Full => "full",
        FiveYear => "5y",
        OneYear => "1y",
    }
);

levels!(Indicator {
    DailySmoking => "daily_smoking",
    HeavyAlcohol => "heavy_alcohol",
});

pub const MIN_AGE: u8 = 25;
pub const MAX_AGE: u8 = 74;

impl AgeBand {
    pub fn from_age(age: u8) -> Option<AgeBand> {
        if !(MIN_AGE..=MAX_AGE).contains(&age) {
            return None;
        }
        AgeBand::from_index(usize::from((age - MIN_AGE) / 10))
    }

    pub fn lower(self) -> u8 {
        MIN_AGE + 10 * self.index() as u8
    }
}

impl GroupLabel {
    pub fn short(self) -> &'static str {
        match self {
            GroupLabel::Participant => "participants",
            GroupLabel::RecontactRespondent => "recontact",
            GroupLabel::NonParticipant => "nonparticipants",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Background {
    pub sex: Sex,
    pub age: u8,
    pub region: Region,
}

impl Background {
    pub fn age_band(&self) -> AgeBand {
        AgeBand::from_age(self.age).expect("validated age")
    }

    pub fn age_decades(&self) -> f64 {
        f64::from(self.age) / 10.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub daily_smoker: Option<bool>,
    pub alcohol_portions: Option<f64>,
    pub heavy_alcohol: Option<bool>,
    pub education: Option<Education>,
    pub civil_status: Option<CivilStatus>,
    pub hypertension: Option<bool>,
    pub high_chol: Option<bool>,
    pub bp_recent: Option<bool>,
    pub chol_recent: Option<bool>,
}

impl Questionnaire {
    /// True when no field carries a value.
    pub fn is_empty(&self) -> bool {
        self.first_present().is_none()
    }

    /// Name of the first field that carries a value, in CSV column order.
    pub fn first_present(&self) -> Option<&'static str> {
        [
            ("daily_smoker", self.daily_smoker.is_some()),
            ("alcohol_portions", self.alcohol_portions.is_some()),
            ("heavy_alcohol", self.heavy_alcohol.is_some()),
            ("education", self.education.is_some()),
            ("civil_status", self.civil_status.is_some()),
            ("hypertension", self.hypertension.is_some()),
            ("high_chol", self.high_chol.is_some()),
            ("bp_recent", self.bp_recent.is_some()),
            ("chol_recent", self.chol_recent.is_some()),
        ]
        .into_iter()
        .find(|(_, present)| *present)
        .map(|(name, _)| name)
    }

    pub fn indicator(&self, indicator: Indicator) -> Option<bool> {
        match indicator {
            Indicator::DailySmoking => self.daily_smoker,
            Indicator::HeavyAlcohol => self.heavy_alcohol,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HospitalizationCounts {
    pub full_history: u32,
    pub five_year: u32,
    pub one_year: u32,
}

impl HospitalizationCounts {
    pub fn get(&self, horizon: Horizon) -> u32 {
        match horizon {
            Horizon::Full => self.full_history,
            Horizon::FiveYear => self.five_year,
            Horizon::OneYear => self.one_year,
        }
    }

    pub fn is_nested(&self) -> bool {
        self.one_year <= self.five_year && self.five_year <= self.full_history
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub id: u64,
    pub background: Background,
    pub group: GroupLabel,
    pub questionnaire: Questionnaire,
    pub hosp: HospitalizationCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Synthetic { seed: u64, config_hash: String },
    Ingested { path: PathBuf },
}

/// Unmasked questionnaire values of a synthetic cohort, aligned with its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub rows: Vec<Questionnaire>,
}

/// Row filter used for prevalences and summaries. `None` means "any".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgroup {
    pub sex: Option<Sex>,
    pub group: Option<GroupLabel>,
    pub age_band: Option<AgeBand>,
}

impl Subgroup {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn sex(sex: Sex) -> Self {
        Subgroup {
            sex: Some(sex),
            ..Self::default()
        }
    }

    pub fn group(group: GroupLabel) -> Self {
        Subgroup {
            group: Some(group),
            ..Self::default()
        }
    }

    pub fn with_group(mut self, group: GroupLabel) -> Self {
        self.group = Some(group);
        self
    }

    pub fn with_sex(mut self, sex: Sex) -> Self {
        self.sex = Some(sex);
        self
    }

    pub fn matches(&self, row: &CohortRow) -> bool {
        self.sex.is_none_or(|s| s == row.background.sex)
            && self.group.is_none_or(|g| g == row.group)
            && self.age_band.is_none_or(|b| b == row.background.age_band())
    }

    /// Short label: "men", "women" or "both", suffixed with group / band when set.
    pub fn label(&self) -> String {
        let mut label = match self.sex {
            Some(Sex::Male) => "men".to_string(),
            Some(Sex::Female) => "women".to_string(),
            None => "both".to_string(),
        };
        if let Some(g) = self.group {
            label.push(':');
            label.push_str(g.short());
        }
        if let Some(b) = self.age_band {
            label.push(':');
            label.push_str(b.name());
        }
        label
    }
}

/// Validated, immutable cohort.
#[derive(Debug, Clone)]
pub struct CohortTable {
    rows: Vec<CohortRow>,
    provenance: Provenance,
    truth: Option<Arc<Truth>>,
}

impl CohortTable {
    pub fn new(rows: Vec<CohortRow>, provenance: Provenance) -> Result<Self, DataError> {
        validate_rows(&rows)?;
        Ok(CohortTable {
            rows,
            provenance,
            truth: None,
        })
    }

    /// Attaches unmasked truth; every truth row must agree with the observed
    /// value wherever the cohort has one.
    pub fn with_truth(mut self, truth: Truth) -> Result<Self, DataError> {
        if truth.rows.len() != self.rows.len() {
            return Err(DataError::Domain(format!(
                "truth has {} rows, cohort has {}",
                truth.rows.len(),
                self.rows.len()
            )));
        }
        for (row, t) in self.rows.iter().zip(&truth.rows) {
            if let Some(field) = observed_disagreement(&row.questionnaire, t) {
                return Err(DataError::InvalidRecord {
                    id: row.id,
                    message: format!("truth disagrees with observed `{field}`"),
                });
            }
        }
        self.truth = Some(Arc::new(truth));
        Ok(self)
    }

    pub(crate) fn from_parts_unchecked(
        rows: Vec<CohortRow>,
        provenance: Provenance,
        truth: Option<Arc<Truth>>,
    ) -> Self {
        CohortTable {
            rows,
            provenance,
            truth,
        }
    }

    pub fn rows(&self) -> &[CohortRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_deref()
    }

    pub(crate) fn truth_arc(&self) -> Option<Arc<Truth>> {
        self.truth.clone()
    }

    pub fn group_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for row in &self.rows {
            counts[row.group.index()] += 1;
        }
        counts
    }
}

fn observed_disagreement(obs: &Questionnaire, truth: &Questionnaire) -> Option<&'static str> {
    fn differs<T: PartialEq>(o: &Option<T>, t: &Option<T>) -> bool {
        o.is_some() && o != t
    }
    if differs(&obs.daily_smoker, &truth.daily_smoker) {
        Some("daily_smoker")
    } else if differs(&obs.alcohol_portions, &truth.alcohol_portions) {
        Some("alcohol_portions")
    } else if differs(&obs.heavy_alcohol, &truth.heavy_alcohol) {
        Some("heavy_alcohol")
    } else if differs(&obs.education, &truth.education) {
        Some("education")
    } else if differs(&obs.civil_status, &truth.civil_status) {
        Some("civil_status")
    } else if differs(&obs.hypertension, &truth.hypertension) {
        Some("hypertension")
    } else if differs(&obs.high_chol, &truth.high_chol) {
        Some("high_chol")
    } else if differs(&obs.bp_recent, &truth.bp_recent) {
        Some("bp_recent")
    } else if differs(&obs.chol_recent, &truth.chol_recent) {
        Some("chol_recent")
    } else {
        None
    }
}

pub(crate) fn validate_row(row: &CohortRow) -> Result<(), DataError> {
    let invalid = |message: String| DataError::InvalidRecord {
        id: row.id,
        message,
    };
    if AgeBand::from_age(row.background.age).is_none() {
        return Err(invalid(format!(
            "age {} outside [{MIN_AGE}, {MAX_AGE}]",
            row.background.age
        )));
    }
    if row.group == GroupLabel::NonParticipant {
        if let Some(field) = row.questionnaire.first_present() {
            return Err(invalid(format!("non-participant has questionnaire value in `{field}`")));
        }
    }
    let q = &row.questionnaire;
    if let Some(portions) = q.alcohol_portions {
        let derived = classify_heavy_alcohol(row.background.sex, portions)
            .map_err(|e| invalid(e.to_string()))?;
        if q.heavy_alcohol != Some(derived) {
            return Err(invalid(
                "heavy_alcohol does not match alcohol_portions".to_string(),
            ));
        }
    }
    if !row.hosp.is_nested() {
        return Err(invalid(format!(
            "hospitalization horizons not nested: 1y={} 5y={} full={}",
            row.hosp.one_year, row.hosp.five_year, row.hosp.full_history
        )));
    }
    Ok(())
}

fn validate_rows(rows: &[CohortRow]) -> Result<(), DataError> {
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let mut seen = HashSet::with_capacity(rows.len());
    for row in rows {
        if !seen.insert(row.id) {
            return Err(DataError::DuplicateId(row.id));
        }
        validate_row(row)?;
    }
    Ok(())
}
