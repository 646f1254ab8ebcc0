use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    AgeBand, Background, CivilStatus, Education, GroupLabel, Horizon, Level, Region, Sex,
};

use super::SynthError;

pub const SCHEMA_VERSION: u32 = 1;

/// Logistic model on background, group and earlier-generated variables.
/// Band and region arrays are offsets against 25-34 and North Karelia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitModel {
    pub intercept: f64,
    #[serde(default)]
    pub female: f64,
    #[serde(default)]
    pub age_band: [f64; 4],
    #[serde(default)]
    pub region: [f64; 4],
    #[serde(default)]
    pub female_age_band: [f64; 4],
    /// Offsets for [participants, re-contact respondents, non-participants].
    #[serde(default)]
    pub group_shift: [f64; 3],
    #[serde(default)]
    pub terms: BTreeMap<String, f64>,
}

impl LogitModel {
    pub fn intercept(value: f64) -> Self {
        LogitModel {
            intercept: value,
            female: 0.0,
            age_band: [0.0; 4],
            region: [0.0; 4],
            female_age_band: [0.0; 4],
            group_shift: [0.0; 3],
            terms: BTreeMap::new(),
        }
    }

    fn with_age(mut self, age: [f64; 4]) -> Self {
        self.age_band = age;
        self
    }

    fn with_female(mut self, f: f64) -> Self {
        self.female = f;
        self
    }

    fn with_term(mut self, name: &str, v: f64) -> Self {
        self.terms.insert(name.to_string(), v);
        self
    }

    fn with_shift(mut self, recontact_and_non: f64) -> Self {
        self.group_shift = [0.0, recontact_and_non, recontact_and_non];
        self
    }

    /// Linear predictor from background and group only.
    pub fn background_eta(&self, bg: &Background, group: Option<GroupLabel>) -> f64 {
        let mut eta = self.intercept;
        let band = bg.age_band().index();
        let female = bg.sex == Sex::Female;
        if female {
            eta += self.female;
        }
        if band > 0 {
            eta += self.age_band[band - 1];
            if female {
                eta += self.female_age_band[band - 1];
            }
        }
        let region = bg.region.index();
        if region > 0 {
            eta += self.region[region - 1];
        }
        if let Some(g) = group {
            eta += self.group_shift[g.index()];
        }
        eta
    }

    fn coefficients_finite(&self) -> bool {
        std::iter::once(self.intercept)
            .chain([self.female])
            .chain(self.age_band)
            .chain(self.region)
            .chain(self.female_age_band)
            .chain(self.group_shift)
            .chain(self.terms.values().copied())
            .all(f64::is_finite)
    }
}

/// Nested-dichotomy and binary models for the questionnaire covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateModels {
    /// P(Low)
    pub education_low: LogitModel,
    /// P(Mid | not Low)
    pub education_mid: LogitModel,
    /// P(Married)
    pub civil_married: LogitModel,
    /// P(Cohabiting | not Married)
    pub civil_cohabiting: LogitModel,
    /// P(Single | Single, Divorced or Widow)
    pub civil_single: LogitModel,
    /// P(Divorced | Divorced or Widow)
    pub civil_divorced: LogitModel,
    pub hypertension: LogitModel,
    pub high_chol: LogitModel,
    pub bp_recent: LogitModel,
    pub chol_recent: LogitModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlcoholAmounts {
    /// Mean of the exponential excess above the threshold for heavy users.
    pub heavy_excess_mean: f64,
    /// Share of non-heavy users reporting zero portions.
    pub zero_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HospCount {
    pub intercept: f64,
    pub age_men: f64,
    pub age_women: f64,
    pub female: f64,
    pub region: [f64; 4],
    pub participant: f64,
    pub recontact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HospZero {
    pub intercept: f64,
    pub age_men: f64,
    pub age_women: f64,
    pub female: f64,
    pub participant: f64,
    pub recontact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HospHorizon {
    pub count: HospCount,
    pub zero: HospZero,
    pub theta: f64,
}

impl HospHorizon {
    fn indicators(group: GroupLabel) -> (f64, f64) {
        match group {
            GroupLabel::Participant => (1.0, 0.0),
            GroupLabel::RecontactRespondent => (0.0, 1.0),
            GroupLabel::NonParticipant => (0.0, 0.0),
        }
    }

    pub fn count_eta(&self, bg: &Background, group: GroupLabel) -> f64 {
        let c = &self.count;
        let (p, r) = Self::indicators(group);
        let age = bg.age_decades();
        let mut eta = c.intercept + c.participant * p + c.recontact * r;
        match bg.sex {
            Sex::Male => eta += c.age_men * age,
            Sex::Female => eta += c.age_women * age + c.female,
        }
        let region = bg.region.index();
        if region > 0 {
            eta += c.region[region - 1];
        }
        eta
    }

    pub fn zero_eta(&self, bg: &Background, group: GroupLabel) -> f64 {
        let z = &self.zero;
        let (p, r) = Self::indicators(group);
        let age = bg.age_decades();
        let mut eta = z.intercept + z.participant * p + z.recontact * r;
        match bg.sex {
            Sex::Male => eta += z.age_men * age,
            Sex::Female => eta += z.age_women * age + z.female,
        }
        eta
    }

    /// (1 − π)·μ
    pub fn expected(&self, bg: &Background, group: GroupLabel, count_shift: f64) -> f64 {
        let pi = crate::glm::special::logistic(self.zero_eta(bg, group));
        (1.0 - pi) * (self.count_eta(bg, group) + count_shift).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HospModel {
    pub full: HospHorizon,
    pub five_year: HospHorizon,
    pub one_year: HospHorizon,
    /// Horizon drawn exactly from its ZINB; the others follow by thinning
    /// (shorter) or by adding an NB increment (longer).
    pub anchor: Horizon,
    /// Cohort-average expected counts per 1000 (full, 5y, 1y). When set,
    /// count intercepts are shifted to hit them.
    #[serde(default)]
    pub mean_targets: Option<[f64; 3]>,
}

impl HospModel {
    pub fn horizon(&self, h: Horizon) -> &HospHorizon {
        match h {
            Horizon::Full => &self.full,
            Horizon::FiveYear => &self.five_year,
            Horizon::OneYear => &self.one_year,
        }
    }

    pub fn horizon_mut(&mut self, h: Horizon) -> &mut HospHorizon {
        match h {
            Horizon::Full => &mut self.full,
            Horizon::FiveYear => &mut self.five_year,
            Horizon::OneYear => &mut self.one_year,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumTarget {
    pub region: Region,
    pub sex: Sex,
    pub age_band: AgeBand,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub schema_version: u32,
    pub n_invitees: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub strata: Vec<StratumTarget>,
    /// P(participant | background)
    pub participation_model: LogitModel,
    /// P(re-contact response | background, not participant)
    pub recontact_model: LogitModel,
    pub covariate_models: CovariateModels,
    pub smoking_model: LogitModel,
    pub alcohol_model: LogitModel,
    pub alcohol_amounts: AlcoholAmounts,
    pub hosp_model: HospModel,
    /// Per-field missingness among participants' questionnaire answers.
    #[serde(default)]
    pub item_missing_rate: f64,
}

/// Departures of participants from the other two groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizes {
    /// Log-odds shift of daily smoking for re-contact respondents and
    /// non-participants.
    pub smoking_shift: f64,
    pub alcohol_shift: f64,
    /// Multiplier on the default covariate group shifts.
    pub covariate_scale: f64,
    /// 0 makes participation independent of background, 1 uses the
    /// calibrated selection models.
    pub background_selection: f64,
}

impl EffectSizes {
    pub fn null() -> Self {
        EffectSizes {
            smoking_shift: 0.0,
            alcohol_shift: 0.0,
            covariate_scale: 0.0,
            background_selection: 0.0,
        }
    }
}

impl Default for EffectSizes {
    fn default() -> Self {
        EffectSizes {
            smoking_shift: 0.25,
            alcohol_shift: 0.25,
            covariate_scale: 1.0,
            background_selection: 1.0,
        }
    }
}

/// Invitee counts of the reference survey by group.
pub const REFERENCE_GROUP_SIZES: [usize; 3] = [5827, 597, 3576];
pub const REFERENCE_N: usize = 10_000;

const FEMALE_SHARE: f64 = 0.506_087_4;
const AGE_SHARES: [f64; 5] = [0.230_640_0, 0.191_840_3, 0.214_194_1, 0.216_973_3, 0.146_352_3];

/// Stratum targets summing to `n`, split by largest remainder over
/// equal regions and the reference sex and age shares.
pub fn default_strata(n: usize) -> Vec<StratumTarget> {
    let mut cells = Vec::new();
    for &region in Region::ALL {
        for &sex in Sex::ALL {
            for &age_band in AgeBand::ALL {
                let s = if sex == Sex::Female {
                    FEMALE_SHARE
                } else {
                    1.0 - FEMALE_SHARE
                };
                let w = 0.2 * s * AGE_SHARES[age_band.index()];
                cells.push((
                    StratumTarget {
                        region,
                        sex,
                        age_band,
                        n: 0,
                    },
                    w,
                ));
            }
        }
    }
    let weights: Vec<f64> = cells.iter().map(|c| c.1).collect();
    let sizes = largest_remainder(&weights, n);
    cells
        .into_iter()
        .zip(sizes)
        .map(|((mut t, _), k)| {
            t.n = k;
            t
        })
        .collect()
}

/// Integer apportionment of `n` proportional to `weights`.
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

fn participation_calibrated() -> LogitModel {
    LogitModel::intercept(-0.2346)
        .with_female(0.2448)
        .with_age([0.2989, 0.5228, 0.6729, 0.9456])
}

fn recontact_calibrated() -> LogitModel {
    LogitModel::intercept(-2.2989)
        .with_female(0.2976)
        .with_age([0.0432, 0.4886, 0.7563, 0.6843])
}

/// Overall participation and re-contact response rates of the reference survey.
const PARTICIPATION_RATE: f64 = 0.5827;
const RECONTACT_RATE: f64 = 597.0 / 4173.0;

fn covariate_models(scale: f64) -> CovariateModels {
    CovariateModels {
        education_low: LogitModel::intercept(-1.6)
            .with_age([0.3, 0.8, 1.3, 1.8])
            .with_female(-0.2)
            .with_shift(0.17 * scale),
        education_mid: LogitModel::intercept(-0.4)
            .with_age([0.1, 0.2, 0.3, 0.4])
            .with_female(-0.2)
            .with_shift(0.05 * scale),
        civil_married: LogitModel::intercept(-0.9)
            .with_age([0.9, 1.3, 1.4, 1.3])
            .with_shift(-0.1 * scale),
        civil_cohabiting: LogitModel::intercept(0.6).with_age([-0.4, -1.0, -1.5, -2.0]),
        civil_single: LogitModel::intercept(2.0)
            .with_age([-1.0, -2.2, -2.8, -3.2])
            .with_shift(0.3 * scale),
        civil_divorced: LogitModel::intercept(4.0)
            .with_age([-0.5, -1.2, -2.0, -3.0])
            .with_female(-0.5),
        hypertension: LogitModel::intercept(-2.8)
            .with_age([0.7, 1.4, 2.0, 2.5])
            .with_female(-0.2),
        high_chol: LogitModel::intercept(-2.2).with_age([0.6, 1.2, 1.6, 1.8]),
        bp_recent: LogitModel::intercept(-0.2)
            .with_age([0.2, 0.5, 0.8, 1.2])
            .with_female(0.3)
            .with_term("hypertension", 1.5),
        chol_recent: LogitModel::intercept(-1.0)
            .with_age([0.3, 0.7, 1.1, 1.5])
            .with_term("high_chol", 1.5),
    }
}

fn smoking_model(shift: f64) -> LogitModel {
    let mut m = LogitModel::intercept(-0.91)
        .with_female(-0.496)
        .with_age([-0.301, -0.374, -0.308, -1.055])
        .with_shift(shift)
        .with_term("education:Low", 0.35)
        .with_term("education:High", -0.35)
        .with_term("civil:Single", 0.2)
        .with_term("civil:Divorced", 0.4)
        .with_term("civil:Cohabiting", 0.15);
    m.female_age_band = [-0.055, 0.149, 0.083, 0.089];
    m
}

fn alcohol_model(shift: f64) -> LogitModel {
    let mut m = LogitModel::intercept(-3.313)
        .with_female(-0.216)
        .with_age([-0.112, 0.509, 0.208, 0.088])
        .with_shift(shift)
        .with_term("smoker", 1.369)
        .with_term("smoker:female", 0.042);
    m.female_age_band = [-0.256, -0.636, -0.761, -1.405];
    m
}

/// Table of ZINB coefficients per horizon; θ is not reported and is ours.
pub fn reference_hosp_model() -> HospModel {
    HospModel {
        full: HospHorizon {
            count: HospCount {
                intercept: 0.84,
                age_men: 0.18,
                age_women: 0.33,
                female: -0.51,
                region: [0.00, -0.16, -0.30, 0.03],
                participant: -0.25,
                recontact: -0.10,
            },
            zero: HospZero {
                intercept: 22.19,
                age_men: -9.23,
                age_women: -1.46,
                female: -19.44,
                participant: -0.56,
                recontact: -0.59,
            },
            theta: 0.75,
        },
        five_year: HospHorizon {
            count: HospCount {
                intercept: -0.88,
                age_men: 0.26,
                age_women: 0.22,
                female: 0.32,
                region: [-0.03, -0.26, -0.45, -0.09],
                participant: -0.60,
                recontact: 0.02,
            },
            zero: HospZero {
                intercept: 1.40,
                age_men: -0.56,
                age_women: -0.44,
                female: -0.46,
                participant: -1.59,
                recontact: 0.05,
            },
            theta: 0.25,
        },
        one_year: HospHorizon {
            count: HospCount {
                intercept: -1.79,
                age_men: 0.27,
                age_women: 0.08,
                female: 1.22,
                region: [0.04, -0.26, -0.46, -0.16],
                participant: -0.92,
                recontact: 0.08,
            },
            zero: HospZero {
                intercept: 1.73,
                age_men: -0.31,
                age_women: -0.42,
                female: 0.99,
                participant: -0.88,
                recontact: 0.12,
            },
            theta: 0.3,
        },
        anchor: Horizon::Full,
        mean_targets: None,
    }
}

/// Full-cohort hospitalizations per 1000 (full, 5y, 1y), both sexes.
pub const REFERENCE_PER_1000: [f64; 3] = [4880.0, 813.0, 181.0];

fn interpolate(model: &LogitModel, overall_rate: f64, s: f64) -> LogitModel {
    let base = crate::glm::special::logit(overall_rate);
    let mut m = model.clone();
    m.intercept = (1.0 - s) * base + s * model.intercept;
    m.female *= s;
    m.age_band.iter_mut().for_each(|v| *v *= s);
    m.region.iter_mut().for_each(|v| *v *= s);
    m.female_age_band.iter_mut().for_each(|v| *v *= s);
    m
}

impl SynthConfig {
    /// Default calibrated configuration of 10 000 invitees, without seed.
    pub fn calibrated_default() -> Self {
        let mut c = make_assumption3_config(EffectSizes::default());
        c.item_missing_rate = 0.02;
        c
    }

    /// Like `calibrated_default` with count intercepts shifted to match the
    /// reference full-cohort hospitalization rates.
    pub fn rate_calibrated() -> Self {
        let mut c = Self::calibrated_default();
        c.hosp_model.mean_targets = Some(REFERENCE_PER_1000);
        c
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n_invitees = n;
        self.strata = default_strata(n);
        self
    }

    /// Rescales every stratum by `factor`, preserving proportions up to
    /// rounding.
    pub fn scaled(mut self, factor: f64) -> Result<Self, SynthError> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(SynthError::Config {
                field: "scale".into(),
                message: format!("must be positive, got {factor}"),
            });
        }
        let n = (self.n_invitees as f64 * factor).round() as usize;
        let weights: Vec<f64> = self.strata.iter().map(|s| s.n as f64).collect();
        let sizes = largest_remainder(&weights, n);
        for (s, k) in self.strata.iter_mut().zip(sizes) {
            s.n = k;
        }
        self.n_invitees = n;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let c: SynthConfig = serde_path_to_error::deserialize(de).map_err(|e| SynthError::Config {
            field: json_field(&e),
            message: e.inner().to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |field: &str, message: String| SynthError::Config {
            field: field.to_string(),
            message,
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(err(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.n_invitees == 0 {
            return Err(err("n_invitees", "must be positive".into()));
        }
        let total: usize = self.strata.iter().map(|s| s.n).sum();
        if total != self.n_invitees {
            return Err(err(
                "strata",
                format!("targets sum to {total}, n_invitees is {}", self.n_invitees),
            ));
        }
        if !(0.0..1.0).contains(&self.item_missing_rate) {
            return Err(err("item_missing_rate", "must lie in [0, 1)".into()));
        }
        let a = &self.alcohol_amounts;
        if !(a.heavy_excess_mean > 0.0) || !(0.0..=1.0).contains(&a.zero_share) {
            return Err(err("alcohol_amounts", "invalid amount parameters".into()));
        }
        for (name, model) in self.logit_models() {
            if !model.coefficients_finite() {
                return Err(err(name, "non-finite coefficient".into()));
            }
            let stage = stage_of(name);
            for term in model.terms.keys() {
                match Feature::parse(term) {
                    Some(f) if f.stage() < stage => {}
                    Some(_) => {
                        return Err(err(
                            name,
                            format!("term `{term}` is generated after this model"),
                        ))
                    }
                    None => return Err(err(name, format!("unknown term `{term}`"))),
                }
            }
        }
        for h in Horizon::ALL {
            let hz = self.hosp_model.horizon(*h);
            if !(hz.theta > 0.0) || !hz.theta.is_finite() {
                return Err(err("hosp_model", format!("theta for {h} must be positive")));
            }
        }
        if let Some(t) = self.hosp_model.mean_targets {
            if t.iter().any(|v| !(*v > 0.0)) || !(t[0] >= t[1] && t[1] >= t[2]) {
                return Err(err(
                    "hosp_model.mean_targets",
                    "targets must be positive and nested".into(),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn logit_models(&self) -> Vec<(&'static str, &LogitModel)> {
        let c = &self.covariate_models;
        vec![
            ("participation_model", &self.participation_model),
            ("recontact_model", &self.recontact_model),
            ("covariate_models.education_low", &c.education_low),
            ("covariate_models.education_mid", &c.education_mid),
            ("covariate_models.civil_married", &c.civil_married),
            ("covariate_models.civil_cohabiting", &c.civil_cohabiting),
            ("covariate_models.civil_single", &c.civil_single),
            ("covariate_models.civil_divorced", &c.civil_divorced),
            ("covariate_models.hypertension", &c.hypertension),
            ("covariate_models.high_chol", &c.high_chol),
            ("covariate_models.bp_recent", &c.bp_recent),
            ("covariate_models.chol_recent", &c.chol_recent),
            ("smoking_model", &self.smoking_model),
            ("alcohol_model", &self.alcohol_model),
        ]
    }
}

fn json_field(e: &serde_path_to_error::Error<serde_json::Error>) -> String {
    let path = e.path().to_string();
    // unknown and missing fields are reported on the enclosing object
    let named = e.inner().to_string().split('`').nth(1).map(str::to_string);
    match (path.as_str(), named) {
        (".", Some(f)) => f,
        (".", None) => "<document>".to_string(),
        (p, Some(f)) if e.inner().to_string().contains("field") => format!("{p}.{f}"),
        (p, _) => p.to_string(),
    }
}

/// Config whose re-contact respondents and non-participants share every
/// outcome and covariate model, while participants differ by `effects`.
pub fn make_assumption3_config(effects: EffectSizes) -> SynthConfig {
    let s = effects.background_selection;
    SynthConfig {
        schema_version: SCHEMA_VERSION,
        n_invitees: REFERENCE_N,
        seed: None,
        strata: default_strata(REFERENCE_N),
        participation_model: interpolate(&participation_calibrated(), PARTICIPATION_RATE, s),
        recontact_model: interpolate(&recontact_calibrated(), RECONTACT_RATE, s),
        covariate_models: covariate_models(effects.covariate_scale),
        smoking_model: smoking_model(effects.smoking_shift),
        alcohol_model: alcohol_model(effects.alcohol_shift),
        alcohol_amounts: AlcoholAmounts {
            heavy_excess_mean: 8.0,
            zero_share: 0.25,
        },
        hosp_model: reference_hosp_model(),
        item_missing_rate: 0.0,
    }
}

/// Earlier-generated variable usable as a model term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Feature {
    Education(Education),
    Civil(CivilStatus),
    Hypertension,
    HighChol,
    BpRecent,
    CholRecent,
    Smoker,
    SmokerFemale,
}

impl Feature {
    pub(crate) fn parse(name: &str) -> Option<Feature> {
        if let Some(level) = name.strip_prefix("education:") {
            return Education::parse(level).map(Feature::Education);
        }
        if let Some(level) = name.strip_prefix("civil:") {
            return CivilStatus::parse(level).map(Feature::Civil);
        }
        Some(match name {
            "hypertension" => Feature::Hypertension,
            "high_chol" => Feature::HighChol,
            "bp_recent" => Feature::BpRecent,
            "chol_recent" => Feature::CholRecent,
            "smoker" => Feature::Smoker,
            "smoker:female" => Feature::SmokerFemale,
            _ => return None,
        })
    }

    /// Generation stage at which the variable becomes available.
    pub(crate) fn stage(self) -> u8 {
        match self {
            Feature::Education(_) => 1,
            Feature::Civil(_) => 2,
            Feature::Hypertension => 3,
            Feature::HighChol => 4,
            Feature::BpRecent => 5,
            Feature::CholRecent => 6,
            Feature::Smoker | Feature::SmokerFemale => 7,
        }
    }
}

fn stage_of(model: &str) -> u8 {
    match model {
        "participation_model" | "recontact_model" => 0,
        "covariate_models.education_low" | "covariate_models.education_mid" => 1,
        "covariate_models.civil_married"
        | "covariate_models.civil_cohabiting"
        | "covariate_models.civil_single"
        | "covariate_models.civil_divorced" => 2,
        "covariate_models.hypertension" => 3,
        "covariate_models.high_chol" => 4,
        "covariate_models.bp_recent" => 5,
        "covariate_models.chol_recent" => 6,
        "smoking_model" => 7,
        _ => 8,
    }
}
