//! Hospitalization-count checks of the group-similarity assumptions.

mod render;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    Background, CohortRow, CohortTable, Estimate, GroupLabel, Horizon, Level, Region, Sex,
    Subgroup,
};
use crate::glm::{fit_zinb, DesignMatrix, GlmError, WaldInterval, ZinbFit};

pub use render::{render_assumption_text, ASSUMPTION_LEGEND};

/// Cohorts smaller than this get a warning in the report.
pub const SMALL_SAMPLE: usize = 500;

pub const PARTICIPANT: &str = "participant";
pub const RECONTACT: &str = "recontact";

/// Count-part background columns: age by sex in decades, sex, region dummies.
pub fn count_background_names() -> Vec<String> {
    let mut names = vec!["age:men".to_string(), "age:women".into(), "female".into()];
    names.extend(
        Region::ALL[1..]
            .iter()
            .map(|r| format!("region:{}", r.name())),
    );
    names
}

pub fn count_background(bg: &Background, out: &mut Vec<f64>) {
    let age = bg.age_decades();
    let female = bg.sex == Sex::Female;
    out.push(if female { 0.0 } else { age });
    out.push(if female { age } else { 0.0 });
    out.push(f64::from(u8::from(female)));
    for r in &Region::ALL[1..] {
        out.push(f64::from(u8::from(bg.region == *r)));
    }
}

pub fn zero_background_names() -> Vec<String> {
    vec!["age:men".to_string(), "age:women".into(), "female".into()]
}

pub fn zero_background(bg: &Background, out: &mut Vec<f64>) {
    let age = bg.age_decades();
    let female = bg.sex == Sex::Female;
    out.push(if female { 0.0 } else { age });
    out.push(if female { age } else { 0.0 });
    out.push(f64::from(u8::from(female)));
}

fn group_columns(g: GroupLabel, out: &mut Vec<f64>) {
    out.push(f64::from(u8::from(g == GroupLabel::Participant)));
    out.push(f64::from(u8::from(g == GroupLabel::RecontactRespondent)));
}

/// Count and zero designs with both group indicators; non-participants are
/// the reference group.
pub fn hospitalization_designs(rows: &[CohortRow]) -> Result<(DesignMatrix, DesignMatrix), GlmError> {
    let mut cn = count_background_names();
    cn.extend([PARTICIPANT.to_string(), RECONTACT.to_string()]);
    let mut zn = zero_background_names();
    zn.extend([PARTICIPANT.to_string(), RECONTACT.to_string()]);
    let mut xd = Vec::with_capacity(rows.len() * cn.len());
    let mut zd = Vec::with_capacity(rows.len() * zn.len());
    for r in rows {
        count_background(&r.background, &mut xd);
        group_columns(r.group, &mut xd);
        zero_background(&r.background, &mut zd);
        group_columns(r.group, &mut zd);
    }
    Ok((
        DesignMatrix::new(cn, rows.len(), xd)?,
        DesignMatrix::new(zn, rows.len(), zd)?,
    ))
}

pub fn fit_hospitalization_model(table: &CohortTable, horizon: Horizon) -> Result<ZinbFit, GlmError> {
    let (x, z) = hospitalization_designs(table.rows())?;
    let y: Vec<u32> = table.rows().iter().map(|r| r.hosp.get(horizon)).collect();
    fit_zinb(&x, &z, &y)
}

/// (assumption 2 supported, assumption 3 supported) from the count-part
/// group indicators of a fitted model.
pub fn verdicts(fit: &ZinbFit) -> Option<(bool, bool)> {
    let p = fit.count_interval(PARTICIPANT)?;
    let r = fit.count_interval(RECONTACT)?;
    Some((p.contains_zero(), r.contains_zero()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonCheck {
    pub horizon: Horizon,
    pub fit: Option<ZinbFit>,
    pub failure: Option<String>,
    pub participant: Option<WaldInterval>,
    pub recontact: Option<WaldInterval>,
    pub zero_participant: Option<WaldInterval>,
    pub zero_recontact: Option<WaldInterval>,
    pub assumption2_supported: Option<bool>,
    pub assumption3_supported: Option<bool>,
}

impl HorizonCheck {
    fn from_result(horizon: Horizon, result: Result<ZinbFit, GlmError>) -> Self {
        match result {
            Ok(fit) => {
                let v = verdicts(&fit);
                HorizonCheck {
                    horizon,
                    participant: fit.count_interval(PARTICIPANT),
                    recontact: fit.count_interval(RECONTACT),
                    zero_participant: fit.zero_interval(PARTICIPANT),
                    zero_recontact: fit.zero_interval(RECONTACT),
                    assumption2_supported: v.map(|v| v.0),
                    assumption3_supported: v.map(|v| v.1),
                    fit: Some(fit),
                    failure: None,
                }
            }
            Err(e) => HorizonCheck {
                horizon,
                fit: None,
                failure: Some(e.to_string()),
                participant: None,
                recontact: None,
                zero_participant: None,
                zero_recontact: None,
                assumption2_supported: None,
                assumption3_supported: None,
            },
        }
    }

    /// Recomputes the verdicts from the stored fit alone.
    pub fn rederive(&self) -> Option<(bool, bool)> {
        self.fit.as_ref().and_then(verdicts)
    }
}

/// Observed hospitalizations per 1000 by group and sex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRate {
    pub horizon: Horizon,
    /// "participants", "recontact", "nonparticipants" or "full cohort".
    pub source: String,
    pub subgroup: Subgroup,
    pub estimate: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub n: usize,
    pub group_counts: [usize; 3],
    pub small_sample: bool,
    pub horizons: Vec<HorizonCheck>,
    pub observed: Vec<ObservedRate>,
}

impl AssumptionReport {
    pub fn horizon(&self, h: Horizon) -> Option<&HorizonCheck> {
        self.horizons.iter().find(|c| c.horizon == h)
    }

    pub fn failures(&self) -> Vec<(Horizon, &str)> {
        self.horizons
            .iter()
            .filter_map(|c| c.failure.as_deref().map(|f| (c.horizon, f)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        render_assumption_text(self)
    }
}

/// Empirical mean count ×1000 with a normal-approximation interval.
pub fn observed_per_1000(
    table: &CohortTable,
    horizon: Horizon,
    group: Option<GroupLabel>,
    subgroup: &Subgroup,
) -> Option<Estimate> {
    let values: Vec<f64> = table
        .rows()
        .iter()
        .filter(|r| subgroup.matches(r) && group.is_none_or(|g| g == r.group))
        .map(|r| f64::from(r.hosp.get(horizon)))
        .collect();
    Estimate::mean(&values).map(|e| e.scaled(1000.0))
}

pub fn report_subgroups() -> [Subgroup; 3] {
    [
        Subgroup::sex(Sex::Male),
        Subgroup::sex(Sex::Female),
        Subgroup::all(),
    ]
}

pub fn observed_rates(table: &CohortTable, horizons: &[Horizon]) -> Vec<ObservedRate> {
    let mut out = Vec::new();
    for &h in horizons {
        for sg in report_subgroups() {
            for g in GroupLabel::ALL.iter().map(|g| Some(*g)).chain([None]) {
                out.push(ObservedRate {
                    horizon: h,
                    source: g.map_or("full cohort", |g| g.short()).to_string(),
                    subgroup: sg,
                    estimate: observed_per_1000(table, h, g, &sg),
                });
            }
        }
    }
    out
}

/// Fits the selected horizons concurrently and collects verdicts; a failed
/// horizon is recorded rather than aborting the report.
pub fn evaluate_assumptions_for(table: &CohortTable, horizons: &[Horizon]) -> AssumptionReport {
    let horizons_out: Vec<HorizonCheck> = horizons
        .par_iter()
        .map(|&h| HorizonCheck::from_result(h, fit_hospitalization_model(table, h)))
        .collect();
    AssumptionReport {
        n: table.len(),
        group_counts: table.group_counts(),
        small_sample: table.len() < SMALL_SAMPLE,
        horizons: horizons_out,
        observed: observed_rates(table, horizons),
    }
}

pub fn evaluate_assumptions(table: &CohortTable) -> AssumptionReport {
    evaluate_assumptions_for(table, Horizon::ALL)
}

#[cfg(test)]
mod tests;
