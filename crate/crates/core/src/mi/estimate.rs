use crate::data::{CohortTable, GroupLabel, Indicator, Subgroup};

use super::{pool, MiError, MultipleImputations, PooledEstimate};

fn indicator_name(ind: Indicator) -> &'static str {
    match ind {
        Indicator::DailySmoking => "daily_smoker",
        Indicator::HeavyAlcohol => "heavy_alcohol",
    }
}

/// (prevalence, binomial variance) over the matching rows of one completed table.
fn completed_prevalence(
    table: &CohortTable,
    ind: Indicator,
    subgroup: &Subgroup,
) -> Result<(f64, f64), MiError> {
    let mut n = 0usize;
    let mut k = 0usize;
    for r in table.rows().iter().filter(|r| subgroup.matches(r)) {
        n += 1;
        match r.questionnaire.indicator(ind) {
            Some(v) => k += usize::from(v),
            None => return Err(MiError::NoObserved(indicator_name(ind).into())),
        }
    }
    if n == 0 {
        return Err(MiError::EmptySubgroup(subgroup.label()));
    }
    let p = k as f64 / n as f64;
    Ok((p, p * (1.0 - p) / n as f64))
}

/// Pooled prevalence (as a proportion) of an indicator over the completed tables.
pub fn estimate_prevalence(
    mi: &MultipleImputations,
    ind: Indicator,
    subgroup: &Subgroup,
) -> Result<PooledEstimate, MiError> {
    let per: Vec<(f64, f64)> = mi
        .completed
        .iter()
        .map(|t| completed_prevalence(t, ind, subgroup))
        .collect::<Result<_, _>>()?;
    match per.as_slice() {
        [(p, v)] => Ok(PooledEstimate::single(*p, *v)),
        _ => pool(&per),
    }
}

/// Prevalence over the observed values of the matching rows.
pub fn observed_prevalence(
    table: &CohortTable,
    ind: Indicator,
    subgroup: &Subgroup,
) -> Result<PooledEstimate, MiError> {
    let values: Vec<bool> = table
        .rows()
        .iter()
        .filter(|r| subgroup.matches(r))
        .filter_map(|r| r.questionnaire.indicator(ind))
        .collect();
    if values.is_empty() {
        return Err(MiError::NoObserved(format!(
            "{} in {}",
            indicator_name(ind),
            subgroup.label()
        )));
    }
    let n = values.len() as f64;
    let p = values.iter().filter(|&&v| v).count() as f64 / n;
    Ok(PooledEstimate::single(p, p * (1.0 - p) / n))
}

/// Participants-only prevalence: the estimate that ignores non-participation.
pub fn complete_case_prevalence(
    table: &CohortTable,
    ind: Indicator,
    subgroup: &Subgroup,
) -> Result<PooledEstimate, MiError> {
    observed_prevalence(table, ind, &subgroup.with_group(GroupLabel::Participant))
}
