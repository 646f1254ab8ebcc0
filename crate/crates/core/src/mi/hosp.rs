use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::check::{count_background, count_background_names, zero_background, zero_background_names, report_subgroups, PARTICIPANT};
use crate::data::{CohortRow, CohortTable, GroupLabel, Horizon, Subgroup};
use crate::glm::{fit_zinb, DesignMatrix, GlmError};

use super::spec::Variable;
use super::{pool, MiError, MultipleImputations, PooledEstimate, Strategy};

/// Model-based hospitalizations per 1000 under one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospPrediction {
    pub strategy: Strategy,
    pub horizon: Horizon,
    pub subgroup: Subgroup,
    pub estimate: PooledEstimate,
    /// Fits of this horizon that stopped at a likelihood boundary.
    #[serde(default)]
    pub notes: Vec<String>,
}

fn with_indicator(s: Strategy) -> bool {
    s == Strategy::MiMnar
}

fn fits_on(s: Strategy, g: GroupLabel) -> bool {
    match s {
        Strategy::MiMnar | Strategy::MiMar => g != GroupLabel::NonParticipant,
        Strategy::MiMarNr => g == GroupLabel::Participant,
    }
}

fn designs(rows: &[&CohortRow], indicator: bool) -> Result<(DesignMatrix, DesignMatrix), MiError> {
    let mut cn = count_background_names();
    for v in Variable::ALL {
        cn.extend(v.level_names());
    }
    let mut zn = zero_background_names();
    if indicator {
        cn.push(PARTICIPANT.into());
        zn.push(PARTICIPANT.into());
    }
    let mut xd = Vec::with_capacity(rows.len() * cn.len());
    let mut zd = Vec::with_capacity(rows.len() * zn.len());
    for r in rows {
        count_background(&r.background, &mut xd);
        for v in Variable::ALL {
            let code = v
                .get(&r.questionnaire)
                .ok_or_else(|| MiError::UnmodeledMissing {
                    variable: v.name().into(),
                })?;
            if v.n_levels() > 2 {
                xd.extend((1..v.n_levels() as u8).map(|l| f64::from(u8::from(code == l))));
            } else {
                xd.push(f64::from(code));
            }
        }
        zero_background(&r.background, &mut zd);
        if indicator {
            let p = f64::from(u8::from(r.group == GroupLabel::Participant));
            xd.push(p);
            zd.push(p);
        }
    }
    let n = rows.len();
    Ok((DesignMatrix::new(cn, n, xd).map_err(dim)?, DesignMatrix::new(zn, n, zd).map_err(dim)?))
}

fn dim(e: GlmError) -> MiError {
    MiError::Spec(e.to_string())
}

/// Expected counts for every row of one completed table at the fitted ZINB.
///
/// A fit that drifts toward a boundary (θ or a zero-part coefficient
/// running off) still has well-defined expected counts; those are used if
/// finite and the fit is reported in the returned note.
fn predict_table(
    table: &CohortTable,
    strategy: Strategy,
    horizon: Horizon,
    imputation: usize,
) -> Result<(Vec<f64>, Option<String>), MiError> {
    let indicator = with_indicator(strategy);
    let all: Vec<&CohortRow> = table.rows().iter().collect();
    let fit_rows: Vec<&CohortRow> = all.iter().copied().filter(|r| fits_on(strategy, r.group)).collect();
    let (x, z) = designs(&fit_rows, indicator)?;
    let y: Vec<u32> = fit_rows.iter().map(|r| r.hosp.get(horizon)).collect();
    let err = |source| MiError::HospFit {
        horizon,
        imputation,
        source,
    };
    let (fit, note) = match fit_zinb(&x, &z, &y) {
        Ok(f) => (f, None),
        Err(GlmError::NonConvergence { best, score, .. }) if best.log_likelihood.is_finite() => {
            let note = format!(
                "{horizon} imputation {}: ZINB stopped short of a finite maximum (score {score:.1e}); using its last iterate",
                imputation + 1
            );
            (*best, Some(note))
        }
        Err(e) => return Err(err(e)),
    };
    let (xa, za) = designs(&all, indicator)?;
    let preds: Vec<f64> = (0..all.len())
        .map(|i| fit.expected_count(xa.row(i), za.row(i)))
        .collect();
    if let Some(bad) = preds.iter().find(|p| !p.is_finite()) {
        return Err(err(GlmError::Degenerate(format!("expected count {bad}"))));
    }
    Ok((preds, note))
}

/// Hospitalizations per 1000 predicted from each completed table and
/// pooled, for men, women and both sexes.
pub fn predict_hospitalizations(
    mi: &MultipleImputations,
    horizons: &[Horizon],
) -> Result<Vec<HospPrediction>, MiError> {
    let jobs: Vec<(usize, usize)> = (0..horizons.len())
        .flat_map(|h| (0..mi.m()).map(move |k| (h, k)))
        .collect();
    let results: Vec<(Vec<f64>, Option<String>)> = jobs
        .par_iter()
        .map(|&(h, k)| predict_table(&mi.completed[k], mi.strategy, horizons[h], k))
        .collect::<Result<_, _>>()?;
    let (preds, notes): (Vec<Vec<f64>>, Vec<Option<String>>) = results.into_iter().unzip();

    let rows = mi.completed[0].rows();
    let mut out = Vec::new();
    for (h, &horizon) in horizons.iter().enumerate() {
        let horizon_notes: Vec<String> = notes[h * mi.m()..(h + 1) * mi.m()].iter().flatten().cloned().collect();
        for sg in report_subgroups() {
            let idx: Vec<usize> = (0..rows.len()).filter(|&i| sg.matches(&rows[i])).collect();
            if idx.is_empty() {
                continue;
            }
            // sampling noise of a subgroup mean count, shared by every imputation
            let counts: Vec<f64> = rows.iter().map(|r| f64::from(r.hosp.get(horizon))).collect();
            let within = mean_and_var(&counts, &idx).1;
            let per: Vec<(f64, f64)> = (0..mi.m())
                .map(|k| (mean_and_var(&preds[h * mi.m() + k], &idx).0, within))
                .collect();
            let est = match per.as_slice() {
                [(p, v)] => PooledEstimate::single(*p, *v),
                _ => pool(&per)?,
            };
            out.push(HospPrediction {
                strategy: mi.strategy,
                horizon,
                subgroup: sg,
                estimate: est.scaled(1000.0),
                notes: horizon_notes.clone(),
            });
        }
    }
    Ok(out)
}

/// Mean of the selected values and the sampling variance of that mean.
fn mean_and_var(values: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| values[i]).sum::<f64>() / n;
    let ss = idx.iter().map(|&i| (values[i] - mean).powi(2)).sum::<f64>();
    let var = if idx.len() > 1 { ss / (n - 1.0) / n } else { 0.0 };
    (mean, var)
}
