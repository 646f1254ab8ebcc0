//! Combined run report: cohort summary, hospitalizations per 1000 by group
//! and method, assumption verdicts and prevalence by method.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::check::{report_subgroups, AssumptionReport, ASSUMPTION_LEGEND};
use crate::data::{CohortSummary, CohortTable, DataError, GroupLabel, Indicator, Level, Subgroup};
use crate::mi::{
    complete_case_prevalence, estimate_prevalence, observed_prevalence, HospPrediction, MiError,
    MultipleImputations, PooledEstimate,
};

pub const PARTICIPANTS: &str = "participants";
pub const RECONTACT: &str = "recontact";
pub const FULL_COHORT: &str = "full cohort";

/// One line of the pooled-estimates table, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub indicator: String,
    pub subgroup: String,
    pub method: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Model-based hospitalizations per 1000 for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HospRow {
    pub horizon: String,
    pub subgroup: String,
    pub method: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn prevalence_row(ind: Indicator, sg: &Subgroup, method: &str, e: &PooledEstimate) -> PrevalenceRow {
    let e = e.scaled(100.0);
    PrevalenceRow {
        indicator: ind.name().into(),
        subgroup: sg.label(),
        method: method.into(),
        estimate: e.point,
        ci_low: e.ci95.0,
        ci_high: e.ci95.1,
    }
}

/// Participants-only and re-contact-only baselines followed by each
/// imputation run, for both indicators by sex and combined.
pub fn prevalence_rows(
    table: &CohortTable,
    runs: &[&MultipleImputations],
) -> Result<Vec<PrevalenceRow>, MiError> {
    let mut out = Vec::new();
    for &ind in Indicator::ALL {
        for sg in report_subgroups() {
            out.push(prevalence_row(ind, &sg, PARTICIPANTS, &complete_case_prevalence(table, ind, &sg)?));
            // a cohort without re-contact respondents simply has no such row
            if let Ok(e) = observed_prevalence(table, ind, &sg.with_group(GroupLabel::RecontactRespondent)) {
                out.push(prevalence_row(ind, &sg, RECONTACT, &e));
            }
            for mi in runs {
                out.push(prevalence_row(ind, &sg, mi.strategy.name(), &estimate_prevalence(mi, ind, &sg)?));
            }
        }
    }
    Ok(out)
}

pub fn hosp_rows(preds: &[HospPrediction]) -> Vec<HospRow> {
    preds
        .iter()
        .map(|p| HospRow {
            horizon: p.horizon.name().into(),
            subgroup: p.subgroup.label(),
            method: p.strategy.name().into(),
            estimate: p.estimate.point,
            ci_low: p.estimate.ci95.0,
            ci_high: p.estimate.ci95.1,
        })
        .collect()
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>, DataError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(DataError::from)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Whatever upstream results exist; missing pieces become absent sections.
#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub cohort_sha256: Option<String>,
    pub seed: Option<u64>,
    pub summary: Option<CohortSummary>,
    pub assumptions: Option<AssumptionReport>,
    pub prevalence: Option<Vec<PrevalenceRow>>,
    pub hospitalization: Option<Vec<HospRow>>,
    /// Fitting notes carried over from the imputation run.
    pub notes: Vec<String>,
}

const COL: usize = 24;

fn cell(v: f64, lo: f64, hi: f64, d: usize) -> String {
    format!("{v:.d$} ({lo:.d$},{hi:.d$})")
}

fn methods_in<'a>(rows: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for m in rows {
        if !seen.iter().any(|s| s == m) {
            seen.push(m.to_string());
        }
    }
    seen
}

fn header_line(out: &mut String, first: &str) {
    let _ = write!(out, "{first:<26}");
    for sg in report_subgroups() {
        let _ = write!(out, "{:<COL$}", sg.label());
    }
    out.push('\n');
}

fn render_hosp(out: &mut String, r: &ReportInputs) {
    let _ = writeln!(out, "Hospitalizations per 1000");
    if r.assumptions.is_none() && r.hospitalization.is_none() {
        let _ = writeln!(out, "  (section absent: no check or imputation results)\n");
        return;
    }
    let horizons = methods_in(
        r.assumptions
            .iter()
            .flat_map(|a| a.observed.iter().map(|o| o.horizon.name()))
            .chain(r.hospitalization.iter().flatten().map(|h| h.horizon.as_str())),
    );
    for h in horizons {
        header_line(out, &format!("  horizon {h}"));
        let mut full = None;
        if let Some(a) = &r.assumptions {
            let sources = methods_in(a.observed.iter().filter(|o| o.horizon.name() == h).map(|o| o.source.as_str()));
            for src in sources {
                let _ = write!(out, "    {src:<22}");
                for sg in report_subgroups() {
                    let e = a
                        .observed
                        .iter()
                        .find(|o| o.horizon.name() == h && o.source == src && o.subgroup == sg)
                        .and_then(|o| o.estimate);
                    if src == FULL_COHORT && sg == Subgroup::all() {
                        full = e.map(|e| e.value);
                    }
                    let text = e.map_or_else(|| "--".into(), |e| cell(e.value, e.low, e.high, 0));
                    let _ = write!(out, "{text:<COL$}");
                }
                out.push('\n');
            }
        } else {
            let _ = writeln!(out, "    (observed rows absent: no check results)");
        }
        match &r.hospitalization {
            Some(rows) => {
                let rows: Vec<&HospRow> = rows.iter().filter(|x| x.horizon == h).collect();
                let mut best: Option<(f64, String)> = None;
                for m in methods_in(rows.iter().map(|x| x.method.as_str())) {
                    let _ = write!(out, "    {m:<22}");
                    for sg in report_subgroups() {
                        let x = rows.iter().find(|x| x.method == m && x.subgroup == sg.label());
                        if let (Some(x), Some(f), true) = (x, full, sg == Subgroup::all()) {
                            let d = (x.estimate - f).abs();
                            if best.as_ref().is_none_or(|b| d < b.0) {
                                best = Some((d, m.clone()));
                            }
                        }
                        let text = x.map_or_else(|| "--".into(), |x| cell(x.estimate, x.ci_low, x.ci_high, 0));
                        let _ = write!(out, "{text:<COL$}");
                    }
                    out.push('\n');
                }
                if let Some((_, m)) = best {
                    let _ = writeln!(out, "    closest to the full cohort (both sexes): {m}");
                }
            }
            None => {
                let _ = writeln!(out, "    (method rows absent: no imputation results)");
            }
        }
        out.push('\n');
    }
}

fn verdict(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "supported",
        Some(false) => "violated",
        None => "not evaluated",
    }
}

fn render_verdicts(out: &mut String, r: &ReportInputs) {
    let _ = writeln!(out, "Assumption checks");
    let Some(a) = &r.assumptions else {
        let _ = writeln!(out, "  (section absent: no check results)\n");
        return;
    };
    if a.small_sample {
        let _ = writeln!(out, "  warning: small sample ({} rows)", a.n);
    }
    for c in &a.horizons {
        let coef = |w: Option<crate::glm::WaldInterval>| {
            w.map_or_else(|| "--".into(), |w| cell(w.estimate, w.low, w.high, 2))
        };
        let _ = writeln!(
            out,
            "  {:<6}participant {:<20} re-contact {:<20} (2) {:<10} (3) {}",
            c.horizon.name(),
            coef(c.participant),
            coef(c.recontact),
            verdict(c.assumption2_supported),
            verdict(c.assumption3_supported),
        );
        if let Some(f) = &c.failure {
            let _ = writeln!(out, "        fit failed: {f}");
        }
    }
    out.push('\n');
}

fn render_prevalence(out: &mut String, r: &ReportInputs) {
    let _ = writeln!(out, "Prevalence (%)");
    let Some(rows) = &r.prevalence else {
        let _ = writeln!(out, "  (section absent: no imputation results)\n");
        return;
    };
    for ind in methods_in(rows.iter().map(|x| x.indicator.as_str())) {
        header_line(out, &format!("  {ind}"));
        let these: Vec<&PrevalenceRow> = rows.iter().filter(|x| x.indicator == ind).collect();
        for m in methods_in(these.iter().map(|x| x.method.as_str())) {
            let _ = write!(out, "    {m:<22}");
            for sg in report_subgroups() {
                let text = these
                    .iter()
                    .find(|x| x.method == m && x.subgroup == sg.label())
                    .map_or_else(|| "--".into(), |x| cell(x.estimate, x.ci_low, x.ci_high, 1));
                let _ = write!(out, "{text:<COL$}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
}

pub fn render_report_text(r: &ReportInputs) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Non-participation adjustment report");
    let _ = writeln!(out, "cohort sha256: {}", r.cohort_sha256.as_deref().unwrap_or("unknown"));
    if let Some(s) = r.seed {
        let _ = writeln!(out, "imputation seed: {s}");
    }
    out.push('\n');
    let _ = writeln!(out, "Cohort by group (%)");
    match &r.summary {
        Some(s) => out.push_str(&s.render_text()),
        None => {
            let _ = writeln!(out, "  (section absent: no cohort summary)");
        }
    }
    out.push('\n');
    render_hosp(&mut out, r);
    render_verdicts(&mut out, r);
    render_prevalence(&mut out, r);
    if !r.notes.is_empty() {
        let _ = writeln!(out, "Notes");
        for n in &r.notes {
            let _ = writeln!(out, "  {n}");
        }
        out.push('\n');
    }
    out.push_str(ASSUMPTION_LEGEND);
    let mut text: String = out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
    text.push('\n');
    text
}

/// Long format: section, key, row, subgroup, estimate, ci_low, ci_high.
pub fn render_report_csv(r: &ReportInputs) -> String {
    let mut out = String::from("section,key,row,subgroup,estimate,ci_low,ci_high\n");
    let num = |v: f64| format!("{v:.6}");
    if let Some(s) = &r.summary {
        for line in s.render_csv().lines().skip(1) {
            // section,row,group,estimate,ci_low,ci_high
            let _ = writeln!(out, "summary,{line}");
        }
    }
    if let Some(a) = &r.assumptions {
        for o in &a.observed {
            let (v, lo, hi) = o
                .estimate
                .map_or_else(|| ("NA".into(), "NA".into(), "NA".into()), |e| (num(e.value), num(e.low), num(e.high)));
            let _ = writeln!(out, "hospitalization,{},{},{},{v},{lo},{hi}", o.horizon.name(), o.source, o.subgroup.label());
        }
        for c in &a.horizons {
            for (name, w, v) in [
                ("assumption (2)", c.participant, c.assumption2_supported),
                ("assumption (3)", c.recontact, c.assumption3_supported),
            ] {
                let (e, lo, hi) = w.map_or_else(|| ("NA".into(), "NA".into(), "NA".into()), |w| (num(w.estimate), num(w.low), num(w.high)));
                let _ = writeln!(out, "assumption,{},{name},{},{e},{lo},{hi}", c.horizon.name(), verdict(v));
            }
        }
    }
    for x in r.hospitalization.iter().flatten() {
        let _ = writeln!(
            out,
            "hospitalization,{},{},{},{},{},{}",
            x.horizon, x.method, x.subgroup, num(x.estimate), num(x.ci_low), num(x.ci_high)
        );
    }
    for x in r.prevalence.iter().flatten() {
        let _ = writeln!(
            out,
            "prevalence,{},{},{},{},{},{}",
            x.indicator, x.method, x.subgroup, num(x.estimate), num(x.ci_low), num(x.ci_high)
        );
    }
    out
}

#[cfg(test)]
mod tests;
