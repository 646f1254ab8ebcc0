use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AgeBand, CivilStatus, CohortRow, CohortTable, Education, GroupLabel, Level, Sex};

const Z95: f64 = 1.959_963_984_540_054;

/// A point estimate with a 95% interval, in reporting units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl Estimate {
    /// Wald interval for a proportion, reported in percent.
    pub fn proportion(successes: usize, n: usize) -> Option<Estimate> {
        if n == 0 {
            return None;
        }
        let p = successes as f64 / n as f64;
        let half = Z95 * (p * (1.0 - p) / n as f64).sqrt();
        Some(Estimate {
            value: 100.0 * p,
            low: 100.0 * (p - half),
            high: 100.0 * (p + half),
        })
    }

    /// Normal-approximation interval for a mean.
    pub fn mean(values: &[f64]) -> Option<Estimate> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let half = Z95 * (var / n as f64).sqrt();
        Some(Estimate {
            value: mean,
            low: mean - half,
            high: mean + half,
        })
    }

    pub fn scaled(self, factor: f64) -> Estimate {
        Estimate {
            value: self.value * factor,
            low: self.low * factor,
            high: self.high * factor,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn format(&self, decimals: usize) -> String {
        format!(
            "{:.d$} ({:.d$},{:.d$})",
            self.value,
            self.low,
            self.high,
            d = decimals
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Heading,
    Value,
    Indented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub kind: RowKind,
    /// One cell per group in `GroupLabel::ALL` order; `None` is not-available.
    pub cells: [Option<Estimate>; 3],
}

/// Table of group-wise background and indicator summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n: [usize; 3],
    pub rows: Vec<SummaryRow>,
}

fn share<F, G>(rows: &[&CohortRow], present: F, hit: G) -> Option<Estimate>
where
    F: Fn(&CohortRow) -> bool,
    G: Fn(&CohortRow) -> bool,
{
    let observed: Vec<_> = rows.iter().filter(|r| present(r)).collect();
    Estimate::proportion(observed.iter().filter(|r| hit(r)).count(), observed.len())
}

fn per_group<F>(groups: &[Vec<&CohortRow>; 3], f: F) -> [Option<Estimate>; 3]
where
    F: Fn(&[&CohortRow]) -> Option<Estimate>,
{
    [f(&groups[0]), f(&groups[1]), f(&groups[2])]
}

pub fn summarize_cohort(table: &CohortTable) -> CohortSummary {
    let mut groups: [Vec<&CohortRow>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for row in table.rows() {
        groups[row.group.index()].push(row);
    }
    let n = [groups[0].len(), groups[1].len(), groups[2].len()];
    let mut rows = Vec::new();
    let mut push = |label: String, kind: RowKind, cells: [Option<Estimate>; 3]| {
        rows.push(SummaryRow { label, kind, cells });
    };

    push(
        "Women, %".into(),
        RowKind::Value,
        per_group(&groups, |g| share(g, |_| true, |r| r.background.sex == Sex::Female)),
    );
    push(
        "Mean age, years".into(),
        RowKind::Value,
        per_group(&groups, |g| {
            let ages: Vec<f64> = g.iter().map(|r| f64::from(r.background.age)).collect();
            Estimate::mean(&ages)
        }),
    );
    for &band in AgeBand::ALL {
        push(
            format!("Age group {}, %", band.name()),
            RowKind::Indented,
            per_group(&groups, |g| share(g, |_| true, |r| r.background.age_band() == band)),
        );
    }

    push("Education".into(), RowKind::Heading, [None; 3]);
    for &level in [Education::High, Education::Mid, Education::Low].iter() {
        push(
            format!("{}, %", level.name()),
            RowKind::Indented,
            per_group(&groups, |g| {
                share(
                    g,
                    |r| r.questionnaire.education.is_some(),
                    |r| r.questionnaire.education == Some(level),
                )
            }),
        );
    }

    push("Civil status".into(), RowKind::Heading, [None; 3]);
    for &level in CivilStatus::ALL {
        push(
            format!("{}, %", level.name()),
            RowKind::Indented,
            per_group(&groups, |g| {
                share(
                    g,
                    |r| r.questionnaire.civil_status.is_some(),
                    |r| r.questionnaire.civil_status == Some(level),
                )
            }),
        );
    }

    let indicators: [(&str, fn(&CohortRow) -> Option<bool>); 2] = [
        ("Daily smokers", |r| r.questionnaire.daily_smoker),
        ("Heavy alcohol users", |r| r.questionnaire.heavy_alcohol),
    ];
    for (name, get) in indicators {
        for (sex, sex_label) in [(Sex::Male, "men"), (Sex::Female, "women")] {
            push(
                format!("{name}, {sex_label} %"),
                RowKind::Value,
                per_group(&groups, |g| {
                    share(
                        g,
                        |r| r.background.sex == sex && get(r).is_some(),
                        |r| get(r) == Some(true),
                    )
                }),
            );
            for &band in AgeBand::ALL {
                push(
                    format!("Age group {}, %", band.name()),
                    RowKind::Indented,
                    per_group(&groups, |g| {
                        share(
                            g,
                            |r| {
                                r.background.sex == sex
                                    && r.background.age_band() == band
                                    && get(r).is_some()
                            },
                            |r| get(r) == Some(true),
                        )
                    }),
                );
            }
        }
    }

    CohortSummary { n, rows }
}

impl CohortSummary {
    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<34}{:<22}{:<22}{:<22}",
            "", "Participants", "Re-contact resp.", "Non-participants"
        );
        let _ = writeln!(
            out,
            "{:<34}{:<22}{:<22}{:<22}",
            "N", self.n[0], self.n[1], self.n[2]
        );
        for row in &self.rows {
            let label = match row.kind {
                RowKind::Indented => format!("    {}", row.label),
                _ => row.label.clone(),
            };
            if row.kind == RowKind::Heading {
                let _ = writeln!(out, "{label}");
                continue;
            }
            let _ = write!(out, "{label:<34}");
            for cell in &row.cells {
                let text = cell.map(|e| e.format(1)).unwrap_or_else(|| "--".to_string());
                let _ = write!(out, "{text:<22}");
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        out
    }

    /// One line per (row, group) in long format.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("section,row,group,estimate,ci_low,ci_high\n");
        let mut section = String::new();
        for row in &self.rows {
            if row.kind == RowKind::Heading {
                section = row.label.clone();
                continue;
            }
            if row.kind == RowKind::Value {
                section.clear();
            }
            for (g, cell) in GroupLabel::ALL.iter().zip(&row.cells) {
                let (v, lo, hi) = match cell {
                    Some(e) => (
                        format!("{:.3}", e.value),
                        format!("{:.3}", e.low),
                        format!("{:.3}", e.high),
                    ),
                    None => ("NA".into(), "NA".into(), "NA".into()),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{v},{lo},{hi}",
                    section,
                    row.label.replace(',', ""),
                    g.short()
                );
            }
        }
        out
    }
}
