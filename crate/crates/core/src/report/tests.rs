use super::*;
use crate::check::evaluate_assumptions_for;
use crate::data::{summarize_cohort, Horizon};
use crate::mi::{fcs_impute, predict_hospitalizations, ImputationModelSpec, Strategy};
use crate::synth::{generate_cohort, SynthConfig};

fn table() -> CohortTable {
    generate_cohort(&SynthConfig::rate_calibrated().with_seed(12).with_n(3000)).unwrap()
}

#[test]
fn check_only_marks_prevalence_absent() {
    let t = table();
    let inputs = ReportInputs {
        cohort_sha256: Some("abc".into()),
        assumptions: Some(evaluate_assumptions_for(&t, &[Horizon::FiveYear])),
        ..ReportInputs::default()
    };
    let text = render_report_text(&inputs);
    assert!(text.contains("cohort sha256: abc"));
    assert!(text.contains("Prevalence (%)\n  (section absent: no imputation results)"));
    assert!(text.contains("(method rows absent: no imputation results)"));
    assert!(text.contains("(section absent: no cohort summary)"));
    assert!(text.contains("full cohort"));
    assert!(!render_report_csv(&inputs).contains("prevalence,"));
}

#[test]
fn full_report_lists_every_method() {
    let t = table();
    let spec = ImputationModelSpec::default().with_m(2).with_cycles(2).with_ridge(Some(1e-3));
    let runs: Vec<_> = Strategy::ALL.iter().map(|&s| fcs_impute(&t, &spec, s, 4).unwrap()).collect();
    let refs: Vec<&MultipleImputations> = runs.iter().collect();
    let prevalence = prevalence_rows(&t, &refs).unwrap();
    // 2 indicators x 3 subgroups x (2 baselines + 3 methods)
    assert_eq!(prevalence.len(), 30);
    let mut hosp = Vec::new();
    for mi in &runs {
        hosp.extend(hosp_rows(&predict_hospitalizations(mi, &[Horizon::FiveYear]).unwrap()));
    }
    let inputs = ReportInputs {
        cohort_sha256: Some("abc".into()),
        seed: Some(4),
        summary: Some(summarize_cohort(&t)),
        assumptions: Some(evaluate_assumptions_for(&t, &[Horizon::FiveYear])),
        prevalence: Some(prevalence),
        hospitalization: Some(hosp),
        notes: vec!["mi-mar: a note".into()],
    };
    let text = render_report_text(&inputs);
    for m in ["mi-mnar", "mi-mar", "mi-mar-nr", "participants", "recontact"] {
        assert!(text.contains(&format!("    {m} ")), "{m}");
    }
    assert!(text.contains("closest to the full cohort (both sexes): "));
    assert!(text.contains("Notes\n  mi-mar: a note\n"));
    assert!(text.ends_with(ASSUMPTION_LEGEND));
    assert_eq!(text, render_report_text(&inputs));
    let csv = render_report_csv(&inputs);
    assert!(csv.starts_with("section,key,row,subgroup,estimate,ci_low,ci_high\n"));
    let width = csv.lines().next().unwrap().split(',').count();
    assert!(csv.lines().all(|l| l.split(',').count() == width), "ragged csv");
}

#[test]
fn rows_round_trip_through_csv() {
    let rows = vec![PrevalenceRow {
        indicator: "daily_smoking".into(),
        subgroup: "men".into(),
        method: "mi-mnar".into(),
        estimate: 28.123456789,
        ci_low: 25.9,
        ci_high: 31.2,
    }];
    let mut buf = Vec::new();
    write_rows(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("indicator,subgroup,method,estimate,ci_low,ci_high\n"));
    let back: Vec<PrevalenceRow> = read_rows(buf.as_slice()).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn sha256_of_empty_input() {
    assert_eq!(
        sha256_hex(b""),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
}
