use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use recontact_core::data::read_cohort;
use recontact_core::synth::{default_strata, REFERENCE_N};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recontact-adjust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str, scale: &str) {
    let o = bin(&["synth", "--out", p(dir), "--seed", seed, "--scale", scale]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn impute(dir: &Path, extra: &[&str]) -> Output {
    let cohort = dir.join("cohort.csv");
    let mut args = vec!["--threads", "1", "impute", "--in", p(&cohort), "--out", p(dir)];
    args.extend_from_slice(extra);
    bin(&args)
}

fn pipeline(dir: &Path) {
    synth(dir, "11", "0.1");
    let o = impute(dir, &["--seed", "5", "--m", "2", "--cycles", "2", "--ridge", "1e-3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cohort = dir.join("cohort.csv");
    let o = bin(&["check", "--in", p(&cohort), "--out", p(dir)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bin(&["report", "--in", p(dir)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

/// Rewrites every data line of a cohort CSV.
fn rewrite_cohort(src: &Path, dst: &Path, f: impl Fn(&str) -> String) {
    let text = fs::read_to_string(src).unwrap();
    let mut lines = text.lines();
    let mut out = String::new();
    out.push_str(lines.next().unwrap());
    out.push('\n');
    for l in lines {
        out.push_str(&f(l));
        out.push('\n');
    }
    fs::write(dst, out).unwrap();
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), "7", "0.05");
    synth(b.path(), "7", "0.05");
    for f in ["cohort.csv", "cohort.truth.csv", "synth_manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn scale_keeps_stratum_proportions() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "7", "0.1");
    let path = d.path().join("cohort.csv");
    let t = read_cohort(fs::read(&path).unwrap().as_slice(), &path).unwrap();
    assert_eq!(t.len(), 1000);
    let mut counts = HashMap::new();
    for r in t.rows() {
        let b = &r.background;
        *counts.entry((b.region, b.sex, b.age_band())).or_insert(0usize) += 1;
    }
    for s in default_strata(REFERENCE_N) {
        let got = counts.get(&(s.region, s.sex, s.age_band)).copied().unwrap_or(0) as f64;
        assert!((got - s.n as f64 * 0.1).abs() <= 1.0, "{s:?}: {got}");
    }
}

#[test]
fn synth_needs_a_seed() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&recontact_core::synth::SynthConfig::calibrated_default().to_json()).unwrap();
    v["seed"] = serde_json::Value::Null;
    fs::write(&cfg, v.to_string()).unwrap();
    let o = bin(&["synth", "--config", p(&cfg), "--out", p(d.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn bad_configs_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    fs::write(&cfg, "{ not json").unwrap();
    let o = bin(&["synth", "--config", p(&cfg), "--out", p(d.path()), "--seed", "1"]);
    assert_eq!(code(&o), 2);

    let mut v: serde_json::Value =
        serde_json::from_str(&recontact_core::synth::SynthConfig::calibrated_default().to_json()).unwrap();
    v["n_invitees"] = serde_json::Value::String("many".into());
    fs::write(&cfg, v.to_string()).unwrap();
    let o = bin(&["synth", "--config", p(&cfg), "--out", p(d.path()), "--seed", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_invitees"), "{}", stderr(&o));
    assert!(!d.path().join("cohort.csv").exists());
}

#[test]
fn missing_hosp_columns_exit_2() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "3", "0.05");
    let cut = d.path().join("cut.csv");
    let src = fs::read_to_string(d.path().join("cohort.csv")).unwrap();
    let trimmed: String = src
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{}\n", f[..f.len() - 3].join(","))
        })
        .collect();
    fs::write(&cut, trimmed).unwrap();
    let o = bin(&["check", "--in", p(&cut), "--out", p(d.path())]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("hosp"), "{}", stderr(&o));
}

#[test]
fn small_stratum_without_ridge_exits_3() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "3", "0.02");
    let o = impute(d.path(), &["--seed", "1", "--m", "2", "--cycles", "1", "--strategy", "mi-mnar"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let e = stderr(&o);
    assert!(e.contains("recontact") && e.contains("rows"), "{e}");
}

#[test]
fn zero_counts_exit_4_with_report_kept() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "3", "0.05");
    let zero = d.path().join("zero.csv");
    rewrite_cohort(&d.path().join("cohort.csv"), &zero, |l| {
        let mut f: Vec<&str> = l.split(',').collect();
        let n = f.len();
        f[n - 3..].copy_from_slice(&["0", "0", "0"]);
        f.join(",")
    });
    let o = bin(&["check", "--in", p(&zero), "--out", p(d.path()), "--horizon", "1y"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("assumption_report.txt")).unwrap();
    assert!(text.contains("fit failed"));
    assert!(d.path().join("assumption_report.json").exists());
}

#[test]
fn mnar_estimates_have_indicator_by_sex_rows() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "4", "0.1");
    let args = ["--seed", "2", "--m", "2", "--cycles", "2", "--ridge", "1e-3", "--strategy", "mi-mnar", "--horizon", "5y"];
    let o = impute(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = fs::read(d.path().join("estimates.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    for ind in ["daily_smoking", "heavy_alcohol"] {
        for sg in ["men", "women", "both"] {
            assert!(text.contains(&format!("{ind},{sg},mi-mnar,")), "{ind} {sg}");
            assert!(text.contains(&format!("{ind},{sg},participants,")), "{ind} {sg}");
        }
    }
    assert!(!text.contains(",mi-mar,"));
    let o = impute(d.path(), &args);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(d.path().join("estimates.csv")).unwrap(), first);
}

#[test]
fn report_needs_upstream_outputs() {
    let d = tempfile::tempdir().unwrap();
    let o = bin(&["report", "--in", p(d.path())]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("impute_manifest.json") && e.contains("assumption_report.json"), "{e}");
}

#[test]
fn check_only_report_marks_prevalence_absent() {
    let d = tempfile::tempdir().unwrap();
    synth(d.path(), "6", "0.1");
    let cohort = d.path().join("cohort.csv");
    let o = bin(&["check", "--in", p(&cohort), "--out", p(d.path()), "--horizon", "5y"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = bin(&["report", "--in", p(d.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("report.txt")).unwrap();
    assert!(text.contains("(section absent: no imputation results)"));
    assert!(text.contains("Assumption checks"));
}

#[test]
fn pipeline_matches_golden_report() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path());
    let got = fs::read_to_string(d.path().join("report.txt")).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report.txt");
    let want = fs::read_to_string(&golden).unwrap_or_default();
    assert!(got == want, "report differs from {}; got:\n{got}", golden.display());
}
