use super::*;
use crate::data::{HospitalizationCounts, Provenance};
use crate::synth::{generate_cohort, SynthConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cohort(seed: u64, n: usize) -> CohortTable {
    generate_cohort(&SynthConfig::calibrated_default().with_seed(seed).with_n(n)).unwrap()
}

fn with_counts(t: &CohortTable, f: impl Fn(usize) -> HospitalizationCounts) -> CohortTable {
    let rows = t
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut r = r.clone();
            r.hosp = f(i);
            r
        })
        .collect();
    CohortTable::new(rows, Provenance::Synthetic { seed: 0, config_hash: "t".into() }).unwrap()
}

fn constant(c: u32) -> HospitalizationCounts {
    HospitalizationCounts {
        full_history: c,
        five_year: c,
        one_year: c,
    }
}

#[test]
fn verdicts_survive_a_json_round_trip() {
    let report = evaluate_assumptions_for(&cohort(1, 3000), &[Horizon::FiveYear]);
    let back: AssumptionReport = serde_json::from_str(&report.to_json()).unwrap();
    let c = back.horizon(Horizon::FiveYear).unwrap();
    let (a2, a3) = c.rederive().unwrap();
    assert_eq!(Some(a2), c.assumption2_supported);
    assert_eq!(Some(a3), c.assumption3_supported);
    assert_eq!(back, report);
}

#[test]
fn zero_counts_give_zero_per_1000() {
    let t = with_counts(&cohort(2, 600), |_| constant(0));
    let e = observed_per_1000(&t, Horizon::Full, None, &Subgroup::all()).unwrap();
    assert_eq!((e.value, e.low, e.high), (0.0, 0.0, 0.0));
    // the model cannot be fitted, and the report says so instead of failing
    let r = evaluate_assumptions_for(&t, &[Horizon::OneYear]);
    assert_eq!(r.failures().len(), 1);
    assert!(r.render_text().contains("fit failed"));
}

#[test]
fn constant_two_gives_2000_with_no_width() {
    let base = cohort(3, 800);
    let t = CohortTable::new(base.rows()[..500].to_vec(), base.provenance().clone()).unwrap();
    let t = with_counts(&t, |_| constant(2));
    let e = observed_per_1000(&t, Horizon::OneYear, None, &Subgroup::all()).unwrap();
    assert_eq!(e.value, 2000.0);
    assert_eq!(e.high - e.low, 0.0);
}

#[test]
fn group_rates_average_to_the_full_cohort() {
    let t = cohort(4, 2000);
    let counts = t.group_counts();
    for h in Horizon::ALL.iter().copied() {
        let all = observed_per_1000(&t, h, None, &Subgroup::all()).unwrap().value;
        let weighted: f64 = GroupLabel::ALL
            .iter()
            .zip(counts)
            .map(|(g, n)| observed_per_1000(&t, h, Some(*g), &Subgroup::all()).unwrap().value * n as f64)
            .sum::<f64>()
            / t.len() as f64;
        assert!((all - weighted).abs() < 1e-9);
    }
}

#[test]
fn small_cohorts_are_flagged() {
    let r = evaluate_assumptions_for(&cohort(5, 400), &[Horizon::Full]);
    assert!(r.small_sample);
    assert!(r.render_text().contains("warning: small sample"));
    let r = evaluate_assumptions_for(&cohort(5, 1000), &[]);
    assert!(!r.small_sample);
}

#[test]
fn text_report_has_both_blocks_and_the_legend() {
    let r = evaluate_assumptions_for(&cohort(6, 3000), &[Horizon::FiveYear]);
    let text = r.render_text();
    let count = text.find("count model").unwrap();
    let zero = text.find("zero model").unwrap();
    assert!(count < zero);
    assert!(text.contains("assumption (2): "));
    assert!(text.contains(ASSUMPTION_LEGEND.lines().next().unwrap()));
    assert!(text.contains("full cohort"));
}

#[test]
fn shuffled_counts_support_both_assumptions() {
    let base = cohort(7, 2000);
    let mut supported = 0;
    let reps = 40;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(rep);
        let mut perm: Vec<usize> = (0..base.len()).collect();
        perm.shuffle(&mut rng);
        let t = with_counts(&base, |i| base.rows()[perm[i]].hosp);
        let fit = fit_hospitalization_model(&t, Horizon::FiveYear).unwrap();
        if verdicts(&fit) == Some((true, true)) {
            supported += 1;
        }
    }
    // both hold jointly with probability about 0.9 per replication
    assert!(supported >= 30, "{supported}/{reps}");
}
