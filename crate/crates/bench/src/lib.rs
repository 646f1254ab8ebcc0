//! Fixtures shared by the benchmarks.

use recontact_core::check::hospitalization_designs;
use recontact_core::data::{CohortTable, Horizon};
use recontact_core::glm::DesignMatrix;
use recontact_core::synth::{generate_cohort, SynthConfig};

pub fn cohort(n: usize, seed: u64) -> CohortTable {
    generate_cohort(&SynthConfig::calibrated_default().with_seed(seed).with_n(n)).expect("default config generates")
}

/// Count design, zero design and full-history counts of a synthetic cohort.
pub fn hospitalization_fixture(n: usize, seed: u64) -> (DesignMatrix, DesignMatrix, Vec<u32>) {
    let t = cohort(n, seed);
    let (x, z) = hospitalization_designs(t.rows()).expect("designs build");
    let y = t.rows().iter().map(|r| r.hosp.get(Horizon::Full)).collect();
    (x, z, y)
}

/// Count design with a binary response: any hospitalization in five years.
pub fn logistic_fixture(n: usize, seed: u64) -> (DesignMatrix, Vec<bool>) {
    let t = cohort(n, seed);
    let (x, _) = hospitalization_designs(t.rows()).expect("designs build");
    let y = t.rows().iter().map(|r| r.hosp.get(Horizon::FiveYear) > 0).collect();
    (x, y)
}
