use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Gamma, Poisson};

use crate::data::{
    classify_heavy_alcohol, AgeBand, Background, CivilStatus, CohortRow, CohortTable, Education,
    GroupLabel, HospitalizationCounts, Horizon, Level, Provenance, Questionnaire, Sex, Truth,
    HEAVY_ALCOHOL_MEN, HEAVY_ALCOHOL_WOMEN,
};
use crate::glm::special::logistic;

use super::config::{Feature, LogitModel, SynthConfig};
use super::SynthError;

/// Values drawn so far for one invitee, before any masking.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Latent {
    pub education: Education,
    pub civil: CivilStatus,
    pub hypertension: bool,
    pub high_chol: bool,
    pub bp_recent: bool,
    pub chol_recent: bool,
    pub smoker: bool,
}

impl Default for Latent {
    fn default() -> Self {
        Latent {
            education: Education::Low,
            civil: CivilStatus::Married,
            hypertension: false,
            high_chol: false,
            bp_recent: false,
            chol_recent: false,
            smoker: false,
        }
    }
}

/// A `LogitModel` with its named terms resolved.
pub(crate) struct Compiled<'a> {
    pub name: &'static str,
    model: &'a LogitModel,
    terms: Vec<(Feature, f64)>,
}

impl<'a> Compiled<'a> {
    pub fn new(name: &'static str, model: &'a LogitModel) -> Self {
        let terms = model
            .terms
            .iter()
            .map(|(k, v)| (Feature::parse(k).expect("validated term"), *v))
            .collect();
        Compiled { name, model, terms }
    }

    pub fn eta(&self, bg: &Background, group: Option<GroupLabel>, l: &Latent) -> f64 {
        let mut eta = self.model.background_eta(bg, group);
        for &(f, v) in &self.terms {
            let on = match f {
                Feature::Education(e) => l.education == e,
                Feature::Civil(c) => l.civil == c,
                Feature::Hypertension => l.hypertension,
                Feature::HighChol => l.high_chol,
                Feature::BpRecent => l.bp_recent,
                Feature::CholRecent => l.chol_recent,
                Feature::Smoker => l.smoker,
                Feature::SmokerFemale => l.smoker && bg.sex == Sex::Female,
            };
            if on {
                eta += v;
            }
        }
        eta
    }

    pub fn prob(
        &self,
        bg: &Background,
        group: Option<GroupLabel>,
        l: &Latent,
        id: u64,
    ) -> Result<f64, SynthError> {
        let eta = self.eta(bg, group, l);
        if !eta.is_finite() {
            return Err(SynthError::Probability {
                model: self.name.to_string(),
                id,
            });
        }
        Ok(logistic(eta))
    }
}

pub(crate) struct Models<'a> {
    pub participation: Compiled<'a>,
    pub recontact: Compiled<'a>,
    pub education_low: Compiled<'a>,
    pub education_mid: Compiled<'a>,
    pub civil_married: Compiled<'a>,
    pub civil_cohabiting: Compiled<'a>,
    pub civil_single: Compiled<'a>,
    pub civil_divorced: Compiled<'a>,
    pub hypertension: Compiled<'a>,
    pub high_chol: Compiled<'a>,
    pub bp_recent: Compiled<'a>,
    pub chol_recent: Compiled<'a>,
    pub smoking: Compiled<'a>,
    pub alcohol: Compiled<'a>,
}

impl<'a> Models<'a> {
    pub fn new(c: &'a SynthConfig) -> Self {
        let cov = &c.covariate_models;
        Models {
            participation: Compiled::new("participation_model", &c.participation_model),
            recontact: Compiled::new("recontact_model", &c.recontact_model),
            education_low: Compiled::new("covariate_models.education_low", &cov.education_low),
            education_mid: Compiled::new("covariate_models.education_mid", &cov.education_mid),
            civil_married: Compiled::new("covariate_models.civil_married", &cov.civil_married),
            civil_cohabiting: Compiled::new(
                "covariate_models.civil_cohabiting",
                &cov.civil_cohabiting,
            ),
            civil_single: Compiled::new("covariate_models.civil_single", &cov.civil_single),
            civil_divorced: Compiled::new("covariate_models.civil_divorced", &cov.civil_divorced),
            hypertension: Compiled::new("covariate_models.hypertension", &cov.hypertension),
            high_chol: Compiled::new("covariate_models.high_chol", &cov.high_chol),
            bp_recent: Compiled::new("covariate_models.bp_recent", &cov.bp_recent),
            chol_recent: Compiled::new("covariate_models.chol_recent", &cov.chol_recent),
            smoking: Compiled::new("smoking_model", &c.smoking_model),
            alcohol: Compiled::new("alcohol_model", &c.alcohol_model),
        }
    }
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn threshold(sex: Sex) -> f64 {
    match sex {
        Sex::Female => HEAVY_ALCOHOL_WOMEN,
        Sex::Male => HEAVY_ALCOHOL_MEN,
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Draws a full cohort. Generation order per invitee: background, group,
/// covariates, smoking, alcohol, masking; hospitalization counts follow in
/// a second pass so that rate targets can be met on the realized cohort.
pub fn generate_cohort(config: &SynthConfig) -> Result<CohortTable, SynthError> {
    config.validate()?;
    let seed = config.seed.ok_or(SynthError::MissingSeed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Models::new(config);
    let n = config.n_invitees;
    let mut rows = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let mut id = 0u64;
    for stratum in &config.strata {
        let lower = stratum.age_band.lower();
        for _ in 0..stratum.n {
            id += 1;
            let bg = Background {
                sex: stratum.sex,
                age: rng.random_range(lower..=lower + 9),
                region: stratum.region,
            };
            let blank = Latent::default();
            let group = if bernoulli(&mut rng, m.participation.prob(&bg, None, &blank, id)?) {
                GroupLabel::Participant
            } else if bernoulli(&mut rng, m.recontact.prob(&bg, None, &blank, id)?) {
                GroupLabel::RecontactRespondent
            } else {
                GroupLabel::NonParticipant
            };
            let (latent, heavy) = draw_latent(&m, &bg, group, id, &mut rng)?;
            let portions = draw_portions(config, bg.sex, heavy, &mut rng);
            debug_assert_eq!(classify_heavy_alcohol(bg.sex, portions).ok(), Some(heavy));
            let full = Questionnaire {
                daily_smoker: Some(latent.smoker),
                alcohol_portions: Some(portions),
                heavy_alcohol: Some(heavy),
                education: Some(latent.education),
                civil_status: Some(latent.civil),
                hypertension: Some(latent.hypertension),
                high_chol: Some(latent.high_chol),
                bp_recent: Some(latent.bp_recent),
                chol_recent: Some(latent.chol_recent),
            };
            let observed = mask(&full, group, config.item_missing_rate, &mut rng);
            truth.push(full);
            rows.push(CohortRow {
                id,
                background: bg,
                group,
                questionnaire: observed,
                hosp: HospitalizationCounts::default(),
            });
        }
    }
    draw_hospitalizations(config, &mut rows, &mut rng)?;
    let table = CohortTable::new(
        rows,
        Provenance::Synthetic {
            seed,
            config_hash: config.hash(),
        },
    )?;
    Ok(table.with_truth(Truth { rows: truth })?)
}

fn draw_latent(
    m: &Models<'_>,
    bg: &Background,
    group: GroupLabel,
    id: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(Latent, bool), SynthError> {
    let g = Some(group);
    let mut l = Latent::default();
    l.education = if bernoulli(rng, m.education_low.prob(bg, g, &l, id)?) {
        Education::Low
    } else if bernoulli(rng, m.education_mid.prob(bg, g, &l, id)?) {
        Education::Mid
    } else {
        Education::High
    };
    l.civil = if bernoulli(rng, m.civil_married.prob(bg, g, &l, id)?) {
        CivilStatus::Married
    } else if bernoulli(rng, m.civil_cohabiting.prob(bg, g, &l, id)?) {
        CivilStatus::Cohabiting
    } else if bernoulli(rng, m.civil_single.prob(bg, g, &l, id)?) {
        CivilStatus::Single
    } else if bernoulli(rng, m.civil_divorced.prob(bg, g, &l, id)?) {
        CivilStatus::Divorced
    } else {
        CivilStatus::Widow
    };
    l.hypertension = bernoulli(rng, m.hypertension.prob(bg, g, &l, id)?);
    l.high_chol = bernoulli(rng, m.high_chol.prob(bg, g, &l, id)?);
    l.bp_recent = bernoulli(rng, m.bp_recent.prob(bg, g, &l, id)?);
    l.chol_recent = bernoulli(rng, m.chol_recent.prob(bg, g, &l, id)?);
    l.smoker = bernoulli(rng, m.smoking.prob(bg, g, &l, id)?);
    let heavy = bernoulli(rng, m.alcohol.prob(bg, g, &l, id)?);
    Ok((l, heavy))
}

fn draw_portions(config: &SynthConfig, sex: Sex, heavy: bool, rng: &mut ChaCha8Rng) -> f64 {
    let t = threshold(sex);
    let a = &config.alcohol_amounts;
    if heavy {
        let excess = Exp::new(1.0 / a.heavy_excess_mean)
            .expect("positive mean")
            .sample(rng);
        // keep strictly above the threshold after rounding
        round1(t + 0.1 + excess).max(t + 0.1)
    } else if bernoulli(rng, a.zero_share) {
        0.0
    } else {
        round1(rng.random_range(0.0..t)).clamp(0.0, t)
    }
}

fn mask(full: &Questionnaire, group: GroupLabel, rate: f64, rng: &mut ChaCha8Rng) -> Questionnaire {
    match group {
        GroupLabel::NonParticipant => Questionnaire::default(),
        GroupLabel::RecontactRespondent => full.clone(),
        GroupLabel::Participant => {
            if rate == 0.0 {
                return full.clone();
            }
            let mut q = full.clone();
            // one draw per field, in a fixed order
            if bernoulli(rng, rate) {
                q.daily_smoker = None;
            }
            if bernoulli(rng, rate) {
                q.alcohol_portions = None;
                q.heavy_alcohol = None;
            }
            if bernoulli(rng, rate) {
                q.education = None;
            }
            if bernoulli(rng, rate) {
                q.civil_status = None;
            }
            if bernoulli(rng, rate) {
                q.hypertension = None;
            }
            if bernoulli(rng, rate) {
                q.high_chol = None;
            }
            if bernoulli(rng, rate) {
                q.bp_recent = None;
            }
            if bernoulli(rng, rate) {
                q.chol_recent = None;
            }
            q
        }
    }
}

/// Log-scale count-intercept shifts per horizon (full, 5y, 1y) that make
/// the cohort-average expected count hit the configured targets; zeros when
/// no targets are set.
pub fn hosp_count_shifts(config: &SynthConfig, rows: &[CohortRow]) -> [f64; 3] {
    let Some(targets) = config.hosp_model.mean_targets else {
        return [0.0; 3];
    };
    let mut shifts = [0.0; 3];
    for h in Horizon::ALL {
        let hz = config.hosp_model.horizon(*h);
        let mean = rows
            .iter()
            .map(|r| hz.expected(&r.background, r.group, 0.0))
            .sum::<f64>()
            / rows.len() as f64;
        shifts[h.index()] = (targets[h.index()] / 1000.0 / mean).ln();
    }
    shifts
}

fn nb_draw(rng: &mut ChaCha8Rng, mu: f64, theta: f64) -> u32 {
    if mu <= 0.0 {
        return 0;
    }
    let lambda = Gamma::new(theta, mu / theta)
        .expect("positive shape and scale")
        .sample(rng);
    if lambda <= 0.0 {
        0
    } else {
        let v = Poisson::new(lambda).expect("positive rate").sample(rng);
        v.min(f64::from(u32::MAX / 4)) as u32
    }
}

fn thin(rng: &mut ChaCha8Rng, n: u32, p: f64) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(u64::from(n), p).expect("valid binomial").sample(rng) as u32
}

fn draw_hospitalizations(
    config: &SynthConfig,
    rows: &mut [CohortRow],
    rng: &mut ChaCha8Rng,
) -> Result<(), SynthError> {
    let hm = &config.hosp_model;
    let shifts = hosp_count_shifts(config, rows);
    let anchor = hm.anchor;
    for row in rows.iter_mut() {
        let bg = row.background;
        let g = row.group;
        let expected: Vec<f64> = Horizon::ALL
            .iter()
            .map(|h| hm.horizon(*h).expected(&bg, g, shifts[h.index()]))
            .collect();
        if expected.iter().any(|e| !e.is_finite()) {
            return Err(SynthError::Probability {
                model: "hosp_model".into(),
                id: row.id,
            });
        }
        let mut counts = [0u32; 3];
        let a = anchor.index();
        let hz = hm.horizon(anchor);
        let pi = logistic(hz.zero_eta(&bg, g));
        let mu = (hz.count_eta(&bg, g) + shifts[a]).exp();
        counts[a] = if bernoulli(rng, pi) {
            0
        } else {
            nb_draw(rng, mu, hz.theta)
        };
        // shorter horizons: thin the next longer one
        for i in a + 1..3 {
            let p = (expected[i] / expected[i - 1]).min(1.0);
            counts[i] = thin(rng, counts[i - 1], p);
        }
        // longer horizons: add an independent increment
        for i in (0..a).rev() {
            let extra = (expected[i] - expected[i + 1]).max(0.0);
            let theta = hm.horizon(Horizon::ALL[i]).theta;
            counts[i] = counts[i + 1].saturating_add(nb_draw(rng, extra, theta));
        }
        row.hosp = HospitalizationCounts {
            full_history: counts[0],
            five_year: counts[1],
            one_year: counts[2],
        };
    }
    Ok(())
}

/// Representative background of a stratum; logit models only see the band.
pub(crate) fn band_background(sex: Sex, band: AgeBand, region: crate::data::Region) -> Background {
    Background {
        sex,
        age: band.lower(),
        region,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_cohort, Indicator};
    use crate::synth::{make_assumption3_config, EffectSizes, REFERENCE_GROUP_SIZES};

    fn small(seed: u64) -> SynthConfig {
        SynthConfig::calibrated_default().with_seed(seed).scaled(0.2).unwrap()
    }

    #[test]
    fn missing_seed_is_an_error() {
        assert!(matches!(
            generate_cohort(&SynthConfig::calibrated_default()),
            Err(SynthError::MissingSeed)
        ));
    }

    #[test]
    fn group_proportions_match_reference() {
        let t = generate_cohort(&SynthConfig::calibrated_default().with_seed(1)).unwrap();
        let counts = t.group_counts();
        for (c, r) in counts.iter().zip(REFERENCE_GROUP_SIZES) {
            let diff = (*c as f64 - r as f64) / 10_000.0;
            assert!(diff.abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn certain_participation_leaves_no_other_groups() {
        let mut c = small(3);
        c.participation_model = LogitModel::intercept(40.0);
        let t = generate_cohort(&c).unwrap();
        assert_eq!(t.group_counts(), [t.len(), 0, 0]);
    }

    #[test]
    fn rows_are_nested_and_masked_by_group() {
        let t = generate_cohort(&small(4)).unwrap();
        let truth = t.truth().unwrap();
        for (row, full) in t.rows().iter().zip(&truth.rows) {
            assert!(row.hosp.is_nested());
            match row.group {
                GroupLabel::NonParticipant => assert!(row.questionnaire.is_empty()),
                GroupLabel::RecontactRespondent => assert_eq!(&row.questionnaire, full),
                GroupLabel::Participant => {}
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_cohort(&small(5)).unwrap();
        let b = generate_cohort(&small(5)).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_cohort(&a, &mut x).unwrap();
        write_cohort(&b, &mut y).unwrap();
        assert_eq!(x, y);
        let c = generate_cohort(&small(6)).unwrap();
        let mut z = Vec::new();
        write_cohort(&c, &mut z).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn infinite_coefficient_names_the_model() {
        let mut c = small(1);
        c.smoking_model.intercept = f64::INFINITY;
        // validation catches it first
        assert!(matches!(generate_cohort(&c), Err(SynthError::Config { .. })));
        let m = Models::new(&c);
        let bg = band_background(Sex::Male, AgeBand::Age25To34, crate::data::Region::Oulu);
        match m.smoking.prob(&bg, None, &Latent::default(), 9) {
            Err(SynthError::Probability { model, id }) => {
                assert_eq!(model, "smoking_model");
                assert_eq!(id, 9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mean_targets_are_met_in_expectation() {
        let mut c = SynthConfig::rate_calibrated().with_seed(8);
        c.hosp_model.anchor = Horizon::FiveYear;
        let t = generate_cohort(&c).unwrap();
        let shifts = hosp_count_shifts(&c, t.rows());
        for h in Horizon::ALL {
            let hz = c.hosp_model.horizon(*h);
            let mean: f64 = t
                .rows()
                .iter()
                .map(|r| hz.expected(&r.background, r.group, shifts[h.index()]))
                .sum::<f64>()
                / t.len() as f64;
            let target = super::super::REFERENCE_PER_1000[h.index()] / 1000.0;
            assert!((mean - target).abs() < 1e-9 * target);
        }
        // the anchor horizon is drawn from its own model, so its empirical
        // mean should sit near the target
        let obs = t.rows().iter().map(|r| f64::from(r.hosp.five_year)).sum::<f64>() / t.len() as f64;
        assert!((obs - 0.813).abs() < 0.1, "{obs}");
    }

    #[test]
    fn null_effects_equalize_groups() {
        let mut c = make_assumption3_config(EffectSizes::null()).with_seed(10).with_n(100_000);
        c.item_missing_rate = 0.0;
        let t = generate_cohort(&c).unwrap();
        let truth = t.truth().unwrap();
        let prev = |g: GroupLabel| {
            let (mut k, mut n) = (0usize, 0usize);
            for (row, q) in t.rows().iter().zip(&truth.rows) {
                if row.group == g {
                    n += 1;
                    k += usize::from(q.indicator(Indicator::DailySmoking).unwrap());
                }
            }
            (k as f64 / n as f64, n)
        };
        let (pp, np) = prev(GroupLabel::Participant);
        let (pn, nn) = prev(GroupLabel::NonParticipant);
        let se = (pp * (1.0 - pp) / np as f64 + pn * (1.0 - pn) / nn as f64).sqrt();
        assert!((pp - pn).abs() < 4.0 * se, "{pp} {pn}");
    }
}
