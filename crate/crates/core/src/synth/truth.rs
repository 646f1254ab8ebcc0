use crate::data::{
    CivilStatus, CohortTable, Education, GroupLabel, Indicator, Level, Subgroup,
};

use super::config::{EffectSizes, SynthConfig};
use super::generate::{band_background, Latent, Models};
use super::{make_assumption3_config, SynthError};

/// Prevalence over the unmasked values of a synthetic cohort.
pub fn truth_prevalence(
    table: &CohortTable,
    indicator: Indicator,
    subgroup: &Subgroup,
) -> Result<f64, SynthError> {
    let truth = table
        .truth()
        .ok_or_else(|| SynthError::UnavailableTruth("cohort carries no truth".into()))?;
    let (mut k, mut n) = (0usize, 0usize);
    for (row, q) in table.rows().iter().zip(&truth.rows) {
        if subgroup.matches(row) {
            n += 1;
            let v = q.indicator(indicator).ok_or_else(|| {
                SynthError::UnavailableTruth(format!("truth row {} lacks {indicator}", row.id))
            })?;
            k += usize::from(v);
        }
    }
    if n == 0 {
        return Err(SynthError::UnavailableTruth(format!(
            "subgroup `{}` has no rows",
            subgroup.label()
        )));
    }
    Ok(k as f64 / n as f64)
}

/// Expected prevalence over the configured strata, integrating every
/// generation step exactly. Rows are weighted by stratum size and group
/// probability.
pub fn population_prevalence(
    config: &SynthConfig,
    indicator: Indicator,
    subgroup: &Subgroup,
) -> Result<f64, SynthError> {
    config.validate()?;
    let m = Models::new(config);
    let (mut num, mut den) = (0.0, 0.0);
    for s in &config.strata {
        if s.n == 0
            || subgroup.sex.is_some_and(|x| x != s.sex)
            || subgroup.age_band.is_some_and(|b| b != s.age_band)
        {
            continue;
        }
        let bg = band_background(s.sex, s.age_band, s.region);
        let blank = Latent::default();
        let p = m.participation.prob(&bg, None, &blank, 0)?;
        let q = m.recontact.prob(&bg, None, &blank, 0)?;
        for (g, wg) in [
            (GroupLabel::Participant, p),
            (GroupLabel::RecontactRespondent, (1.0 - p) * q),
            (GroupLabel::NonParticipant, (1.0 - p) * (1.0 - q)),
        ] {
            if subgroup.group.is_some_and(|x| x != g) || wg == 0.0 {
                continue;
            }
            let w = s.n as f64 * wg;
            num += w * conditional_prevalence(&m, &bg, g, indicator)?;
            den += w;
        }
    }
    if den == 0.0 {
        return Err(SynthError::UnavailableTruth(format!(
            "subgroup `{}` has no mass",
            subgroup.label()
        )));
    }
    Ok(num / den)
}

fn bern(p: f64, on: bool) -> f64 {
    if on {
        p
    } else {
        1.0 - p
    }
}

fn conditional_prevalence(
    m: &Models<'_>,
    bg: &crate::data::Background,
    g: GroupLabel,
    indicator: Indicator,
) -> Result<f64, SynthError> {
    let grp = Some(g);
    let mut total = 0.0;
    let mut l = Latent::default();
    let p_low = m.education_low.prob(bg, grp, &l, 0)?;
    let p_mid = m.education_mid.prob(bg, grp, &l, 0)?;
    for &edu in Education::ALL {
        let w_edu = match edu {
            Education::Low => p_low,
            Education::Mid => (1.0 - p_low) * p_mid,
            Education::High => (1.0 - p_low) * (1.0 - p_mid),
        };
        l.education = edu;
        let pm = m.civil_married.prob(bg, grp, &l, 0)?;
        let pc = m.civil_cohabiting.prob(bg, grp, &l, 0)?;
        let ps = m.civil_single.prob(bg, grp, &l, 0)?;
        let pd = m.civil_divorced.prob(bg, grp, &l, 0)?;
        for &civ in CivilStatus::ALL {
            let w_civ = match civ {
                CivilStatus::Married => pm,
                CivilStatus::Cohabiting => (1.0 - pm) * pc,
                CivilStatus::Single => (1.0 - pm) * (1.0 - pc) * ps,
                CivilStatus::Divorced => (1.0 - pm) * (1.0 - pc) * (1.0 - ps) * pd,
                CivilStatus::Widow => (1.0 - pm) * (1.0 - pc) * (1.0 - ps) * (1.0 - pd),
            };
            l.civil = civ;
            for bits in 0u8..16 {
                l.hypertension = bits & 1 != 0;
                l.high_chol = bits & 2 != 0;
                l.bp_recent = bits & 4 != 0;
                l.chol_recent = bits & 8 != 0;
                // each flag's model only sees earlier flags, so staged
                // evaluation on the full combination is exact
                let mut w = w_edu * w_civ;
                w *= bern(m.hypertension.prob(bg, grp, &l, 0)?, l.hypertension);
                w *= bern(m.high_chol.prob(bg, grp, &l, 0)?, l.high_chol);
                w *= bern(m.bp_recent.prob(bg, grp, &l, 0)?, l.bp_recent);
                w *= bern(m.chol_recent.prob(bg, grp, &l, 0)?, l.chol_recent);
                if w == 0.0 {
                    continue;
                }
                l.smoker = false;
                let ps = m.smoking.prob(bg, grp, &l, 0)?;
                match indicator {
                    Indicator::DailySmoking => total += w * ps,
                    Indicator::HeavyAlcohol => {
                        let a0 = m.alcohol.prob(bg, grp, &l, 0)?;
                        l.smoker = true;
                        let a1 = m.alcohol.prob(bg, grp, &l, 0)?;
                        total += w * (ps * a1 + (1.0 - ps) * a0);
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Smoking log-odds shift under which the expected daily-smoking prevalence
/// of non-participants exceeds that of participants by `gap_points`
/// percentage points, other effects held at `base`.
pub fn smoking_shift_for_gap(base: EffectSizes, gap_points: f64) -> Result<f64, SynthError> {
    let gap = |shift: f64| -> Result<f64, SynthError> {
        let c = make_assumption3_config(EffectSizes {
            smoking_shift: shift,
            ..base
        });
        let n = population_prevalence(
            &c,
            Indicator::DailySmoking,
            &Subgroup::group(GroupLabel::NonParticipant),
        )?;
        let p = population_prevalence(
            &c,
            Indicator::DailySmoking,
            &Subgroup::group(GroupLabel::Participant),
        )?;
        Ok(100.0 * (n - p))
    };
    let (mut lo, mut hi) = (-5.0, 5.0);
    if gap(lo)? > gap_points || gap(hi)? < gap_points {
        return Err(SynthError::Config {
            field: "smoking_shift".into(),
            message: format!("gap of {gap_points} points is out of reach"),
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < gap_points {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Provenance, Sex};
    use crate::synth::{generate_cohort, LogitModel};

    #[test]
    fn all_smokers_give_one() {
        let mut c = SynthConfig::calibrated_default().with_seed(2).scaled(0.1).unwrap();
        c.smoking_model = LogitModel::intercept(40.0);
        let t = generate_cohort(&c).unwrap();
        assert_eq!(
            truth_prevalence(&t, Indicator::DailySmoking, &Subgroup::all()).unwrap(),
            1.0
        );
        let exact = population_prevalence(&c, Indicator::DailySmoking, &Subgroup::all()).unwrap();
        assert!((exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_truth_for_men() {
        let t = generate_cohort(&SynthConfig::calibrated_default().with_seed(1)).unwrap();
        let v = truth_prevalence(&t, Indicator::DailySmoking, &Subgroup::sex(Sex::Male)).unwrap();
        // pinned at first generation
        assert_eq!(format!("{v:.6}"), GOLDEN_MEN_SMOKING);
    }

    const GOLDEN_MEN_SMOKING: &str = "0.262146";

    #[test]
    fn empty_subgroup_and_ingested_data_are_errors() {
        let mut c = SynthConfig::calibrated_default().with_seed(3).scaled(0.1).unwrap();
        c.participation_model = LogitModel::intercept(40.0);
        let t = generate_cohort(&c).unwrap();
        assert!(matches!(
            truth_prevalence(&t, Indicator::DailySmoking, &Subgroup::group(GroupLabel::NonParticipant)),
            Err(SynthError::UnavailableTruth(_))
        ));
        let plain = CohortTable::new(
            t.rows().to_vec(),
            Provenance::Ingested {
                path: "x.csv".into(),
            },
        )
        .unwrap();
        assert!(matches!(
            truth_prevalence(&plain, Indicator::DailySmoking, &Subgroup::all()),
            Err(SynthError::UnavailableTruth(_))
        ));
    }

    #[test]
    fn exact_prevalence_matches_large_cohort() {
        let c = SynthConfig::calibrated_default().with_seed(11).with_n(100_000);
        let t = generate_cohort(&c).unwrap();
        for ind in Indicator::ALL {
            for sg in [
                Subgroup::sex(Sex::Male),
                Subgroup::sex(Sex::Female).with_group(GroupLabel::NonParticipant),
            ] {
                let exact = population_prevalence(&c, *ind, &sg).unwrap();
                let emp = truth_prevalence(&t, *ind, &sg).unwrap();
                let n = t.rows().iter().filter(|r| sg.matches(r)).count() as f64;
                let se = (exact * (1.0 - exact) / n).sqrt();
                assert!((emp - exact).abs() < 4.0 * se, "{ind} {}: {emp} vs {exact}", sg.label());
            }
        }
    }

    #[test]
    fn positive_shift_raises_nonparticipant_smoking() {
        let c = make_assumption3_config(EffectSizes {
            smoking_shift: 0.5,
            ..EffectSizes::null()
        });
        let n = population_prevalence(&c, Indicator::DailySmoking, &Subgroup::group(GroupLabel::NonParticipant)).unwrap();
        let p = population_prevalence(&c, Indicator::DailySmoking, &Subgroup::group(GroupLabel::Participant)).unwrap();
        assert!(n > p);
    }

    #[test]
    fn default_effects_put_recontact_smoking_above_participants() {
        let c = SynthConfig::calibrated_default();
        for sex in Sex::ALL {
            let r = population_prevalence(&c, Indicator::DailySmoking, &Subgroup::sex(*sex).with_group(GroupLabel::RecontactRespondent)).unwrap();
            let p = population_prevalence(&c, Indicator::DailySmoking, &Subgroup::sex(*sex).with_group(GroupLabel::Participant)).unwrap();
            assert!(r > p, "{sex}: {r} vs {p}");
        }
    }

    #[test]
    fn shift_for_gap_hits_the_gap() {
        let s = smoking_shift_for_gap(EffectSizes::default(), 5.0).unwrap();
        let c = make_assumption3_config(EffectSizes {
            smoking_shift: s,
            ..EffectSizes::default()
        });
        let n = population_prevalence(&c, Indicator::DailySmoking, &Subgroup::group(GroupLabel::NonParticipant)).unwrap();
        let p = population_prevalence(&c, Indicator::DailySmoking, &Subgroup::group(GroupLabel::Participant)).unwrap();
        assert!((100.0 * (n - p) - 5.0).abs() < 1e-6);
    }
}
