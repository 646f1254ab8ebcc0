use super::{DataError, GroupLabel, Sex};

/// Weekly portions (12 g of pure alcohol each) above which a woman is a heavy user.
pub const HEAVY_ALCOHOL_WOMEN: f64 = 16.0;
/// Weekly portions above which a man is a heavy user.
pub const HEAVY_ALCOHOL_MEN: f64 = 24.0;

/// Assigns the response group. Re-contact letters only go to invitees who
/// skipped the examination, so both flags set at once is an invalid record.
pub fn classify_group(
    id: u64,
    completed_exam: bool,
    returned_recontact_questionnaire: bool,
) -> Result<GroupLabel, DataError> {
    match (completed_exam, returned_recontact_questionnaire) {
        (true, true) => Err(DataError::InvalidRecord {
            id,
            message: "examined invitee cannot also be a re-contact respondent".to_string(),
        }),
        (true, false) => Ok(GroupLabel::Participant),
        (false, true) => Ok(GroupLabel::RecontactRespondent),
        (false, false) => Ok(GroupLabel::NonParticipant),
    }
}

/// Heavy use is strictly more than the sex-specific weekly threshold.
pub fn classify_heavy_alcohol(sex: Sex, portions_per_week: f64) -> Result<bool, DataError> {
    if portions_per_week.is_nan() || portions_per_week < 0.0 {
        return Err(DataError::Domain(format!(
            "alcohol portions must be nonnegative, got {portions_per_week}"
        )));
    }
    let threshold = match sex {
        Sex::Female => HEAVY_ALCOHOL_WOMEN,
        Sex::Male => HEAVY_ALCOHOL_MEN,
    };
    Ok(portions_per_week > threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn group_truth_table() {
        assert_eq!(classify_group(1, true, false).unwrap(), GroupLabel::Participant);
        assert_eq!(
            classify_group(1, false, true).unwrap(),
            GroupLabel::RecontactRespondent
        );
        assert_eq!(classify_group(1, false, false).unwrap(), GroupLabel::NonParticipant);
        let err = classify_group(42, true, true).unwrap_err().to_string();
        assert!(err.contains("42"), "{err}");
    }

    #[test]
    fn heavy_alcohol_thresholds() {
        assert!(classify_heavy_alcohol(Sex::Female, 17.0).unwrap());
        assert!(!classify_heavy_alcohol(Sex::Female, 16.0).unwrap());
        assert!(!classify_heavy_alcohol(Sex::Male, 24.0).unwrap());
        assert!(classify_heavy_alcohol(Sex::Male, 24.5).unwrap());
        assert!(!classify_heavy_alcohol(Sex::Male, 0.0).unwrap());
        assert!(classify_heavy_alcohol(Sex::Male, -0.1).is_err());
        assert!(classify_heavy_alcohol(Sex::Female, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn heavy_alcohol_is_monotone(a in 0.0f64..200.0, b in 0.0f64..200.0, female in any::<bool>()) {
            let sex = if female { Sex::Female } else { Sex::Male };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let lo_heavy = classify_heavy_alcohol(sex, lo).unwrap();
            let hi_heavy = classify_heavy_alcohol(sex, hi).unwrap();
            prop_assert!(!lo_heavy || hi_heavy);
        }
    }
}
