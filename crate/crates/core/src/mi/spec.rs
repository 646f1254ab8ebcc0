use serde::{Deserialize, Serialize};

use crate::data::{AgeBand, CivilStatus, Education, Level, Questionnaire, Region};

use super::MiError;

/// Questionnaire variable handled by the imputation engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    Education,
    CivilStatus,
    Hypertension,
    HighChol,
    BpRecent,
    CholRecent,
    DailySmoker,
    HeavyAlcohol,
}

impl Variable {
    pub const ALL: [Variable; 8] = [
        Variable::Education,
        Variable::CivilStatus,
        Variable::Hypertension,
        Variable::HighChol,
        Variable::BpRecent,
        Variable::CholRecent,
        Variable::DailySmoker,
        Variable::HeavyAlcohol,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Education => "education",
            Variable::CivilStatus => "civil_status",
            Variable::Hypertension => "hypertension",
            Variable::HighChol => "high_chol",
            Variable::BpRecent => "bp_recent",
            Variable::CholRecent => "chol_recent",
            Variable::DailySmoker => "daily_smoker",
            Variable::HeavyAlcohol => "heavy_alcohol",
        }
    }

    pub fn n_levels(self) -> usize {
        match self {
            Variable::Education => Education::ALL.len(),
            Variable::CivilStatus => CivilStatus::ALL.len(),
            _ => 2,
        }
    }

    /// Name of each non-reference level, as used in design column names.
    pub fn level_names(self) -> Vec<String> {
        match self {
            Variable::Education => Education::ALL[1..]
                .iter()
                .map(|l| format!("education:{}", l.name()))
                .collect(),
            Variable::CivilStatus => CivilStatus::ALL[1..]
                .iter()
                .map(|l| format!("civil:{}", l.name()))
                .collect(),
            v => vec![v.name().to_string()],
        }
    }

    /// Level code: category index, or 0/1 for binary fields.
    pub fn get(self, q: &Questionnaire) -> Option<u8> {
        let b = |v: Option<bool>| v.map(u8::from);
        match self {
            Variable::Education => q.education.map(|e| e.index() as u8),
            Variable::CivilStatus => q.civil_status.map(|c| c.index() as u8),
            Variable::Hypertension => b(q.hypertension),
            Variable::HighChol => b(q.high_chol),
            Variable::BpRecent => b(q.bp_recent),
            Variable::CholRecent => b(q.chol_recent),
            Variable::DailySmoker => b(q.daily_smoker),
            Variable::HeavyAlcohol => b(q.heavy_alcohol),
        }
    }

    pub fn set(self, q: &mut Questionnaire, code: u8) {
        let b = code != 0;
        match self {
            Variable::Education => q.education = Education::from_index(usize::from(code)),
            Variable::CivilStatus => q.civil_status = CivilStatus::from_index(usize::from(code)),
            Variable::Hypertension => q.hypertension = Some(b),
            Variable::HighChol => q.high_chol = Some(b),
            Variable::BpRecent => q.bp_recent = Some(b),
            Variable::CholRecent => q.chol_recent = Some(b),
            Variable::DailySmoker => q.daily_smoker = Some(b),
            Variable::HeavyAlcohol => q.heavy_alcohol = Some(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Covariate {
    Sex,
    /// Ten-year band dummies.
    Age,
    Region,
    Var(Variable),
}

impl Covariate {
    pub fn column_names(self) -> Vec<String> {
        match self {
            Covariate::Sex => vec!["female".into()],
            Covariate::Age => AgeBand::ALL[1..]
                .iter()
                .map(|b| format!("age:{}", b.name()))
                .collect(),
            Covariate::Region => Region::ALL[1..]
                .iter()
                .map(|r| format!("region:{}", r.name()))
                .collect(),
            Covariate::Var(v) => v.level_names(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariableFamily {
    Logistic,
    /// A sequence of binary fits: level j against all later levels, among
    /// rows at level j or later.
    NestedLogistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub target: Variable,
    pub covariates: Vec<Covariate>,
    pub family: VariableFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModelSpec {
    pub targets: Vec<TargetSpec>,
    pub cycles: usize,
    pub m: usize,
    /// Per-observation ridge weight for every fit. When unset, fits are
    /// plain maximum likelihood, small fitting sets are an error and a fit
    /// that separates is retried with `FALLBACK_RIDGE`.
    #[serde(default)]
    pub ridge: Option<f64>,
}

pub const FALLBACK_RIDGE: f64 = 1e-3;

impl Default for ImputationModelSpec {
    /// Every variable imputed from background and all other variables,
    /// 20 imputations of 20 cycles.
    fn default() -> Self {
        let targets = Variable::ALL
            .iter()
            .map(|&t| {
                let mut covariates = vec![Covariate::Sex, Covariate::Age, Covariate::Region];
                covariates.extend(Variable::ALL.iter().filter(|&&v| v != t).map(|&v| Covariate::Var(v)));
                TargetSpec {
                    target: t,
                    covariates,
                    family: if t.n_levels() > 2 {
                        VariableFamily::NestedLogistic
                    } else {
                        VariableFamily::Logistic
                    },
                }
            })
            .collect();
        ImputationModelSpec {
            targets,
            cycles: 20,
            m: 20,
            ridge: None,
        }
    }
}

impl ImputationModelSpec {
    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_cycles(mut self, cycles: usize) -> Self {
        self.cycles = cycles;
        self
    }

    pub fn with_ridge(mut self, ridge: Option<f64>) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn target(&self, v: Variable) -> Option<&TargetSpec> {
        self.targets.iter().find(|t| t.target == v)
    }

    pub fn validate(&self) -> Result<(), MiError> {
        if self.m == 0 {
            return Err(MiError::Spec("m must be positive".into()));
        }
        if self.cycles == 0 {
            return Err(MiError::Spec("cycles must be positive".into()));
        }
        if let Some(r) = self.ridge {
            if !(r > 0.0) || !r.is_finite() {
                return Err(MiError::Spec(format!("ridge must be positive, got {r}")));
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            if self.targets[..i].iter().any(|u| u.target == t.target) {
                return Err(MiError::Spec(format!("`{}` is listed twice", t.target.name())));
            }
            if t.covariates.contains(&Covariate::Var(t.target)) {
                return Err(MiError::Spec(format!("`{}` predicts itself", t.target.name())));
            }
            let nested = t.target.n_levels() > 2;
            if nested != (t.family == VariableFamily::NestedLogistic) {
                return Err(MiError::Spec(format!(
                    "`{}` needs the {} family",
                    t.target.name(),
                    if nested { "nested logistic" } else { "logistic" }
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_has_21_columns_per_binary_target() {
        let s = ImputationModelSpec::default();
        s.validate().unwrap();
        let smoke = s.target(Variable::DailySmoker).unwrap();
        let cols: usize = smoke.covariates.iter().map(|c| c.column_names().len()).sum();
        assert_eq!(cols + 1, 21);
        assert!(smoke.covariates.contains(&Covariate::Var(Variable::HeavyAlcohol)));
        let heavy = s.target(Variable::HeavyAlcohol).unwrap();
        assert!(heavy.covariates.contains(&Covariate::Var(Variable::DailySmoker)));
    }

    #[test]
    fn level_codes_round_trip() {
        let mut q = Questionnaire::default();
        for v in Variable::ALL {
            for code in 0..v.n_levels() as u8 {
                v.set(&mut q, code);
                assert_eq!(v.get(&q), Some(code));
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = ImputationModelSpec::default();
        s.targets[0].covariates.push(Covariate::Var(Variable::Education));
        assert!(s.validate().is_err());
        let s = ImputationModelSpec::default().with_m(0);
        assert!(s.validate().is_err());
        let s = ImputationModelSpec::default().with_ridge(Some(-1.0));
        assert!(s.validate().is_err());
    }
}
