use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::MiError;

/// Combined estimate over m completed datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub point: f64,
    pub within_var: f64,
    pub between_var: f64,
    pub total_var: f64,
    /// Reference degrees of freedom; infinite when the between variance is 0.
    #[serde(with = "infinite_as_null")]
    pub df: f64,
    pub ci95: (f64, f64),
    pub m: usize,
}

impl PooledEstimate {
    /// A single-dataset estimate with normal-theory interval.
    pub fn single(point: f64, variance: f64) -> Self {
        let half = normal_975() * variance.max(0.0).sqrt();
        PooledEstimate {
            point,
            within_var: variance,
            between_var: 0.0,
            total_var: variance,
            df: f64::INFINITY,
            ci95: (point - half, point + half),
            m: 1,
        }
    }

    pub fn width(&self) -> f64 {
        self.ci95.1 - self.ci95.0
    }

    pub fn covers(&self, x: f64) -> bool {
        self.ci95.0 <= x && x <= self.ci95.1
    }

    pub fn scaled(&self, f: f64) -> Self {
        let (a, b) = (self.ci95.0 * f, self.ci95.1 * f);
        PooledEstimate {
            point: self.point * f,
            within_var: self.within_var * f * f,
            between_var: self.between_var * f * f,
            total_var: self.total_var * f * f,
            df: self.df,
            ci95: (a.min(b), a.max(b)),
            m: self.m,
        }
    }
}

fn normal_975() -> f64 {
    Normal::standard().inverse_cdf(0.975)
}

/// Upper 97.5% point of t(df); the normal quantile when df is infinite.
pub fn t_quantile_975(df: f64) -> f64 {
    if df.is_infinite() {
        return normal_975();
    }
    if df >= 1000.0 {
        // statrs loses accuracy for large df and stops terminating near 1e8;
        // the Cornish-Fisher series is exact to ~1e-12 here
        let z = normal_975();
        let z2 = z * z;
        let g1 = z * (z2 + 1.0) / 4.0;
        let g2 = z * ((5.0 * z2 + 16.0) * z2 + 3.0) / 96.0;
        let g3 = z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / 384.0;
        return z + g1 / df + g2 / (df * df) + g3 / (df * df * df);
    }
    StudentsT::new(0.0, 1.0, df)
        .expect("positive df")
        .inverse_cdf(0.975)
}

/// Rubin's combining rules over (point, variance) pairs.
pub fn pool(estimates: &[(f64, f64)]) -> Result<PooledEstimate, MiError> {
    let m = estimates.len();
    if m < 2 {
        return Err(MiError::InsufficientImputations(m));
    }
    if let Some((_, v)) = estimates.iter().find(|(_, v)| !(*v >= 0.0)) {
        return Err(MiError::InvalidVariance(*v));
    }
    let mf = m as f64;
    let point = estimates.iter().map(|e| e.0).sum::<f64>() / mf;
    let within = estimates.iter().map(|e| e.1).sum::<f64>() / mf;
    // the mean of equal values can be off by an ulp, which would make B tiny but nonzero
    let between = if estimates.iter().all(|e| e.0 == estimates[0].0) {
        0.0
    } else {
        estimates.iter().map(|e| (e.0 - point).powi(2)).sum::<f64>() / (mf - 1.0)
    };
    let inflated = (1.0 + 1.0 / mf) * between;
    let total = within + inflated;
    let df = if between > 0.0 {
        (mf - 1.0) * (1.0 + within / inflated).powi(2)
    } else {
        f64::INFINITY
    };
    let half = t_quantile_975(df) * total.sqrt();
    Ok(PooledEstimate {
        point,
        within_var: within,
        between_var: between,
        total_var: total,
        df,
        ci95: (point - half, point + half),
        m,
    })
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_estimates_have_no_between_variance() {
        let p = pool(&[(0.2, 0.01); 3]).unwrap();
        assert!((p.point - 0.2).abs() < 1e-15);
        assert_eq!(p.between_var, 0.0);
        assert!((p.total_var - 0.01).abs() < 1e-15);
        assert!(p.df.is_infinite());
        let half = 1.959963984540054 * 0.1;
        assert!((p.ci95.0 - (0.2 - half)).abs() < 1e-12);
    }

    #[test]
    fn two_imputation_arithmetic() {
        let p = pool(&[(0.2, 0.01), (0.3, 0.01)]).unwrap();
        assert!((p.point - 0.25).abs() < 1e-15);
        assert!((p.within_var - 0.01).abs() < 1e-15);
        assert!((p.between_var - 0.005).abs() < 1e-15);
        assert!((p.total_var - 0.0175).abs() < 1e-15);
        // (m-1)(1 + W/((1+1/m)B))^2 = (1 + 0.01/0.0075)^2
        assert!((p.df - (1.0f64 + 0.01 / 0.0075).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn too_few_imputations() {
        assert!(matches!(pool(&[(0.1, 0.1)]), Err(MiError::InsufficientImputations(1))));
        assert!(matches!(pool(&[(0.1, -0.1), (0.2, 0.1)]), Err(MiError::InvalidVariance(_))));
    }

    #[test]
    fn json_keeps_infinite_df() {
        let p = pool(&[(0.2, 0.01); 3]).unwrap();
        let back: PooledEstimate = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn t_quantile_reference_values() {
        // tabulated t quantiles
        assert!((t_quantile_975(1.0) - 12.706204736).abs() < 1e-6);
        assert!((t_quantile_975(10.0) - 2.228138852).abs() < 1e-6);
        assert!((t_quantile_975(1000.0) - 1.962339081).abs() < 1e-8);
    }

    #[test]
    fn t_quantile_is_continuous_and_decreasing_in_df() {
        let below = t_quantile_975(1000.0 - 1e-6);
        let above = t_quantile_975(1000.0);
        assert!((below - above).abs() < 1e-9);
        let mut prev = t_quantile_975(2.0);
        for df in [5.0, 50.0, 500.0, 5e3, 5e5, 5e7, 5e9, 5e12] {
            let q = t_quantile_975(df);
            assert!(q < prev && q > normal_975(), "df {df}");
            prev = q;
        }
    }

    proptest! {
        #[test]
        fn total_at_least_within_and_width_grows_with_between(
            w in 1e-6f64..1.0, spread in 0.0f64..1.0, m in 2usize..30
        ) {
            let est: Vec<(f64, f64)> = (0..m).map(|i| (0.5 + spread * (i as f64 / m as f64 - 0.5), w)).collect();
            let p = pool(&est).unwrap();
            prop_assert!(p.total_var >= p.within_var);
            prop_assert!((p.total_var - (p.within_var + (1.0 + 1.0 / m as f64) * p.between_var)).abs() <= 1e-15 * p.total_var.max(1.0));
            let wider: Vec<(f64, f64)> = (0..m).map(|i| (0.5 + 2.0 * spread * (i as f64 / m as f64 - 0.5), w)).collect();
            let q = pool(&wider).unwrap();
            if spread > 0.0 {
                prop_assert!(q.width() > p.width());
            }
        }
    }
}
