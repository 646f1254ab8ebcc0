use nalgebra::DVector;

use super::design::{to_vec, DesignMatrix};
use super::linalg::{collinear_column, inverse_psd, max_abs};
use super::optim::{newton, LogisticObjective};
use super::special::logit;
use super::{linalg, Family, FitOptions, GlmError, GlmFit};

const SEPARATION_BETA: f64 = 1e3;
const SEPARATION_ETA: f64 = 30.0;

pub fn fit_logistic(x: &DesignMatrix, y: &[bool]) -> Result<GlmFit, GlmError> {
    fit_logistic_with(x, y, &FitOptions::default())
}

pub fn fit_logistic_with(
    x: &DesignMatrix,
    y: &[bool],
    opts: &FitOptions,
) -> Result<GlmFit, GlmError> {
    let n = x.n_rows();
    let k = x.n_cols();
    if y.len() != n {
        return Err(GlmError::Dimension(format!(
            "{} responses for {n} design rows",
            y.len()
        )));
    }
    let penalized = opts.ridge > 0.0;
    if n == 0 || (!penalized && n <= k) {
        return Err(GlmError::Dimension(format!(
            "{n} rows is too few for {k} columns"
        )));
    }
    if !penalized {
        if let Some(j) = collinear_column(x) {
            return Err(GlmError::Collinear {
                column: x.names()[j].clone(),
            });
        }
    }
    let yf: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
    let start = match &opts.start {
        Some(s) if s.len() == k => DVector::from_column_slice(s),
        _ => {
            let ybar = yf.iter().sum::<f64>() / n as f64;
            let mut s = DVector::zeros(k);
            s[0] = logit(ybar.clamp(1e-4, 1.0 - 1e-4));
            s
        }
    };
    // the intercept shrinks toward the marginal log-odds, not toward 1/2
    let half = 0.5 / n as f64;
    let ybar = yf.iter().sum::<f64>() / n as f64;
    let obj = LogisticObjective {
        x,
        y: yf,
        ridge: opts.ridge * n as f64,
        center: logit(ybar.clamp(half, 1.0 - half)),
    };
    let out = newton(&obj, start, opts.max_iter, opts.tol, |p| {
        !penalized && max_abs(p) > SEPARATION_BETA
    });
    let beta = to_vec(&out.params);
    if !penalized {
        let max_eta = x
            .rows()
            .map(|r| super::design::dot(r, &beta).abs())
            .fold(0.0, f64::max);
        if max_abs(&out.params) > SEPARATION_BETA || max_eta > SEPARATION_ETA {
            let j = if k == 1 {
                0
            } else {
                (1..k)
                    .max_by(|&a, &b| beta[a].abs().total_cmp(&beta[b].abs()))
                    .unwrap_or(0)
            };
            return Err(GlmError::Separation {
                column: x.names()[j].clone(),
            });
        }
    }
    let mut cov = inverse_psd(&out.info);
    linalg::symmetrize(&mut cov);
    Ok(GlmFit {
        family: Family::Logistic,
        names: x.names().to_vec(),
        coefficients: beta,
        covariance: super::to_rows(&cov),
        dispersion: None,
        log_dispersion_se: None,
        poisson_limit: false,
        log_likelihood: out.value,
        converged: out.converged,
        iterations: out.iterations,
        score_max_norm: max_abs(&out.grad),
        ridge: opts.ridge,
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_by_two() -> (DesignMatrix, Vec<bool>) {
        // (x=1,y=1)=30, (x=1,y=0)=10, (x=0,y=1)=20, (x=0,y=0)=40
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (x, yy, count) in [(1.0, true, 30), (1.0, false, 10), (0.0, true, 20), (0.0, false, 40)] {
            for _ in 0..count {
                rows.push(vec![x]);
                y.push(yy);
            }
        }
        (DesignMatrix::from_rows(vec!["x".into()], &rows).unwrap(), y)
    }

    #[test]
    fn intercept_only_is_logit_of_mean() {
        let y: Vec<bool> = (0..100).map(|i| i % 4 == 0).collect();
        let fit = fit_logistic(&DesignMatrix::intercept_only(100), &y).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - (0.25f64 / 0.75).ln()).abs() < 1e-6);
        // variance 1/(n p (1-p))
        assert!((fit.covariance[0][0] - 1.0 / (100.0 * 0.25 * 0.75)).abs() < 1e-9);
    }

    #[test]
    fn saturated_two_by_two_slope_is_log_odds_ratio() {
        let (x, y) = two_by_two();
        let fit = fit_logistic(&x, &y).unwrap();
        assert!((fit.coefficients[1] - 6f64.ln()).abs() < 1e-8);
        assert!((fit.coefficients[0] - 0.5f64.ln()).abs() < 1e-8);
        assert!(fit.score_max_norm <= 1e-6);
        let c = &fit.covariance;
        assert!((c[0][1] - c[1][0]).abs() < 1e-10);
        // Woolf variance of the log odds ratio
        let woolf = 1.0 / 30.0 + 1.0 / 10.0 + 1.0 / 20.0 + 1.0 / 40.0;
        assert!((c[1][1] - woolf).abs() < 1e-8);
    }

    #[test]
    fn separation_names_column() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i), f64::from(i % 3)]).collect();
        let y: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let x = DesignMatrix::from_rows(vec!["age".into(), "other".into()], &rows).unwrap();
        match fit_logistic(&x, &y) {
            Err(GlmError::Separation { column }) => assert_eq!(column, "age"),
            other => panic!("expected separation, got {other:?}"),
        }
        // the ridge flag always returns an answer
        let fit = fit_logistic_with(&x, &y, &FitOptions::ridge(1e-4)).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[1] > 0.0);
    }

    #[test]
    fn ridge_bounds_a_constant_outcome() {
        let y = vec![true; 50];
        let fit = fit_logistic_with(&DesignMatrix::intercept_only(50), &y, &FitOptions::ridge(1e-2)).unwrap();
        // shrinks toward logit(1 - 1/100), so it stays finite and above it
        assert!(fit.coefficients[0].is_finite());
        assert!(fit.coefficients[0] > 99f64.ln());
    }

    #[test]
    fn collinear_design_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                vec![a, 1.0 + 1e-9 * rng.random_range(-1.0..1.0)]
            })
            .collect();
        let y: Vec<bool> = (0..200).map(|_| rng.random_bool(0.4)).collect();
        let x = DesignMatrix::from_rows(vec!["a".into(), "const".into()], &rows).unwrap();
        assert!(matches!(
            fit_logistic(&x, &y),
            Err(GlmError::Collinear { .. })
        ));
    }

    #[test]
    fn rescaling_a_covariate_rescales_its_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..500).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<bool> = a
            .iter()
            .map(|&v| rng.random_bool(super::super::special::logistic(0.3 + 0.8 * v)))
            .collect();
        let x1 = DesignMatrix::from_rows(vec!["a".into()], &a.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let x10 = DesignMatrix::from_rows(
            vec!["a".into()],
            &a.iter().map(|&v| vec![10.0 * v]).collect::<Vec<_>>(),
        )
        .unwrap();
        let f1 = fit_logistic(&x1, &y).unwrap();
        let f10 = fit_logistic(&x10, &y).unwrap();
        assert!((f1.coefficients[1] / 10.0 - f10.coefficients[1]).abs() < 1e-8);
        assert!((f1.log_likelihood - f10.log_likelihood).abs() < 1e-8);
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = two_by_two();
        let fit = fit_logistic(&x, &y).unwrap();
        let back: GlmFit = serde_json::from_str(&fit.to_json()).unwrap();
        assert_eq!(back, fit);
    }
}
