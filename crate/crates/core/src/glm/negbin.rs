use nalgebra::DVector;

use super::design::{to_vec, DesignMatrix};
use super::linalg::{collinear_column, inverse_psd, max_abs};
use super::optim::{newton, NegBinObjective, Objective, LOG_THETA_MAX};
use super::{Family, FitOptions, GlmError, GlmFit};

pub fn fit_negbin(x: &DesignMatrix, y: &[u32]) -> Result<GlmFit, GlmError> {
    fit_negbin_with(x, y, &FitOptions::default())
}

/// Start values: log of the mean for the intercept, moment estimate of θ.
/// The start vector in `opts` may hold (β) or (β, log θ).
pub(crate) fn negbin_start(x: &DesignMatrix, y: &[u32], opts: &FitOptions) -> DVector<f64> {
    let k = x.n_cols();
    let n = y.len() as f64;
    let mean = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = y.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let theta = if var > mean * 1.01 {
        (mean * mean / (var - mean)).clamp(1e-3, 1e5)
    } else {
        1e3
    };
    let mut s = DVector::zeros(k + 1);
    s[0] = mean.max(1e-8).ln();
    s[k] = theta.ln();
    if let Some(st) = &opts.start {
        if st.len() == k || st.len() == k + 1 {
            for (j, v) in st.iter().enumerate() {
                s[j] = *v;
            }
        }
    }
    s
}

pub fn fit_negbin_with(
    x: &DesignMatrix,
    y: &[u32],
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
    if n <= k {
        return Err(GlmError::Dimension(format!(
            "{n} rows is too few for {k} columns"
        )));
    }
    if y.iter().all(|&v| v == 0) {
        return Err(GlmError::Degenerate("all counts are zero".into()));
    }
    if let Some(j) = collinear_column(x) {
        return Err(GlmError::Collinear {
            column: x.names()[j].clone(),
        });
    }
    let obj = NegBinObjective {
        x,
        y,
        weights: None,
        fixed_alpha: None,
    };
    let start = negbin_start(x, y, opts);
    let mut out = newton(&obj, start, opts.max_iter, opts.tol, |_| false);
    let mut poisson_limit = false;
    let mut iterations = out.iterations;
    if !out.converged && out.params[k] >= LOG_THETA_MAX - 1e-9 {
        // θ is running off to infinity: hold it at the bound and refit β
        poisson_limit = true;
        let fixed = NegBinObjective {
            x,
            y,
            weights: None,
            fixed_alpha: Some(LOG_THETA_MAX),
        };
        let inner = newton(
            &fixed,
            out.params.rows(0, k).into_owned(),
            opts.max_iter,
            opts.tol,
            |_| false,
        );
        let mut params = inner.params.clone();
        params = params.insert_row(k, LOG_THETA_MAX);
        let (value, grad, info) = obj.derivs(&params);
        iterations += inner.iterations;
        out = super::optim::NewtonOutcome {
            params,
            value,
            grad,
            info,
            iterations,
            converged: inner.converged,
        };
        out.grad[k] = 0.0;
        let cov = inverse_psd(&inner.info);
        return Ok(assemble(x, &out, cov, None, poisson_limit, n));
    }
    poisson_limit |= out.params[k] >= LOG_THETA_MAX - 1e-9;
    let joint = inverse_psd(&out.info);
    let cov = joint.view((0, 0), (k, k)).into_owned();
    let se = joint[(k, k)].max(0.0).sqrt();
    Ok(assemble(x, &out, cov, Some(se), poisson_limit, n))
}

fn assemble(
    x: &DesignMatrix,
    out: &super::optim::NewtonOutcome,
    cov: nalgebra::DMatrix<f64>,
    log_theta_se: Option<f64>,
    poisson_limit: bool,
    n: usize,
) -> GlmFit {
    let k = x.n_cols();
    let params = to_vec(&out.params);
    GlmFit {
        family: Family::NegativeBinomial,
        names: x.names().to_vec(),
        coefficients: params[..k].to_vec(),
        covariance: super::to_rows(&cov),
        dispersion: Some(params[k].exp()),
        log_dispersion_se: log_theta_se,
        poisson_limit,
        log_likelihood: out.value,
        converged: out.converged,
        iterations: out.iterations,
        score_max_norm: max_abs(&out.grad),
        ridge: 0.0,
        n_obs: n,
    }
}
