//! Maximum-likelihood fitters for logistic, NB2 and zero-inflated NB2
//! regression.

mod design;
mod draw;
mod linalg;
mod logistic;
mod negbin;
mod optim;
pub mod special;
mod zinb;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use design::{DesignMatrix, INTERCEPT};
pub use draw::{draw_coefficients, CoefficientSampler, Drawable};
pub use logistic::{fit_logistic, fit_logistic_with};
pub use negbin::{fit_negbin, fit_negbin_with};
pub use optim::{logistic_loglik_score, negbin_loglik_score, zinb_loglik_score};
pub use zinb::{fit_zinb, fit_zinb_with, loglik_zinb, ZinbOptions};

#[derive(Debug, Error)]
pub enum GlmError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("perfect separation on column `{column}`")]
    Separation { column: String },
    #[error("design is rank deficient at column `{column}`")]
    Collinear { column: String },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("zero part unidentifiable: response has no zeros")]
    ZeroPartUnidentifiable,
    #[error(
        "ZINB did not converge after {em_iterations} EM and {newton_iterations} Newton steps \
         (score max-norm {score:.3e})"
    )]
    NonConvergence {
        em_iterations: usize,
        newton_iterations: usize,
        score: f64,
        best: Box<ZinbFit>,
    },
    #[error("covariance is not positive semidefinite")]
    NotPsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Logistic,
    NegativeBinomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Ridge weight per observation; 0 disables the penalty and enables
    /// separation and collinearity checks.
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub start: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: 0.0,
            max_iter: 100,
            tol: 1e-6,
            start: None,
        }
    }
}

impl FitOptions {
    pub fn ridge(lambda: f64) -> Self {
        FitOptions {
            ridge: lambda,
            ..Self::default()
        }
    }
}

const Z975: f64 = 1.959_963_984_540_054;

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: Family,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Inverse observed information over the coefficients.
    pub covariance: Vec<Vec<f64>>,
    /// Size parameter θ of the NB2 family.
    pub dispersion: Option<f64>,
    /// Standard error of log θ.
    pub log_dispersion_se: Option<f64>,
    /// θ ran into the upper bound and was held fixed there.
    pub poisson_limit: bool,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub score_max_norm: f64,
    pub ridge: f64,
    pub n_obs: usize,
}

impl GlmFit {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.covariance)
    }

    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[j][j].max(0.0).sqrt()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.coefficients[j])
    }

    pub fn wald_ci(&self, j: usize) -> (f64, f64) {
        let se = self.std_error(j);
        (self.coefficients[j] - Z975 * se, self.coefficients[j] + Z975 * se)
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        design::dot(row, &self.coefficients)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZinbFit {
    pub count_names: Vec<String>,
    pub zero_names: Vec<String>,
    pub count_coefficients: Vec<f64>,
    pub zero_coefficients: Vec<f64>,
    pub dispersion: f64,
    /// Joint covariance over (β, γ, log θ).
    pub covariance: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub em_iterations: usize,
    pub newton_iterations: usize,
    pub score_max_norm: f64,
    pub n_obs: usize,
}

/// Wald estimate with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldInterval {
    pub estimate: f64,
    pub se: f64,
    pub low: f64,
    pub high: f64,
}

impl WaldInterval {
    pub fn new(estimate: f64, se: f64) -> Self {
        WaldInterval {
            estimate,
            se,
            low: estimate - Z975 * se,
            high: estimate + Z975 * se,
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.low <= 0.0 && 0.0 <= self.high
    }

    /// Two-sided Wald p-value.
    pub fn p_value(&self) -> f64 {
        if self.se == 0.0 {
            return if self.estimate == 0.0 { 1.0 } else { 0.0 };
        }
        let n = Normal::standard();
        2.0 * (1.0 - n.cdf((self.estimate / self.se).abs()))
    }
}

impl ZinbFit {
    pub fn n_params(&self) -> usize {
        self.count_coefficients.len() + self.zero_coefficients.len() + 1
    }

    /// Flat parameter vector (β, γ, log θ).
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.count_coefficients.clone();
        p.extend(&self.zero_coefficients);
        p.push(self.dispersion.ln());
        p
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.covariance)
    }

    pub fn count_interval(&self, name: &str) -> Option<WaldInterval> {
        let j = self.count_names.iter().position(|n| n == name)?;
        Some(WaldInterval::new(
            self.count_coefficients[j],
            self.covariance[j][j].max(0.0).sqrt(),
        ))
    }

    pub fn zero_interval(&self, name: &str) -> Option<WaldInterval> {
        let j = self.zero_names.iter().position(|n| n == name)?;
        let k = self.count_coefficients.len() + j;
        Some(WaldInterval::new(
            self.zero_coefficients[j],
            self.covariance[k][k].max(0.0).sqrt(),
        ))
    }

    pub fn count_mean(&self, x_row: &[f64]) -> f64 {
        design::dot(x_row, &self.count_coefficients).exp()
    }

    pub fn excess_zero_prob(&self, z_row: &[f64]) -> f64 {
        special::logistic(design::dot(z_row, &self.zero_coefficients))
    }

    /// E[y] = (1 − π)·μ for one row.
    pub fn expected_count(&self, x_row: &[f64], z_row: &[f64]) -> f64 {
        (1.0 - self.excess_zero_prob(z_row)) * self.count_mean(x_row)
    }

    pub fn probability(&self, y: u32, x_row: &[f64], z_row: &[f64]) -> f64 {
        let eta = design::dot(x_row, &self.count_coefficients);
        let zeta = design::dot(z_row, &self.zero_coefficients);
        optim::zinb_row_ll(y, eta, zeta, self.dispersion).exp()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wald_interval_arithmetic() {
        let w = WaldInterval::new(0.5, 0.1);
        assert!((w.low - (0.5 - 0.1959963984540054)).abs() < 1e-15);
        assert!(!w.contains_zero());
        assert!((WaldInterval::new(0.0, 1.0).p_value() - 1.0).abs() < 1e-12);
        assert!((WaldInterval::new(1.959963984540054, 1.0).p_value() - 0.05).abs() < 1e-9);
    }
}
