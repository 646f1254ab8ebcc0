use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::symmetrize;
use super::{GlmError, GlmFit, ZinbFit};

/// A fit with an approximately normal sampling distribution.
pub trait Drawable {
    fn mean(&self) -> Vec<f64>;
    fn covariance(&self) -> DMatrix<f64>;
}

impl Drawable for GlmFit {
    fn mean(&self) -> Vec<f64> {
        self.coefficients.clone()
    }

    fn covariance(&self) -> DMatrix<f64> {
        self.covariance_matrix()
    }
}

impl Drawable for ZinbFit {
    fn mean(&self) -> Vec<f64> {
        self.params()
    }

    fn covariance(&self) -> DMatrix<f64> {
        self.covariance_matrix()
    }
}

/// Factorized N(mean, covariance) for repeated draws.
#[derive(Debug, Clone)]
pub struct CoefficientSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl CoefficientSampler {
    pub fn new(fit: &impl Drawable) -> Result<Self, GlmError> {
        Self::from_moments(fit.mean(), fit.covariance())
    }

    pub fn from_moments(mean: Vec<f64>, mut cov: DMatrix<f64>) -> Result<Self, GlmError> {
        let k = mean.len();
        if cov.nrows() != k || cov.ncols() != k {
            return Err(GlmError::Dimension("covariance does not match mean".into()));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(GlmError::NotPsd);
        }
        symmetrize(&mut cov);
        let factor = if cov.iter().all(|&v| v == 0.0) {
            DMatrix::zeros(k, k)
        } else if let Some(c) = Cholesky::new(cov.clone()) {
            c.l()
        } else {
            let eig = SymmetricEigen::new(cov);
            let scale = eig.eigenvalues.amax();
            if eig.eigenvalues.iter().any(|&l| l < -1e-8 * scale.max(1.0)) {
                return Err(GlmError::NotPsd);
            }
            let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&root)
        };
        Ok(CoefficientSampler {
            mean: DVector::from_vec(mean),
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let draw = &self.mean + &self.factor * z;
        draw.iter().copied().collect()
    }
}

/// One draw from N(mle, covariance).
pub fn draw_coefficients<R: Rng + ?Sized>(
    fit: &impl Drawable,
    rng: &mut R,
) -> Result<Vec<f64>, GlmError> {
    Ok(CoefficientSampler::new(fit)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_logistic, DesignMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_covariance_returns_mle() {
        let s = CoefficientSampler::from_moments(vec![0.3, -1.0], DMatrix::zeros(2, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.sample(&mut rng), vec![0.3, -1.0]);
    }

    #[test]
    fn draws_match_moments() {
        let y: Vec<bool> = (0..400).map(|i| i % 5 == 0).collect();
        let fit = fit_logistic(&DesignMatrix::intercept_only(400), &y).unwrap();
        let sampler = CoefficientSampler::new(&fit).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<f64> = (0..10_000).map(|_| sampler.sample(&mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / 1e4;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 9_999.0;
        let se = fit.covariance[0][0].sqrt();
        assert!((mean - fit.coefficients[0]).abs() < 4.0 * se / 100.0);
        assert!((var / fit.covariance[0][0] - 1.0).abs() < 0.1);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let s = CoefficientSampler::from_moments(vec![1.0, 2.0], cov).unwrap();
        let a = s.sample(&mut ChaCha8Rng::seed_from_u64(9));
        let b = s.sample(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            CoefficientSampler::from_moments(vec![0.0, 0.0], cov),
            Err(GlmError::NotPsd)
        ));
        // rank-deficient but PSD is fine
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = CoefficientSampler::from_moments(vec![0.0, 0.0], cov).unwrap();
        let d = s.sample(&mut ChaCha8Rng::seed_from_u64(1));
        assert!((d[0] - d[1]).abs() < 1e-7);
    }
}
