use nalgebra::DVector;

use super::design::{to_vec, DesignMatrix};
use super::linalg::{collinear_column, inverse_psd, max_abs};
use super::negbin::fit_negbin;
use super::optim::{newton, LogisticObjective, NegBinObjective, Objective, ZinbObjective};
use super::special::logit;
use super::{GlmError, ZinbFit};

#[derive(Debug, Clone, PartialEq)]
pub struct ZinbOptions {
    pub max_em: usize,
    pub max_newton: usize,
    pub tol: f64,
    /// EM stops once the relative log-likelihood gain per step drops below this.
    pub em_rel_tol: f64,
    /// Warm start as (β, γ, log θ).
    pub start: Option<Vec<f64>>,
}

impl Default for ZinbOptions {
    fn default() -> Self {
        ZinbOptions {
            max_em: 20,
            max_newton: 100,
            tol: 1e-5,
            em_rel_tol: 1e-4,
            start: None,
        }
    }
}

/// Zero-part intercept standing in for π = 0.
const BOUNDARY_GAMMA: f64 = -40.0;

pub fn fit_zinb(x: &DesignMatrix, z: &DesignMatrix, y: &[u32]) -> Result<ZinbFit, GlmError> {
    fit_zinb_with(x, z, y, &ZinbOptions::default())
}

/// Exact ZINB log-likelihood at (β, γ, θ).
pub fn loglik_zinb(
    count_coefficients: &[f64],
    zero_coefficients: &[f64],
    theta: f64,
    x: &DesignMatrix,
    z: &DesignMatrix,
    y: &[u32],
) -> Result<f64, GlmError> {
    check_dims(x, z, y)?;
    if count_coefficients.len() != x.n_cols() || zero_coefficients.len() != z.n_cols() {
        return Err(GlmError::Dimension("coefficient length mismatch".into()));
    }
    if !(theta > 0.0) {
        return Err(GlmError::Dimension(format!("theta must be positive, got {theta}")));
    }
    let mut p = count_coefficients.to_vec();
    p.extend_from_slice(zero_coefficients);
    p.push(theta.ln());
    Ok(ZinbObjective { x, z, y }.value(&DVector::from_vec(p)))
}

fn check_dims(x: &DesignMatrix, z: &DesignMatrix, y: &[u32]) -> Result<(), GlmError> {
    if x.n_rows() != y.len() || z.n_rows() != y.len() {
        return Err(GlmError::Dimension(format!(
            "count design has {} rows, zero design {}, response {}",
            x.n_rows(),
            z.n_rows(),
            y.len()
        )));
    }
    Ok(())
}

pub fn fit_zinb_with(
    x: &DesignMatrix,
    z: &DesignMatrix,
    y: &[u32],
    opts: &ZinbOptions,
) -> Result<ZinbFit, GlmError> {
    check_dims(x, z, y)?;
    let kc = x.n_cols();
    let kz = z.n_cols();
    let n = y.len();
    if n <= kc + kz + 1 {
        return Err(GlmError::Dimension(format!(
            "{n} rows is too few for {} parameters",
            kc + kz + 1
        )));
    }
    if !y.contains(&0) {
        return Err(GlmError::ZeroPartUnidentifiable);
    }
    if y.iter().all(|&v| v == 0) {
        return Err(GlmError::Degenerate("all counts are zero".into()));
    }
    for d in [x, z] {
        if let Some(j) = collinear_column(d) {
            return Err(GlmError::Collinear {
                column: d.names()[j].clone(),
            });
        }
    }
    let obj = ZinbObjective { x, z, y };

    // the pure NB fit doubles as start value and as the π = 0 boundary point
    let nb = fit_negbin(x, y)?;
    let mut boundary = nb.coefficients.clone();
    boundary.push(BOUNDARY_GAMMA);
    boundary.extend(std::iter::repeat_n(0.0, kz - 1));
    boundary.push(nb.dispersion.expect("NB fit has θ").ln());
    let boundary = DVector::from_vec(boundary);

    let start = match &opts.start {
        Some(s) if s.len() == kc + kz + 1 => DVector::from_column_slice(s),
        _ => {
            let mut s = boundary.clone();
            s[kc] = logit(initial_excess(&nb, x, y).clamp(0.01, 0.9));
            s
        }
    };

    let (em_params, em_iterations) = run_em(&obj, start, opts);
    let polish = newton(&obj, em_params, opts.max_newton, opts.tol, |_| false);
    let mut best = polish;
    let bvalue = obj.value(&boundary);
    if !(best.value >= bvalue) {
        let (value, grad, info) = obj.derivs(&boundary);
        best = super::optim::NewtonOutcome {
            converged: max_abs(&grad) <= opts.tol,
            params: boundary,
            value,
            grad,
            info,
            iterations: best.iterations,
        };
    }
    let cov = inverse_psd(&best.info);
    let p = to_vec(&best.params);
    let fit = ZinbFit {
        count_names: x.names().to_vec(),
        zero_names: z.names().to_vec(),
        count_coefficients: p[..kc].to_vec(),
        zero_coefficients: p[kc..kc + kz].to_vec(),
        dispersion: p[kc + kz].exp(),
        covariance: super::to_rows(&cov),
        log_likelihood: best.value,
        converged: best.converged,
        em_iterations,
        newton_iterations: best.iterations,
        score_max_norm: max_abs(&best.grad),
        n_obs: n,
    };
    if fit.converged {
        Ok(fit)
    } else {
        Err(GlmError::NonConvergence {
            em_iterations,
            newton_iterations: fit.newton_iterations,
            score: fit.score_max_norm,
            best: Box::new(fit),
        })
    }
}

/// Share of zeros not explained by the NB fit.
fn initial_excess(nb: &super::GlmFit, x: &DesignMatrix, y: &[u32]) -> f64 {
    let theta = nb.dispersion.unwrap_or(1.0);
    let n = y.len() as f64;
    let observed = y.iter().filter(|&&v| v == 0).count() as f64 / n;
    let expected = x
        .rows()
        .map(|r| {
            let mu = nb.linear_predictor(r).exp();
            (-theta * (mu / theta).ln_1p()).exp()
        })
        .sum::<f64>()
        / n;
    (observed - expected) / (1.0 - expected).max(1e-6)
}

/// Generalized EM: each M-step takes two damped Newton steps on the
/// expected complete-data log-likelihood of each part.
fn run_em(obj: &ZinbObjective<'_>, start: DVector<f64>, opts: &ZinbOptions) -> (DVector<f64>, usize) {
    let kc = obj.x.n_cols();
    let kz = obj.z.n_cols();
    let mut p = start;
    obj.clamp(&mut p);
    let mut value = obj.value(&p);
    let mut it = 0;
    while it < opts.max_em {
        let w = obj.excess_weights(&p);
        let count = NegBinObjective {
            x: obj.x,
            y: obj.y,
            weights: Some(w.iter().map(|v| 1.0 - v).collect()),
            fixed_alpha: None,
        };
        let mut cp = p.rows(0, kc).into_owned();
        cp = cp.insert_row(kc, p[kc + kz]);
        let cnext = newton(&count, cp, 2, 0.0, |_| false).params;
        let zero = LogisticObjective {
            x: obj.z,
            y: w,
            ridge: 0.0,
            center: 0.0,
        };
        let zp = p.rows(kc, kz).into_owned();
        let znext = newton(&zero, zp, 2, 0.0, |_| false).params;
        let mut next = p.clone();
        next.rows_mut(0, kc).copy_from(&cnext.rows(0, kc));
        next.rows_mut(kc, kz).copy_from(&znext);
        next[kc + kz] = cnext[kc];
        let v = obj.value(&next);
        it += 1;
        if !(v >= value) {
            break;
        }
        let gain = v - value;
        p = next;
        value = v;
        if gain <= opts.em_rel_tol * (1.0 + value.abs()) {
            break;
        }
    }
    (p, it)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::special::{ln_gamma, logistic};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, Poisson};

    fn nb_draw(rng: &mut ChaCha8Rng, mu: f64, theta: f64) -> u32 {
        let l = Gamma::new(theta, mu / theta).unwrap().sample(rng);
        if l <= 0.0 {
            0
        } else {
            Poisson::new(l).unwrap().sample(rng) as u32
        }
    }

    fn naive_ll(beta: &[f64], gamma: &[f64], theta: f64, x: &DesignMatrix, z: &DesignMatrix, y: &[u32]) -> f64 {
        let mut total = 0.0;
        for i in 0..y.len() {
            let mu = x.dot_row(i, beta).exp();
            let pi = logistic(z.dot_row(i, gamma));
            let yi = f64::from(y[i]);
            let nb = (ln_gamma(yi + theta) - ln_gamma(theta) - ln_gamma(yi + 1.0)).exp()
                * (theta / (theta + mu)).powf(theta)
                * (mu / (theta + mu)).powf(yi);
            let p = if y[i] == 0 { pi + (1.0 - pi) * nb } else { (1.0 - pi) * nb };
            total += p.ln();
        }
        total
    }

    #[test]
    fn single_zero_row_hand_value() {
        // π = 0.5 and NB(0; μ=1, θ=1) = 0.5 gives log(0.5 + 0.25)
        let x = DesignMatrix::intercept_only(1);
        let ll = loglik_zinb(&[0.0], &[0.0], 1.0, &x, &x, &[0]).unwrap();
        assert!((ll - 0.75f64.ln()).abs() < 1e-15);
        // NB(0; μ=3, θ=1) = 0.25
        let ll = loglik_zinb(&[3f64.ln()], &[0.0], 1.0, &x, &x, &[0]).unwrap();
        assert!((ll - 0.625f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn matches_naive_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let x = DesignMatrix::from_rows(vec!["a".into()], &rows).unwrap();
        let y: Vec<u32> = (0..30).map(|_| rng.random_range(0..8)).collect();
        for _ in 0..100 {
            let b = [rng.random_range(-1.0..1.5), rng.random_range(-1.0..1.0)];
            let g = [rng.random_range(-2.0..1.0), rng.random_range(-1.0..1.0)];
            let theta = rng.random_range(0.3..5.0);
            let fast = loglik_zinb(&b, &g, theta, &x, &x, &y).unwrap();
            let slow = naive_ll(&b, &g, theta, &x, &x, &y);
            assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0), "{fast} vs {slow}");
        }
    }

    #[test]
    fn no_zeros_is_unidentifiable() {
        let x = DesignMatrix::intercept_only(5);
        assert!(matches!(
            fit_zinb(&x, &x, &[1, 2, 3, 1, 4]),
            Err(GlmError::ZeroPartUnidentifiable)
        ));
    }

    #[test]
    fn recovers_intercept_only_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 20_000;
        let y: Vec<u32> = (0..n)
            .map(|_| if rng.random_bool(0.3) { 0 } else { nb_draw(&mut rng, 4.0, 2.0) })
            .collect();
        let x = DesignMatrix::intercept_only(n);
        let fit = fit_zinb(&x, &x, &y).unwrap();
        assert!((fit.count_coefficients[0] - 4f64.ln()).abs() < 0.05);
        assert!((logistic(fit.zero_coefficients[0]) - 0.3).abs() < 0.02);
        assert!((fit.dispersion - 2.0).abs() < 0.25);
        assert!(fit.score_max_norm <= 1e-5);
    }

    #[test]
    fn pure_nb_data_gives_negligible_excess_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5_000;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let x = DesignMatrix::from_rows(vec!["a".into()], &rows).unwrap();
        let y: Vec<u32> = rows
            .iter()
            .map(|r| nb_draw(&mut rng, (0.5 + 0.4 * r[0]).exp(), 1.2))
            .collect();
        let z = DesignMatrix::intercept_only(n);
        let fit = match fit_zinb(&x, &z, &y) {
            Ok(f) => f,
            Err(GlmError::NonConvergence { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        let nb = fit_negbin(&x, &y).unwrap();
        assert!(fit.log_likelihood >= nb.log_likelihood - 1e-6);
        let mean_pi = logistic(fit.zero_coefficients[0]);
        assert!(mean_pi < 0.02, "{mean_pi}");
        for j in 0..2 {
            let se = nb.std_error(j);
            assert!((fit.count_coefficients[j] - nb.coefficients[j]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn mixture_is_a_proper_distribution() {
        let fit = ZinbFit {
            count_names: vec!["(Intercept)".into()],
            zero_names: vec!["(Intercept)".into()],
            count_coefficients: vec![1.2],
            zero_coefficients: vec![-0.4],
            dispersion: 0.8,
            covariance: vec![vec![0.0; 3]; 3],
            log_likelihood: 0.0,
            converged: true,
            em_iterations: 0,
            newton_iterations: 0,
            score_max_norm: 0.0,
            n_obs: 0,
        };
        let mut total = 0.0;
        let mut y = 0;
        while 1.0 - total > 1e-8 && y < 100_000 {
            total += fit.probability(y, &[1.0], &[1.0]);
            y += 1;
        }
        assert!((total - 1.0).abs() < 1e-8);
    }
}
