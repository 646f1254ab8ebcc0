//! Scalar helpers shared by the fitters.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// log(1 + e^x) without overflow.
pub fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// log(e^a + e^b).
pub fn logsumexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Second derivative of ln Γ.
pub fn trigamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 && x.floor() == x {
        return f64::NAN;
    }
    let mut z = x;
    let mut acc = 0.0;
    while z < 12.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let r = 1.0 / z;
    let r2 = r * r;
    acc + r
        + 0.5 * r2
        + r * r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0))))
}

/// Differences ln Γ(y+θ) − ln Γ(θ), ψ(y+θ) − ψ(θ), ψ′(y+θ) − ψ′(θ).
/// Small counts use the finite sums, which are exact and avoid cancellation
/// when θ is large.
pub fn gamma_diffs(y: u32, theta: f64) -> (f64, f64, f64) {
    if y <= 64 {
        let (mut lg, mut dg, mut tg) = (0.0, 0.0, 0.0);
        for k in 0..y {
            let t = theta + f64::from(k);
            lg += t.ln();
            dg += 1.0 / t;
            tg -= 1.0 / (t * t);
        }
        (lg, dg, tg)
    } else {
        let yt = f64::from(y) + theta;
        (
            ln_gamma(yt) - ln_gamma(theta),
            digamma(yt) - digamma(theta),
            trigamma(yt) - trigamma(theta),
        )
    }
}

/// ln Γ(y + 1).
pub fn ln_factorial(y: u32) -> f64 {
    if y < 2 {
        0.0
    } else {
        ln_gamma(f64::from(y) + 1.0)
    }
}

/// NB2 log-probability of `y` with mean exp(eta) and size θ.
pub fn nb_log_pmf(y: u32, eta: f64, theta: f64) -> f64 {
    let mu = eta.exp();
    let log_t_mu = (theta + mu).ln();
    let (lg, _, _) = gamma_diffs(y, theta);
    // θ·log(θ/(θ+μ)) written as −θ·log1p(μ/θ) for large θ
    lg - ln_factorial(y) - theta * (mu / theta).ln_1p() + f64::from(y) * (eta - log_t_mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigamma_known_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-13);
        assert!((trigamma(0.5) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-12);
        assert!((trigamma(2.0) - (pi2_6 - 1.0)).abs() < 1e-13);
        // ψ′(x) ~ 1/x for large x
        assert!((trigamma(1e6) * 1e6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn trigamma_is_derivative_of_digamma() {
        for &x in &[0.3, 1.7, 5.0, 11.9, 12.1, 40.0] {
            let h = 1e-5;
            let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!((fd - trigamma(x)).abs() < 1e-6 * trigamma(x).max(1.0), "x={x}");
        }
    }

    #[test]
    fn gamma_diffs_agree_across_branches() {
        for &theta in &[0.2, 1.5, 30.0] {
            for y in [1u32, 7, 64] {
                let (lg, dg, tg) = gamma_diffs(y, theta);
                let yt = f64::from(y) + theta;
                assert!((lg - (ln_gamma(yt) - ln_gamma(theta))).abs() < 1e-9);
                assert!((dg - (digamma(yt) - digamma(theta))).abs() < 1e-9);
                assert!((tg - (trigamma(yt) - trigamma(theta))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn nb_pmf_sums_to_one() {
        for &(mu, theta) in &[(0.5f64, 0.3), (5.0, 1.5), (20.0, 100.0)] {
            let total: f64 = (0..2000).map(|y| nb_log_pmf(y, mu.ln(), theta).exp()).sum();
            assert!((total - 1.0).abs() < 1e-10, "mu={mu} theta={theta} total={total}");
        }
    }

    #[test]
    fn nb_pmf_zero_is_closed_form() {
        let (mu, theta) = (2.0f64, 0.75f64);
        let p0 = (theta / (theta + mu)).powf(theta);
        assert!((nb_log_pmf(0, mu.ln(), theta) - p0.ln()).abs() < 1e-14);
    }

    #[test]
    fn stable_helpers() {
        assert_eq!(log1pexp(1000.0), 1000.0);
        assert!((log1pexp(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((logistic(-800.0)).abs() < 1e-300);
        assert!((logsumexp(0.5f64.ln(), 0.125f64.ln()) - 0.625f64.ln()).abs() < 1e-15);
        assert!((logit(0.25) + 3f64.ln()).abs() < 1e-15);
    }
}
