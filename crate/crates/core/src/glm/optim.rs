//! Log-likelihoods with analytic derivatives and a damped Newton driver.

use nalgebra::{DMatrix, DVector};

use super::design::{dot, DesignMatrix};
use super::linalg::{max_abs, solve_spd};
use super::special::{gamma_diffs, ln_factorial, log1pexp, logistic, logsumexp};

/// Concave objective in a flat parameter vector.
pub(crate) trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, p: &DVector<f64>) -> f64;
    /// Value, gradient and negative Hessian.
    fn derivs(&self, p: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>);
    /// Maps a trial point back into the admissible region.
    fn clamp(&self, _p: &mut DVector<f64>) {}
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub params: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    pub info: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton ascent with Levenberg damping and step halving. `stop` is checked
/// after every accepted step and ends the run early when it returns true.
pub(crate) fn newton<O: Objective>(
    obj: &O,
    start: DVector<f64>,
    max_iter: usize,
    tol: f64,
    stop: impl Fn(&DVector<f64>) -> bool,
) -> NewtonOutcome {
    let mut params = start;
    obj.clamp(&mut params);
    let (mut value, mut grad, mut info) = obj.derivs(&params);
    let mut lambda = 0.0f64;
    let mut iterations = 0;
    while iterations < max_iter {
        if max_abs(&grad) <= tol {
            break;
        }
        let Some(next) = damped_step(obj, &params, value, &grad, &info, &mut lambda) else {
            break;
        };
        params = next;
        iterations += 1;
        (value, grad, info) = obj.derivs(&params);
        if stop(&params) {
            break;
        }
    }
    let converged = max_abs(&grad) <= tol && value.is_finite();
    NewtonOutcome {
        params,
        value,
        grad,
        info,
        iterations,
        converged,
    }
}

fn damped_step<O: Objective>(
    obj: &O,
    params: &DVector<f64>,
    value: f64,
    grad: &DVector<f64>,
    info: &DMatrix<f64>,
    lambda: &mut f64,
) -> Option<DVector<f64>> {
    let n = params.len();
    let diag: Vec<f64> = (0..n).map(|i| info[(i, i)].abs().max(1e-8)).collect();
    let slack = 1e-12 * (1.0 + value.abs());
    while *lambda < 1e12 {
        let mut a = info.clone();
        for (i, d) in diag.iter().enumerate() {
            a[(i, i)] += *lambda * d;
        }
        if let Some(delta) = solve_spd(&a, grad) {
            let mut t = 1.0;
            for _ in 0..30 {
                let mut trial = params + &delta * t;
                obj.clamp(&mut trial);
                let v = obj.value(&trial);
                if v.is_finite() && v >= value - slack && &trial != params {
                    *lambda = if *lambda < 1e-9 { 0.0 } else { *lambda / 10.0 };
                    return Some(trial);
                }
                t *= 0.5;
            }
        }
        *lambda = (*lambda * 10.0).max(1e-6);
    }
    None
}

fn add_outer(m: &mut DMatrix<f64>, off_r: usize, a: &[f64], off_c: usize, b: &[f64], w: f64) {
    if w == 0.0 {
        return;
    }
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let wai = w * ai;
        for (j, &bj) in b.iter().enumerate() {
            m[(off_r + i, off_c + j)] += wai * bj;
        }
    }
}

fn add_scaled(v: &mut DVector<f64>, off: usize, a: &[f64], w: f64) {
    for (i, &ai) in a.iter().enumerate() {
        v[off + i] += w * ai;
    }
}

/// Logistic log-likelihood with soft responses in [0, 1] and an optional
/// ridge term −½·`ridge`·‖β − c‖², where c is zero except for the
/// intercept entry `center`.
pub(crate) struct LogisticObjective<'a> {
    pub x: &'a DesignMatrix,
    pub y: Vec<f64>,
    pub ridge: f64,
    pub center: f64,
}

impl LogisticObjective<'_> {
    fn offset(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut d = p.clone();
        d[0] -= self.center;
        d
    }
}

impl Objective for LogisticObjective<'_> {
    fn dim(&self) -> usize {
        self.x.n_cols()
    }

    fn value(&self, p: &DVector<f64>) -> f64 {
        let beta = p.as_slice();
        let ll: f64 = self
            .x
            .rows()
            .zip(&self.y)
            .map(|(r, &y)| {
                let eta = dot(r, beta);
                y * eta - log1pexp(eta)
            })
            .sum();
        ll - 0.5 * self.ridge * self.offset(p).norm_squared()
    }

    fn derivs(&self, p: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.dim();
        let beta = p.as_slice();
        let mut ll = 0.0;
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for (r, &y) in self.x.rows().zip(&self.y) {
            let eta = dot(r, beta);
            let pi = logistic(eta);
            ll += y * eta - log1pexp(eta);
            add_scaled(&mut g, 0, r, y - pi);
            add_outer(&mut h, 0, r, 0, r, pi * (1.0 - pi));
        }
        let d = self.offset(p);
        ll -= 0.5 * self.ridge * d.norm_squared();
        g -= d * self.ridge;
        for i in 0..k {
            h[(i, i)] += self.ridge;
        }
        (ll, g, h)
    }
}

/// Per-row NB2 log-density and derivatives in (η, α = log θ):
/// (ℓ, ℓ_η, ℓ_ηη, ℓ_α, ℓ_αα, ℓ_ηα).
pub(crate) fn nb_row(y: u32, eta: f64, alpha: f64) -> [f64; 6] {
    let theta = alpha.exp();
    let mu = eta.exp();
    let tm = theta + mu;
    let yf = f64::from(y);
    let (lg, dg, tg) = gamma_diffs(y, theta);
    let log_ratio = -(mu / theta).ln_1p();
    let ll = lg - ln_factorial(y) + theta * log_ratio + yf * (eta - tm.ln());
    let l_eta = theta * (yf - mu) / tm;
    let l_eta2 = -theta * mu * (theta + yf) / (tm * tm);
    let l_th = dg + log_ratio + (mu - yf) / tm;
    let l_th2 = tg + 1.0 / theta - 1.0 / tm - (mu - yf) / (tm * tm);
    let l_a = theta * l_th;
    let l_a2 = theta * theta * l_th2 + theta * l_th;
    let l_ea = theta * mu * (yf - mu) / (tm * tm);
    [ll, l_eta, l_eta2, l_a, l_a2, l_ea]
}

/// Smallest and largest log θ the fitters will visit.
pub(crate) const LOG_THETA_MIN: f64 = -12.0;
pub(crate) const LOG_THETA_MAX: f64 = 13.815_510_557_964_274; // ln 1e6

/// Weighted NB2 log-likelihood over (β, α). With `fixed_alpha` the
/// parameter vector is β alone.
pub(crate) struct NegBinObjective<'a> {
    pub x: &'a DesignMatrix,
    pub y: &'a [u32],
    pub weights: Option<Vec<f64>>,
    pub fixed_alpha: Option<f64>,
}

impl NegBinObjective<'_> {
    fn split<'p>(&self, p: &'p DVector<f64>) -> (&'p [f64], f64) {
        let k = self.x.n_cols();
        match self.fixed_alpha {
            Some(a) => (&p.as_slice()[..k], a),
            None => (&p.as_slice()[..k], p[k]),
        }
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

impl Objective for NegBinObjective<'_> {
    fn dim(&self) -> usize {
        self.x.n_cols() + usize::from(self.fixed_alpha.is_none())
    }

    fn value(&self, p: &DVector<f64>) -> f64 {
        let (beta, alpha) = self.split(p);
        let theta = alpha.exp();
        self.x
            .rows()
            .zip(self.y)
            .enumerate()
            .map(|(i, (r, &y))| {
                let w = self.weight(i);
                if w == 0.0 {
                    0.0
                } else {
                    w * super::special::nb_log_pmf(y, dot(r, beta), theta)
                }
            })
            .sum()
    }

    fn derivs(&self, p: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.x.n_cols();
        let d = self.dim();
        let (beta, alpha) = self.split(p);
        let mut ll = 0.0;
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for (i, (r, &y)) in self.x.rows().zip(self.y).enumerate() {
            let w = self.weight(i);
            if w == 0.0 {
                continue;
            }
            let [l, le, lee, la, laa, lea] = nb_row(y, dot(r, beta), alpha);
            ll += w * l;
            add_scaled(&mut g, 0, r, w * le);
            add_outer(&mut h, 0, r, 0, r, -w * lee);
            if self.fixed_alpha.is_none() {
                g[k] += w * la;
                h[(k, k)] -= w * laa;
                for (j, &rj) in r.iter().enumerate() {
                    h[(j, k)] -= w * lea * rj;
                }
            }
        }
        if self.fixed_alpha.is_none() {
            for j in 0..k {
                h[(k, j)] = h[(j, k)];
            }
        }
        (ll, g, h)
    }

    fn clamp(&self, p: &mut DVector<f64>) {
        if self.fixed_alpha.is_none() {
            let k = self.x.n_cols();
            p[k] = p[k].clamp(LOG_THETA_MIN, LOG_THETA_MAX);
        }
    }
}

/// ZINB log-likelihood over (β, γ, α).
pub(crate) struct ZinbObjective<'a> {
    pub x: &'a DesignMatrix,
    pub z: &'a DesignMatrix,
    pub y: &'a [u32],
}

impl ZinbObjective<'_> {
    fn split<'p>(&self, p: &'p DVector<f64>) -> (&'p [f64], &'p [f64], f64) {
        let kc = self.x.n_cols();
        let kz = self.z.n_cols();
        let s = p.as_slice();
        (&s[..kc], &s[kc..kc + kz], s[kc + kz])
    }

    /// Posterior probability that each zero is an excess zero.
    pub fn excess_weights(&self, p: &DVector<f64>) -> Vec<f64> {
        let (beta, gamma, alpha) = self.split(p);
        let theta = alpha.exp();
        self.x
            .rows()
            .zip(self.z.rows())
            .zip(self.y)
            .map(|((xr, zr), &y)| {
                if y > 0 {
                    return 0.0;
                }
                let zeta = dot(zr, gamma);
                let mu = dot(xr, beta).exp();
                let a = -log1pexp(-zeta);
                let b = -log1pexp(zeta) - theta * (mu / theta).ln_1p();
                (a - logsumexp(a, b)).exp()
            })
            .collect()
    }
}

pub(crate) fn zinb_row_ll(y: u32, eta: f64, zeta: f64, theta: f64) -> f64 {
    if y > 0 {
        -log1pexp(zeta) + super::special::nb_log_pmf(y, eta, theta)
    } else {
        let mu = eta.exp();
        let a = -log1pexp(-zeta);
        let b = -log1pexp(zeta) - theta * (mu / theta).ln_1p();
        logsumexp(a, b)
    }
}

impl Objective for ZinbObjective<'_> {
    fn dim(&self) -> usize {
        self.x.n_cols() + self.z.n_cols() + 1
    }

    fn value(&self, p: &DVector<f64>) -> f64 {
        let (beta, gamma, alpha) = self.split(p);
        let theta = alpha.exp();
        self.x
            .rows()
            .zip(self.z.rows())
            .zip(self.y)
            .map(|((xr, zr), &y)| zinb_row_ll(y, dot(xr, beta), dot(zr, gamma), theta))
            .sum()
    }

    fn derivs(&self, p: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let kc = self.x.n_cols();
        let kz = self.z.n_cols();
        let ka = kc + kz;
        let d = ka + 1;
        let (beta, gamma, alpha) = self.split(p);
        let mut ll = 0.0;
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for ((xr, zr), &y) in self.x.rows().zip(self.z.rows()).zip(self.y) {
            let eta = dot(xr, beta);
            let zeta = dot(zr, gamma);
            let pi = logistic(zeta);
            let [l, be, bee, ba, baa, bea] = nb_row(y, eta, alpha);
            // (g_ζ, g_η, g_α) and the six second derivatives
            let (lrow, gz, ge, ga, hzz, hee, hze, hza, haa, hea);
            if y > 0 {
                lrow = -log1pexp(zeta) + l;
                gz = -pi;
                ge = be;
                ga = ba;
                hzz = -pi * (1.0 - pi);
                hee = bee;
                hze = 0.0;
                hza = 0.0;
                haa = baa;
                hea = bea;
            } else {
                let a = -log1pexp(-zeta);
                let b = -log1pexp(zeta) + l;
                lrow = logsumexp(a, b);
                let w = (a - lrow).exp();
                let ww = w * (1.0 - w);
                gz = w - pi;
                ge = (1.0 - w) * be;
                ga = (1.0 - w) * ba;
                hzz = -pi * (1.0 - pi) + ww;
                hee = (1.0 - w) * bee + ww * be * be;
                hze = -ww * be;
                hza = -ww * ba;
                haa = (1.0 - w) * baa + ww * ba * ba;
                hea = (1.0 - w) * bea + ww * be * ba;
            }
            ll += lrow;
            add_scaled(&mut g, 0, xr, ge);
            add_scaled(&mut g, kc, zr, gz);
            g[ka] += ga;
            add_outer(&mut h, 0, xr, 0, xr, -hee);
            add_outer(&mut h, kc, zr, kc, zr, -hzz);
            add_outer(&mut h, 0, xr, kc, zr, -hze);
            for (j, &v) in xr.iter().enumerate() {
                h[(j, ka)] -= hea * v;
            }
            for (j, &v) in zr.iter().enumerate() {
                h[(kc + j, ka)] -= hza * v;
            }
            h[(ka, ka)] -= haa;
        }
        // only the upper off-diagonal blocks were accumulated
        for i in kc..ka {
            for j in 0..kc {
                h[(i, j)] = h[(j, i)];
            }
        }
        for j in 0..ka {
            h[(ka, j)] = h[(j, ka)];
        }
        (ll, g, h)
    }

    fn clamp(&self, p: &mut DVector<f64>) {
        let k = self.x.n_cols() + self.z.n_cols();
        p[k] = p[k].clamp(LOG_THETA_MIN, LOG_THETA_MAX);
    }
}

/// Log-likelihood and score of a logistic model at `beta`.
pub fn logistic_loglik_score(x: &DesignMatrix, y: &[bool], beta: &[f64]) -> (f64, Vec<f64>) {
    let obj = LogisticObjective {
        x,
        y: y.iter().map(|&b| f64::from(u8::from(b))).collect(),
        ridge: 0.0,
        center: 0.0,
    };
    let (ll, g, _) = obj.derivs(&DVector::from_column_slice(beta));
    (ll, g.iter().copied().collect())
}

/// Log-likelihood and score of an NB2 model at (β, log θ).
pub fn negbin_loglik_score(x: &DesignMatrix, y: &[u32], params: &[f64]) -> (f64, Vec<f64>) {
    let obj = NegBinObjective {
        x,
        y,
        weights: None,
        fixed_alpha: None,
    };
    let (ll, g, _) = obj.derivs(&DVector::from_column_slice(params));
    (ll, g.iter().copied().collect())
}

/// Log-likelihood and score of a ZINB model at (β, γ, log θ).
pub fn zinb_loglik_score(
    x: &DesignMatrix,
    z: &DesignMatrix,
    y: &[u32],
    params: &[f64],
) -> (f64, Vec<f64>) {
    let obj = ZinbObjective { x, z, y };
    let (ll, g, _) = obj.derivs(&DVector::from_column_slice(params));
    (ll, g.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        DesignMatrix::from_rows((0..k).map(|j| format!("x{j}")).collect(), &rows).unwrap()
    }

    fn fd_hessian<O: Objective>(obj: &O, p: &DVector<f64>) -> DMatrix<f64> {
        let d = p.len();
        let h = 1e-5;
        let mut out = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut a = p.clone();
            let mut b = p.clone();
            a[j] += h;
            b[j] -= h;
            let ga = obj.derivs(&a).1;
            let gb = obj.derivs(&b).1;
            for i in 0..d {
                out[(i, j)] = -(ga[i] - gb[i]) / (2.0 * h);
            }
        }
        out
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn zinb_hessian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = design(&mut rng, 60, 2);
        let z = design(&mut rng, 60, 1);
        let y: Vec<u32> = (0..60)
            .map(|i| if i % 3 == 0 { 0 } else { rng.random_range(0..9) })
            .collect();
        let obj = ZinbObjective { x: &x, z: &z, y: &y };
        for _ in 0..10 {
            let p = DVector::from_fn(obj.dim(), |i, _| {
                if i == obj.dim() - 1 {
                    rng.random_range(-1.0..2.0)
                } else {
                    rng.random_range(-1.0..1.0)
                }
            });
            let (_, _, info) = obj.derivs(&p);
            let fd = fd_hessian(&obj, &p);
            for (a, b) in info.iter().zip(fd.iter()) {
                assert!(close(*a, *b, 1e-5), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn negbin_and_logistic_hessians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = design(&mut rng, 50, 2);
        let y: Vec<u32> = (0..50).map(|_| rng.random_range(0..12)).collect();
        let nb = NegBinObjective {
            x: &x,
            y: &y,
            weights: Some((0..50).map(|i| 0.5 + f64::from(i % 3)).collect()),
            fixed_alpha: None,
        };
        let p = DVector::from_vec(vec![1.0, 0.3, -0.2, 0.4]);
        for (a, b) in nb.derivs(&p).2.iter().zip(fd_hessian(&nb, &p).iter()) {
            assert!(close(*a, *b, 1e-5), "{a} vs {b}");
        }
        let lg = LogisticObjective {
            x: &x,
            y: (0..50).map(|i| f64::from(i % 4) / 3.0).collect(),
            ridge: 0.7,
            center: -0.4,
        };
        let p = DVector::from_vec(vec![0.2, -0.5, 1.0]);
        for (a, b) in lg.derivs(&p).2.iter().zip(fd_hessian(&lg, &p).iter()) {
            assert!(close(*a, *b, 1e-5), "{a} vs {b}");
        }
    }

    #[test]
    fn newton_finds_quadratic_maximum() {
        struct Quad;
        impl Objective for Quad {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, p: &DVector<f64>) -> f64 {
                -(p[0] - 1.0).powi(2) - 2.0 * (p[1] + 3.0).powi(2)
            }
            fn derivs(&self, p: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
                let g = DVector::from_vec(vec![-2.0 * (p[0] - 1.0), -4.0 * (p[1] + 3.0)]);
                let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
                (self.value(p), g, h)
            }
        }
        let out = newton(&Quad, DVector::zeros(2), 10, 1e-12, |_| false);
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-12 && (out.params[1] + 3.0).abs() < 1e-12);
        assert_eq!(out.iterations, 1);
    }
}
