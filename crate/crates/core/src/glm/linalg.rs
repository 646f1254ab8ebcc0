use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use super::design::DesignMatrix;

/// Eigenvalue ratio of the column-normalized cross-product below which the
/// design is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Solves A x = b for symmetric positive definite A.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    Cholesky::new(a.clone()).map(|c| c.solve(b))
}

/// Inverse of a symmetric positive semidefinite matrix. Falls back to an
/// eigen-decomposition with tiny eigenvalues floored when Cholesky fails.
pub(crate) fn inverse_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut inv = match Cholesky::new(a.clone()) {
        Some(c) => c.inverse(),
        None => {
            let eig = SymmetricEigen::new(a.clone());
            let max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
            let floor = max * 1e-12;
            let d = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
            &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
        }
    };
    symmetrize(&mut inv);
    inv
}

/// Index of a column involved in an exact or near linear dependency, if any.
pub(crate) fn collinear_column(x: &DesignMatrix) -> Option<usize> {
    let p = x.n_cols();
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    for r in x.rows() {
        for i in 0..p {
            let ri = r[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..p {
                xtx[(i, j)] += ri * r[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    let scale: Vec<f64> = (0..p).map(|i| xtx[(i, i)].sqrt()).collect();
    if let Some(j) = scale.iter().position(|&s| s == 0.0) {
        return Some(j);
    }
    for i in 0..p {
        for j in 0..p {
            xtx[(i, j)] /= scale[i] * scale[j];
        }
    }
    let eig = SymmetricEigen::new(xtx);
    let (kmin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let lmax = eig.eigenvalues.amax();
    if lmin > RANK_TOL * lmax {
        return None;
    }
    // the column loading most on the null direction, preferring the last
    let v = eig.eigenvectors.column(kmin);
    let vmax = v.amax();
    (0..p).rev().find(|&j| v[j].abs() >= 0.5 * vmax)
}

pub(crate) fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_matches_cholesky_and_fallback() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = inverse_psd(&a);
        let id = &a * &inv;
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let inv = inverse_psd(&singular);
        assert!(inv.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn detects_duplicated_column() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = f64::from(i);
                vec![a, 2.0 * a + 1.0]
            })
            .collect();
        let x = DesignMatrix::from_rows(vec!["a".into(), "b".into()], &rows).unwrap();
        assert!(collinear_column(&x).is_some());
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i), f64::from(i * i)]).collect();
        let x = DesignMatrix::from_rows(vec!["a".into(), "b".into()], &rows).unwrap();
        assert_eq!(collinear_column(&x), None);
    }
}
