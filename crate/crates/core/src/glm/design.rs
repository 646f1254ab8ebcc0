use nalgebra::DVector;

use super::GlmError;

pub const INTERCEPT: &str = "(Intercept)";

/// Dense row-major design matrix. Column 0 is always the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
}

impl DesignMatrix {
    /// `names` excludes the intercept; each row in `data` likewise.
    pub fn new(names: Vec<String>, n_rows: usize, data: Vec<f64>) -> Result<Self, GlmError> {
        let p = names.len();
        if data.len() != n_rows * p {
            return Err(GlmError::Dimension(format!(
                "expected {} values for {n_rows}x{p}, got {}",
                n_rows * p,
                data.len()
            )));
        }
        let mut full = Vec::with_capacity(n_rows * (p + 1));
        for row in data.chunks(p.max(1)).take(n_rows) {
            full.push(1.0);
            if p > 0 {
                full.extend_from_slice(row);
            }
        }
        let mut all = vec![INTERCEPT.to_string()];
        all.extend(names);
        Self::with_intercept(all, n_rows, full)
    }

    /// `names[0]` must be the intercept and every row must start with 1.
    pub fn with_intercept(
        names: Vec<String>,
        n_rows: usize,
        data: Vec<f64>,
    ) -> Result<Self, GlmError> {
        let p = names.len();
        if p == 0 || names[0] != INTERCEPT {
            return Err(GlmError::Dimension("column 0 must be the intercept".into()));
        }
        if data.len() != n_rows * p {
            return Err(GlmError::Dimension(format!(
                "expected {} values for {n_rows}x{p}, got {}",
                n_rows * p,
                data.len()
            )));
        }
        for (i, row) in data.chunks(p).enumerate() {
            if row[0] != 1.0 {
                return Err(GlmError::Dimension(format!("row {i}: intercept is not 1")));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(GlmError::Dimension(format!(
                    "row {i}, column `{}`: non-finite entry",
                    names[j]
                )));
            }
        }
        Ok(DesignMatrix {
            names,
            data,
            n_rows,
        })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, GlmError> {
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(GlmError::Dimension("ragged rows".into()));
        }
        Self::new(names, rows.len(), data)
    }

    pub fn intercept_only(n_rows: usize) -> Self {
        DesignMatrix {
            names: vec![INTERCEPT.to_string()],
            data: vec![1.0; n_rows],
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn dot_row(&self, i: usize, beta: &[f64]) -> f64 {
        dot(self.row(i), beta)
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(r, beta)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DesignMatrix {
            names: self.names.clone(),
            data,
            n_rows: idx.len(),
        }
    }

    /// Copy with a subset of columns; `cols` must start with 0.
    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        assert_eq!(cols.first(), Some(&0), "intercept must be kept");
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&j| r[j]));
        }
        DesignMatrix {
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            data,
            n_rows: self.n_rows,
        }
    }

    /// Columns other than the intercept that take a single value.
    pub fn constant_columns(&self) -> Vec<usize> {
        (1..self.n_cols())
            .filter(|&j| {
                let first = self.data.get(j).copied();
                self.rows().all(|r| Some(r[j]) == first)
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_with_intercept() {
        let x = DesignMatrix::from_rows(vec!["a".into()], &[vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(x.n_cols(), 2);
        assert_eq!(x.row(1), &[1.0, 3.0]);
        assert_eq!(x.names()[0], INTERCEPT);
        assert_eq!(x.linear_predictor(&[1.0, 2.0]), vec![5.0, 7.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DesignMatrix::new(vec!["a".into()], 2, vec![1.0]).is_err());
        assert!(DesignMatrix::new(vec!["a".into()], 1, vec![f64::NAN]).is_err());
        assert!(DesignMatrix::with_intercept(vec!["x".into()], 1, vec![1.0]).is_err());
        assert!(DesignMatrix::with_intercept(vec![INTERCEPT.into()], 1, vec![2.0]).is_err());
    }

    #[test]
    fn subsets() {
        let x = DesignMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![2.0, 5.0], vec![3.0, 5.0], vec![4.0, 5.0]],
        )
        .unwrap();
        assert_eq!(x.constant_columns(), vec![2]);
        let s = x.select_rows(&[2, 0]).select_columns(&[0, 1]);
        assert_eq!(s.n_rows(), 2);
        assert_eq!(s.row(0), &[1.0, 4.0]);
        assert_eq!(s.names(), &[INTERCEPT.to_string(), "a".to_string()]);
    }
}
