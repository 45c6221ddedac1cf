//! Trial data model and the ANCOVA design matrix.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `n` observations of `(W, A, Y)` from a two-arm trial.
///
/// Covariates are stored row-major (`n x k`). Once built the dataset is
/// immutable; every constructor validates that all entries are finite, that
/// arm indicators are 0 or 1 and that both arms are present.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    outcomes: Vec<f64>,
    arms: Vec<u8>,
    covariates: Vec<f64>,
    covariate_names: Vec<String>,
}

impl TrialDataset {
    pub fn new(
        outcomes: Vec<f64>,
        arms: Vec<u8>,
        covariates: Vec<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = outcomes.len();
        let k = covariate_names.len();
        if arms.len() != n {
            return Err(Error::Dimension(format!(
                "{} arm indicators for {n} outcomes",
                arms.len()
            )));
        }
        if covariates.len() != n * k {
            return Err(Error::Dimension(format!(
                "{} covariate values for {n} rows and {k} covariates",
                covariates.len()
            )));
        }
        if let Some(row) = outcomes.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                field: "Y".to_string(),
                row,
            });
        }
        if let Some(row) = arms.iter().position(|&a| a > 1) {
            return Err(Error::ArmValue { row });
        }
        if let Some(idx) = covariates.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite {
                field: covariate_names[idx % k].clone(),
                row: idx / k,
            });
        }
        let treated = arms.iter().filter(|&&a| a == 1).count();
        if treated == 0 {
            return Err(Error::EmptyArm { arm: 1 });
        }
        if treated == n {
            return Err(Error::EmptyArm { arm: 0 });
        }
        Ok(TrialDataset {
            outcomes,
            arms,
            covariates,
            covariate_names,
        })
    }

    /// Builds a dataset from covariate columns rather than rows.
    pub fn from_columns(
        outcomes: Vec<f64>,
        arms: Vec<u8>,
        columns: &[Vec<f64>],
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = outcomes.len();
        if columns.len() != covariate_names.len() || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension(
                "covariate columns do not match names or row count".to_string(),
            ));
        }
        let mut rows = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            rows.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(outcomes, arms, rows, covariate_names)
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn k(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn arms(&self) -> &[u8] {
        &self.arms
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Row-major `n x k` covariate block.
    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        let k = self.k();
        &self.covariates[i * k..(i + 1) * k]
    }

    pub fn covariate_column(&self, j: usize) -> Vec<f64> {
        let k = self.k();
        (0..self.n()).map(|i| self.covariates[i * k + j]).collect()
    }

    /// `(n1, n0)`: treated and control counts.
    pub fn arm_counts(&self) -> (usize, usize) {
        let n1 = self.arms.iter().filter(|&&a| a == 1).count();
        (n1, self.n() - n1)
    }

    /// Sample proportion treated.
    pub fn pi_hat(&self) -> f64 {
        self.arm_counts().0 as f64 / self.n() as f64
    }

    /// Same outcomes and arms with the covariates dropped.
    pub fn without_covariates(&self) -> TrialDataset {
        TrialDataset {
            outcomes: self.outcomes.clone(),
            arms: self.arms.clone(),
            covariates: Vec::new(),
            covariate_names: Vec::new(),
        }
    }
}

/// `n x (k + 2)` regression design with columns `[1, A, W1..Wk]`, stored
/// column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: Vec<f64>,
    nrows: usize,
    column_labels: Vec<String>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.column_labels.len()
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.nrows + row]
    }

    /// Column-major storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub const INTERCEPT_LABEL: &str = "(intercept)";
pub const ARM_LABEL: &str = "A";

/// Raw design for `E(Y | A, W) = b0 + bA A + bW^T W`; no centring or
/// scaling is applied to `W`.
pub fn design_matrix(data: &TrialDataset) -> DesignMatrix {
    let n = data.n();
    let k = data.k();
    let mut values = Vec::with_capacity(n * (k + 2));
    values.extend(core::iter::repeat_n(1.0, n));
    values.extend(data.arms().iter().map(|&a| f64::from(a)));
    for j in 0..k {
        values.extend((0..n).map(|i| data.covariates[i * k + j]));
    }
    let mut column_labels = Vec::with_capacity(k + 2);
    column_labels.push(INTERCEPT_LABEL.to_string());
    column_labels.push(ARM_LABEL.to_string());
    column_labels.extend(data.covariate_names().iter().cloned());
    DesignMatrix {
        values,
        nrows: n,
        column_labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|j| format!("W{j}")).collect()
    }

    #[test]
    fn two_row_design() {
        let d = TrialDataset::new(vec![1.0, 0.0], vec![1, 0], vec![0.2, -0.1], names(1)).unwrap();
        assert_eq!((d.n(), d.k()), (2, 1));
        let x = design_matrix(&d);
        assert_eq!(x.ncols(), 3);
        assert_eq!([x.get(0, 0), x.get(0, 1), x.get(0, 2)], [1.0, 1.0, 0.2]);
        assert_eq!([x.get(1, 0), x.get(1, 1), x.get(1, 2)], [1.0, 0.0, -0.1]);
    }

    #[test]
    fn empty_covariates_give_two_columns() {
        let d = TrialDataset::new(vec![3.0, 1.0, 2.0], vec![1, 0, 1], vec![], vec![]).unwrap();
        let x = design_matrix(&d);
        assert_eq!(x.ncols(), 2);
        assert_eq!(x.column(1), &[1.0, 0.0, 1.0]);
        assert_eq!(x.column_labels(), &["(intercept)".to_string(), "A".to_string()]);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            TrialDataset::new(vec![1.0, 2.0], vec![1, 2], vec![], vec![]),
            Err(Error::ArmValue { row: 1 })
        );
        assert_eq!(
            TrialDataset::new(vec![1.0, 2.0], vec![1, 1], vec![], vec![]),
            Err(Error::EmptyArm { arm: 0 })
        );
        assert_eq!(
            TrialDataset::new(vec![1.0, f64::NAN], vec![1, 0], vec![], vec![]),
            Err(Error::NonFinite {
                field: "Y".to_string(),
                row: 1
            })
        );
        assert_eq!(
            TrialDataset::new(vec![1.0, 2.0], vec![1, 0], vec![0.0, f64::INFINITY], names(1)),
            Err(Error::NonFinite {
                field: "W1".to_string(),
                row: 1
            })
        );
    }

    proptest! {
        #[test]
        fn design_preserves_rows(
            rows in prop::collection::vec((-10.0f64..10.0, 0u8..2, -5.0f64..5.0, -5.0f64..5.0), 3..40)
        ) {
            let mut rows = rows;
            rows[0].1 = 0;
            rows[1].1 = 1;
            let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let a: Vec<u8> = rows.iter().map(|r| r.1).collect();
            let w: Vec<f64> = rows.iter().flat_map(|r| [r.2, r.3]).collect();
            let d = TrialDataset::new(y, a.clone(), w, names(2)).unwrap();
            let x = design_matrix(&d);
            prop_assert_eq!(x.ncols(), d.k() + 2);
            prop_assert_eq!(x.column(0).iter().sum::<f64>(), d.n() as f64);
            let arm_col: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
            prop_assert_eq!(x.column(1), &arm_col[..]);
            for (i, r) in rows.iter().enumerate() {
                prop_assert_eq!(x.get(i, 2), r.2);
                prop_assert_eq!(x.get(i, 3), r.3);
            }
        }
    }
}
