//! Ordinary least squares over a lag matrix, with an optional ridge on the
//! weights (never on the intercept).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lag::LagMatrix;
use crate::linalg::least_squares;
use crate::ml::OneStepModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Solves min Σ(y − Xw − b)² + ridge·‖w‖² by normal equations.
pub fn ols_fit(matrix: &LagMatrix, ridge: f64) -> Result<LinearModel> {
    if ridge < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let k = matrix.n_features();
    let design: Vec<Vec<f64>> = matrix
        .rows
        .iter()
        .map(|row| {
            let mut r = Vec::with_capacity(k + 1);
            r.push(1.0);
            r.extend_from_slice(row);
            r
        })
        .collect();
    let mut penalties = vec![ridge; k + 1];
    penalties[0] = 0.0;
    let sol =
        least_squares(&design, &matrix.targets, &penalties).ok_or(Error::SingularSystem)?;
    Ok(LinearModel {
        intercept: sol[0],
        weights: sol[1..].to_vec(),
    })
}

impl OneStepModel for LinearModel {
    fn predict_one(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.weights.len(),
                got: features.len(),
            });
        }
        Ok(self.intercept
            + self
                .weights
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>())
    }
}
