//! ε-insensitive support vector regression trained by sequential minimal
//! optimization with two-threshold bookkeeping.
//!
//! Each training row carries one net multiplier β_i = α_i − α_i* in [−C, C]
//! (the paired multipliers are never simultaneously nonzero). Writing
//! r_i = y_i − Σ_j β_j K_ij, optimality constrains the offset b:
//!
//! ```text
//! β_i = 0      :  r_i − ε ≤ b ≤ r_i + ε      β_i = C  :  b ≤ r_i − ε
//! 0 < β_i < C  :  b = r_i − ε               β_i = −C :  b ≥ r_i + ε
//! −C < β_i < 0 :  b = r_i + ε
//! ```
//!
//! so every row yields an upper bound u_i and/or a lower bound l_i on b.
//! The solver repeatedly selects the maximally violating pair
//! (argmax l_i, argmin u_i), solves that two-variable subproblem exactly
//! (the one-dimensional piecewise-quadratic maximization, with kinks where a
//! multiplier crosses zero), and stops when max l ≤ min u + 2τ.
//!
//! Features are z-scored from the training rows; the scaling is stored with
//! the model, so RBF kernels see comparable coordinates at predict time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lag::LagMatrix;
use crate::ml::OneStepModel;

/// Kernel for the regression surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Trained ε-SVR model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Net dual coefficient per training row.
    pub duals: Vec<f64>,
    pub bias: f64,
    pub passes: usize,
    /// Standardized rows with nonzero duals, paired with their coefficient.
    support: Vec<(Vec<f64>, f64)>,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
}

fn snap(v: f64, c: f64) -> f64 {
    let tol = 1e-10 * c.max(1.0);
    if v.abs() <= tol {
        0.0
    } else if (v - c).abs() <= tol {
        c
    } else if (v + c).abs() <= tol {
        -c
    } else {
        v
    }
}

/// Fits with the default KKT tolerance τ = 1e-3.
pub fn svr_fit(matrix: &LagMatrix, c: f64, epsilon: f64, kernel: Kernel) -> Result<SvrModel> {
    svr_fit_with(matrix, c, epsilon, kernel, 1e-3, None)
}

/// Fits with an explicit tolerance and optional pass cap
/// (default 10·rows·features, floor 10,000).
pub fn svr_fit_with(
    matrix: &LagMatrix,
    c: f64,
    epsilon: f64,
    kernel: Kernel,
    tolerance: f64,
    max_passes: Option<usize>,
) -> Result<SvrModel> {
    if c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "box constraint C must be positive, got {c}"
        )));
    }
    if epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tube width epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let n = matrix.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let k = matrix.n_features();

    // z-score from the training rows only
    let mut mean = vec![0.0; k];
    let mut std = vec![0.0; k];
    for row in &matrix.rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for row in &matrix.rows {
        for (j, v) in row.iter().enumerate() {
            std[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let rows: Vec<Vec<f64>> = matrix
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - mean[j]) / std[j])
                .collect()
        })
        .collect();
    let y = &matrix.targets;

    let gram: Vec<f64> = {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = kernel.eval(&rows[i], &rows[j]);
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        g
    };

    let mut beta = vec![0.0; n];
    let mut r: Vec<f64> = y.clone();
    let cap = max_passes.unwrap_or((10 * n * k).max(10_000));
    let mut passes = 0;
    let bias;
    loop {
        // Two-threshold bounds on b.
        let mut b_up = f64::INFINITY;
        let mut i_up = usize::MAX;
        let mut b_low = f64::NEG_INFINITY;
        let mut i_low = usize::MAX;
        for i in 0..n {
            if beta[i] > -c {
                let u = if beta[i] > 0.0 { r[i] - epsilon } else { r[i] + epsilon };
                if u < b_up {
                    b_up = u;
                    i_up = i;
                }
            }
            if beta[i] < c {
                let l = if beta[i] < 0.0 { r[i] + epsilon } else { r[i] - epsilon };
                if l > b_low {
                    b_low = l;
                    i_low = i;
                }
            }
        }
        if b_low <= b_up + 2.0 * tolerance {
            bias = 0.5 * (b_up + b_low);
            break;
        }
        if passes >= cap {
            return Err(Error::NoConvergence { passes });
        }
        passes += 1;

        // Exact maximization of the dual gain along β[i_low] += t, β[i_up] -= t.
        let (il, iu) = (i_low, i_up);
        let eta = gram[il * n + il] + gram[iu * n + iu] - 2.0 * gram[il * n + iu];
        let t_max = (c - beta[il]).min(beta[iu] + c);
        let mut breaks = vec![0.0, t_max];
        if beta[il] < 0.0 && -beta[il] < t_max {
            breaks.push(-beta[il]);
        }
        if beta[iu] > 0.0 && beta[iu] < t_max {
            breaks.push(beta[iu]);
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

        let gain = |t: f64| -> f64 {
            t * (r[il] - r[iu]) - 0.5 * eta * t * t
                - epsilon * ((beta[il] + t).abs() - beta[il].abs())
                - epsilon * ((beta[iu] - t).abs() - beta[iu].abs())
        };
        let mut best_t = 0.0;
        let mut best_gain = 0.0;
        let mut consider = |t: f64| {
            let g = gain(t);
            if g > best_gain {
                best_gain = g;
                best_t = t;
            }
        };
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            consider(b);
            if eta > 1e-12 {
                let mid = 0.5 * (a + b);
                let s_l = if beta[il] + mid >= 0.0 { 1.0 } else { -1.0 };
                let s_u = if beta[iu] - mid >= 0.0 { 1.0 } else { -1.0 };
                let t_star = (r[il] - r[iu] - epsilon * s_l + epsilon * s_u) / eta;
                if t_star > a && t_star < b {
                    consider(t_star);
                }
            }
        }
        if best_gain <= 0.0 || best_t <= 0.0 {
            return Err(Error::NoConvergence { passes });
        }

        let new_l = snap(beta[il] + best_t, c);
        let new_u = snap(beta[iu] - best_t, c);
        let dl = new_l - beta[il];
        let du = new_u - beta[iu];
        beta[il] = new_l;
        beta[iu] = new_u;
        for j in 0..n {
            r[j] -= dl * gram[il * n + j] + du * gram[iu * n + j];
        }
    }

    let support: Vec<(Vec<f64>, f64)> = beta
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > 1e-12 * c.max(1.0))
        .map(|(i, b)| (rows[i].clone(), *b))
        .collect();
    Ok(SvrModel {
        kernel,
        c,
        epsilon,
        tolerance,
        duals: beta,
        bias,
        passes,
        support,
        feature_mean: mean,
        feature_std: std,
    })
}

impl SvrModel {
    pub fn support_count(&self) -> usize {
        self.support.len()
    }
}

impl OneStepModel for SvrModel {
    fn predict_one(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_mean.len() {
            return Err(Error::LengthMismatch {
                expected: self.feature_mean.len(),
                got: features.len(),
            });
        }
        let z: Vec<f64> = features
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.feature_mean[j]) / self.feature_std[j])
            .collect();
        Ok(self.bias
            + self
                .support
                .iter()
                .map(|(sv, b)| b * self.kernel.eval(sv, &z))
                .sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn matrix(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> LagMatrix {
        let n = rows.len();
        let k = rows[0].len();
        LagMatrix {
            feature_names: (0..k).map(|i| format!("f{i}")).collect(),
            rows,
            targets,
            target_dates: (0..n)
                .map(|i| {
                    NaiveDate::from_ymd_opt(2020, 1, 1)
                        .unwrap()
                        .checked_add_days(chrono::Days::new(i as u64))
                        .unwrap()
                })
                .collect(),
            window: 1,
        }
    }

    #[test]
    fn constant_targets_fit_inside_any_tube() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let m = svr_fit(&matrix(rows, vec![4.0; 6]), 10.0, 0.1, Kernel::Linear).unwrap();
        assert!(m.duals.iter().all(|b| *b == 0.0));
        assert!((m.bias - 4.0).abs() < 1e-12);
        assert_eq!(m.support_count(), 0);
        assert!((m.predict_one(&[100.0]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn wide_tube_needs_no_support_vectors() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let targets = vec![1.0, 2.0, 1.5, 1.8, 1.2];
        let m = svr_fit(&matrix(rows, targets), 10.0, 5.0, Kernel::Linear).unwrap();
        assert!(m.duals.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn linear_identity_within_tube() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mat = matrix(rows.clone(), targets.clone());
        let m = svr_fit(&mat, 100.0, 0.01, Kernel::Linear).unwrap();
        for (row, y) in rows.iter().zip(&targets) {
            let pred = m.predict_one(row).unwrap();
            assert!(
                (pred - y).abs() <= 0.01 + 1e-3,
                "pred {pred} vs {y} (|err| = {})",
                (pred - y).abs()
            );
        }
    }

    #[test]
    fn duals_respect_box_and_tube() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.5]).collect();
        let targets: Vec<f64> = (0..12)
            .map(|i| (i as f64 * 0.4).sin() * 2.0 + 0.3 * i as f64)
            .collect();
        let c = 5.0;
        let eps = 0.2;
        let mat = matrix(rows.clone(), targets.clone());
        let m = svr_fit(&mat, c, eps, Kernel::Rbf { gamma: 0.5 }).unwrap();
        for (i, b) in m.duals.iter().enumerate() {
            assert!(
                (-c - 1e-9..=c + 1e-9).contains(b),
                "dual {i} out of box: {b}"
            );
            let resid = targets[i] - m.predict_one(&rows[i]).unwrap();
            if resid.abs() < eps - m.tolerance {
                assert_eq!(*b, 0.0, "row {i} strictly inside tube has dual {b}");
            }
        }
    }

    #[test]
    fn bias_consistent_across_free_support_vectors() {
        let rows: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..15).map(|i| 2.0 * i as f64 + 1.0).collect();
        let c = 50.0;
        let eps = 0.05;
        let mat = matrix(rows.clone(), targets.clone());
        let m = svr_fit(&mat, c, eps, Kernel::Linear).unwrap();
        for (i, b) in m.duals.iter().enumerate() {
            if b.abs() > 1e-9 && b.abs() < c * (1.0 - 1e-9) {
                let r_i = targets[i] - (m.predict_one(&rows[i]).unwrap() - m.bias);
                let b_i = if *b > 0.0 { r_i - eps } else { r_i + eps };
                assert!(
                    (b_i - m.bias).abs() <= 2.0 * m.tolerance,
                    "free sv {i}: {b_i} vs {}",
                    m.bias
                );
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        let mat = matrix(rows, vec![1.0, 2.0, 3.0]);
        assert!(svr_fit(&mat, 0.0, 0.1, Kernel::Linear).is_err());
        assert!(svr_fit(&mat, 1.0, -0.1, Kernel::Linear).is_err());
    }
}
