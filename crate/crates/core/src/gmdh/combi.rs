//! Combinatorial GMDH: every nonempty subset of a monomial term pool is fit
//! by least squares on the training rows and scored on the validation rows;
//! the subset with the lowest criterion wins. Ties go to the smaller subset,
//! then to the lexicographically earlier term list.
//!
//! The pool holds all monomials of the input features up to the degree cap
//! (the constant term is always included in every fit). Enumerating 2^pool
//! subsets is exact, so the pool is guarded by a hard budget: exceeding it
//! fails loudly rather than sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lag::{LagMatrix, SplitSpec};
use crate::linalg::{cholesky_in_place, cholesky_solve};

#[derive(Debug, Clone, Copy)]
pub struct CombiOptions {
    /// Maximum total degree of pool monomials.
    pub degree: usize,
    /// Maximum number of subsets the exhaustive search may enumerate.
    pub budget: u128,
}

impl Default for CombiOptions {
    fn default() -> Self {
        CombiOptions {
            degree: 2,
            budget: 1 << 20,
        }
    }
}

/// Selected polynomial: constant plus one coefficient per retained term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombiModel {
    /// Monomials as sorted feature-index multisets (e.g. `[0, 1]` = x0·x1).
    pub terms: Vec<Vec<u16>>,
    /// `[constant, coefficient per term]`, in z-score space.
    pub coefficients: Vec<f64>,
    /// Validation RMSE of the winning subset, on the raw target scale.
    pub criterion: f64,
    pub n_features: usize,
    /// The polynomial operates on z-scored inputs and target; the scaling
    /// is part of the model (see the note on [`super::mia::MiaModel`]).
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

/// All monomials of total degree 1..=degree over `n_features` inputs,
/// ordered by degree then lexicographically.
pub fn term_pool(n_features: usize, degree: usize) -> Vec<Vec<u16>> {
    let mut pool = Vec::new();
    let mut current: Vec<Vec<u16>> = vec![vec![]];
    for _ in 1..=degree {
        let mut next = Vec::new();
        for m in &current {
            let start = m.last().copied().unwrap_or(0);
            for f in start..n_features as u16 {
                let mut v = m.clone();
                v.push(f);
                next.push(v);
            }
        }
        pool.extend(next.iter().cloned());
        current = next;
    }
    pool
}

fn eval_term(term: &[u16], features: &[f64]) -> f64 {
    term.iter().map(|&i| features[i as usize]).product()
}

pub fn combi_train(matrix: &LagMatrix, split: SplitSpec, opts: &CombiOptions) -> Result<CombiModel> {
    let k = matrix.n_features();
    if k == 0 {
        return Err(Error::InsufficientFeatures { got: 0 });
    }
    let pool = term_pool(k, opts.degree);
    let p = pool.len();
    let required: u128 = if p < 127 { 1u128 << p } else { u128::MAX };
    if p > 63 || required > opts.budget {
        return Err(Error::BudgetExceeded {
            required,
            budget: opts.budget,
        });
    }

    let (train, val) = matrix.split(split)?;
    let (input_mean, input_std) = super::mia::column_scaling(&train.rows, k);
    let (target_mean, target_std) = super::mia::scalar_scaling(&train.targets);
    let zscore = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, v)| (v - input_mean[j]) / input_std[j])
                    .collect()
            })
            .collect()
    };
    let train_rows = zscore(&train.rows);
    let val_rows = zscore(&val.rows);
    let train_targets: Vec<f64> = train
        .targets
        .iter()
        .map(|v| (v - target_mean) / target_std)
        .collect();
    let val_targets: Vec<f64> = val
        .targets
        .iter()
        .map(|v| (v - target_mean) / target_std)
        .collect();
    let n_tr = train.n_rows();
    let n_val = val.n_rows();
    let cols = p + 1; // constant column first

    // Term values, training columns and validation rows.
    let mut tv_train = vec![0.0; cols * n_tr];
    for r in 0..n_tr {
        tv_train[r] = 1.0;
    }
    for (t, term) in pool.iter().enumerate() {
        for (r, row) in train_rows.iter().enumerate() {
            tv_train[(t + 1) * n_tr + r] = eval_term(term, row);
        }
    }
    let mut tv_val = vec![0.0; n_val * cols];
    for (r, row) in val_rows.iter().enumerate() {
        tv_val[r * cols] = 1.0;
        for (t, term) in pool.iter().enumerate() {
            tv_val[r * cols + t + 1] = eval_term(term, row);
        }
    }

    // Full Gram and right-hand side over the entire pool, gathered per subset.
    let mut gram = vec![0.0; cols * cols];
    let mut rhs = vec![0.0; cols];
    for a in 0..cols {
        let col_a = &tv_train[a * n_tr..(a + 1) * n_tr];
        rhs[a] = col_a
            .iter()
            .zip(&train_targets)
            .map(|(v, y)| v * y)
            .sum();
        for b in 0..=a {
            let col_b = &tv_train[b * n_tr..(b + 1) * n_tr];
            let dot: f64 = col_a.iter().zip(col_b).map(|(x, y)| x * y).sum();
            gram[a * cols + b] = dot;
            gram[b * cols + a] = dot;
        }
    }

    struct Best {
        criterion: f64,
        terms: Vec<u16>,
        coefficients: Vec<f64>,
    }
    let mut best: Option<Best> = None;
    let mut sel: Vec<usize> = Vec::with_capacity(cols);
    let mut sub = vec![0.0; cols * cols];
    let mut coef = vec![0.0; cols];

    for mask in 1u64..(1u64 << p) {
        sel.clear();
        sel.push(0);
        let mut bits = mask;
        while bits != 0 {
            sel.push(bits.trailing_zeros() as usize + 1);
            bits &= bits - 1;
        }
        let ks = sel.len();
        for (ai, &a) in sel.iter().enumerate() {
            coef[ai] = rhs[a];
            for (bi, &b) in sel.iter().take(ai + 1).enumerate() {
                sub[ai * ks + bi] = gram[a * cols + b];
            }
        }
        // Rank-deficient subsets (duplicated or zero columns) are skipped.
        if !cholesky_in_place(&mut sub[..ks * ks], ks, 1e-12) {
            continue;
        }
        cholesky_solve(&sub[..ks * ks], ks, &mut coef[..ks]);

        let mut se = 0.0;
        for r in 0..n_val {
            let row = &tv_val[r * cols..(r + 1) * cols];
            let pred: f64 = sel.iter().zip(&coef[..ks]).map(|(&a, c)| c * row[a]).sum();
            let d = pred - val_targets[r];
            se += d * d;
        }
        // raw-scale criterion; a positive rescaling, so ranking is unchanged
        let criterion = (se / n_val as f64).sqrt() * target_std;
        if !criterion.is_finite() {
            continue;
        }

        let better = match &best {
            None => true,
            Some(b) => {
                criterion < b.criterion
                    || (criterion == b.criterion && {
                        let size = ks - 1;
                        let terms: Vec<u16> =
                            sel[1..].iter().map(|&a| (a - 1) as u16).collect();
                        size < b.terms.len() || (size == b.terms.len() && terms < b.terms)
                    })
            }
        };
        if better {
            best = Some(Best {
                criterion,
                terms: sel[1..].iter().map(|&a| (a - 1) as u16).collect(),
                coefficients: coef[..ks].to_vec(),
            });
        }
    }

    let best = best.ok_or_else(|| {
        Error::NumericalFailure("every term subset was rank-deficient".into())
    })?;
    Ok(CombiModel {
        terms: best
            .terms
            .iter()
            .map(|&t| pool[t as usize].clone())
            .collect(),
        coefficients: best.coefficients,
        criterion: best.criterion,
        n_features: k,
        input_mean,
        input_std,
        target_mean,
        target_std,
    })
}

impl CombiModel {
    /// Evaluates the selected polynomial.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        let z: Vec<f64> = features
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.input_mean[j]) / self.input_std[j])
            .collect();
        let mut v = self.coefficients[0];
        for (term, c) in self.terms.iter().zip(&self.coefficients[1..]) {
            v += c * eval_term(term, &z);
        }
        Ok(v * self.target_std + self.target_mean)
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
    fn pool_sizes() {
        assert_eq!(term_pool(4, 1).len(), 4);
        assert_eq!(term_pool(2, 2).len(), 5); // x0, x1, x0², x0x1, x1²
        assert_eq!(term_pool(5, 2).len(), 20);
        assert_eq!(
            term_pool(2, 2),
            vec![vec![0], vec![1], vec![0, 0], vec![0, 1], vec![1, 1]]
        );
    }

    #[test]
    fn identity_target_selects_single_term() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.77).sin() * 3.0]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let m = matrix(rows, targets);
        let model = combi_train(
            &m,
            SplitSpec::default(),
            &CombiOptions {
                degree: 1,
                ..CombiOptions::default()
            },
        )
        .unwrap();
        assert_eq!(model.terms, vec![vec![0]]);
        assert!(model.criterion < 1e-9, "criterion {}", model.criterion);
        assert!((model.coefficients[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exceeded_for_large_pools() {
        // 25 degree-1 terms over 25 features
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| (0..25).map(|j| ((i * j) as f64 * 0.1).sin()).collect())
            .collect();
        let targets: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let m = matrix(rows, targets);
        let err = combi_train(
            &m,
            SplitSpec::default(),
            &CombiOptions {
                degree: 1,
                budget: 1 << 20,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn quadratic_recovery() {
        let rows: Vec<Vec<f64>> = (0..14)
            .map(|i| vec![(i as f64 * 0.9).sin(), (i as f64 * 0.4).cos()])
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| 2.0 - r[0] + 0.5 * r[0] * r[1])
            .collect();
        let m = matrix(rows.clone(), targets.clone());
        let model = combi_train(&m, SplitSpec::default(), &CombiOptions::default()).unwrap();
        assert!(model.criterion < 1e-9, "criterion {}", model.criterion);
        // Fitted values reproduce the least-squares predictions.
        for (row, y) in rows.iter().zip(&targets) {
            assert!((model.predict(row).unwrap() - y).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicate_columns_are_skipped_not_fatal() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let v = (i as f64 * 0.6).sin();
                vec![v, v]
            })
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let m = matrix(rows, targets);
        let model = combi_train(
            &m,
            SplitSpec::default(),
            &CombiOptions {
                degree: 1,
                ..CombiOptions::default()
            },
        )
        .unwrap();
        // Only the singleton subsets are feasible; either recovers the line.
        assert_eq!(model.terms.len(), 1);
        assert!(model.criterion < 1e-9);
    }

    #[test]
    fn training_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|i| vec![(i as f64 * 0.3).sin(), (i as f64 * 0.8).cos()])
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] * r[1] + 0.2 * r[0]).collect();
        let m = matrix(rows, targets);
        let a = combi_train(&m, SplitSpec::default(), &CombiOptions::default()).unwrap();
        let b = combi_train(&m, SplitSpec::default(), &CombiOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
