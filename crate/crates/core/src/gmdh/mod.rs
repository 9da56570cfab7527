//! Self-organizing polynomial neural networks built from bivariate quadratic
//! partial descriptions, in two architectures:
//!
//! * **Combi** — exhaustive least-squares fitting over subsets of polynomial
//!   terms, ranked by a validation criterion ([`combi::combi_train`]).
//! * **MIA** — multilayer iterative networks of bi-input neurons whose
//!   outputs feed subsequent layers ([`mia::mia_train`]).
//!
//! Both rank candidates by an external criterion: RMSE on a validation split
//! never touched by the coefficient fits. The corrective-feedback extension
//! augments the inputs with the 1-step-lagged target (a "shadow" of the
//! series) and the 1-step-lagged residuals of the previous training cycle.
//!
//! All training is deterministic: pair and subset enumeration, ranking and
//! tie-breaking are canonically ordered, so identical inputs produce
//! bit-identical models regardless of evaluation order.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lag::{LagMatrix, SplitSpec};
use crate::linalg::least_squares;
use crate::metrics::rmse;
use crate::ml::OneStepModel;

pub mod combi;
pub mod mia;

pub use combi::{combi_train, CombiModel, CombiOptions};
pub use mia::{mia_train, MiaModel, MiaOptions};

/// A GMDH neuron: quadratic polynomial in two inputs, fit by least squares,
/// scored by validation RMSE.
///
/// y = c0 + c1·xi + c2·xj + c3·xi·xj + c4·xi² + c5·xj²
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialDescription {
    /// Indices of the two inputs in the previous layer (or raw features).
    pub inputs: (usize, usize),
    pub coefficients: [f64; 6],
    /// Validation RMSE (the external criterion).
    pub criterion: f64,
}

impl PartialDescription {
    pub fn eval(&self, xi: f64, xj: f64) -> f64 {
        let c = &self.coefficients;
        c[0] + c[1] * xi + c[2] * xj + c[3] * xi * xj + c[4] * xi * xi + c[5] * xj * xj
    }
}

fn quad_design(rows: &[Vec<f64>], pair: (usize, usize)) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let (xi, xj) = (r[pair.0], r[pair.1]);
            vec![1.0, xi, xj, xi * xj, xi * xi, xj * xj]
        })
        .collect()
}

/// Fits one partial description on the training rows and scores it on the
/// validation rows. The least-squares solve runs unridged first; if the
/// normal equations are singular (constant or duplicated inputs), a ridge of
/// 1e-8 relative to each column's energy restores solvability.
pub fn fit_partial_description(
    train_rows: &[Vec<f64>],
    train_targets: &[f64],
    val_rows: &[Vec<f64>],
    val_targets: &[f64],
    pair: (usize, usize),
) -> Result<PartialDescription> {
    if pair.0 == pair.1 {
        return Err(Error::InvalidParameter(
            "partial description inputs must differ".into(),
        ));
    }
    if train_rows.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: train_rows.len(),
        });
    }
    if val_rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let design = quad_design(train_rows, pair);
    let sol = match least_squares(&design, train_targets, &[0.0; 6]) {
        Some(sol) => sol,
        None => {
            let mut ridge = [0.0; 6];
            for row in &design {
                for (r, v) in ridge.iter_mut().zip(row) {
                    *r += v * v;
                }
            }
            for r in &mut ridge {
                *r = 1e-8 * r.max(1.0);
            }
            least_squares(&design, train_targets, &ridge).ok_or_else(|| {
                Error::NumericalFailure("ridge-regularized neuron fit is singular".into())
            })?
        }
    };
    let mut coefficients = [0.0; 6];
    coefficients.copy_from_slice(&sol);
    let pd = PartialDescription {
        inputs: pair,
        coefficients,
        criterion: 0.0,
    };
    let preds: Vec<f64> = val_rows
        .iter()
        .map(|r| pd.eval(r[pair.0], r[pair.1]))
        .collect();
    let criterion = rmse(&preds, val_targets)?;
    if !criterion.is_finite() {
        return Err(Error::NumericalFailure("non-finite neuron criterion".into()));
    }
    Ok(PartialDescription {
        criterion,
        ..pd
    })
}

/// A trained polynomial network of either architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmdhModel {
    Combi(CombiModel),
    Mia(MiaModel),
}

/// Evaluates a trained network on one feature vector.
pub fn pnn_predict(model: &GmdhModel, features: &[f64]) -> Result<f64> {
    match model {
        GmdhModel::Combi(m) => m.predict(features),
        GmdhModel::Mia(m) => m.predict(features),
    }
}

impl GmdhModel {
    pub fn criterion(&self) -> f64 {
        match self {
            GmdhModel::Combi(m) => m.criterion,
            GmdhModel::Mia(m) => *m.trace.last().expect("accepted layer"),
        }
    }
}

impl OneStepModel for GmdhModel {
    fn predict_one(&self, features: &[f64]) -> Result<f64> {
        pnn_predict(self, features)
    }
}

/// Corrective-feedback configuration: which extra inputs are appended and
/// how many training cycles feed residuals back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfConfig {
    /// Append the 1-step-lagged target series as an extra input.
    pub shadow: bool,
    /// Append the 1-step-lagged residuals of the previous training cycle.
    pub residual_feedback: bool,
    pub cycles: usize,
}

impl CfConfig {
    pub fn new(shadow: bool, residual_feedback: bool, cycles: usize) -> Result<Self> {
        if !shadow && !residual_feedback {
            return Err(Error::InvalidParameter(
                "corrective feedback requires at least one of shadow or residual inputs".into(),
            ));
        }
        if cycles < 1 {
            return Err(Error::InvalidParameter(
                "corrective feedback requires at least one cycle".into(),
            ));
        }
        Ok(CfConfig {
            shadow,
            residual_feedback,
            cycles,
        })
    }
}

/// Appends the corrective-feedback columns to a lag matrix: the 1-step-lagged
/// target and/or the 1-step-lagged residual series. The first row is dropped
/// to keep the lagged columns aligned; the residual series must be aligned to
/// the matrix targets (cycle 1 passes all zeros).
pub fn cf_augment(matrix: &LagMatrix, residuals: &[f64], config: &CfConfig) -> Result<LagMatrix> {
    if residuals.len() != matrix.n_rows() {
        return Err(Error::LengthMismatch {
            expected: matrix.n_rows(),
            got: residuals.len(),
        });
    }
    if matrix.n_rows() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: matrix.n_rows(),
        });
    }
    let mut feature_names = matrix.feature_names.clone();
    if config.shadow {
        feature_names.push("shadow[t-1]".into());
    }
    if config.residual_feedback {
        feature_names.push("residual[t-1]".into());
    }
    let mut rows = Vec::with_capacity(matrix.n_rows() - 1);
    for r in 1..matrix.n_rows() {
        let mut row = matrix.rows[r].clone();
        if config.shadow {
            row.push(matrix.targets[r - 1]);
        }
        if config.residual_feedback {
            row.push(residuals[r - 1]);
        }
        rows.push(row);
    }
    Ok(LagMatrix {
        feature_names,
        rows,
        targets: matrix.targets[1..].to_vec(),
        target_dates: matrix.target_dates[1..].to_vec(),
        window: matrix.window,
    })
}

/// Architecture choice plus its options, for corrective-feedback training.
#[derive(Debug, Clone)]
pub enum GmdhArch {
    Combi(CombiOptions),
    Mia(MiaOptions),
}

fn train_arch(matrix: &LagMatrix, split: SplitSpec, arch: &GmdhArch) -> Result<GmdhModel> {
    match arch {
        GmdhArch::Combi(opts) => Ok(GmdhModel::Combi(combi_train(matrix, split, opts)?)),
        GmdhArch::Mia(opts) => Ok(GmdhModel::Mia(mia_train(matrix, split, opts)?)),
    }
}

/// A polynomial network trained with corrective feedback, together with what
/// forecasting needs: the final in-sample predictions and the residual of the
/// most recent one-step prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnnCfModel {
    pub model: GmdhModel,
    pub config: CfConfig,
    /// 1-based index of the cycle whose validation criterion won.
    pub best_cycle: usize,
    pub criterion: f64,
    /// One-step in-sample predictions over the augmented rows.
    pub insample: Vec<f64>,
    pub insample_dates: Vec<NaiveDate>,
    /// Residual of the last in-sample prediction; seeds the residual input
    /// at forecast time (later steps use zero, actuals being unknown).
    pub last_residual: f64,
}

/// Trains the chosen architecture for `config.cycles` cycles, feeding each
/// cycle the lagged residuals of the previous one, and returns the cycle with
/// the best validation criterion (ties resolve to the earlier cycle).
pub fn pnn_cf_train(
    matrix: &LagMatrix,
    split: SplitSpec,
    arch: &GmdhArch,
    config: &CfConfig,
) -> Result<PnnCfModel> {
    CfConfig::new(config.shadow, config.residual_feedback, config.cycles)?;
    let mut residuals = vec![0.0; matrix.n_rows()];
    let mut best: Option<PnnCfModel> = None;
    for cycle in 1..=config.cycles {
        let aug = cf_augment(matrix, &residuals, config)?;
        let model = train_arch(&aug, split, arch)?;
        let insample: Vec<f64> = aug
            .rows
            .iter()
            .map(|r| model.predict_one(r))
            .collect::<Result<_>>()?;
        // Residuals aligned to the original matrix rows; the warmup row the
        // augmentation dropped keeps residual 0.
        let mut next_residuals = vec![0.0; matrix.n_rows()];
        for (r, pred) in insample.iter().enumerate() {
            next_residuals[r + 1] = aug.targets[r] - pred;
        }
        let criterion = model.criterion();
        if best.as_ref().map_or(true, |b| criterion < b.criterion) {
            best = Some(PnnCfModel {
                model,
                config: *config,
                best_cycle: cycle,
                criterion,
                last_residual: *next_residuals.last().expect("nonempty"),
                insample,
                insample_dates: aug.target_dates.clone(),
            });
        }
        residuals = next_residuals;
    }
    Ok(best.expect("at least one cycle"))
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

    fn spread_rows(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let a = (i as f64 * 0.7).sin() * 2.0 + 0.3;
                let b = (i as f64 * 1.3).cos() * 1.5 - 0.2;
                vec![a, b]
            })
            .collect()
    }

    #[test]
    fn recovers_generating_quadratic() {
        let rows = spread_rows(12);
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 + 2.0 * r[0] - r[1] + 0.5 * r[0] * r[1])
            .collect();
        let pd = fit_partial_description(&rows[..8], &targets[..8], &rows[8..], &targets[8..], (0, 1))
            .unwrap();
        let expect = [1.0, 2.0, -1.0, 0.5, 0.0, 0.0];
        for (got, want) in pd.coefficients.iter().zip(expect) {
            assert!((got - want).abs() < 1e-6, "{:?}", pd.coefficients);
        }
        assert!(pd.criterion < 1e-6);
    }

    #[test]
    fn identity_mapping() {
        let rows = spread_rows(12);
        let targets: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let pd = fit_partial_description(&rows[..8], &targets[..8], &rows[8..], &targets[8..], (0, 1))
            .unwrap();
        let expect = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in pd.coefficients.iter().zip(expect) {
            assert!((got - want).abs() < 1e-6, "{:?}", pd.coefficients);
        }
    }

    #[test]
    fn constant_input_survives_via_ridge() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![3.0, i as f64 * 0.5]).collect();
        let targets: Vec<f64> = rows.iter().map(|r| 2.0 * r[1] + 1.0).collect();
        let pd = fit_partial_description(&rows[..7], &targets[..7], &rows[7..], &targets[7..], (0, 1))
            .unwrap();
        assert!(pd.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn too_few_training_rows() {
        let rows = spread_rows(3);
        let targets = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            fit_partial_description(&rows[..1], &targets[..1], &rows[1..], &targets[1..], (0, 1)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn cf_config_requires_a_flag() {
        assert!(CfConfig::new(false, false, 1).is_err());
        assert!(CfConfig::new(true, false, 0).is_err());
        assert!(CfConfig::new(false, true, 2).is_ok());
    }

    #[test]
    fn cf_augment_shapes() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let targets: Vec<f64> = (0..6).map(|i| i as f64 + 10.0).collect();
        let m = matrix(rows, targets);
        let both = CfConfig::new(true, true, 1).unwrap();
        let aug = cf_augment(&m, &vec![0.0; 6], &both).unwrap();
        assert_eq!(aug.n_features(), 4);
        assert_eq!(aug.n_rows(), 5);
        // shadow column equals the previous row's target
        assert_eq!(aug.rows[0][2], 10.0);
        assert_eq!(aug.rows[4][2], 14.0);
        // cycle-1 residual column is all zeros
        assert!(aug.rows.iter().all(|r| r[3] == 0.0));

        let residual_only = CfConfig::new(false, true, 1).unwrap();
        let aug1 = cf_augment(&m, &vec![0.0; 6], &residual_only).unwrap();
        assert_eq!(aug1.n_features(), 3);
    }

    #[test]
    fn cf_augment_misaligned_residuals() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let m = matrix(rows, vec![0.0, 1.0, 2.0, 3.0]);
        let cfg = CfConfig::new(true, true, 1).unwrap();
        assert!(matches!(
            cf_augment(&m, &[0.0; 3], &cfg),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
