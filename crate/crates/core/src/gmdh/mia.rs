//! Multilayer iterative GMDH: each layer fits a partial description for
//! every unordered pair of the previous layer's outputs, keeps the best F by
//! validation criterion, and stops at the first layer that fails to improve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmdh::{fit_partial_description, PartialDescription};
use crate::lag::{LagMatrix, SplitSpec};

#[derive(Debug, Clone, Copy)]
pub struct MiaOptions {
    /// Neurons kept per layer; `None` uses max(4, feature count), capped at
    /// the pair count.
    pub width: Option<usize>,
    pub max_layers: usize,
    /// Minimum absolute improvement of the best validation criterion a new
    /// layer must deliver to be accepted.
    pub improvement: f64,
}

impl Default for MiaOptions {
    fn default() -> Self {
        MiaOptions {
            width: None,
            max_layers: 10,
            improvement: 1e-9,
        }
    }
}

/// A trained multilayer network. Layer k's neurons reference layer k-1's
/// retained outputs (layer 0 references the raw features); the model output
/// is the best neuron of the last accepted layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaModel {
    pub layers: Vec<Vec<PartialDescription>>,
    pub width: usize,
    /// Index of the output neuron in the final layer (neurons are stored
    /// criterion-ascending, so this is 0).
    pub output: usize,
    pub feature_names: Vec<String>,
    /// Best validation criterion per accepted layer (raw target scale);
    /// strictly decreasing.
    pub trace: Vec<f64>,
    /// Neurons operate on z-scored inputs and target; the scaling is part
    /// of the model. Raw counts make the quadratic design matrices
    /// hopelessly conditioned and the recursion explosive.
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

/// Number of unordered input pairs a layer of `m` features generates.
pub fn pair_count(m: usize) -> usize {
    m * (m.saturating_sub(1)) / 2
}

pub fn mia_train(matrix: &LagMatrix, split: SplitSpec, opts: &MiaOptions) -> Result<MiaModel> {
    let k = matrix.n_features();
    if k < 2 {
        return Err(Error::InsufficientFeatures { got: k });
    }
    let (train, val) = matrix.split(split)?;
    let width = opts.width.unwrap_or_else(|| k.max(4));

    let (input_mean, input_std) = column_scaling(&train.rows, k);
    let (target_mean, target_std) = scalar_scaling(&train.targets);
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
    let ztarget = |t: &[f64]| -> Vec<f64> {
        t.iter().map(|v| (v - target_mean) / target_std).collect()
    };
    let train_targets = ztarget(&train.targets);
    let val_targets = ztarget(&val.targets);

    let mut train_feats: Vec<Vec<f64>> = zscore(&train.rows);
    let mut val_feats: Vec<Vec<f64>> = zscore(&val.rows);
    let mut layers: Vec<Vec<PartialDescription>> = Vec::new();
    let mut trace: Vec<f64> = Vec::new();

    for _ in 0..opts.max_layers {
        let m = train_feats[0].len();
        if m < 2 {
            break;
        }
        let mut candidates: Vec<PartialDescription> = Vec::with_capacity(pair_count(m));
        let mut causes: Vec<String> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                match fit_partial_description(
                    &train_feats,
                    &train_targets,
                    &val_feats,
                    &val_targets,
                    (i, j),
                ) {
                    Ok(pd) => candidates.push(PartialDescription {
                        // report the criterion on the raw target scale
                        criterion: pd.criterion * target_std,
                        ..pd
                    }),
                    Err(e) => causes.push(format!("pair ({i},{j}): {e}")),
                }
            }
        }
        if candidates.is_empty() {
            if layers.is_empty() {
                return Err(Error::AllCandidatesFailed { causes });
            }
            break;
        }
        candidates.sort_by(|a, b| {
            a.criterion
                .partial_cmp(&b.criterion)
                .expect("finite criteria")
                .then(a.inputs.cmp(&b.inputs))
        });
        candidates.truncate(width.min(candidates.len()));
        let layer_best = candidates[0].criterion;

        let improved = trace
            .last()
            .map_or(true, |prev| prev - layer_best >= opts.improvement);
        if !improved {
            break;
        }

        // Retained outputs become the next layer's features.
        train_feats = train_feats
            .iter()
            .map(|row| {
                candidates
                    .iter()
                    .map(|pd| pd.eval(row[pd.inputs.0], row[pd.inputs.1]))
                    .collect()
            })
            .collect();
        val_feats = val_feats
            .iter()
            .map(|row| {
                candidates
                    .iter()
                    .map(|pd| pd.eval(row[pd.inputs.0], row[pd.inputs.1]))
                    .collect()
            })
            .collect();
        layers.push(candidates);
        trace.push(layer_best);
    }

    if layers.is_empty() {
        return Err(Error::NumericalFailure(
            "no network layer could be trained".into(),
        ));
    }
    debug_assert!(trace.windows(2).all(|w| w[1] < w[0]));
    Ok(MiaModel {
        layers,
        width,
        output: 0,
        feature_names: matrix.feature_names.clone(),
        trace,
        input_mean,
        input_std,
        target_mean,
        target_std,
    })
}

pub(crate) fn column_scaling(rows: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; k];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; k];
    for r in rows {
        for (j, v) in r.iter().enumerate() {
            std[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    (mean, std)
}

pub(crate) fn scalar_scaling(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std == 0.0 { 1.0 } else { std })
}

impl MiaModel {
    /// Evaluates the network layer by layer along the retained back-trace.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_names.len() {
            return Err(Error::LengthMismatch {
                expected: self.feature_names.len(),
                got: features.len(),
            });
        }
        let mut values: Vec<f64> = features
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.input_mean[j]) / self.input_std[j])
            .collect();
        for layer in &self.layers {
            values = layer
                .iter()
                .map(|pd| pd.eval(values[pd.inputs.0], values[pd.inputs.1]))
                .collect();
        }
        Ok(values[self.output] * self.target_std + self.target_mean)
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

    fn quad_rows(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                vec![
                    (i as f64 * 0.9).sin() + 0.1,
                    (i as f64 * 0.4).cos() * 1.2,
                ]
            })
            .collect();
        let targets = rows
            .iter()
            .map(|r| 0.7 - 1.2 * r[0] + 0.4 * r[1] + 0.9 * r[0] * r[1] - 0.3 * r[0] * r[0])
            .collect();
        (rows, targets)
    }

    #[test]
    fn single_layer_recovers_noise_free_quadratic() {
        let (rows, targets) = quad_rows(18);
        let m = matrix(rows, targets);
        let model = mia_train(&m, SplitSpec::default(), &MiaOptions::default()).unwrap();
        assert_eq!(model.layers.len(), 1);
        assert!(model.trace[0] < 1e-6, "criterion {}", model.trace[0]);
    }

    #[test]
    fn one_feature_rejected() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let m = matrix(rows, (0..10).map(|i| i as f64).collect());
        assert!(matches!(
            mia_train(&m, SplitSpec::default(), &MiaOptions::default()),
            Err(Error::InsufficientFeatures { got: 1 })
        ));
    }

    #[test]
    fn width_one_keeps_single_neuron() {
        assert_eq!(pair_count(3), 3);
        let rows: Vec<Vec<f64>> = (0..14)
            .map(|i| {
                vec![
                    (i as f64 * 0.6).sin(),
                    (i as f64 * 0.3).cos(),
                    (i as f64 * 1.1).sin() * 0.5,
                ]
            })
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| r[0] + r[1] * r[2]).collect();
        let m = matrix(rows, targets);
        let model = mia_train(
            &m,
            SplitSpec::default(),
            &MiaOptions {
                width: Some(1),
                ..MiaOptions::default()
            },
        )
        .unwrap();
        assert_eq!(model.layers[0].len(), 1);
    }

    #[test]
    fn trace_strictly_decreasing() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                vec![
                    (i as f64 * 0.5).sin(),
                    (i as f64 * 0.23).cos(),
                    ((i * i) as f64 * 0.01).sin(),
                ]
            })
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| (r[0] * r[1] + 0.3 * r[2]).tanh() * 2.0)
            .collect();
        let m = matrix(rows, targets);
        let model = mia_train(&m, SplitSpec::default(), &MiaOptions::default()).unwrap();
        for w in model.trace.windows(2) {
            assert!(w[1] < w[0], "trace {:?}", model.trace);
        }
    }

    #[test]
    fn identity_neuron_passes_input_through() {
        let model = MiaModel {
            layers: vec![vec![PartialDescription {
                inputs: (0, 1),
                coefficients: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
                criterion: 0.0,
            }]],
            width: 1,
            output: 0,
            feature_names: vec!["a".into(), "b".into()],
            trace: vec![0.0],
            input_mean: vec![0.0, 0.0],
            input_std: vec![1.0, 1.0],
            target_mean: 0.0,
            target_std: 1.0,
        };
        assert_eq!(model.predict(&[42.0, -1.0]).unwrap(), 42.0);
        assert!(matches!(
            model.predict(&[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let (rows, targets) = quad_rows(16);
        let m = matrix(rows, targets);
        let a = mia_train(&m, SplitSpec::default(), &MiaOptions::default()).unwrap();
        let b = mia_train(&m, SplitSpec::default(), &MiaOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
