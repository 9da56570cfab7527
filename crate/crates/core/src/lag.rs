//! Supervised lag embedding: design matrices of lagged values with a
//! one-step-ahead target, and train/validation splitting.
//!
//! Feature layout is deterministic: lags 1..window of the target series
//! first, then lags 1..window of each auxiliary source in sorted category
//! order. Row `r` predicts the target at time `window + r`, and every
//! feature of that row references a strictly earlier time step.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::EpidemicPanel;

/// Lag-embedded design matrix with one-step-ahead targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Dates of the target values, one per row.
    pub target_dates: Vec<NaiveDate>,
    /// Lag depth used to build the matrix.
    pub window: usize,
}

impl LagMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Matrix without its first `n` rows; used to align comparisons against
    /// matrices whose warmup rows were dropped by feedback augmentation.
    pub fn drop_first_rows(&self, n: usize) -> Result<LagMatrix> {
        if n >= self.n_rows() {
            return Err(Error::InsufficientData {
                needed: n + 1,
                got: self.n_rows(),
            });
        }
        Ok(LagMatrix {
            feature_names: self.feature_names.clone(),
            rows: self.rows[n..].to_vec(),
            targets: self.targets[n..].to_vec(),
            target_dates: self.target_dates[n..].to_vec(),
            window: self.window,
        })
    }

    /// Rows gathered by index, preserving order.
    fn take(&self, idx: &[usize]) -> LagMatrix {
        LagMatrix {
            feature_names: self.feature_names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            target_dates: idx.iter().map(|&i| self.target_dates[i]).collect(),
            window: self.window,
        }
    }

    /// Splits rows into train and validation parts.
    pub fn split(&self, spec: SplitSpec) -> Result<(LagMatrix, LagMatrix)> {
        let (train, val) = split_indices(self.n_rows(), spec)?;
        Ok((self.take(&train), self.take(&val)))
    }
}

/// How validation rows are drawn from a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Last ceil(fraction * n) rows are the validation part.
    Tail,
    /// Every k-th row (k = round(1/fraction), at least 2) is validation.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fraction: f64,
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fraction: 0.25,
            mode: SplitMode::Tail,
        }
    }
}

/// Exact partition of `0..n` into (train, validation) index sets.
pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "holdout fraction must be in (0,1), got {}",
            spec.fraction
        )));
    }
    if n == 0 {
        return Err(Error::DegenerateSplit("no rows to split".into()));
    }
    let (train, val): (Vec<usize>, Vec<usize>) = match spec.mode {
        SplitMode::Tail => {
            let v = (spec.fraction * n as f64).ceil() as usize;
            ((0..n.saturating_sub(v)).collect(), (n.saturating_sub(v)..n).collect())
        }
        SplitMode::Interleaved => {
            let k = ((1.0 / spec.fraction).round() as usize).max(2);
            let val: Vec<usize> = (0..n).filter(|i| i % k == k - 1).collect();
            let train: Vec<usize> = (0..n).filter(|i| i % k != k - 1).collect();
            (train, val)
        }
    };
    if train.is_empty() || val.is_empty() {
        return Err(Error::DegenerateSplit(format!(
            "{} train / {} validation rows from n={n}, fraction={}",
            train.len(),
            val.len(),
            spec.fraction
        )));
    }
    Ok((train, val))
}

/// Resolves the feature source order: target first, then the remaining
/// requested sources sorted by category name.
pub fn ordered_sources(target: &str, sources: &BTreeSet<String>) -> Vec<String> {
    let mut out = vec![target.to_string()];
    for s in sources {
        if s != target {
            out.push(s.clone());
        }
    }
    out
}

/// Builds the lag-embedded design matrix for `target` given auxiliary
/// `sources` drawn from the same panel.
pub fn build_lag_matrix(
    panel: &EpidemicPanel,
    target: &str,
    sources: &BTreeSet<String>,
    window: usize,
) -> Result<LagMatrix> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    let target_series = panel.get(target)?;
    for s in sources {
        panel.get(s)?;
    }
    let len = target_series.len();
    if window >= len {
        return Err(Error::InsufficientData {
            needed: window + 1,
            got: len,
        });
    }

    let order = ordered_sources(target, sources);
    let mut feature_names = Vec::with_capacity(order.len() * window);
    for name in &order {
        for lag in 1..=window {
            feature_names.push(format!("{name}[t-{lag}]"));
        }
    }

    let columns: Vec<&[f64]> = order
        .iter()
        .map(|name| panel.get(name).expect("validated").values())
        .collect();

    let mut rows = Vec::with_capacity(len - window);
    let mut targets = Vec::with_capacity(len - window);
    let mut target_dates = Vec::with_capacity(len - window);
    for t in window..len {
        let mut row = Vec::with_capacity(feature_names.len());
        for col in &columns {
            for lag in 1..=window {
                row.push(col[t - lag]);
            }
        }
        rows.push(row);
        targets.push(target_series.values()[t]);
        target_dates.push(target_series.dates()[t]);
    }

    Ok(LagMatrix {
        feature_names,
        rows,
        targets,
        target_dates,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use chrono::NaiveDate;

    fn panel(values: &[(&str, &[f64])]) -> EpidemicPanel {
        let start = NaiveDate::from_ymd_opt(2020, 1, 21).unwrap();
        EpidemicPanel::new(
            values
                .iter()
                .map(|(n, v)| TimeSeries::from_start(*n, start, v.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn target_only_window_two() {
        let p = panel(&[("x", &[1.0, 2.0, 3.0, 4.0])]);
        let m = build_lag_matrix(&p, "x", &set(&[]), 2).unwrap();
        assert_eq!(m.rows, vec![vec![2.0, 1.0], vec![3.0, 2.0]]);
        assert_eq!(m.targets, vec![3.0, 4.0]);
        assert_eq!(m.feature_names, vec!["x[t-1]", "x[t-2]"]);
    }

    #[test]
    fn one_source_shapes() {
        let xs: Vec<f64> = (0..14).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..14).map(|i| (i * i) as f64).collect();
        let p = panel(&[("suspected", &xs), ("confirmed", &ys)]);
        let m = build_lag_matrix(&p, "suspected", &set(&["confirmed"]), 1).unwrap();
        assert_eq!(m.n_rows(), 13);
        assert_eq!(m.n_features(), 2);
        assert_eq!(m.feature_names, vec!["suspected[t-1]", "confirmed[t-1]"]);
    }

    #[test]
    fn window_too_large() {
        let p = panel(&[("x", &[1.0, 2.0, 3.0])]);
        assert!(matches!(
            build_lag_matrix(&p, "x", &set(&[]), 3),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn unknown_category() {
        let p = panel(&[("x", &[1.0, 2.0, 3.0])]);
        assert!(matches!(
            build_lag_matrix(&p, "x", &set(&["nope"]), 1),
            Err(Error::UnknownCategory(_))
        ));
    }

    #[test]
    fn sources_sorted_target_first() {
        let vals: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let p = panel(&[
            ("suspected", &vals),
            ("confirmed", &vals),
            ("died", &vals),
        ]);
        let m = build_lag_matrix(&p, "suspected", &set(&["died", "confirmed"]), 1).unwrap();
        assert_eq!(
            m.feature_names,
            vec!["suspected[t-1]", "confirmed[t-1]", "died[t-1]"]
        );
    }

    #[test]
    fn tail_split_example() {
        let (train, val) = split_indices(
            12,
            SplitSpec {
                fraction: 0.25,
                mode: SplitMode::Tail,
            },
        )
        .unwrap();
        assert_eq!(train.len(), 9);
        assert_eq!(val, vec![9, 10, 11]);
    }

    #[test]
    fn interleaved_split_example() {
        let (train, val) = split_indices(
            12,
            SplitSpec {
                fraction: 0.5,
                mode: SplitMode::Interleaved,
            },
        )
        .unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(val, vec![1, 3, 5, 7, 9, 11]);
    }

    #[test]
    fn degenerate_split() {
        let err = split_indices(
            2,
            SplitSpec {
                fraction: 0.9,
                mode: SplitMode::Tail,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateSplit(_)));
    }

    #[test]
    fn no_leakage_by_construction() {
        // Plant a sentinel at each time step; no row may contain the
        // sentinel of its own target time or later.
        let vals: Vec<f64> = (0..10).map(|i| (i as f64) * 1000.0).collect();
        let p = panel(&[("x", &vals)]);
        for window in 1..4 {
            let m = build_lag_matrix(&p, "x", &set(&[]), window).unwrap();
            for (r, row) in m.rows.iter().enumerate() {
                let target_time = window + r;
                for v in row {
                    let feature_time = (v / 1000.0) as usize;
                    assert!(feature_time < target_time);
                }
            }
        }
    }
}
