//! Error metrics and the common forecast result record.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Root-mean-square error between two equal-length sequences.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// One forecast value with its calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub date: NaiveDate,
    pub value: f64,
}

/// In-sample fit plus multi-step horizon forecasts for one candidate.
///
/// `fitted` is aligned one-to-one with the in-sample dates; entries are
/// `None` during the model's warmup (e.g. the first `window` days of a lag
/// model) where no one-step-ahead prediction exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub dates: Vec<NaiveDate>,
    pub fitted: Vec<Option<f64>>,
    /// actual − fitted, `None` where fitted is undefined.
    pub residuals: Vec<Option<f64>>,
    pub horizon: Vec<ForecastPoint>,
    /// RMSE over the defined fitted values; `None` when the model produced
    /// no in-sample predictions at all (length-1 input).
    pub rmse_fit: Option<f64>,
    /// Multi-step error over a held-out tail, filled by the panel engine.
    pub rmse_holdout: Option<f64>,
}

impl ForecastResult {
    /// Assembles a result from the in-sample series, fitted values aligned to
    /// its dates, and horizon values continuing the index by +1 day steps.
    pub fn new(
        series: &TimeSeries,
        fitted: Vec<Option<f64>>,
        horizon_values: Vec<f64>,
    ) -> Result<Self> {
        if fitted.len() != series.len() {
            return Err(Error::LengthMismatch {
                expected: series.len(),
                got: fitted.len(),
            });
        }
        if let Some(v) = horizon_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite horizon forecast {v}"
            )));
        }
        let residuals: Vec<Option<f64>> = fitted
            .iter()
            .zip(series.values())
            .map(|(f, a)| f.map(|f| a - f))
            .collect();
        let defined: Vec<(f64, f64)> = fitted
            .iter()
            .zip(series.values())
            .filter_map(|(f, a)| f.map(|f| (f, *a)))
            .collect();
        let rmse_fit = if defined.is_empty() {
            None
        } else {
            let (p, a): (Vec<f64>, Vec<f64>) = defined.into_iter().unzip();
            let v = rmse(&p, &a)?;
            if !v.is_finite() {
                return Err(Error::NumericalFailure("non-finite fit RMSE".into()));
            }
            Some(v)
        };
        let mut horizon = Vec::with_capacity(horizon_values.len());
        let mut d = series.end();
        for v in horizon_values {
            d = d.succ_opt().expect("date overflow");
            horizon.push(ForecastPoint { date: d, value: v });
        }
        Ok(ForecastResult {
            dates: series.dates().to_vec(),
            fitted,
            residuals,
            horizon,
            rmse_fit,
            rmse_holdout: None,
        })
    }

    pub fn horizon_values(&self) -> Vec<f64> {
        self.horizon.iter().map(|p| p.value).collect()
    }
}
