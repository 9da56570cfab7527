//! Machine-learning regressors over lag matrices, plus the recursive
//! multi-step forecasting engine shared by every one-step model.
//!
//! Multi-step forecasts feed each one-step prediction back as a lag input
//! for the next step. Future values of auxiliary sources are unknown at
//! forecast time; they are extended hold-last-value by default, or by each
//! source's own drift when configured.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lag::{build_lag_matrix, ordered_sources};
use crate::metrics::ForecastResult;
use crate::series::EpidemicPanel;

pub mod ols;
pub mod svr;
pub mod tree;

pub use ols::{ols_fit, LinearModel};
pub use svr::{svr_fit, Kernel, SvrModel};
pub use tree::{tree_fit, RegressionTree};

/// A trained one-step-ahead regressor over a fixed feature layout.
pub trait OneStepModel {
    fn predict_one(&self, features: &[f64]) -> Result<f64>;
}

/// How auxiliary source series are extended past the observed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceExtension {
    HoldLast,
    Drift,
}

/// Extra feedback inputs appended at forecast time for corrective-feedback
/// models: the running predicted target ("shadow") and the residual of the
/// most recent one-step prediction (zero once actuals run out).
#[derive(Debug, Clone, Copy)]
pub struct CfRoll {
    pub shadow: bool,
    pub residual: bool,
    pub last_residual: f64,
}

/// Rolls `h` one-step predictions forward, feeding predictions back as lags.
pub(crate) fn roll_horizon(
    model: &dyn OneStepModel,
    panel: &EpidemicPanel,
    target: &str,
    sources: &BTreeSet<String>,
    window: usize,
    h: usize,
    ext: SourceExtension,
    cf: Option<CfRoll>,
) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let order = ordered_sources(target, sources);
    let mut target_vals = panel.get(target)?.values().to_vec();
    if target_vals.len() < window {
        return Err(Error::InsufficientData {
            needed: window,
            got: target_vals.len(),
        });
    }

    // Extend each auxiliary source h steps up front.
    let mut aux: Vec<Vec<f64>> = Vec::with_capacity(order.len().saturating_sub(1));
    for name in order.iter().skip(1) {
        let vals = panel.get(name)?.values();
        let last = *vals.last().expect("nonempty");
        let slope = match ext {
            SourceExtension::HoldLast => 0.0,
            SourceExtension::Drift => {
                if vals.len() >= 2 {
                    (last - vals[0]) / (vals.len() - 1) as f64
                } else {
                    0.0
                }
            }
        };
        let mut v = vals.to_vec();
        for k in 1..=h {
            v.push(last + slope * k as f64);
        }
        aux.push(v);
    }

    let mut out = Vec::with_capacity(h);
    for step in 1..=h {
        let t = target_vals.len();
        let mut features = Vec::new();
        for lag in 1..=window {
            features.push(target_vals[t - lag]);
        }
        for v in &aux {
            for lag in 1..=window {
                features.push(v[t - lag]);
            }
        }
        if let Some(cf) = &cf {
            if cf.shadow {
                features.push(target_vals[t - 1]);
            }
            if cf.residual {
                features.push(if step == 1 { cf.last_residual } else { 0.0 });
            }
        }
        let pred = model.predict_one(&features)?;
        if !pred.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite prediction at step {step}"
            )));
        }
        target_vals.push(pred);
        out.push(pred);
    }
    Ok(out)
}

/// In-sample one-step fit plus an `h`-step recursive forecast for any
/// one-step regressor trained on the matching lag layout.
pub fn recursive_forecast(
    model: &dyn OneStepModel,
    panel: &EpidemicPanel,
    target: &str,
    sources: &BTreeSet<String>,
    window: usize,
    h: usize,
    ext: SourceExtension,
) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let matrix = build_lag_matrix(panel, target, sources, window)?;
    let series = panel.get(target)?;
    let mut fitted = vec![None; series.len()];
    for (r, row) in matrix.rows.iter().enumerate() {
        fitted[window + r] = Some(model.predict_one(row)?);
    }
    let horizon = roll_horizon(model, panel, target, sources, window, h, ext, None)?;
    ForecastResult::new(series, fitted, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use chrono::NaiveDate;

    struct Persistence;
    impl OneStepModel for Persistence {
        fn predict_one(&self, features: &[f64]) -> Result<f64> {
            Ok(features[0])
        }
    }

    struct AddOne;
    impl OneStepModel for AddOne {
        fn predict_one(&self, features: &[f64]) -> Result<f64> {
            Ok(features[0] + 1.0)
        }
    }

    fn panel(values: &[f64]) -> EpidemicPanel {
        EpidemicPanel::new(vec![TimeSeries::from_start(
            "x",
            NaiveDate::from_ymd_opt(2020, 1, 21).unwrap(),
            values.to_vec(),
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn persistence_holds_last_value() {
        let p = panel(&[1.0, 2.0, 10.0]);
        let r = recursive_forecast(
            &Persistence,
            &p,
            "x",
            &BTreeSet::new(),
            1,
            4,
            SourceExtension::HoldLast,
        )
        .unwrap();
        assert_eq!(r.horizon_values(), vec![10.0; 4]);
    }

    #[test]
    fn affine_map_forces_recursion() {
        let p = panel(&[8.0, 9.0, 10.0]);
        let r = recursive_forecast(
            &AddOne,
            &p,
            "x",
            &BTreeSet::new(),
            1,
            6,
            SourceExtension::HoldLast,
        )
        .unwrap();
        assert_eq!(
            r.horizon_values(),
            vec![11.0, 12.0, 13.0, 14.0, 15.0, 16.0]
        );
    }

    #[test]
    fn zero_horizon_rejected() {
        let p = panel(&[1.0, 2.0, 3.0]);
        let err = recursive_forecast(
            &Persistence,
            &p,
            "x",
            &BTreeSet::new(),
            1,
            0,
            SourceExtension::HoldLast,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidHorizon));
    }

    #[test]
    fn forecasts_are_deterministic() {
        let p = panel(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        let run = || {
            recursive_forecast(
                &AddOne,
                &p,
                "x",
                &BTreeSet::new(),
                2,
                5,
                SourceExtension::HoldLast,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
