//! Small-data time-series forecasting toolkit.
//!
//! A panel of independently tuned candidate forecasters — classical
//! econometric models, descriptive baselines, machine-learning regressors,
//! and GMDH polynomial neural networks with corrective feedback — is ranked
//! by RMSE; the winner produces multi-step forecasts from very short series.
//!
//! Candidates fall into five complexity groups, run in priority order from
//! cheapest to heaviest:
//!
//! 5. econometric smoothers and ARIMA ([`classical`], [`arima`])
//! 4. descriptive statistics ([`series::descriptive_stats`])
//! 3. light-weight regressors over lag features ([`ml::ols`], [`ml::tree`])
//! 2. support vector regression ([`ml::svr`])
//! 1. polynomial networks with multi-source subset search ([`gmdh`])
//!
//! The [`panel`] module runs the competition; [`ingest`], [`report`] and
//! [`plot`] provide the CSV-in / JSON+TSV+SVG-out batch front end used by
//! the `grooms` binary.

pub mod arima;
pub mod classical;
pub mod error;
pub mod gmdh;
pub mod ingest;
pub mod lag;
pub mod linalg;
pub mod metrics;
pub mod ml;
pub mod optim;
pub mod panel;
pub mod plot;
pub mod report;
pub mod series;

pub use error::{Error, Result};
pub use lag::{build_lag_matrix, LagMatrix, SplitMode, SplitSpec};
pub use metrics::{rmse, ForecastPoint, ForecastResult};
pub use series::{descriptive_stats, DescriptiveStats, EpidemicPanel, TimeSeries};
