//! Core data model: daily time series, aligned multi-category panels,
//! differencing and descriptive statistics.
//!
//! Series are strictly daily and gap-free; ingestion rejects gaps instead of
//! imputing. Counts are stored as reals because forecasters produce fractional
//! values and differencing produces negatives. All types are immutable after
//! construction and safe to share across concurrent evaluators.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named, date-indexed sequence of real observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, validating the invariants: at least one point,
    /// finite values, strictly increasing consecutive-day dates.
    pub fn new(name: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::EmptyInput);
        }
        if dates.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: dates.len(),
                got: values.len(),
            });
        }
        for (row, win) in dates.windows(2).enumerate() {
            let expected = win[0].succ_opt().expect("date overflow");
            if win[1] != expected {
                return Err(Error::DateGap {
                    row: row + 1,
                    expected,
                    found: win[1],
                });
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value {v} in series"
            )));
        }
        Ok(Self {
            name: name.into(),
            dates,
            values,
        })
    }

    /// Builds a series from a start date and values, generating consecutive days.
    pub fn from_start(name: impl Into<String>, start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let mut dates = Vec::with_capacity(values.len());
        let mut d = start;
        for _ in 0..values.len() {
            dates.push(d);
            d = d.succ_opt().expect("date overflow");
        }
        Self::new(name, dates, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn end(&self) -> NaiveDate {
        *self.dates.last().expect("nonempty")
    }

    /// First `n` observations as a new series.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InsufficientData {
                needed: 1,
                got: n.min(self.len()),
            });
        }
        Ok(Self {
            name: self.name.clone(),
            dates: self.dates[..n].to_vec(),
            values: self.values[..n].to_vec(),
        })
    }
}

/// Aligned set of series over categories sharing one date index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicPanel {
    series: Vec<TimeSeries>,
}

impl EpidemicPanel {
    /// Builds a panel, validating unique category names and an identical
    /// date index across members. Category order is preserved as given.
    pub fn new(series: Vec<TimeSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, s) in series.iter().enumerate() {
            if series[..i].iter().any(|o| o.name() == s.name()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate category `{}`",
                    s.name()
                )));
            }
            if s.dates() != series[0].dates() {
                return Err(Error::InvalidParameter(format!(
                    "category `{}` does not share the panel date index",
                    s.name()
                )));
            }
        }
        Ok(Self { series })
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn categories(&self) -> Vec<&str> {
        self.series.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, category: &str) -> Result<&TimeSeries> {
        self.series
            .iter()
            .find(|s| s.name() == category)
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.series[0].dates()
    }

    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.series[0].is_empty()
    }

    /// Panel restricted to the first `n` days of every category.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        let series = self
            .series
            .iter()
            .map(|s| s.prefix(n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(series)
    }

    /// Serializes the panel back to the ingestion CSV layout.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for s in &self.series {
            out.push(',');
            out.push_str(s.name());
        }
        out.push('\n');
        for (i, date) in self.dates().iter().enumerate() {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for s in &self.series {
                out.push(',');
                out.push_str(&format!("{}", s.values()[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Simple data analytics for one series: extremes, mean, day-over-day
/// increments and relative growth rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// First differences, one per consecutive pair of days.
    pub increments: Vec<f64>,
    /// Relative day-over-day change; `None` where the predecessor is zero.
    pub growth_rates: Vec<Option<f64>>,
}

/// Descriptive statistics over one series.
pub fn descriptive_stats(series: &TimeSeries) -> DescriptiveStats {
    let v = series.values();
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let increments: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let growth_rates = v
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 {
                None
            } else {
                Some((w[1] - w[0]) / w[0])
            }
        })
        .collect();
    DescriptiveStats {
        min,
        max,
        mean,
        increments,
        growth_rates,
    }
}

/// `order`-th difference of a series. The result is `order` days shorter and
/// starts `order` days later.
pub fn difference(series: &TimeSeries, order: usize) -> Result<TimeSeries> {
    if order >= series.len() {
        return Err(Error::InsufficientData {
            needed: order + 1,
            got: series.len(),
        });
    }
    let mut values = series.values().to_vec();
    for _ in 0..order {
        values = values.windows(2).map(|w| w[1] - w[0]).collect();
    }
    TimeSeries::new(
        series.name(),
        series.dates()[order..].to_vec(),
        values,
    )
}

/// Inverse of [`difference`]: reconstructs the original series from its
/// `anchors.len()`-th difference and the leading original values.
pub fn integrate(diffed: &TimeSeries, anchors: &[f64]) -> Result<TimeSeries> {
    let order = anchors.len();
    let mut values = diffed.values().to_vec();
    for level in (0..order).rev() {
        // Rebuild the (level)-th difference from the (level+1)-th; the
        // leading value of the lower level is `anchors[level]` differenced
        // `level` more times, so we integrate successively using the anchors
        // of the already-reconstructed prefix.
        let mut lower = Vec::with_capacity(values.len() + 1);
        lower.push(anchor_at_level(anchors, level)?);
        for v in &values {
            let prev = *lower.last().expect("nonempty");
            lower.push(prev + v);
        }
        values = lower;
    }
    let start = diffed
        .dates()
        .first()
        .copied()
        .ok_or(Error::EmptyInput)?
        .checked_sub_days(chrono::Days::new(order as u64))
        .ok_or_else(|| Error::InvalidParameter("date underflow".into()))?;
    TimeSeries::from_start(diffed.name(), start, values)
}

/// Leading value of the `level`-times differenced original series, computed
/// from the stored anchors (the first `order` original values).
fn anchor_at_level(anchors: &[f64], level: usize) -> Result<f64> {
    if level >= anchors.len() {
        return Err(Error::LengthMismatch {
            expected: level + 1,
            got: anchors.len(),
        });
    }
    let mut work = anchors.to_vec();
    for _ in 0..level {
        work = work.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(work[0])
}
