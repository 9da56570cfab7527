//! ARIMA(p,d,q) by conditional sum of squares.
//!
//! The series is differenced `d` times, then (φ, θ) — and an intercept when
//! d = 0 — are estimated by minimizing the conditional sum of squared
//! innovations: the recursion conditions on the first `p` differenced values
//! and sets pre-sample innovations to zero. Minimization uses the
//! derivative-free simplex from [`crate::optim`] with several deterministic
//! restarts, one of them seeded from an ordinary-least-squares fit of the
//! autoregressive part.
//!
//! No intercept is estimated for d ≥ 1, so ARIMA(0,1,0) forecasts are the
//! last observed value exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::metrics::ForecastResult;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::series::{difference, TimeSeries};

/// Orders of the autoregressive, differencing and moving-average parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q }
    }
}

/// A fitted ARIMA model, retaining what the forecast recursion needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    /// Zero whenever d ≥ 1.
    pub intercept: f64,
    pub innovation_variance: f64,
    /// Minimized conditional sum of squares.
    pub css: f64,
    series: TimeSeries,
    /// Differenced training values.
    diffed: Vec<f64>,
    /// In-sample innovations under the fitted parameters.
    innovations: Vec<f64>,
}

/// Conditional sum of squared innovations; +inf outside the sane parameter
/// box or when the recursion overflows.
fn css_objective(w: &[f64], p: usize, with_intercept: bool, params: &[f64]) -> f64 {
    if params.iter().any(|v| !v.is_finite() || v.abs() > 10.0) {
        return f64::INFINITY;
    }
    let (c, rest) = if with_intercept {
        (params[0], &params[1..])
    } else {
        (0.0, params)
    };
    let (phi, theta) = rest.split_at(p);
    let n = w.len();
    let mut e = vec![0.0; n];
    let mut ss = 0.0;
    for t in p..n {
        let mut pred = c;
        for (i, ph) in phi.iter().enumerate() {
            pred += ph * w[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t >= j + 1 {
                pred += th * e[t - 1 - j];
            }
        }
        let err = w[t] - pred;
        if !err.is_finite() {
            return f64::INFINITY;
        }
        e[t] = err;
        ss += err * err;
    }
    ss
}

fn innovations(w: &[f64], p: usize, c: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let n = w.len();
    let mut e = vec![0.0; n];
    for t in p..n {
        let mut pred = c;
        for (i, ph) in phi.iter().enumerate() {
            pred += ph * w[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t >= j + 1 {
                pred += th * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

/// Deterministic restart points for the simplex search.
fn start_points(w: &[f64], p: usize, q: usize, with_intercept: bool) -> Vec<Vec<f64>> {
    let dim = usize::from(with_intercept) + p + q;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let base = |fill: f64, first: f64| -> Vec<f64> {
        let mut v = Vec::with_capacity(dim);
        if with_intercept {
            v.push(mean);
        }
        for i in 0..(p + q) {
            v.push(if i == 0 { first } else { fill });
        }
        v
    };
    let mut starts = vec![
        base(0.0, 0.0),
        base(0.0, 0.5),
        base(0.0, -0.5),
        base(0.3, 0.3),
        base(-0.3, -0.3),
    ];
    // OLS seed for the autoregressive part.
    if p > 0 && w.len() > p {
        let mut design = Vec::with_capacity(w.len() - p);
        let mut y = Vec::with_capacity(w.len() - p);
        for t in p..w.len() {
            let mut row = Vec::with_capacity(p + 1);
            if with_intercept {
                row.push(1.0);
            }
            for i in 0..p {
                row.push(w[t - 1 - i]);
            }
            design.push(row);
            y.push(w[t]);
        }
        let cols = design[0].len();
        if let Some(sol) = least_squares(&design, &y, &vec![0.0; cols]) {
            let mut v = Vec::with_capacity(dim);
            let mut it = sol.into_iter();
            if with_intercept {
                v.push(it.next().expect("intercept"));
            }
            for coef in it {
                v.push(coef.clamp(-5.0, 5.0));
            }
            for _ in 0..q {
                v.push(0.0);
            }
            starts.push(v);
        }
    }
    starts
}

/// Fits an ARIMA model by conditional sum of squares.
pub fn arima_fit(series: &TimeSeries, order: ArimaOrder) -> Result<ArimaModel> {
    let ArimaOrder { p, d, q } = order;
    if series.len() < d + p + q + 2 {
        return Err(Error::InsufficientData {
            needed: d + p + q + 2,
            got: series.len(),
        });
    }
    let diffed = difference(series, d)?.values().to_vec();
    let with_intercept = d == 0;
    let dim = usize::from(with_intercept) + p + q;

    let (params, css) = if dim == 0 {
        (Vec::new(), css_objective(&diffed, p, false, &[]))
    } else {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in start_points(&diffed, p, q, with_intercept) {
            let (x, fx) = nelder_mead(
                |params| css_objective(&diffed, p, with_intercept, params),
                &start,
                NelderMeadOptions {
                    step: 0.2,
                    max_iters: 300 * dim,
                    f_tol: 1e-12,
                },
            );
            if best.as_ref().map_or(true, |(_, bf)| fx < *bf) {
                best = Some((x, fx));
            }
        }
        best.expect("at least one start point")
    };
    if !css.is_finite() {
        return Err(Error::NumericalFailure(
            "conditional sum of squares did not evaluate to a finite value".into(),
        ));
    }

    let (intercept, rest) = if with_intercept {
        (params[0], &params[1..])
    } else {
        (0.0, &params[..])
    };
    let (phi, theta) = rest.split_at(p);
    let e = innovations(&diffed, p, intercept, phi, theta);
    let terms = (diffed.len() - p).max(1);
    Ok(ArimaModel {
        order,
        ar_coeffs: phi.to_vec(),
        ma_coeffs: theta.to_vec(),
        intercept,
        innovation_variance: css / terms as f64,
        css,
        series: series.clone(),
        diffed,
        innovations: e,
    })
}

impl ArimaModel {
    /// One-step in-sample predictions on the original scale; `None` during
    /// the differencing + autoregressive warmup.
    fn fitted(&self) -> Vec<Option<f64>> {
        let ArimaOrder { p, d, .. } = self.order;
        let x = self.series.values();
        let n = x.len();
        // k-th differences of the original series, time-indexed from k.
        let mut levels: Vec<Vec<f64>> = vec![x.to_vec()];
        for _ in 0..d {
            let prev = levels.last().expect("nonempty");
            levels.push(prev.windows(2).map(|w| w[1] - w[0]).collect());
        }
        let mut fitted = vec![None; n];
        for t in (d + p)..n {
            let tw = t - d;
            let mut pred_w = self.intercept;
            for (i, ph) in self.ar_coeffs.iter().enumerate() {
                pred_w += ph * self.diffed[tw - 1 - i];
            }
            for (j, th) in self.ma_coeffs.iter().enumerate() {
                if tw >= j + 1 {
                    pred_w += th * self.innovations[tw - 1 - j];
                }
            }
            // Undo the differencing with the known values at t-1.
            let mut pred = pred_w;
            for (k, level) in levels.iter().enumerate().take(d) {
                pred += level[t - 1 - k];
            }
            fitted[t] = Some(pred);
        }
        fitted
    }
}

/// Iterates the fitted recursion `h` steps ahead and integrates back to the
/// original scale.
pub fn arima_forecast(model: &ArimaModel, h: usize) -> Result<ForecastResult> {
    let d = model.order.d;
    let x = model.series.values();

    // Last value of each difference level, updated as forecasting advances.
    let mut tails: Vec<f64> = Vec::with_capacity(d);
    {
        let mut level = x.to_vec();
        for _ in 0..d {
            tails.push(*level.last().expect("nonempty"));
            level = level.windows(2).map(|w| w[1] - w[0]).collect();
        }
    }

    let mut w_ext = model.diffed.clone();
    let mut e_ext = model.innovations.clone();
    let mut horizon = Vec::with_capacity(h);
    for _ in 0..h {
        let t = w_ext.len();
        let mut pred_w = model.intercept;
        for (i, ph) in model.ar_coeffs.iter().enumerate() {
            if t >= i + 1 {
                pred_w += ph * w_ext[t - 1 - i];
            }
        }
        for (j, th) in model.ma_coeffs.iter().enumerate() {
            if t >= j + 1 {
                pred_w += th * e_ext[t - 1 - j];
            }
        }
        w_ext.push(pred_w);
        e_ext.push(0.0); // future innovations are unknown
        let mut next = pred_w;
        for tail in tails.iter_mut().rev() {
            next += *tail;
            *tail = next;
        }
        horizon.push(next);
    }
    ForecastResult::new(&model.series, model.fitted(), horizon)
}

/// Fits every order in the grid and keeps the one with the lowest in-sample
/// one-step RMSE. Ties resolve to the earlier order in the grid.
pub fn arima_grid_search(
    series: &TimeSeries,
    orders: &[ArimaOrder],
    horizon: usize,
) -> Result<(ArimaModel, ForecastResult)> {
    let mut best: Option<(ArimaModel, ForecastResult)> = None;
    let mut causes = Vec::new();
    for &order in orders {
        match arima_fit(series, order).and_then(|m| {
            let r = arima_forecast(&m, horizon)?;
            Ok((m, r))
        }) {
            Ok((m, r)) => {
                if r.rmse_fit.is_some()
                    && best
                        .as_ref()
                        .map_or(true, |(_, br)| r.rmse_fit < br.rmse_fit)
                {
                    best = Some((m, r));
                }
            }
            Err(e) => causes.push(format!("({},{},{}): {e}", order.p, order.d, order.q)),
        }
    }
    best.ok_or(Error::AllCandidatesFailed { causes })
}

/// Default order grid: p, q in {0,1,2}, d in {0,1}.
pub fn default_order_grid() -> Vec<ArimaOrder> {
    let mut out = Vec::new();
    for d in 0..=1 {
        for p in 0..=2 {
            for q in 0..=2 {
                out.push(ArimaOrder::new(p, d, q));
            }
        }
    }
    out
}
