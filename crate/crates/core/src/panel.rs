//! The panel engine: assembles candidate forecasters across five complexity
//! groups, tunes each by exhaustive grid, searches multi-source subsets for
//! the polynomial networks, runs the groups in priority order 5 → 4 → 3 →
//! 2 → 1 under a wall-clock budget, and selects the winner by lowest RMSE.
//!
//! Group 5 always runs; each later group starts only while budget remains,
//! and a started group is never interrupted. Candidates within a group are
//! independent and may run on several workers; every ranking and tie-break
//! is a canonical ordered reduction, so reports are identical for any worker
//! count (runtimes aside). Ties in the criterion resolve to the
//! lexicographically smallest candidate id.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::arima::{arima_grid_search, default_order_grid, ArimaOrder};
use crate::classical::{
    holt_fit, holt_winters_tuned, naive_drift, ses_fit, BaselineMode, Seasonal,
};
use crate::error::{Error, Result};
use crate::gmdh::{
    combi::term_pool, combi_train, mia_train, pnn_cf_train, CfConfig, CombiOptions, GmdhArch,
    GmdhModel, MiaOptions,
};
use crate::lag::{build_lag_matrix, SplitSpec};
use crate::metrics::{rmse, ForecastPoint, ForecastResult};
use crate::ml::{
    ols_fit, recursive_forecast, roll_horizon, svr_fit, tree_fit, CfRoll, Kernel,
    SourceExtension,
};
use crate::series::{descriptive_stats, DescriptiveStats, EpidemicPanel};

/// Ranking measure for the panel competition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// In-sample one-step RMSE (curve-fitting error).
    Fit,
    /// Multi-step RMSE over the held-out tail after refitting on the prefix.
    Holdout,
}

/// One candidate's algorithm plus its tuning grid.
#[derive(Debug, Clone)]
pub enum Algorithm {
    Naive,
    Drift,
    /// Empty grid means the internal 0.01-step grid.
    Ses {
        alphas: Vec<f64>,
    },
    Holt,
    HoltWinters {
        mode: Seasonal,
        period: usize,
    },
    Arima {
        orders: Vec<ArimaOrder>,
    },
    OlsLag {
        windows: Vec<usize>,
        ridge: f64,
    },
    Tree {
        windows: Vec<usize>,
        min_leaf: Vec<usize>,
        prune: Vec<bool>,
        prune_fraction: f64,
    },
    Svr {
        windows: Vec<usize>,
        costs: Vec<f64>,
        /// Tube widths as fractions of the target's standard deviation.
        epsilon_rels: Vec<f64>,
        kernels: Vec<Kernel>,
    },
    Combi {
        window: usize,
        degree: usize,
        budget: u128,
        cf: Option<CfConfig>,
    },
    Mia {
        window: usize,
        width: Option<usize>,
        max_layers: usize,
        cf: Option<CfConfig>,
    },
}

/// A tunable panel member.
#[derive(Debug, Clone)]
pub struct CandidateSpec {
    /// Unique stable id; the tie-break key.
    pub id: String,
    /// Complexity group, 1..=5.
    pub group: u8,
    pub algorithm: Algorithm,
    /// Categories feeding the lag matrix, target first. Groups other than 1
    /// use the target alone.
    pub sources: Vec<String>,
}

/// Ordered category subset, target always first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSubset {
    pub categories: Vec<String>,
}

impl SourceSubset {
    /// Target-first, auxiliaries sorted.
    pub fn new(target: &str, auxiliaries: &BTreeSet<String>) -> Self {
        let mut categories = vec![target.to_string()];
        for a in auxiliaries {
            if a != target {
                categories.push(a.clone());
            }
        }
        SourceSubset { categories }
    }

    /// Short label: "all" when the subset covers every panel category.
    pub fn label(&self, panel_categories: usize) -> String {
        if self.categories.len() == panel_categories {
            "all".to_string()
        } else {
            self.categories.join("+")
        }
    }
}

/// How group-1 source subsets are chosen.
#[derive(Debug, Clone)]
pub enum SubsetMode {
    /// Every subset of the auxiliaries (2^|aux| of them, each with target).
    PowerSet { cap: u128 },
    /// An explicit list of combinations (the target is added when absent).
    Curated(Vec<Vec<String>>),
}

/// Enumerates the source subsets for a target without evaluating them.
pub fn enumerate_subsets(
    panel: &EpidemicPanel,
    target: &str,
    mode: &SubsetMode,
) -> Result<Vec<SourceSubset>> {
    panel.get(target)?;
    match mode {
        SubsetMode::PowerSet { cap } => {
            let mut aux: Vec<String> = panel
                .categories()
                .iter()
                .filter(|c| **c != target)
                .map(|c| c.to_string())
                .collect();
            aux.sort();
            let n = aux.len();
            let required: u128 = if n < 127 { 1u128 << n } else { u128::MAX };
            if n > 63 || required > *cap {
                return Err(Error::BudgetExceeded {
                    required,
                    budget: *cap,
                });
            }
            let mut out = Vec::with_capacity(1 << n);
            for mask in 0u64..(1u64 << n) {
                let chosen: BTreeSet<String> = aux
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, c)| c.clone())
                    .collect();
                out.push(SourceSubset::new(target, &chosen));
            }
            Ok(out)
        }
        SubsetMode::Curated(list) => {
            let mut out = Vec::with_capacity(list.len());
            for combo in list {
                let mut aux = BTreeSet::new();
                for name in combo {
                    panel.get(name)?;
                    if name != target {
                        aux.insert(name.clone());
                    }
                }
                out.push(SourceSubset::new(target, &aux));
            }
            Ok(out)
        }
    }
}

/// An evaluated subset with its criterion value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSubset {
    pub subset: SourceSubset,
    pub criterion: f64,
}

/// Evaluates every enumerated subset with the supplied scorer and returns
/// them sorted by (criterion, label).
pub fn subset_search(
    panel: &EpidemicPanel,
    target: &str,
    mode: &SubsetMode,
    mut eval: impl FnMut(&SourceSubset) -> Result<f64>,
) -> Result<Vec<EvaluatedSubset>> {
    let subsets = enumerate_subsets(panel, target, mode)?;
    let mut out = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let criterion = eval(&subset)?;
        out.push(EvaluatedSubset { subset, criterion });
    }
    let n_cats = panel.categories().len();
    out.sort_by(|a, b| {
        a.criterion
            .partial_cmp(&b.criterion)
            .expect("finite criteria")
            .then_with(|| a.subset.label(n_cats).cmp(&b.subset.label(n_cats)))
    });
    Ok(out)
}

/// The eight source combinations of the reference experiment, used as the
/// default curated list for the standard five-category panel.
pub fn standard_curated_subsets() -> Vec<Vec<String>> {
    [
        vec!["suspected", "confirmed", "cured", "died", "critical"],
        vec!["suspected", "confirmed"],
        vec!["suspected", "confirmed", "critical"],
        vec!["suspected", "confirmed", "critical", "cured"],
        vec!["suspected", "confirmed", "critical", "died"],
        vec!["suspected", "critical"],
        vec!["suspected", "cured"],
        vec!["suspected", "died"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(str::to_string).collect())
    .collect()
}

/// Per-candidate outcome kept in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub group: u8,
    pub params: BTreeMap<String, Value>,
    pub subset: Vec<String>,
    pub rmse_fit: f64,
    pub rmse_holdout: Option<f64>,
    pub runtime_seconds: f64,
    /// One-step in-sample predictions aligned to the panel dates.
    pub fitted: Vec<Option<f64>>,
    pub horizon: Vec<ForecastPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub id: String,
    pub group: u8,
    pub error: String,
}

/// Serialized winner model: full coefficients and trace for polynomial
/// networks, the tuned parameter record for everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelDump {
    Params {
        params: BTreeMap<String, Value>,
    },
    Gmdh {
        cf: Option<CfConfig>,
        best_cycle: Option<usize>,
        /// Internal validation criterion of the network.
        criterion: f64,
        model: GmdhModel,
    },
}

/// Panel execution settings.
#[derive(Debug, Clone)]
pub struct PanelOptions {
    pub horizon: usize,
    pub budget_seconds: f64,
    pub criterion: Criterion,
    pub workers: usize,
    pub split: SplitSpec,
    pub source_extension: SourceExtension,
    /// Enabled groups; evaluation always proceeds in order 5,4,3,2,1.
    pub groups: Vec<u8>,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            horizon: 6,
            budget_seconds: 60.0,
            criterion: Criterion::Fit,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            split: SplitSpec::default(),
            source_extension: SourceExtension::HoldLast,
            groups: vec![5, 4, 3, 2, 1],
        }
    }
}

/// The panel's outcome: every completed candidate, failures with causes,
/// group-4 analytics, and the winning forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelReport {
    pub criterion: Criterion,
    pub timestamp: String,
    pub winner_id: String,
    pub winner_model: ModelDump,
    /// Sorted by (criterion value ascending, id).
    pub records: Vec<CandidateRecord>,
    pub failures: Vec<FailureRecord>,
    pub analytics: BTreeMap<String, DescriptiveStats>,
    pub completed_groups: Vec<u8>,
    pub skipped_groups: Vec<u8>,
    /// The winner's h-step forecast.
    pub forecast: Vec<ForecastPoint>,
}

impl PanelReport {
    pub fn criterion_value(&self, record: &CandidateRecord) -> Option<f64> {
        match self.criterion {
            Criterion::Fit => Some(record.rmse_fit),
            Criterion::Holdout => record.rmse_holdout,
        }
    }
}

// ---------------------------------------------------------------------------
// Candidate evaluation
// ---------------------------------------------------------------------------

fn sources_set(spec_sources: &[String], target: &str) -> BTreeSet<String> {
    spec_sources
        .iter()
        .filter(|s| s.as_str() != target)
        .cloned()
        .collect()
}

fn std_dev(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Largest degree in `1..=want` whose term pool fits the subset budget.
fn combi_degree_for(columns: usize, want: usize, budget: u128) -> Result<usize> {
    for degree in (1..=want).rev() {
        let pool = term_pool(columns, degree).len();
        if pool <= 63 && (1u128 << pool) <= budget {
            return Ok(degree);
        }
    }
    Err(Error::BudgetExceeded {
        required: u128::MAX,
        budget,
    })
}

/// One concrete parameterization of an algorithm (a grid point). Algorithms
/// with a spec-level internal tuner (the smoothing constants, the ARIMA
/// order grid) expand to a single instance that self-tunes by fit RMSE.
#[derive(Debug, Clone)]
enum Instance {
    Naive,
    Drift,
    Ses {
        alpha: Option<f64>,
    },
    Holt,
    Hw {
        mode: Seasonal,
        period: usize,
    },
    Arima {
        orders: Vec<ArimaOrder>,
    },
    Ols {
        window: usize,
        ridge: f64,
    },
    Tree {
        window: usize,
        min_leaf: usize,
        prune: bool,
        prune_fraction: f64,
    },
    Svr {
        window: usize,
        cost: f64,
        epsilon: f64,
        epsilon_rel: f64,
        kernel: Kernel,
    },
    Combi {
        window: usize,
        degree: usize,
        budget: u128,
        cf: Option<CfConfig>,
    },
    Mia {
        window: usize,
        width: Option<usize>,
        max_layers: usize,
        cf: Option<CfConfig>,
    },
}

fn expand(algorithm: &Algorithm, target_values: &[f64]) -> Vec<Instance> {
    match algorithm {
        Algorithm::Naive => vec![Instance::Naive],
        Algorithm::Drift => vec![Instance::Drift],
        Algorithm::Ses { alphas } => {
            if alphas.is_empty() {
                vec![Instance::Ses { alpha: None }]
            } else {
                alphas
                    .iter()
                    .map(|a| Instance::Ses { alpha: Some(*a) })
                    .collect()
            }
        }
        Algorithm::Holt => vec![Instance::Holt],
        Algorithm::HoltWinters { mode, period } => vec![Instance::Hw {
            mode: *mode,
            period: *period,
        }],
        Algorithm::Arima { orders } => vec![Instance::Arima {
            orders: orders.clone(),
        }],
        Algorithm::OlsLag { windows, ridge } => windows
            .iter()
            .map(|w| Instance::Ols {
                window: *w,
                ridge: *ridge,
            })
            .collect(),
        Algorithm::Tree {
            windows,
            min_leaf,
            prune,
            prune_fraction,
        } => {
            let mut out = Vec::new();
            for w in windows {
                for ml in min_leaf {
                    for p in prune {
                        out.push(Instance::Tree {
                            window: *w,
                            min_leaf: *ml,
                            prune: *p,
                            prune_fraction: *prune_fraction,
                        });
                    }
                }
            }
            out
        }
        Algorithm::Svr {
            windows,
            costs,
            epsilon_rels,
            kernels,
        } => {
            let sd = std_dev(target_values);
            let mut out = Vec::new();
            for w in windows {
                for c in costs {
                    for er in epsilon_rels {
                        for k in kernels {
                            out.push(Instance::Svr {
                                window: *w,
                                cost: *c,
                                epsilon: er * sd,
                                epsilon_rel: *er,
                                kernel: *k,
                            });
                        }
                    }
                }
            }
            out
        }
        Algorithm::Combi {
            window,
            degree,
            budget,
            cf,
        } => vec![Instance::Combi {
            window: *window,
            degree: *degree,
            budget: *budget,
            cf: *cf,
        }],
        Algorithm::Mia {
            window,
            width,
            max_layers,
            cf,
        } => vec![Instance::Mia {
            window: *window,
            width: *width,
            max_layers: *max_layers,
            cf: *cf,
        }],
    }
}

struct InstanceFit {
    params: BTreeMap<String, Value>,
    result: ForecastResult,
    dump: ModelDump,
}

fn cf_column_count(cfg: CfConfig) -> usize {
    usize::from(cfg.shadow) + usize::from(cfg.residual_feedback)
}

/// Fits one instance on the given panel, producing the in-sample result and
/// the h-step forecast.
fn fit_instance(
    instance: &Instance,
    panel: &EpidemicPanel,
    target: &str,
    sources: &BTreeSet<String>,
    horizon: usize,
    split: SplitSpec,
    ext: SourceExtension,
) -> Result<InstanceFit> {
    let series = panel.get(target)?;
    let params_dump = |params: &BTreeMap<String, Value>| ModelDump::Params {
        params: params.clone(),
    };
    match instance {
        Instance::Naive => {
            let result = naive_drift(series, horizon, BaselineMode::Naive)?;
            let params = BTreeMap::new();
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Drift => {
            let result = naive_drift(series, horizon, BaselineMode::Drift)?;
            let params = BTreeMap::new();
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Ses { alpha } => {
            let (fit, result) = ses_fit(series, *alpha, horizon)?;
            let params = BTreeMap::from([("alpha".to_string(), json!(fit.alpha))]);
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Holt => {
            let (fit, result) = holt_fit(series, None, None, horizon)?;
            let params = BTreeMap::from([
                ("alpha".to_string(), json!(fit.alpha)),
                ("beta".to_string(), json!(fit.beta)),
            ]);
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Hw { mode, period } => {
            let (fit, result) = holt_winters_tuned(series, *period, *mode, horizon)?;
            let params = BTreeMap::from([
                ("alpha".to_string(), json!(fit.params.alpha)),
                ("beta".to_string(), json!(fit.params.beta)),
                ("gamma".to_string(), json!(fit.params.gamma)),
                ("period".to_string(), json!(period)),
                (
                    "mode".to_string(),
                    json!(match mode {
                        Seasonal::Additive => "additive",
                        Seasonal::Multiplicative => "multiplicative",
                    }),
                ),
            ]);
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Arima { orders } => {
            let (model, result) = arima_grid_search(series, orders, horizon)?;
            let params = BTreeMap::from([
                ("p".to_string(), json!(model.order.p)),
                ("d".to_string(), json!(model.order.d)),
                ("q".to_string(), json!(model.order.q)),
                ("intercept".to_string(), json!(model.intercept)),
                ("ar".to_string(), json!(model.ar_coeffs)),
                ("ma".to_string(), json!(model.ma_coeffs)),
            ]);
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Ols { window, ridge } => {
            let matrix = build_lag_matrix(panel, target, sources, *window)?;
            let model = ols_fit(&matrix, *ridge)?;
            let result =
                recursive_forecast(&model, panel, target, sources, *window, horizon, ext)?;
            let params = BTreeMap::from([
                ("window".to_string(), json!(window)),
                ("ridge".to_string(), json!(ridge)),
                ("weights".to_string(), json!(model.weights)),
                ("intercept".to_string(), json!(model.intercept)),
            ]);
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Tree {
            window,
            min_leaf,
            prune,
            prune_fraction,
        } => {
            let matrix = build_lag_matrix(panel, target, sources, *window)?;
            let model = tree_fit(&matrix, *min_leaf, *prune, *prune_fraction)?;
            let result =
                recursive_forecast(&model, panel, target, sources, *window, horizon, ext)?;
            let params = BTreeMap::from([
                ("window".to_string(), json!(window)),
                ("min_leaf".to_string(), json!(min_leaf)),
                ("prune".to_string(), json!(prune)),
                ("leaves".to_string(), json!(model.leaf_count())),
            ]);
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Svr {
            window,
            cost,
            epsilon,
            epsilon_rel,
            kernel,
        } => {
            let matrix = build_lag_matrix(panel, target, sources, *window)?;
            let model = svr_fit(&matrix, *cost, *epsilon, *kernel)?;
            let result =
                recursive_forecast(&model, panel, target, sources, *window, horizon, ext)?;
            let params = BTreeMap::from([
                ("window".to_string(), json!(window)),
                ("cost".to_string(), json!(cost)),
                ("epsilon".to_string(), json!(epsilon)),
                ("epsilon_rel".to_string(), json!(epsilon_rel)),
                ("kernel".to_string(), json!(kernel)),
                ("support_vectors".to_string(), json!(model.support_count())),
            ]);
            Ok(InstanceFit {
                dump: params_dump(&params),
                params,
                result,
            })
        }
        Instance::Combi {
            window,
            degree,
            budget,
            cf,
        } => {
            let matrix = build_lag_matrix(panel, target, sources, *window)?;
            let columns = matrix.n_features() + cf.map_or(0, cf_column_count);
            let used_degree = combi_degree_for(columns, *degree, *budget)?;
            let opts = CombiOptions {
                degree: used_degree,
                budget: *budget,
            };
            let mut params = BTreeMap::from([
                ("window".to_string(), json!(window)),
                ("degree".to_string(), json!(used_degree)),
            ]);
            match cf {
                None => {
                    let model = combi_train(&matrix, split, &opts)?;
                    let criterion = model.criterion;
                    let gm = GmdhModel::Combi(model);
                    let result =
                        recursive_forecast(&gm, panel, target, sources, *window, horizon, ext)?;
                    params.insert("criterion".to_string(), json!(criterion));
                    Ok(InstanceFit {
                        params,
                        result,
                        dump: ModelDump::Gmdh {
                            cf: None,
                            best_cycle: None,
                            criterion,
                            model: gm,
                        },
                    })
                }
                Some(cfg) => gmdh_cf_fit(
                    panel,
                    target,
                    sources,
                    &matrix,
                    split,
                    &GmdhArch::Combi(opts),
                    cfg,
                    *window,
                    horizon,
                    ext,
                    params,
                ),
            }
        }
        Instance::Mia {
            window,
            width,
            max_layers,
            cf,
        } => {
            let matrix = build_lag_matrix(panel, target, sources, *window)?;
            let opts = MiaOptions {
                width: *width,
                max_layers: *max_layers,
                improvement: 1e-9,
            };
            let mut params = BTreeMap::from([
                ("window".to_string(), json!(window)),
                ("max_layers".to_string(), json!(max_layers)),
            ]);
            match cf {
                None => {
                    let model = mia_train(&matrix, split, &opts)?;
                    let criterion = *model.trace.last().expect("accepted layer");
                    params.insert("criterion".to_string(), json!(criterion));
                    params.insert("layers".to_string(), json!(model.layers.len()));
                    let gm = GmdhModel::Mia(model);
                    let result =
                        recursive_forecast(&gm, panel, target, sources, *window, horizon, ext)?;
                    Ok(InstanceFit {
                        params,
                        result,
                        dump: ModelDump::Gmdh {
                            cf: None,
                            best_cycle: None,
                            criterion,
                            model: gm,
                        },
                    })
                }
                Some(cfg) => gmdh_cf_fit(
                    panel,
                    target,
                    sources,
                    &matrix,
                    split,
                    &GmdhArch::Mia(opts),
                    cfg,
                    *window,
                    horizon,
                    ext,
                    params,
                ),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gmdh_cf_fit(
    panel: &EpidemicPanel,
    target: &str,
    sources: &BTreeSet<String>,
    matrix: &crate::lag::LagMatrix,
    split: SplitSpec,
    arch: &GmdhArch,
    cfg: &CfConfig,
    window: usize,
    horizon: usize,
    ext: SourceExtension,
    mut params: BTreeMap<String, Value>,
) -> Result<InstanceFit> {
    let trained = pnn_cf_train(matrix, split, arch, cfg)?;
    let series = panel.get(target)?;
    let start = series.start();
    let mut fitted = vec![None; series.len()];
    for (date, pred) in trained.insample_dates.iter().zip(&trained.insample) {
        let idx = (*date - start).num_days() as usize;
        fitted[idx] = Some(*pred);
    }
    let horizon_values = roll_horizon(
        &trained.model,
        panel,
        target,
        sources,
        window,
        horizon,
        ext,
        Some(CfRoll {
            shadow: cfg.shadow,
            residual: cfg.residual_feedback,
            last_residual: trained.last_residual,
        }),
    )?;
    let result = ForecastResult::new(series, fitted, horizon_values)?;
    params.insert("cycles".to_string(), json!(cfg.cycles));
    params.insert("best_cycle".to_string(), json!(trained.best_cycle));
    params.insert("criterion".to_string(), json!(trained.criterion));
    params.insert("shadow".to_string(), json!(cfg.shadow));
    params.insert(
        "residual_feedback".to_string(),
        json!(cfg.residual_feedback),
    );
    Ok(InstanceFit {
        params,
        result,
        dump: ModelDump::Gmdh {
            cf: Some(*cfg),
            best_cycle: Some(trained.best_cycle),
            criterion: trained.criterion,
            model: trained.model,
        },
    })
}

/// Tail-holdout RMSE for one instance: refit on the prefix, forecast the
/// held-out steps, compare. `None` when the prefix cannot support the fit.
fn holdout_rmse(
    instance: &Instance,
    panel: &EpidemicPanel,
    target: &str,
    sources: &BTreeSet<String>,
    split: SplitSpec,
    ext: SourceExtension,
) -> Option<f64> {
    let n = panel.len();
    let holdout = (split.fraction * n as f64).ceil() as usize;
    if holdout == 0 || holdout >= n {
        return None;
    }
    let prefix = panel.prefix(n - holdout).ok()?;
    let fit = fit_instance(instance, &prefix, target, sources, holdout, split, ext).ok()?;
    let actual = &panel.get(target).ok()?.values()[n - holdout..];
    rmse(&fit.result.horizon_values(), actual).ok()
}

/// Exhaustive grid evaluation of one candidate: fits every instance, selects
/// the one minimizing the panel criterion (first grid point wins ties), and
/// returns its record plus the serialized model. Every grid point failing
/// yields [`Error::AllCandidatesFailed`] carrying the per-point causes.
pub fn tune_candidate(
    spec: &CandidateSpec,
    panel: &EpidemicPanel,
    target: &str,
    opts: &PanelOptions,
) -> Result<(CandidateRecord, ModelDump)> {
    let series = panel.get(target)?;
    let sources = sources_set(&spec.sources, target);
    let instances = expand(&spec.algorithm, series.values());
    if instances.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "candidate `{}` has an empty grid",
            spec.id
        )));
    }

    let mut causes = Vec::new();
    let mut best: Option<(f64, Instance, InstanceFit)> = None;
    for instance in instances {
        match fit_instance(
            &instance,
            panel,
            target,
            &sources,
            opts.horizon,
            opts.split,
            opts.source_extension,
        ) {
            Ok(fit) => {
                let Some(fit_value) = fit.result.rmse_fit else {
                    causes.push(format!("{instance:?}: no in-sample predictions"));
                    continue;
                };
                let value = match opts.criterion {
                    Criterion::Fit => Some(fit_value),
                    Criterion::Holdout => holdout_rmse(
                        &instance,
                        panel,
                        target,
                        &sources,
                        opts.split,
                        opts.source_extension,
                    ),
                };
                match value {
                    Some(v) if v.is_finite() => {
                        if best.as_ref().map_or(true, |(bv, _, _)| v < *bv) {
                            best = Some((v, instance, fit));
                        }
                    }
                    _ => causes.push(format!("{instance:?}: criterion unavailable")),
                }
            }
            Err(e) => causes.push(format!("{instance:?}: {e}")),
        }
    }

    let (_, instance, fit) = best.ok_or(Error::AllCandidatesFailed { causes })?;
    let rmse_holdout = holdout_rmse(
        &instance,
        panel,
        target,
        &sources,
        opts.split,
        opts.source_extension,
    );
    let record = CandidateRecord {
        id: spec.id.clone(),
        group: spec.group,
        params: fit.params,
        subset: spec.sources.clone(),
        rmse_fit: fit.result.rmse_fit.expect("checked above"),
        rmse_holdout,
        runtime_seconds: 0.0,
        fitted: fit.result.fitted.clone(),
        horizon: fit.result.horizon.clone(),
    };
    Ok((record, fit.dump))
}

/// One DescriptiveStats per category, for the report's analytics section.
pub fn describe_panel(panel: &EpidemicPanel) -> BTreeMap<String, DescriptiveStats> {
    panel
        .series()
        .iter()
        .map(|s| (s.name().to_string(), descriptive_stats(s)))
        .collect()
}

/// Options shaping the default candidate roster.
#[derive(Debug, Clone)]
pub struct RosterOptions {
    pub subset_mode: SubsetMode,
    /// Lag windows tuned by the machine-learning candidates.
    pub ml_windows: Vec<usize>,
    pub hw_period: usize,
    /// Lag window for the combinatorial networks (their pool is exhaustive,
    /// so it stays shallow).
    pub combi_window: usize,
    /// Lag window for the multilayer networks (they need at least two
    /// features, even on a target-only subset).
    pub mia_window: usize,
    pub cf_cycles: usize,
    pub combi_budget: u128,
}

impl Default for RosterOptions {
    fn default() -> Self {
        RosterOptions {
            subset_mode: SubsetMode::PowerSet { cap: 1 << 10 },
            ml_windows: vec![1, 2, 3],
            hw_period: 7,
            combi_window: 1,
            mia_window: 2,
            cf_cycles: 2,
            combi_budget: 1 << 20,
        }
    }
}

/// The desk panel: naive, drift, SES, Holt, both Holt-Winters modes and an
/// ARIMA order grid in group 5; OLS and a regression tree in group 3; SVR in
/// group 2; Combi, Combi-cf, MIA and MIA-cf across the source subsets in
/// group 1. Group 4 (descriptive statistics) is handled by the runner.
pub fn default_roster(
    panel: &EpidemicPanel,
    target: &str,
    opts: &RosterOptions,
) -> Result<Vec<CandidateSpec>> {
    panel.get(target)?;
    let target_only = vec![target.to_string()];
    let mut roster = vec![
        CandidateSpec {
            id: "g5-naive".into(),
            group: 5,
            algorithm: Algorithm::Naive,
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g5-drift".into(),
            group: 5,
            algorithm: Algorithm::Drift,
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g5-ses".into(),
            group: 5,
            algorithm: Algorithm::Ses { alphas: vec![] },
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g5-holt".into(),
            group: 5,
            algorithm: Algorithm::Holt,
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g5-hw-add".into(),
            group: 5,
            algorithm: Algorithm::HoltWinters {
                mode: Seasonal::Additive,
                period: opts.hw_period,
            },
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g5-hw-mul".into(),
            group: 5,
            algorithm: Algorithm::HoltWinters {
                mode: Seasonal::Multiplicative,
                period: opts.hw_period,
            },
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g5-arima".into(),
            group: 5,
            algorithm: Algorithm::Arima {
                orders: default_order_grid(),
            },
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g3-ols".into(),
            group: 3,
            algorithm: Algorithm::OlsLag {
                windows: opts.ml_windows.clone(),
                ridge: 0.0,
            },
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g3-tree".into(),
            group: 3,
            // min_leaf starts at 2: singleton leaves memorize the training
            // rows and win any in-sample ranking with zero error.
            algorithm: Algorithm::Tree {
                windows: opts.ml_windows.clone(),
                min_leaf: vec![2, 3],
                prune: vec![false, true],
                prune_fraction: 0.25,
            },
            sources: target_only.clone(),
        },
        CandidateSpec {
            id: "g2-svr".into(),
            group: 2,
            algorithm: Algorithm::Svr {
                windows: opts.ml_windows.clone(),
                costs: vec![1.0, 10.0, 100.0],
                epsilon_rels: vec![0.01, 0.1],
                kernels: vec![
                    Kernel::Linear,
                    Kernel::Rbf { gamma: 0.1 },
                    Kernel::Rbf { gamma: 1.0 },
                ],
            },
            sources: target_only.clone(),
        },
    ];

    let n_cats = panel.categories().len();
    let cf = CfConfig::new(true, true, opts.cf_cycles)?;
    for subset in enumerate_subsets(panel, target, &opts.subset_mode)? {
        let label = subset.label(n_cats);
        roster.push(CandidateSpec {
            id: format!("g1-combi[{label}]"),
            group: 1,
            algorithm: Algorithm::Combi {
                window: opts.combi_window,
                degree: 2,
                budget: opts.combi_budget,
                cf: None,
            },
            sources: subset.categories.clone(),
        });
        roster.push(CandidateSpec {
            id: format!("g1-combi-cf[{label}]"),
            group: 1,
            algorithm: Algorithm::Combi {
                window: opts.combi_window,
                degree: 2,
                budget: opts.combi_budget,
                cf: Some(cf),
            },
            sources: subset.categories.clone(),
        });
        roster.push(CandidateSpec {
            id: format!("g1-mia[{label}]"),
            group: 1,
            algorithm: Algorithm::Mia {
                window: opts.mia_window,
                width: None,
                max_layers: 10,
                cf: None,
            },
            sources: subset.categories.clone(),
        });
        roster.push(CandidateSpec {
            id: format!("g1-mia-cf[{label}]"),
            group: 1,
            algorithm: Algorithm::Mia {
                window: opts.mia_window,
                width: None,
                max_layers: 10,
                cf: Some(cf),
            },
            sources: subset.categories.clone(),
        });
    }
    Ok(roster)
}

/// Runs the competition. Groups are evaluated 5 → 4 → 3 → 2 → 1; the first
/// enabled group always runs, later groups start only while wall-clock
/// budget remains. The winner has the minimal criterion among completed
/// candidates, ties resolved by id.
pub fn run_panel(
    panel: &EpidemicPanel,
    target: &str,
    roster: &[CandidateSpec],
    opts: &PanelOptions,
) -> Result<PanelReport> {
    if roster.is_empty() {
        return Err(Error::InvalidParameter("empty candidate roster".into()));
    }
    if opts.horizon == 0 {
        return Err(Error::InvalidHorizon);
    }
    if opts.workers == 0 {
        return Err(Error::InvalidParameter("worker count must be >= 1".into()));
    }
    if opts.budget_seconds <= 0.0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    panel.get(target)?;
    {
        let mut ids = BTreeSet::new();
        for spec in roster {
            if !(1..=5).contains(&spec.group) {
                return Err(Error::InvalidParameter(format!(
                    "candidate `{}` has group {} outside 1..=5",
                    spec.id, spec.group
                )));
            }
            if !ids.insert(spec.id.clone()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate candidate id `{}`",
                    spec.id
                )));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let mut records: Vec<CandidateRecord> = Vec::new();
    let mut failures: Vec<FailureRecord> = Vec::new();
    let mut dumps: BTreeMap<String, ModelDump> = BTreeMap::new();
    let mut analytics = BTreeMap::new();
    let mut completed_groups = Vec::new();
    let mut skipped_groups = Vec::new();
    let mut any_group_ran = false;

    type Outcome = (
        String,
        u8,
        std::result::Result<(CandidateRecord, ModelDump), String>,
        f64,
    );
    for group in [5u8, 4, 3, 2, 1] {
        if !opts.groups.contains(&group) {
            skipped_groups.push(group);
            continue;
        }
        // A started group is never interrupted; later groups start only
        // while budget remains.
        if any_group_ran && start.elapsed().as_secs_f64() >= opts.budget_seconds {
            skipped_groups.push(group);
            continue;
        }
        any_group_ran = true;
        if group == 4 {
            analytics = describe_panel(panel);
            completed_groups.push(4);
            continue;
        }
        let members: Vec<&CandidateSpec> = roster.iter().filter(|s| s.group == group).collect();
        if members.is_empty() {
            completed_groups.push(group);
            continue;
        }
        let outcomes: Vec<Outcome> = pool.install(|| {
            members
                .par_iter()
                .map(|spec| {
                    let t0 = Instant::now();
                    let outcome =
                        tune_candidate(spec, panel, target, opts).map_err(|e| e.to_string());
                    (
                        spec.id.clone(),
                        spec.group,
                        outcome,
                        t0.elapsed().as_secs_f64(),
                    )
                })
                .collect()
        });
        for (id, group, outcome, runtime) in outcomes {
            match outcome {
                Ok((mut record, dump)) => {
                    record.runtime_seconds = runtime;
                    dumps.insert(id, dump);
                    records.push(record);
                }
                Err(error) => failures.push(FailureRecord { id, group, error }),
            }
        }
        completed_groups.push(group);
    }

    let value_of = |r: &CandidateRecord| -> Option<f64> {
        match opts.criterion {
            Criterion::Fit => Some(r.rmse_fit),
            Criterion::Holdout => r.rmse_holdout,
        }
    };
    records.sort_by(|a, b| {
        match (value_of(a), value_of(b)) {
            (Some(x), Some(y)) => x.partial_cmp(&y).expect("finite"),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.id.cmp(&b.id))
    });
    failures.sort_by(|a, b| a.id.cmp(&b.id));

    let winner = records
        .iter()
        .find(|r| value_of(r).is_some())
        .cloned()
        .ok_or_else(|| Error::AllCandidatesFailed {
            causes: failures
                .iter()
                .map(|f| format!("{}: {}", f.id, f.error))
                .collect(),
        })?;
    debug_assert!(records
        .iter()
        .filter_map(value_of)
        .all(|v| value_of(&winner).expect("winner has value") <= v));

    let winner_model = dumps
        .remove(&winner.id)
        .expect("winner was recorded with a model dump");
    Ok(PanelReport {
        criterion: opts.criterion,
        timestamp: chrono::Utc::now().to_rfc3339(),
        winner_id: winner.id.clone(),
        winner_model,
        forecast: winner.horizon.clone(),
        records,
        failures,
        analytics,
        completed_groups,
        skipped_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use chrono::NaiveDate;

    fn day1() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 21).unwrap()
    }

    fn small_panel() -> EpidemicPanel {
        let a: Vec<f64> = (0..14)
            .map(|i| 10.0 + 3.0 * i as f64 + ((i % 3) as f64))
            .collect();
        let b: Vec<f64> = (0..14).map(|i| 5.0 + 2.0 * i as f64).collect();
        EpidemicPanel::new(vec![
            TimeSeries::from_start("suspected", day1(), a).unwrap(),
            TimeSeries::from_start("confirmed", day1(), b).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn power_set_counts() {
        let p = small_panel();
        let subsets =
            enumerate_subsets(&p, "suspected", &SubsetMode::PowerSet { cap: 1 << 10 }).unwrap();
        assert_eq!(subsets.len(), 2);
        assert!(subsets.iter().all(|s| s.categories[0] == "suspected"));
    }

    #[test]
    fn power_set_cap() {
        let p = small_panel();
        let err =
            enumerate_subsets(&p, "suspected", &SubsetMode::PowerSet { cap: 1 }).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn curated_unknown_category() {
        let p = small_panel();
        let err = enumerate_subsets(
            &p,
            "suspected",
            &SubsetMode::Curated(vec![vec!["recovered".into()]]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownCategory(_)));
    }

    #[test]
    fn curated_standard_list_has_eight() {
        assert_eq!(standard_curated_subsets().len(), 8);
    }

    #[test]
    fn ses_tie_breaks_to_first_grid_point() {
        let p = EpidemicPanel::new(vec![
            TimeSeries::from_start("x", day1(), vec![5.0; 8]).unwrap()
        ])
        .unwrap();
        let spec = CandidateSpec {
            id: "g5-ses".into(),
            group: 5,
            algorithm: Algorithm::Ses {
                alphas: vec![0.2, 0.5, 0.9],
            },
            sources: vec!["x".into()],
        };
        let opts = PanelOptions {
            workers: 1,
            ..PanelOptions::default()
        };
        let (record, _) = tune_candidate(&spec, &p, "x", &opts).unwrap();
        assert_eq!(record.rmse_fit, 0.0);
        assert_eq!(record.params["alpha"], json!(0.2));
    }

    #[test]
    fn single_point_grid_returned() {
        let p = small_panel();
        let spec = CandidateSpec {
            id: "g3-ols".into(),
            group: 3,
            algorithm: Algorithm::OlsLag {
                windows: vec![2],
                ridge: 0.0,
            },
            sources: vec!["suspected".into()],
        };
        let opts = PanelOptions {
            workers: 1,
            ..PanelOptions::default()
        };
        let (record, _) = tune_candidate(&spec, &p, "suspected", &opts).unwrap();
        assert_eq!(record.params["window"], json!(2));
    }

    #[test]
    fn all_grid_points_failing_reports_causes() {
        // Holt-Winters needs 2*period points; a 5-point series fails its
        // every grid entry.
        let p = EpidemicPanel::new(vec![TimeSeries::from_start(
            "x",
            day1(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
        )
        .unwrap()])
        .unwrap();
        let spec = CandidateSpec {
            id: "g5-hw-add".into(),
            group: 5,
            algorithm: Algorithm::HoltWinters {
                mode: Seasonal::Additive,
                period: 7,
            },
            sources: vec!["x".into()],
        };
        let opts = PanelOptions {
            workers: 1,
            ..PanelOptions::default()
        };
        let err = tune_candidate(&spec, &p, "x", &opts).unwrap_err();
        match err {
            Error::AllCandidatesFailed { causes } => {
                assert!(causes.iter().any(|c| c.contains("insufficient data")));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn winner_is_argmin_with_id_tie_break() {
        let p = small_panel();
        let roster = vec![
            CandidateSpec {
                id: "b-naive".into(),
                group: 5,
                algorithm: Algorithm::Naive,
                sources: vec!["suspected".into()],
            },
            CandidateSpec {
                id: "a-naive".into(),
                group: 5,
                algorithm: Algorithm::Naive,
                sources: vec!["suspected".into()],
            },
        ];
        let opts = PanelOptions {
            workers: 1,
            groups: vec![5],
            ..PanelOptions::default()
        };
        let report = run_panel(&p, "suspected", &roster, &opts).unwrap();
        // identical criteria -> lexicographically smaller id wins
        assert_eq!(report.winner_id, "a-naive");
        let w = report
            .records
            .iter()
            .find(|r| r.id == report.winner_id)
            .unwrap();
        for r in &report.records {
            assert!(w.rmse_fit <= r.rmse_fit);
        }
    }

    #[test]
    fn exhausted_budget_skips_later_groups() {
        let p = small_panel();
        let roster = default_roster(&p, "suspected", &RosterOptions::default()).unwrap();
        let opts = PanelOptions {
            workers: 1,
            budget_seconds: 1e-9,
            ..PanelOptions::default()
        };
        let report = run_panel(&p, "suspected", &roster, &opts).unwrap();
        assert_eq!(report.completed_groups, vec![5]);
        assert_eq!(report.skipped_groups, vec![4, 3, 2, 1]);
        assert!(report.records.iter().all(|r| r.group == 5));
        assert!(report.analytics.is_empty());
    }

    #[test]
    fn groups_filter_restricts_records() {
        let p = small_panel();
        let roster = default_roster(&p, "suspected", &RosterOptions::default()).unwrap();
        let opts = PanelOptions {
            workers: 1,
            groups: vec![5],
            ..PanelOptions::default()
        };
        let report = run_panel(&p, "suspected", &roster, &opts).unwrap();
        assert!(report.records.iter().all(|r| r.group == 5));
        assert_eq!(report.skipped_groups, vec![4, 3, 2, 1]);
    }

    #[test]
    fn describe_panel_covers_every_category() {
        let p = small_panel();
        let stats = describe_panel(&p);
        assert_eq!(stats.len(), 2);
        assert!(stats.contains_key("suspected"));
        assert_eq!(stats["confirmed"].increments.len(), 13);
    }
}
