//! Run configuration and the persisted report document.
//!
//! A run reads one CSV panel, executes the candidate competition and writes
//! three artifacts into the output directory: `report.json` (this document),
//! `forecast.tsv` and `panel.svg`. The JSON document round-trips losslessly
//! (floats use shortest round-trip decimal encoding).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ingest_csv;
use crate::lag::SplitSpec;
use crate::metrics::ForecastPoint;
use crate::ml::SourceExtension;
use crate::panel::{
    default_roster, run_panel, standard_curated_subsets, CandidateRecord, Criterion,
    FailureRecord, ModelDump, PanelOptions, PanelReport, RosterOptions, SubsetMode,
};
use crate::plot::{forecast_tsv, panel_svg};
use crate::series::{DescriptiveStats, EpidemicPanel};

/// Serializable subset-search mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetModeKind {
    PowerSet,
    Curated,
}

fn default_horizon() -> usize {
    6
}
fn default_budget() -> f64 {
    60.0
}
fn default_groups() -> Vec<u8> {
    vec![5, 4, 3, 2, 1]
}
fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_subset_cap() -> u64 {
    1 << 10
}
fn default_criterion() -> Criterion {
    Criterion::Fit
}
fn default_subset_mode() -> SubsetModeKind {
    SubsetModeKind::PowerSet
}
fn default_split() -> SplitSpec {
    SplitSpec::default()
}
fn default_extension() -> SourceExtension {
    SourceExtension::HoldLast
}

/// Full configuration of one batch run. A JSON config file deserializes into
/// this; command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: PathBuf,
    pub target: String,
    pub horizon: usize,
    pub criterion: Criterion,
    pub budget_seconds: f64,
    /// Enabled groups; execution order is always 5,4,3,2,1.
    pub groups: Vec<u8>,
    pub subset_mode: SubsetModeKind,
    /// Explicit combinations for curated mode; when absent, the standard
    /// eight-combination list is used.
    pub curated_subsets: Option<Vec<Vec<String>>>,
    /// Cap on 2^|auxiliaries| in power-set mode.
    pub subset_cap: u64,
    pub split: SplitSpec,
    pub source_extension: SourceExtension,
    pub workers: usize,
    pub out: PathBuf,
    /// Grid overrides.
    pub ml_windows: Option<Vec<usize>>,
    pub hw_period: Option<usize>,
    pub combi_window: Option<usize>,
    pub mia_window: Option<usize>,
    pub cf_cycles: Option<usize>,
    /// Reserved; the current algorithms are deterministic and ignore it.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("data/ncov_2020.csv"),
            target: "suspected".to_string(),
            horizon: default_horizon(),
            criterion: default_criterion(),
            budget_seconds: default_budget(),
            groups: default_groups(),
            subset_mode: default_subset_mode(),
            curated_subsets: None,
            subset_cap: default_subset_cap(),
            split: default_split(),
            source_extension: default_extension(),
            workers: default_workers(),
            out: default_out(),
            ml_windows: None,
            hw_period: None,
            combi_window: None,
            mia_window: None,
            cf_cycles: None,
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidHorizon);
        }
        if self.target.is_empty() {
            return Err(Error::InvalidParameter("target must be nonempty".into()));
        }
        if self.budget_seconds <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "budget must be positive, got {}",
                self.budget_seconds
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be >= 1".into()));
        }
        for g in &self.groups {
            if !(1..=5).contains(g) {
                return Err(Error::InvalidParameter(format!(
                    "group {g} outside 1..=5"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!(
                "config file {}: {e}",
                path.display()
            )))?;
        Ok(config)
    }

    fn subset_mode(&self) -> SubsetMode {
        match self.subset_mode {
            SubsetModeKind::PowerSet => SubsetMode::PowerSet {
                cap: self.subset_cap as u128,
            },
            SubsetModeKind::Curated => SubsetMode::Curated(
                self.curated_subsets
                    .clone()
                    .unwrap_or_else(standard_curated_subsets),
            ),
        }
    }

    pub fn roster_options(&self) -> RosterOptions {
        let defaults = RosterOptions::default();
        RosterOptions {
            subset_mode: self.subset_mode(),
            ml_windows: self.ml_windows.clone().unwrap_or(defaults.ml_windows),
            hw_period: self.hw_period.unwrap_or(defaults.hw_period),
            combi_window: self.combi_window.unwrap_or(defaults.combi_window),
            mia_window: self.mia_window.unwrap_or(defaults.mia_window),
            cf_cycles: self.cf_cycles.unwrap_or(defaults.cf_cycles),
            combi_budget: defaults.combi_budget,
        }
    }

    pub fn panel_options(&self) -> PanelOptions {
        PanelOptions {
            horizon: self.horizon,
            budget_seconds: self.budget_seconds,
            criterion: self.criterion,
            workers: self.workers,
            split: self.split,
            source_extension: self.source_extension,
            groups: self.groups.clone(),
        }
    }
}

/// Outcome of the group scheduler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub completed: Vec<u8>,
    pub skipped: Vec<u8>,
}

/// The winning candidate with its serialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerInfo {
    pub id: String,
    pub criterion: Criterion,
    pub criterion_value: f64,
    pub model: ModelDump,
}

/// Everything one run persists as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub config: RunConfig,
    pub timestamp: String,
    pub analytics: BTreeMap<String, DescriptiveStats>,
    /// Sorted by (criterion value ascending, id).
    pub candidates: Vec<CandidateRecord>,
    pub failures: Vec<FailureRecord>,
    pub groups: GroupOutcome,
    pub winner: WinnerInfo,
    /// The winner's horizon forecast.
    pub forecast: Vec<ForecastPoint>,
}

pub const SCHEMA_VERSION: u32 = 1;

impl ReportDocument {
    pub fn assemble(config: &RunConfig, report: PanelReport) -> Result<ReportDocument> {
        let winner_record = report
            .records
            .iter()
            .find(|r| r.id == report.winner_id)
            .ok_or_else(|| Error::InvalidParameter("winner missing in records".into()))?;
        let criterion_value = report
            .criterion_value(winner_record)
            .ok_or_else(|| Error::InvalidParameter("winner lacks criterion value".into()))?;
        Ok(ReportDocument {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            timestamp: report.timestamp.clone(),
            analytics: report.analytics,
            winner: WinnerInfo {
                id: report.winner_id,
                criterion: report.criterion,
                criterion_value,
                model: report.winner_model,
            },
            forecast: report.forecast,
            candidates: report.records,
            failures: report.failures,
            groups: GroupOutcome {
                completed: report.completed_groups,
                skipped: report.skipped_groups,
            },
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<ReportDocument> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Artifacts of a completed run.
pub struct RunArtifacts {
    pub document: ReportDocument,
    pub report_path: PathBuf,
    pub forecast_path: PathBuf,
    pub svg_path: PathBuf,
}

/// Ingests the input, runs the panel and writes `report.json`,
/// `forecast.tsv` and `panel.svg` into the output directory.
pub fn execute(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let panel: EpidemicPanel = ingest_csv(&config.input)?;
    let roster = default_roster(&panel, &config.target, &config.roster_options())?;
    let report = run_panel(&panel, &config.target, &roster, &config.panel_options())?;

    let tsv = forecast_tsv(&panel, &config.target, &report)?;
    let svg = panel_svg(&panel, &config.target, &report)?;
    let document = ReportDocument::assemble(config, report)?;
    let json = document.to_json_string()?;

    std::fs::create_dir_all(&config.out)?;
    let report_path = config.out.join("report.json");
    let forecast_path = config.out.join("forecast.tsv");
    let svg_path = config.out.join("panel.svg");
    std::fs::write(&report_path, json)?;
    std::fs::write(&forecast_path, tsv)?;
    std::fs::write(&svg_path, svg)?;
    Ok(RunArtifacts {
        document,
        report_path,
        forecast_path,
        svg_path,
    })
}
