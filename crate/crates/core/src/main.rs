//! Batch command-line front end: ingest a CSV panel, run the forecasting
//! competition, and write `report.json`, `forecast.tsv` and `panel.svg`.
//!
//! Errors go to stderr as one structured JSON object followed by a
//! human-readable summary line. Exit codes: 0 success, 2 configuration
//! error, 3 data/io error, 4 every candidate failed, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use grooms::error::Error;
use grooms::panel::Criterion;
use grooms::report::{execute, RunConfig, SubsetModeKind};

#[derive(Parser)]
#[command(
    name = "grooms",
    version,
    about = "Panel-based forecasting for very short daily time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full forecasting panel on a CSV file
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV (`date,<category>,...`)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Category to forecast
    #[arg(long)]
    target: Option<String>,
    /// Days ahead to forecast
    #[arg(long)]
    horizon: Option<usize>,
    /// Ranking criterion: fit | holdout
    #[arg(long)]
    criterion: Option<String>,
    /// Wall-clock budget for the whole panel
    #[arg(long = "budget-seconds")]
    budget_seconds: Option<f64>,
    /// Enabled groups, e.g. 5,4,3 (execution order is always 5..1)
    #[arg(long, value_delimiter = ',')]
    groups: Option<Vec<u8>>,
    /// Source-subset search: power_set | curated
    #[arg(long = "subset-mode")]
    subset_mode: Option<String>,
    /// Concurrent candidate evaluations
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for report.json, forecast.tsv, panel.svg
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: RunArgs) -> Result<RunConfig, Error> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.input {
        config.input = v;
    }
    if let Some(v) = args.target {
        config.target = v;
    }
    if let Some(v) = args.horizon {
        config.horizon = v;
    }
    if let Some(v) = args.criterion {
        config.criterion = match v.as_str() {
            "fit" => Criterion::Fit,
            "holdout" => Criterion::Holdout,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "criterion must be `fit` or `holdout`, got `{other}`"
                )))
            }
        };
    }
    if let Some(v) = args.budget_seconds {
        config.budget_seconds = v;
    }
    if let Some(v) = args.groups {
        config.groups = v;
    }
    if let Some(v) = args.subset_mode {
        config.subset_mode = match v.as_str() {
            "power_set" => SubsetModeKind::PowerSet,
            "curated" => SubsetModeKind::Curated,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "subset mode must be `power_set` or `curated`, got `{other}`"
                )))
            }
        };
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if let Some(v) = args.out {
        config.out = v;
    }
    config.validate()?;
    Ok(config)
}

fn exit_code_for(err: &Error) -> u8 {
    match err.kind() {
        "config" => 2,
        "data" | "io" => 3,
        "candidates" => 4,
        _ => 1,
    }
}

fn fail(err: Error) -> ExitCode {
    let object = json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
        }
    });
    eprintln!("{object}");
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(&err))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = match build_config(args) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match execute(&config) {
                Ok(artifacts) => {
                    let doc = &artifacts.document;
                    println!(
                        "winner: {} ({:?} RMSE {:.6})",
                        doc.winner.id, doc.winner.criterion, doc.winner.criterion_value
                    );
                    println!(
                        "candidates: {} completed, {} failed; groups completed: {:?}",
                        doc.candidates.len(),
                        doc.failures.len(),
                        doc.groups.completed
                    );
                    for p in &doc.forecast {
                        println!("{}\t{:.3}", p.date, p.value);
                    }
                    println!(
                        "wrote {} / {} / {}",
                        artifacts.report_path.display(),
                        artifacts.forecast_path.display(),
                        artifacts.svg_path.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
