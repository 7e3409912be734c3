//! Command-line front end: `prep`, `assess`, `simulate` and `oracle`.
//!
//! Exit status is 0 on success, 1 for runtime failures and 2 for usage or
//! configuration errors.

pub mod config;
pub mod render;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::anonymity::QuasiIdentifier;
use crate::attack_sim::{run_simulation, SimulationSummary};
use crate::dataset::{load_csv, Dataset, Datum, Schema, VariableKind, VariableRole, VariableSpec};
use crate::error::{Error, Result};
use crate::matching::{n_match_all, n_match_all_reference};
use crate::panel_prep::{
    estimate_birth_months, filter_background_only, load_participation, load_wave_dir, merge_waves,
};
use crate::risk::{risk_report, RiskReport};

pub use config::{Format, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "panelrisk",
    version,
    about = "Re-identification risk assessment for survey-panel microdata"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Only count candidates sharing an observed quasi-identifier variable.
    #[arg(long, global = true)]
    pub require_observed_overlap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Merge background waves, drop background-only respondents and
    /// estimate month of birth.
    Prep,
    /// Listwise-deletion and n_match risk report.
    Assess,
    /// Linking-attack simulation against synthetic populations.
    Simulate,
    /// Cross-check indexed n_match counts against a brute-force scan.
    Oracle,
}

/// Result of the preparation pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub n_removed: usize,
    /// Respondents whose age history could not be interpreted; their
    /// estimate is left empty.
    pub n_inconsistent: usize,
    pub participation_empty: bool,
}

pub fn cmd_prep(config: &RunConfig) -> Result<Prepared> {
    let schema = config.schema()?;
    let waves_dir = config.required(&config.waves_dir, "waves_dir")?;
    let participation_path = config.required(&config.participation, "participation")?;
    if schema.index_of(&config.age_variable).is_none() {
        return Err(Error::Config(format!(
            "age variable `{}` is not in the schema",
            config.age_variable
        )));
    }
    let series = load_wave_dir(waves_dir, schema)?;
    let participation = load_participation(participation_path)?;
    let merged = merge_waves(&series);
    let (kept, n_removed) = filter_background_only(&merged, &participation);
    let estimates = estimate_birth_months(&series, kept.respondent_ids(), &config.age_variable)?;
    let n_inconsistent = estimates.iter().filter(|e| e.is_err()).count();
    let cells: Vec<Datum<'_>> = estimates
        .into_iter()
        .map(|e| match e {
            Ok(est) if !est.is_empty() => Datum::Months(est),
            _ => Datum::Missing,
        })
        .collect();
    let spec = VariableSpec::new(config.mob_column.clone(), VariableKind::BirthMonth)
        .with_role(VariableRole::Derived);
    Ok(Prepared {
        dataset: kept.with_column(spec, cells)?,
        n_removed,
        n_inconsistent,
        participation_empty: participation.is_empty(),
    })
}

/// The configured schema, extended with the month-of-birth column when the
/// input carries one the schema does not declare.
fn assessment_schema(config: &RunConfig, input: &Path) -> Result<Schema> {
    let mut schema = config.schema()?.clone();
    if schema.index_of(&config.mob_column).is_none() {
        let mut rdr = csv::Reader::from_path(input)
            .map_err(|e| Error::csv(input.display().to_string(), e))?;
        let header = rdr
            .headers()
            .map_err(|e| Error::csv(input.display().to_string(), e))?;
        if header.iter().any(|h| h == config.mob_column) {
            schema.variables.push(
                VariableSpec::new(config.mob_column.clone(), VariableKind::BirthMonth)
                    .with_role(VariableRole::Derived),
            );
        }
    }
    Ok(schema)
}

fn load_input(config: &RunConfig) -> Result<Dataset> {
    let input = config.required(&config.input, "input")?;
    let schema = assessment_schema(config, input)?;
    config.validate_assessment(&schema)?;
    load_csv(input, &schema)
}

pub fn cmd_assess(config: &RunConfig) -> Result<RiskReport> {
    let dataset = load_input(config)?;
    risk_report(
        &dataset,
        &config.quasi_identifiers,
        &config.report_options()?,
    )
}

pub fn cmd_simulate(config: &RunConfig) -> Result<SimulationSummary> {
    let mut sim = config.required(&config.simulation, "simulation")?.clone();
    if let Some(seed) = config.seed {
        sim.seed = seed;
    }
    sim.reliability = config.reliability();
    run_simulation(&sim)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRecord {
    pub quasi_identifier: String,
    pub respondent_ids: Vec<String>,
    pub indexed: Vec<usize>,
    pub reference: Vec<usize>,
    pub agree: bool,
}

pub fn cmd_oracle(config: &RunConfig) -> Result<Vec<OracleRecord>> {
    let dataset = load_input(config)?;
    let options = config.match_options();
    config
        .quasi_identifiers
        .iter()
        .map(|qi: &QuasiIdentifier| {
            let indexed = n_match_all(&dataset, qi, options)?.counts;
            let reference = n_match_all_reference(&dataset, qi, options)?.counts;
            Ok(OracleRecord {
                quasi_identifier: qi.label().to_owned(),
                respondent_ids: dataset.respondent_ids().to_vec(),
                agree: indexed == reference,
                indexed,
                reference,
            })
        })
        .collect()
}

fn oracle_text(records: &[OracleRecord]) -> String {
    records
        .iter()
        .map(|r| {
            let mismatches = r
                .indexed
                .iter()
                .zip(&r.reference)
                .filter(|(a, b)| a != b)
                .count();
            format!(
                "{}: {} rows, {} mismatches\n",
                r.quasi_identifier,
                r.indexed.len(),
                mismatches
            )
        })
        .collect()
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Execute a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("--threads: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.require_observed_overlap {
        config.require_observed_overlap = true;
    }
    let format = cli.format.or(config.format);
    let output = cli.output.as_deref();

    match cli.command {
        Command::Prep => {
            let prepared = cmd_prep(&config)?;
            if prepared.participation_empty {
                eprintln!("warning: participation file is empty; every respondent is removed");
            }
            if prepared.n_inconsistent > 0 {
                eprintln!(
                    "warning: {} respondents have inconsistent age histories; month of birth left empty",
                    prepared.n_inconsistent
                );
            }
            eprintln!("removed {} respondents", prepared.n_removed);
            let mut buf = Vec::new();
            prepared.dataset.write_csv(&mut buf)?;
            emit(
                output,
                &String::from_utf8(buf).expect("csv output is utf-8"),
            )
        }
        Command::Assess => {
            let report = cmd_assess(&config)?;
            let text = match format.unwrap_or(Format::Text) {
                Format::Text => render::report_text(&report),
                Format::Json => render::json(&report)?,
                Format::Csv => render::report_csv(&report)?,
            };
            emit(output, &text)
        }
        Command::Simulate => {
            let summary = cmd_simulate(&config)?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Text => render::simulation_text(&summary),
                Format::Json => render::json(&summary)?,
                Format::Csv => {
                    return Err(Error::InvalidArgument(
                        "simulate supports text or json output".into(),
                    ))
                }
            };
            emit(output, &text)
        }
        Command::Oracle => {
            let records = cmd_oracle(&config)?;
            let text = match format.unwrap_or(Format::Text) {
                Format::Json => render::json(&records)?,
                _ => oracle_text(&records),
            };
            emit(output, &text)?;
            if records.iter().all(|r| r.agree) {
                Ok(())
            } else {
                Err(Error::OracleMismatch)
            }
        }
    }
}

/// Parse `args`, run, and map the outcome to an exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}
