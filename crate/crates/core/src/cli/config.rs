//! JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::anonymity::QuasiIdentifier;
use crate::attack_sim::SimulationConfig;
use crate::dataset::Schema;
use crate::error::{Error, Result};
use crate::matching::MatchOptions;
use crate::risk::{Method, ReliabilityPolicy, ReportOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
    Csv,
}

fn default_age_variable() -> String {
    "age".to_owned()
}

fn default_mob_column() -> String {
    "mob_candidates".to_owned()
}

fn default_methods() -> Vec<Method> {
    vec![Method::Listwise, Method::NMatch]
}

fn default_min_n1() -> usize {
    ReliabilityPolicy::default().min_n1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schema: Option<Schema>,
    /// Merged respondent file assessed by `assess` and `oracle`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Directory of `<YYYY-MM>.csv` background waves for `prep`.
    #[serde(default)]
    pub waves_dir: Option<PathBuf>,
    /// `respondent,study` participation file for `prep`.
    #[serde(default)]
    pub participation: Option<PathBuf>,
    #[serde(default = "default_age_variable")]
    pub age_variable: String,
    /// Name of the month-of-birth column written by `prep`.
    #[serde(default = "default_mob_column")]
    pub mob_column: String,
    #[serde(default)]
    pub quasi_identifiers: Vec<QuasiIdentifier>,
    #[serde(default)]
    pub population_size: Option<u64>,
    #[serde(default)]
    pub n_full: Option<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_min_n1")]
    pub reliability_min_n1: usize,
    #[serde(default)]
    pub require_observed_overlap: bool,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
}

impl RunConfig {
    /// Parse a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [
            &mut config.input,
            &mut config.waves_dir,
            &mut config.participation,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn schema(&self) -> Result<&Schema> {
        let schema = self
            .schema
            .as_ref()
            .ok_or_else(|| Error::Config("`schema` is required".into()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn required<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| Error::Config(format!("`{name}` is required for this command")))
    }

    pub fn reliability(&self) -> ReliabilityPolicy {
        ReliabilityPolicy {
            min_n1: self.reliability_min_n1,
        }
    }

    pub fn match_options(&self) -> MatchOptions {
        MatchOptions {
            require_observed_overlap: self.require_observed_overlap,
        }
    }

    /// Check that every quasi-identifier variable is declared in `schema`
    /// and that N covers the sample.
    pub fn validate_assessment(&self, schema: &Schema) -> Result<()> {
        if self.quasi_identifiers.is_empty() {
            return Err(Error::Config(
                "`quasi_identifiers` must not be empty".into(),
            ));
        }
        for qi in &self.quasi_identifiers {
            for v in qi.variables() {
                if schema.index_of(v).is_none() {
                    return Err(Error::UnknownVariable(v.clone()));
                }
            }
        }
        let population = *self.required(&self.population_size, "population_size")?;
        if let Some(n_full) = self.n_full {
            if n_full as u64 > population {
                return Err(Error::Config(format!(
                    "n_full ({n_full}) exceeds population_size ({population})"
                )));
            }
        }
        Ok(())
    }

    pub fn report_options(&self) -> Result<ReportOptions> {
        Ok(ReportOptions {
            population_size: *self.required(&self.population_size, "population_size")?,
            n_full: self.n_full,
            methods: self.methods.clone(),
            reliability: self.reliability(),
            matching: self.match_options(),
        })
    }
}
