//! Synthetic populations and a journalist-scenario linking attack, used to
//! check the θ estimator against an empirical match success rate.
//!
//! The adversary draws a uniform random unit from the population, looks its
//! fully observed pattern up in the disclosed sample (sample missing cells
//! act as wildcards), and claims a re-identification when exactly one sample
//! row matches. Ground truth comes from the inclusion map, which the matcher
//! never sees.

use std::collections::{BTreeMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anonymity::{k_profile, QuasiIdentifier};
use crate::dataset::{Dataset, DatasetBuilder, Datum, Schema, VariableKind, VariableSpec};
use crate::error::{Error, Result};
use crate::matching::{build_match_index, n_match_all, MatchOptions, Scratch};
use crate::risk::{theta_from_k, theta_from_match, ReliabilityPolicy, ThetaEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawCategoricalVariable")]
pub struct CategoricalVariable {
    pub name: String,
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
}

/// Config form: omitted weights mean equally likely labels.
#[derive(Deserialize)]
struct RawCategoricalVariable {
    name: String,
    labels: Vec<String>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

impl From<RawCategoricalVariable> for CategoricalVariable {
    fn from(raw: RawCategoricalVariable) -> Self {
        let k = raw.labels.len();
        CategoricalVariable {
            weights: raw.weights.unwrap_or_else(|| vec![1.0 / k as f64; k]),
            name: raw.name,
            labels: raw.labels,
        }
    }
}

impl CategoricalVariable {
    /// `categories` equally likely labels `"0"`, `"1"`, ...
    pub fn uniform(name: impl Into<String>, categories: usize) -> Self {
        CategoricalVariable {
            name: name.into(),
            labels: (0..categories).map(|c| c.to_string()).collect(),
            weights: vec![1.0 / categories as f64; categories],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub population_size: usize,
    pub variables: Vec<CategoricalVariable>,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::InvalidArgument(
                "population size must be at least 1".into(),
            ));
        }
        let mut names = HashSet::new();
        for var in &self.variables {
            let bad = |reason: String| Error::InvalidWeights {
                variable: var.name.clone(),
                reason,
            };
            if !names.insert(var.name.as_str()) {
                return Err(Error::DuplicateVariable(var.name.clone()));
            }
            if var.labels.is_empty() || var.labels.len() != var.weights.len() {
                return Err(bad(format!(
                    "{} labels but {} weights",
                    var.labels.len(),
                    var.weights.len()
                )));
            }
            if var.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(bad("weights must be finite and nonnegative".into()));
            }
            let sum: f64 = var.weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(bad(format!("weights sum to {sum}, not 1")));
            }
            let distinct: HashSet<&str> = var.labels.iter().map(String::as_str).collect();
            if distinct.len() != var.labels.len() {
                return Err(bad("labels must be distinct".into()));
            }
        }
        Ok(())
    }

    fn schema(&self) -> Result<Schema> {
        Schema::new(
            self.variables
                .iter()
                .map(|v| VariableSpec::new(v.name.clone(), VariableKind::Categorical))
                .collect(),
        )
    }
}

/// Stream `stream` of the generator family rooted at `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined input.
    let mut z = seed
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw `population_size` units with independent categorical cells.
pub fn gen_population(spec: &PopulationSpec) -> Result<Dataset> {
    spec.validate()?;
    let dists = spec
        .variables
        .iter()
        .map(|v| {
            WeightedIndex::new(&v.weights).map_err(|e| Error::InvalidWeights {
                variable: v.name.clone(),
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut builder = DatasetBuilder::new(spec.schema()?);
    for i in 0..spec.population_size {
        let cells = spec
            .variables
            .iter()
            .zip(&dists)
            .map(|(v, d)| Datum::Label(&v.labels[d.sample(&mut rng)]))
            .collect();
        builder.push_row(format!("u{i}"), cells)?;
    }
    Ok(builder.finish())
}

/// Which population unit ended up as which sample row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inclusion {
    sample_row: Vec<Option<usize>>,
}

impl Inclusion {
    pub fn sample_row(&self, population_row: usize) -> Option<usize> {
        self.sample_row[population_row]
    }

    pub fn sample_size(&self) -> usize {
        self.sample_row.iter().filter(|r| r.is_some()).count()
    }
}

/// Bernoulli(π) sample of the population with cells blanked independently
/// at the per-variable missing rates (variables not listed are never
/// blanked). Sample rows get fresh ids.
pub fn sample_disclosed(
    population: &Dataset,
    pi: f64,
    missing_rates: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<(Dataset, Inclusion)> {
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(Error::InvalidSamplingFraction(pi));
    }
    let mut rates = vec![0.0; population.n_vars()];
    for (name, &rate) in missing_rates {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "missing rate for `{name}` must be in [0, 1), got {rate}"
            )));
        }
        rates[population.column_index(name)?] = rate;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = DatasetBuilder::new(population.schema().clone());
    let mut sample_row = Vec::with_capacity(population.n_rows());
    let mut n = 0;
    for r in 0..population.n_rows() {
        if rng.gen::<f64>() >= pi {
            sample_row.push(None);
            continue;
        }
        let cells = rates
            .iter()
            .enumerate()
            .map(|(c, &rate)| {
                if rate > 0.0 && rng.gen::<f64>() < rate {
                    Datum::Missing
                } else {
                    population.datum(r, c)
                }
            })
            .collect();
        builder.push_row(format!("s{n}"), cells)?;
        sample_row.push(Some(n));
        n += 1;
    }
    Ok((builder.finish(), Inclusion { sample_row }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackResult {
    pub sample_size: usize,
    pub draws: usize,
    pub unique_matches: usize,
    pub correct_unique_matches: usize,
    /// correct / unique; `None` without unique matches.
    pub empirical_theta: Option<f64>,
    /// θ̂ computed from the sample alone.
    pub predicted_theta: ThetaEstimate,
}

/// θ̂ from the sample alone: anonymity sets when the sample has no missing
/// quasi-identifier cells, n_match counts otherwise. π = realized n / N.
pub fn predicted_theta(
    sample: &Dataset,
    qi: &QuasiIdentifier,
    population_size: u64,
    policy: ReliabilityPolicy,
) -> Result<ThetaEstimate> {
    let cols = qi.resolve(sample)?;
    let any_missing = cols
        .iter()
        .any(|&c| sample.column(c).cells().iter().any(|v| v.is_missing()));
    if any_missing {
        let profile = n_match_all(sample, qi, MatchOptions::default())?;
        theta_from_match(&profile, sample.n_rows(), population_size, policy)
    } else {
        let profile = k_profile(sample, qi, sample.n_rows())?;
        theta_from_k(&profile, population_size, policy)
    }
}

/// Run `draws` journalist-scenario linking attempts against `sample`.
pub fn journalist_attack(
    population: &Dataset,
    sample: &Dataset,
    inclusion: &Inclusion,
    qi: &QuasiIdentifier,
    draws: usize,
    seed: u64,
    policy: ReliabilityPolicy,
) -> Result<AttackResult> {
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be positive".into()));
    }
    if population.is_empty() {
        return Err(Error::InvalidArgument("population is empty".into()));
    }
    let pop_cols = qi.resolve(population)?;
    let index = build_match_index(sample, qi)?;
    let mut scratch = Scratch::new(sample.n_rows());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut unique, mut correct) = (0, 0);
    for _ in 0..draws {
        let unit = rng.gen_range(0..population.n_rows());
        let data: Vec<Datum<'_>> = pop_cols
            .iter()
            .map(|&c| population.datum(unit, c))
            .collect();
        let probe = index.probe_from_data(sample, &data)?;
        if let Some(row) = index.unique_match(&probe, &mut scratch) {
            unique += 1;
            if inclusion.sample_row(unit) == Some(row) {
                correct += 1;
            }
        }
    }
    Ok(AttackResult {
        sample_size: sample.n_rows(),
        draws,
        unique_matches: unique,
        correct_unique_matches: correct,
        empirical_theta: (unique > 0).then(|| correct as f64 / unique as f64),
        predicted_theta: predicted_theta(sample, qi, population.n_rows() as u64, policy)?,
    })
}

fn default_replicates() -> usize {
    1
}

/// A full simulation: one population, several independent samples, and a
/// share of the adversary draws against each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub population: PopulationSpec,
    pub sampling_fraction: f64,
    #[serde(default)]
    pub missing_rates: BTreeMap<String, f64>,
    /// Defaults to every population variable.
    #[serde(default)]
    pub quasi_identifier: Option<Vec<String>>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Total adversary draws, split evenly over replicates.
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reliability: ReliabilityPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub replicates: Vec<AttackResult>,
    pub total_draws: usize,
    pub total_unique_matches: usize,
    pub total_correct_unique_matches: usize,
    /// Σ correct / Σ unique over replicates.
    pub pooled_empirical_theta: Option<f64>,
    /// Mean of the defined θ̂ over replicates.
    pub mean_predicted_theta: Option<f64>,
    pub absolute_difference: Option<f64>,
    /// Within ±20% relative or ±0.02 absolute, whichever is larger.
    pub within_tolerance: Option<bool>,
}

/// Relative and absolute agreement bounds between simulation and formula.
pub const RELATIVE_TOLERANCE: f64 = 0.20;
pub const ABSOLUTE_TOLERANCE: f64 = 0.02;

pub fn within_tolerance(empirical: f64, predicted: f64) -> bool {
    (empirical - predicted).abs() <= (RELATIVE_TOLERANCE * predicted.abs()).max(ABSOLUTE_TOLERANCE)
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationSummary> {
    if config.draws == 0 {
        return Err(Error::InvalidArgument("draws must be positive".into()));
    }
    if config.replicates == 0 || config.draws < config.replicates {
        return Err(Error::InvalidArgument(format!(
            "need at least one replicate and one draw per replicate ({} draws, {} replicates)",
            config.draws, config.replicates
        )));
    }
    let population = gen_population(&config.population)?;
    let qi = match &config.quasi_identifier {
        Some(vars) => QuasiIdentifier::new(vars.clone())?,
        None => QuasiIdentifier::new(config.population.variables.iter().map(|v| v.name.clone()))?,
    };
    let per = config.draws / config.replicates;
    let extra = config.draws % config.replicates;
    let replicates = (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let stream = 2 * i as u64;
            let (sample, inclusion) = sample_disclosed(
                &population,
                config.sampling_fraction,
                &config.missing_rates,
                derive_seed(config.seed, stream),
            )?;
            let draws = per + usize::from(i < extra);
            journalist_attack(
                &population,
                &sample,
                &inclusion,
                &qi,
                draws,
                derive_seed(config.seed, stream + 1),
                config.reliability,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let total_unique: usize = replicates.iter().map(|r| r.unique_matches).sum();
    let total_correct: usize = replicates.iter().map(|r| r.correct_unique_matches).sum();
    let pooled = (total_unique > 0).then(|| total_correct as f64 / total_unique as f64);
    let predicted: Vec<f64> = replicates
        .iter()
        .filter_map(|r| r.predicted_theta.value)
        .collect();
    let mean_predicted =
        (!predicted.is_empty()).then(|| predicted.iter().sum::<f64>() / predicted.len() as f64);
    let (absolute_difference, within) = match (pooled, mean_predicted) {
        (Some(e), Some(p)) => (Some((e - p).abs()), Some(within_tolerance(e, p))),
        _ => (None, None),
    };
    Ok(SimulationSummary {
        total_draws: config.draws,
        total_unique_matches: total_unique,
        total_correct_unique_matches: total_correct,
        pooled_empirical_theta: pooled,
        mean_predicted_theta: mean_predicted,
        absolute_difference,
        within_tolerance: within,
        replicates,
    })
}
