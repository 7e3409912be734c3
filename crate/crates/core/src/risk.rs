//! Pr(correct match | unique match) estimation and risk report assembly.

use serde::{Deserialize, Serialize};

use crate::anonymity::{k_profile, KProfile, QuasiIdentifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matching::{n_match_all, MatchOptions, MatchProfile};

/// When an estimate is too degenerate to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityPolicy {
    /// Estimates built on fewer unique respondents are unreliable.
    pub min_n1: usize,
}

impl Default for ReliabilityPolicy {
    fn default() -> Self {
        ReliabilityPolicy { min_n1: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaEstimate {
    /// `None` when the denominator vanishes.
    pub value: Option<f64>,
    pub n1: usize,
    pub n2: f64,
    pub pi: f64,
    pub reliable: bool,
}

impl ThetaEstimate {
    fn undefined() -> Self {
        ThetaEstimate {
            value: None,
            n1: 0,
            n2: 0.0,
            pi: 0.0,
            reliable: false,
        }
    }
}

/// `n1·π / (n1·π + 2(1−π)·n2)`.
///
/// The estimate is unreliable when it is undefined, when it sits at 0 or 1
/// (no pairs, no uniques, or a census), or when `n1 < policy.min_n1`.
pub fn theta(n1: usize, n2: f64, pi: f64, policy: ReliabilityPolicy) -> Result<ThetaEstimate> {
    if !(pi > 0.0 && pi <= 1.0) {
        return Err(Error::InvalidSamplingFraction(pi));
    }
    if n2.is_nan() || n2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "n2 must be nonnegative, got {n2}"
        )));
    }
    let num = n1 as f64 * pi;
    let den = num + 2.0 * (1.0 - pi) * n2;
    let value = (den > 0.0).then(|| num / den);
    let reliable = match value {
        Some(v) => v > 0.0 && v < 1.0 && n1 >= policy.min_n1,
        None => false,
    };
    Ok(ThetaEstimate {
        value,
        n1,
        n2,
        pi,
        reliable,
    })
}

fn check_population(population: u64, n: usize) -> Result<()> {
    if population == 0 || (n as u64) > population {
        return Err(Error::InvalidArgument(format!(
            "population size {population} must be positive and at least the sample size {n}"
        )));
    }
    Ok(())
}

/// θ from anonymity-set counts, with π = n_remaining / N.
pub fn theta_from_k(
    profile: &KProfile,
    population: u64,
    policy: ReliabilityPolicy,
) -> Result<ThetaEstimate> {
    check_population(population, profile.n_remaining)?;
    if profile.n_remaining == 0 {
        return Ok(ThetaEstimate::undefined());
    }
    theta(
        profile.n_unique,
        profile.n_pairs as f64,
        profile.n_remaining as f64 / population as f64,
        policy,
    )
}

/// θ from n_match counts, with π = n_full / N and n₂ = rows_at_2 / 2.
pub fn theta_from_match(
    profile: &MatchProfile,
    n_full: usize,
    population: u64,
    policy: ReliabilityPolicy,
) -> Result<ThetaEstimate> {
    check_population(population, n_full)?;
    if n_full == 0 {
        return Ok(ThetaEstimate::undefined());
    }
    theta(
        profile.n_unique,
        profile.n2_equivalent,
        n_full as f64 / population as f64,
        policy,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Listwise,
    NMatch,
}

#[derive(Debug, Clone, Serialize)]
pub struct ListwiseRecord {
    pub quasi_identifier: String,
    pub variables: Vec<String>,
    pub n_deleted: usize,
    pub n: usize,
    pub k_eq_1: usize,
    pub k_le_5: usize,
    pub k_le_10: usize,
    pub n_pairs: usize,
    pub pr_su_new: f64,
    pub pr_su_full: f64,
    pub theta: ThetaEstimate,
}

impl ListwiseRecord {
    pub fn new(profile: &KProfile, theta: ThetaEstimate) -> Self {
        ListwiseRecord {
            quasi_identifier: profile.qi.label().to_owned(),
            variables: profile.qi.variables().to_vec(),
            n_deleted: profile.n_deleted,
            n: profile.n_remaining,
            k_eq_1: profile.respondents_k_le[&1],
            k_le_5: profile.respondents_k_le[&5],
            k_le_10: profile.respondents_k_le[&10],
            n_pairs: profile.n_pairs,
            pr_su_new: profile.pr_su_new,
            pr_su_full: profile.pr_su_full,
            theta,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchRecord {
    pub quasi_identifier: String,
    pub variables: Vec<String>,
    pub n: usize,
    pub n_match_eq_1: usize,
    pub n_match_le_5: usize,
    pub n_match_le_10: usize,
    pub n2_equivalent: f64,
    pub pr_su: f64,
    pub theta: ThetaEstimate,
}

impl MatchRecord {
    pub fn new(profile: &MatchProfile, theta: ThetaEstimate) -> Self {
        MatchRecord {
            quasi_identifier: profile.qi.label().to_owned(),
            variables: profile.qi.variables().to_vec(),
            n: profile.n_rows,
            n_match_eq_1: profile.respondents_le[&1],
            n_match_le_5: profile.respondents_le[&5],
            n_match_le_10: profile.respondents_le[&10],
            n2_equivalent: profile.n2_equivalent,
            pr_su: profile.pr_su,
            theta,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ReportRecord {
    Listwise(ListwiseRecord),
    NMatch(MatchRecord),
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMetadata {
    pub n_full: usize,
    pub population_size: u64,
    pub methods: Vec<Method>,
    pub reliability: ReliabilityPolicy,
    pub require_observed_overlap: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub metadata: ReportMetadata,
    pub records: Vec<ReportRecord>,
}

impl RiskReport {
    pub fn listwise(&self) -> impl Iterator<Item = &ListwiseRecord> {
        self.records.iter().filter_map(|r| match r {
            ReportRecord::Listwise(l) => Some(l),
            _ => None,
        })
    }

    pub fn n_match(&self) -> impl Iterator<Item = &MatchRecord> {
        self.records.iter().filter_map(|r| match r {
            ReportRecord::NMatch(m) => Some(m),
            _ => None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub population_size: u64,
    /// Defaults to the number of rows of the assessed dataset.
    pub n_full: Option<usize>,
    pub methods: Vec<Method>,
    pub reliability: ReliabilityPolicy,
    pub matching: MatchOptions,
}

impl ReportOptions {
    pub fn new(population_size: u64) -> Self {
        ReportOptions {
            population_size,
            n_full: None,
            methods: vec![Method::Listwise, Method::NMatch],
            reliability: ReliabilityPolicy::default(),
            matching: MatchOptions::default(),
        }
    }
}

/// One record per (quasi-identifier, method), in quasi-identifier order.
/// Quasi-identifiers that include an estimated month of birth get no
/// listwise record: exact anonymity sets cannot use candidate lists.
pub fn risk_report(
    dataset: &Dataset,
    qis: &[QuasiIdentifier],
    options: &ReportOptions,
) -> Result<RiskReport> {
    if qis.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one quasi-identifier is required".into(),
        ));
    }
    let mut methods = options.methods.clone();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one method is required".into(),
        ));
    }
    let n_full = options.n_full.unwrap_or(dataset.n_rows());
    if n_full < dataset.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "n_full ({n_full}) is smaller than the dataset ({} rows)",
            dataset.n_rows()
        )));
    }
    check_population(options.population_size, n_full)?;

    let mut records = Vec::new();
    for qi in qis {
        let with_mob = qi.has_birth_month(dataset)?;
        for method in &methods {
            match method {
                Method::Listwise if with_mob => {}
                Method::Listwise => {
                    let profile = k_profile(dataset, qi, n_full)?;
                    let theta =
                        theta_from_k(&profile, options.population_size, options.reliability)?;
                    records.push(ReportRecord::Listwise(ListwiseRecord::new(&profile, theta)));
                }
                Method::NMatch => {
                    let profile = n_match_all(dataset, qi, options.matching)?;
                    let theta = theta_from_match(
                        &profile,
                        n_full,
                        options.population_size,
                        options.reliability,
                    )?;
                    records.push(ReportRecord::NMatch(MatchRecord::new(&profile, theta)));
                }
            }
        }
    }
    Ok(RiskReport {
        metadata: ReportMetadata {
            n_full,
            population_size: options.population_size,
            methods,
            reliability: options.reliability,
            require_observed_overlap: options.matching.require_observed_overlap,
        },
        records,
    })
}
