//! Listwise-deletion k-anonymity analysis.
//!
//! Rows with any missing quasi-identifier cell are dropped; the survivors
//! are partitioned into anonymity sets of identical response patterns.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Datum, Value, VariableKind};
use crate::error::{Error, Result};

/// Thresholds reported as "k ≤ t" columns.
pub const K_THRESHOLDS: [usize; 3] = [1, 5, 10];

/// An ordered list of variables used together as a matching key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQuasiIdentifier")]
pub struct QuasiIdentifier {
    variables: Vec<String>,
    label: String,
}

#[derive(Deserialize)]
struct RawQuasiIdentifier {
    variables: Vec<String>,
    #[serde(default)]
    label: Option<String>,
}

impl TryFrom<RawQuasiIdentifier> for QuasiIdentifier {
    type Error = Error;

    fn try_from(raw: RawQuasiIdentifier) -> Result<Self> {
        let qi = QuasiIdentifier::new(raw.variables)?;
        Ok(match raw.label {
            Some(label) => qi.with_label(label),
            None => qi,
        })
    }
}

impl QuasiIdentifier {
    /// Labelled by joining the variable names with " + ".
    pub fn new<I, S>(variables: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let variables: Vec<String> = variables.into_iter().map(Into::into).collect();
        if variables.is_empty() {
            return Err(Error::EmptyQuasiIdentifier);
        }
        let mut seen = HashSet::new();
        for v in &variables {
            if !seen.insert(v.as_str()) {
                return Err(Error::DuplicateVariable(v.clone()));
            }
        }
        let label = variables.join(" + ");
        Ok(QuasiIdentifier { variables, label })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Column indices of the variables in `dataset`.
    pub fn resolve(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        self.variables
            .iter()
            .map(|v| dataset.column_index(v))
            .collect()
    }

    /// This quasi-identifier with one more variable appended.
    pub fn extended(&self, variable: impl Into<String>) -> Result<Self> {
        let mut vars = self.variables.clone();
        vars.push(variable.into());
        QuasiIdentifier::new(vars)
    }

    pub fn has_birth_month(&self, dataset: &Dataset) -> Result<bool> {
        Ok(self
            .resolve(dataset)?
            .into_iter()
            .any(|c| dataset.column(c).kind() == VariableKind::BirthMonth))
    }
}

fn resolve_exact(dataset: &Dataset, qi: &QuasiIdentifier) -> Result<Vec<usize>> {
    let cols = qi.resolve(dataset)?;
    for &c in &cols {
        let column = dataset.column(c);
        if column.kind() == VariableKind::BirthMonth {
            return Err(Error::BirthMonthInAnonymitySet(column.name().to_owned()));
        }
    }
    Ok(cols)
}

/// Drop rows with at least one missing cell on `qi`; returns the survivors
/// (order preserved) and the number of deleted rows.
pub fn listwise_delete(dataset: &Dataset, qi: &QuasiIdentifier) -> Result<(Dataset, usize)> {
    let cols = resolve_exact(dataset, qi)?;
    let keep: Vec<usize> = (0..dataset.n_rows())
        .filter(|&r| cols.iter().all(|&c| !dataset.value(r, c).is_missing()))
        .collect();
    let deleted = dataset.n_rows() - keep.len();
    Ok((dataset.select_rows(&keep), deleted))
}

/// Rows grouped by identical response pattern. Blocks are ordered by their
/// first row; rows within a block are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, row: usize) -> usize {
        self.block_of[row]
    }

    /// Anonymity-set size k for each row.
    pub fn sizes(&self) -> Vec<usize> {
        self.block_of
            .iter()
            .map(|&b| self.blocks[b].len())
            .collect()
    }

    /// Number of blocks of each size.
    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for block in &self.blocks {
            *hist.entry(block.len()).or_insert(0) += 1;
        }
        hist
    }
}

/// Partition fully observed rows into anonymity sets on `qi`.
pub fn anonymity_sets(dataset: &Dataset, qi: &QuasiIdentifier) -> Result<Partition> {
    let cols = resolve_exact(dataset, qi)?;
    let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = Vec::with_capacity(dataset.n_rows());
    for r in 0..dataset.n_rows() {
        let mut key = Vec::with_capacity(cols.len());
        for &c in &cols {
            let v = dataset.value(r, c);
            if v.is_missing() {
                return Err(Error::MissingOnQuasiIdentifier {
                    respondent: dataset.respondent_ids()[r].clone(),
                    variable: dataset.column(c).name().to_owned(),
                });
            }
            key.push(v);
        }
        let b = *index.entry(key).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(r);
        block_of.push(b);
    }
    Ok(Partition { blocks, block_of })
}

/// Anonymity-set statistics for one quasi-identifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KProfile {
    pub qi: QuasiIdentifier,
    pub n_deleted: usize,
    pub n_remaining: usize,
    pub n_full: usize,
    /// Set size → number of sets of that size.
    pub k_histogram: BTreeMap<usize, usize>,
    pub n_unique: usize,
    pub n_pairs: usize,
    /// Threshold t → respondents in sets of size ≤ t.
    pub respondents_k_le: BTreeMap<usize, usize>,
    pub pr_su_new: f64,
    pub pr_su_full: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn k_profile(dataset: &Dataset, qi: &QuasiIdentifier, n_full: usize) -> Result<KProfile> {
    if n_full < dataset.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "n_full ({n_full}) is smaller than the dataset ({} rows)",
            dataset.n_rows()
        )));
    }
    let (kept, n_deleted) = listwise_delete(dataset, qi)?;
    let partition = anonymity_sets(&kept, qi)?;
    let k_histogram = partition.histogram();
    let n_unique = k_histogram.get(&1).copied().unwrap_or(0);
    let n_pairs = k_histogram.get(&2).copied().unwrap_or(0);
    let respondents_k_le = K_THRESHOLDS
        .iter()
        .map(|&t| {
            let n = k_histogram
                .range(..=t)
                .map(|(size, count)| size * count)
                .sum();
            (t, n)
        })
        .collect();
    let n_remaining = kept.n_rows();
    Ok(KProfile {
        qi: qi.clone(),
        n_deleted,
        n_remaining,
        n_full,
        k_histogram,
        n_unique,
        n_pairs,
        respondents_k_le,
        pr_su_new: ratio(n_unique, n_remaining),
        pr_su_full: ratio(n_unique, n_full),
    })
}

/// A response pattern occurring fewer than k times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub pattern: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Audit {
    pub k: usize,
    pub satisfied: bool,
    /// Ordered by decoded pattern.
    pub violations: Vec<Violation>,
}

/// Check that every occurring pattern on `qi` occurs at least `k` times.
pub fn k_anonymity_audit(dataset: &Dataset, qi: &QuasiIdentifier, k: usize) -> Result<Audit> {
    let cols = resolve_exact(dataset, qi)?;
    let partition = anonymity_sets(dataset, qi)?;
    let mut small: Vec<(Vec<Datum<'_>>, usize)> = partition
        .blocks()
        .iter()
        .filter(|b| b.len() < k)
        .map(|b| {
            (
                cols.iter().map(|&c| dataset.datum(b[0], c)).collect(),
                b.len(),
            )
        })
        .collect();
    small.sort();
    let violations: Vec<Violation> = small
        .into_iter()
        .map(|(pattern, count)| Violation {
            pattern: pattern.iter().map(ToString::to_string).collect(),
            count,
        })
        .collect();
    Ok(Audit {
        k,
        satisfied: violations.is_empty(),
        violations,
    })
}
